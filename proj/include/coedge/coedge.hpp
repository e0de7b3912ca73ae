#pragma once

#include "coedge/cost_model.hpp"
#include "coedge/errors.hpp"
#include "coedge/io.hpp"
#include "coedge/lp.hpp"
#include "coedge/model.hpp"
#include "coedge/partitioner.hpp"
#include "coedge/resources.hpp"
#include "coedge/scenario.hpp"
#include "coedge/simulator.hpp"
