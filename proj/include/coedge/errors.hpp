#pragma once

#include <stdexcept>
#include <string>

namespace coedge {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input document could not be parsed at all.
struct ParseError : Error {
  using Error::Error;
};

// A parsed value violates a documented invariant; message names the field.
struct InvariantViolation : Error {
  using Error::Error;
};

// Shape propagation produced a feature map with height or width < 1.
struct ShapeUnderflow : Error {
  using Error::Error;
};

// Row counts handed to the cost model do not sum to the input height.
struct BadPartition : Error {
  using Error::Error;
};

// A transfer references a device pair with no bandwidth entry.
struct MissingBandwidth : Error {
  using Error::Error;
};

// A halo pull cannot be served by the neighbor's partition alone.
struct HaloSpanViolation : Error {
  using Error::Error;
};

struct NonPositiveInput : Error {
  using Error::Error;
};

// Rounding repair could not restore the padding threshold.
struct RepairFailed : Error {
  using Error::Error;
};

// Brute-force enumeration bound exceeded.
struct InstanceTooLarge : Error {
  using Error::Error;
};

// Simplex pivot fell below the pivot tolerance even under Bland's rule.
struct NumericalBreakdown : Error {
  using Error::Error;
};

}  // namespace coedge
