#pragma once

#include <string>
#include <vector>

#include "coedge/errors.hpp"

namespace coedge {

enum class LayerKind { Conv, FullyConnected };

inline const char* to_string(LayerKind k) {
  return k == LayerKind::Conv ? "conv" : "fully_connected";
}

// One layer's configuration tuple (k, c_in, c_out, s, p).  A fully-connected
// layer is the special case k=1, s=1, p=0 operating on a 1x1xC feature map.
struct LayerConfig {
  LayerKind kind = LayerKind::Conv;
  int k = 1;      // kernel rows/cols
  int c_in = 1;   // input channels
  int c_out = 1;  // output channels
  int s = 1;      // stride
  int p = 0;      // zero padding rows/cols
};

struct Shape {
  int h = 0;
  int w = 0;
  int c = 0;
};

inline bool operator==(const Shape& a, const Shape& b) {
  return a.h == b.h && a.w == b.w && a.c == b.c;
}

// A CNN model as an ordered list of layer configurations.  Fully-connected
// layers must form a contiguous suffix (the classification stage).
struct ModelDescriptor {
  std::string name;
  Shape input_shape;
  std::vector<LayerConfig> layers;

  int layer_count() const { return static_cast<int>(layers.size()); }
};

// Rows of neighbor data a convolution needs across the partition boundary.
inline int halo_rows(const LayerConfig& layer) {
  return layer.kind == LayerKind::Conv ? layer.k / 2 : 0;
}

inline Shape layer_output_shape(const Shape& in, const LayerConfig& layer) {
  if (layer.kind == LayerKind::FullyConnected) {
    return Shape{1, 1, layer.c_out};
  }
  const int h = (in.h - layer.k + 2 * layer.p) / layer.s + 1;
  const int w = (in.w - layer.k + 2 * layer.p) / layer.s + 1;
  return Shape{h, w, layer.c_out};
}

inline void validate_model(const ModelDescriptor& model) {
  if (model.layers.empty()) {
    throw InvariantViolation("model '" + model.name + "': layers is empty");
  }
  if (model.input_shape.h < 1 || model.input_shape.w < 1 ||
      model.input_shape.c < 1) {
    throw InvariantViolation("model '" + model.name +
                             "': input_shape must be >= 1 in h, w, c");
  }
  bool seen_fc = false;
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const LayerConfig& l = model.layers[i];
    const std::string at = "layers[" + std::to_string(i) + "]";
    if (l.k < 1) throw InvariantViolation(at + ".k must be >= 1");
    if (l.s < 1) throw InvariantViolation(at + ".s must be >= 1");
    if (l.p < 0) throw InvariantViolation(at + ".p must be >= 0");
    if (l.c_in < 1) throw InvariantViolation(at + ".c_in must be >= 1");
    if (l.c_out < 1) throw InvariantViolation(at + ".c_out must be >= 1");
    if (l.kind == LayerKind::FullyConnected) {
      if (l.k != 1 || l.s != 1 || l.p != 0) {
        throw InvariantViolation(at + ": fully_connected requires k=1, s=1, p=0");
      }
      seen_fc = true;
    } else if (seen_fc) {
      throw InvariantViolation(at + ": conv layer after fully_connected layer");
    }
    if (i == 0) {
      if (l.c_in != model.input_shape.c) {
        throw InvariantViolation(at + ".c_in does not match input_shape.c");
      }
    } else if (l.c_in != model.layers[i - 1].c_out) {
      throw InvariantViolation(at + ".c_in does not match previous c_out");
    }
  }
}

// Per-layer input shapes.  Entry l is the shape consumed by layer l; entry 0
// equals the model input.  Throws ShapeUnderflow if any height/width
// collapses below 1.
inline std::vector<Shape> propagate_shape(const ModelDescriptor& model) {
  validate_model(model);
  std::vector<Shape> shapes;
  shapes.reserve(model.layers.size());
  Shape cur = model.input_shape;
  for (size_t i = 0; i < model.layers.size(); ++i) {
    shapes.push_back(cur);
    const Shape out = layer_output_shape(cur, model.layers[i]);
    if (out.h < 1 || out.w < 1) {
      throw ShapeUnderflow("layer " + std::to_string(i) +
                           " output collapses to " + std::to_string(out.h) +
                           "x" + std::to_string(out.w));
    }
    cur = out;
  }
  return shapes;
}

// Padding threshold in layer-1 rows: the largest conv halo mapped back to
// the input through the stride chain.  A partition at least this tall keeps
// every layer's halo pull answerable by the neighboring device.
inline int halo_threshold_rows(const ModelDescriptor& model) {
  int threshold = 0;
  long long stride_product = 1;
  for (const LayerConfig& l : model.layers) {
    const int h = halo_rows(l);
    if (h > 0) {
      const long long mapped = static_cast<long long>(h) * stride_product;
      if (mapped > threshold) threshold = static_cast<int>(mapped);
    }
    stride_product *= l.s;
  }
  return threshold;
}

}  // namespace coedge
