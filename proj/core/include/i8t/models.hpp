#pragma once

#include <memory>
#include <string>
#include <vector>

#include "i8t/layers.hpp"

namespace i8t {

struct Model {
  std::string name;
  Shape input_shape;  // (C,H,W) of one sample
  int num_classes = 10;
  std::unique_ptr<Sequential> net;

  // ordered leaf enumeration; paths are stable across runs
  std::vector<std::pair<std::string, Layer*>> leaves();
  int64_t param_count();
};

// Deterministic given (name, seed, input dim). Known names: tiny_cnn,
// tiny_resnet, tiny_mobilenet, convex_logistic.
Model build_model(const std::string& name, uint64_t seed, int64_t input_dim = 3 * 32 * 32,
                  int num_classes = 10);

bool is_known_model(const std::string& name);
bool is_convex_model(const std::string& name);

}  // namespace i8t
