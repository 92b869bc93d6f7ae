#include "i8t/lr_scale.hpp"

#include <cmath>
#include <stdexcept>

namespace i8t {

double scale_factor(double dc, const LrScaleConfig& cfg) {
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("scale_factor: alpha must be > 0");
  if (!(cfg.beta > 0.0 && cfg.beta <= 1.0)) throw std::invalid_argument("scale_factor: beta must be in (0,1]");
  if (!(dc >= 0.0 && dc <= 2.0)) throw std::invalid_argument("scale_factor: dc must be in [0,2]");
  double raw;
  switch (cfg.form) {
    case ScaleForm::kExponential: raw = std::exp(-cfg.alpha * dc); break;
    case ScaleForm::kLinear: raw = 1.0 - dc; break;
    case ScaleForm::kQuadratic: raw = 1.0 - dc * dc; break;
    default: raw = 1.0; break;
  }
  return std::max(raw, cfg.beta);
}

std::map<std::string, double> effective_lr(double base_lr,
                                           const std::map<std::string, double>& dc_per_layer,
                                           const LrScaleConfig& cfg) {
  if (!(base_lr > 0.0)) throw std::invalid_argument("effective_lr: base_lr must be > 0");
  std::map<std::string, double> out;
  for (const auto& [layer, dc] : dc_per_layer) out[layer] = base_lr * scale_factor(dc, cfg);
  return out;
}

}  // namespace i8t
