#pragma once

#include <map>
#include <string>

namespace i8t {

// Scaling forms for the per-layer learning-rate factor. Exponential is the
// method; Linear and Quadratic exist for the ablation baselines.
enum class ScaleForm { kExponential, kLinear, kQuadratic };

struct LrScaleConfig {
  double alpha = 20.0;  // decay degree, > 0
  double beta = 0.1;    // lower bound, in (0, 1]
  ScaleForm form = ScaleForm::kExponential;
};

// phi(d_c): Exponential -> max(e^{-alpha*dc}, beta); Linear -> max(1-dc, beta);
// Quadratic -> max(1-dc^2, beta). Nonincreasing in dc, range [beta, 1].
double scale_factor(double dc, const LrScaleConfig& cfg);

// Per-layer lr = base_lr * phi(dc_layer), independently per layer.
std::map<std::string, double> effective_lr(double base_lr,
                                           const std::map<std::string, double>& dc_per_layer,
                                           const LrScaleConfig& cfg);

}  // namespace i8t
