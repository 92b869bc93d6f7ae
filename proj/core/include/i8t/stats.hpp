#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace i8t {

// Uniform bins over [-max_abs, max_abs] ([-1,1] for an all-zero sample set).
struct Histogram {
  double lo = 0.0, hi = 0.0;
  std::vector<int64_t> counts;
  int64_t iter = 0;
  std::string layer;

  int64_t total() const;
};

Histogram make_histogram(std::span<const float> samples, int bins = 64, int64_t iter = 0,
                         const std::string& layer = "");

enum class DistFamily { kGaussian, kLaplace, kStudentT };

std::string family_name(DistFamily f);

struct DistFit {
  DistFamily family = DistFamily::kGaussian;
  double location = 0.0;
  double scale = 1.0;
  double nu = 0.0;  // StudentT degrees of freedom (grid-estimated)
  double ks = 0.0;
  double critical = 0.0;  // 1.358/sqrt(N), significance 0.05
  bool rejected() const { return ks > critical; }
};

double gaussian_cdf(double x, double mu, double sigma);
double laplace_cdf(double x, double mu, double b);
double student_t_cdf(double x, double mu, double sigma, double nu);
double dist_cdf(const DistFit& fit, double x);

// Maximum likelihood fit. Gaussian and Laplace are closed form; StudentT uses
// a nu grid over {1..100} with a location/scale profile fit (EM updates).
DistFit fit_mle(DistFamily family, std::span<const float> samples);

// Sup distance between the empirical CDF and `cdf`. Requires >= 100 samples;
// throws on degenerate (zero-variance) input.
double ks_statistic(std::span<const float> samples, const DistFit& fit);

// Convenience: fit + KS + critical value.
DistFit fit_and_test(DistFamily family, std::span<const float> samples);

// Per-layer snapshot summary used by the distribution characteristic checks.
struct SnapshotSummary {
  std::string layer;
  int64_t iter = 0;
  double min = 0.0, max = 0.0;
  double range = 0.0;     // max - min
  double max_abs = 0.0;
  double kurtosis_proxy = 0.0;  // E[x^4] / E[x^2]^2
};

SnapshotSummary summarize_samples(const std::string& layer, int64_t iter,
                                  std::span<const float> samples);

}  // namespace i8t
