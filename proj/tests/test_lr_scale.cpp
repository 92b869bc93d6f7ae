#include <cmath>

#include "doctest.h"
#include "i8t/lr_scale.hpp"

using namespace i8t;

TEST_CASE("scale factor values") {
  LrScaleConfig exp20{.alpha = 20.0, .beta = 0.1, .form = ScaleForm::kExponential};
  CHECK(scale_factor(0.0, exp20) == 1.0);
  CHECK(scale_factor(0.05, exp20) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(scale_factor(1.0, exp20) == 0.1);  // floor active

  LrScaleConfig lin{.alpha = 20.0, .beta = 0.1, .form = ScaleForm::kLinear};
  LrScaleConfig quad{.alpha = 20.0, .beta = 0.1, .form = ScaleForm::kQuadratic};
  CHECK(scale_factor(0.0, lin) == 1.0);
  CHECK(scale_factor(0.0, quad) == 1.0);
  CHECK(scale_factor(0.3, lin) == doctest::Approx(0.7));
  CHECK(scale_factor(0.3, quad) == doctest::Approx(0.91));
  CHECK(scale_factor(1.5, lin) == 0.1);
  CHECK(scale_factor(1.5, quad) == 0.1);
}

TEST_CASE("phi is nonincreasing with range [beta, 1]") {
  for (auto form : {ScaleForm::kExponential, ScaleForm::kLinear, ScaleForm::kQuadratic}) {
    LrScaleConfig cfg{.alpha = 20.0, .beta = 0.1, .form = form};
    double prev = 2.0;
    for (int i = 0; i <= 200; ++i) {
      double dc = 2.0 * i / 200.0;
      double f = scale_factor(dc, cfg);
      CHECK(f <= prev);
      CHECK(f >= cfg.beta);
      CHECK(f <= 1.0);
      prev = f;
    }
  }
}

TEST_CASE("effective lr is per-layer and independent") {
  LrScaleConfig cfg{.alpha = 20.0, .beta = 0.1, .form = ScaleForm::kExponential};
  std::map<std::string, double> dc{{"a", 0.0}, {"b", 0.0}};
  auto lr = effective_lr(0.1, dc, cfg);
  CHECK(lr["a"] == 0.1);
  CHECK(lr["b"] == 0.1);

  dc = {{"a", 0.0}, {"b", 2.0}};
  lr = effective_lr(0.1, dc, cfg);
  CHECK(lr["a"] == 0.1);
  CHECK(lr["b"] == doctest::Approx(0.01));

  // changing one layer's d_c never changes another layer's lr
  dc["a"] = 1.7;
  auto lr2 = effective_lr(0.1, dc, cfg);
  CHECK(lr2["b"] == lr["b"]);

  // monotonicity: dc_a < dc_b implies lr_a >= lr_b
  for (int i = 0; i < 50; ++i) {
    double da = 2.0 * i / 50.0, db = 2.0 * (i + 1) / 50.0;
    auto m = effective_lr(0.1, {{"x", da}, {"y", db}}, cfg);
    CHECK(m["x"] >= m["y"]);
  }
}

TEST_CASE("config validation") {
  LrScaleConfig cfg;
  CHECK_THROWS(scale_factor(-0.1, cfg));
  CHECK_THROWS(scale_factor(2.1, cfg));
  CHECK_THROWS(scale_factor(0.5, LrScaleConfig{.alpha = 0.0, .beta = 0.1}));
  CHECK_THROWS(scale_factor(0.5, LrScaleConfig{.alpha = 1.0, .beta = 0.0}));
  CHECK_THROWS(scale_factor(0.5, LrScaleConfig{.alpha = 1.0, .beta = 1.5}));
  CHECK_THROWS(effective_lr(0.0, {}, cfg));
}
