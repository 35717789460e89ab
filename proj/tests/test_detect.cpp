#include <doctest.h>

#include <cmath>
#include <vector>

#include "dwsec/detect.hpp"
#include "dwsec/errors.hpp"
#include "dwsec/sim.hpp"

using namespace dwsec;

namespace {

const ScenarioConfig& base() {
  static const ScenarioConfig cfg = pendulum_scenario(Scheme::NewDW);
  return cfg;
}

}  // namespace

TEST_CASE("conventional statistics on zero residuals") {
  const Matrix& l = base().gains.l;
  const Matrix& so = base().gains.sigma_o;
  TestWindowState st(5);
  ConventionalStats s;
  for (int k = 0; k < 5; ++k) {
    s = conventional_stats(st, Vector{{0.3}}, Vector::Zero(2), l, so);
  }
  CHECK(s.phi_d1 == 0.0);
  CHECK(s.phi_d2 == doctest::Approx(std::abs(-(l * so * l.transpose()).trace())));
  CHECK_FALSE(s.warmup);
}

TEST_CASE("conventional statistics with a single-term window") {
  TestWindowState st(1);
  const Vector v{{0.5, -1.5, 2.0, 0.25}};
  const ConventionalStats s = conventional_stats(
      st, Vector{{1.0}}, v, Matrix::Identity(4, 4), Matrix::Identity(4, 4));
  CHECK(s.phi_d1 == doctest::Approx(std::sqrt(0.25 + 2.25 + 4.0 + 0.0625)));
}

TEST_CASE("new statistics examples") {
  const Matrix& l = base().gains.l;
  const Matrix& so = base().gains.sigma_o;
  TestWindowState st(5);
  NewStats s;
  for (int k = 0; k < 7; ++k) {
    s = new_stats(st, Vector{{0.01, -0.02}}, Vector::Zero(2), l, so);
  }
  CHECK(s.phi_1.isZero());

  TestWindowState one(1);
  const Vector r{{0.003, -0.001}};
  const Vector v = l * r;
  const NewStats t = new_stats(one, Vector{{1.0, 0.0}}, r, l, so);
  CHECK(t.phi_1(0) == doctest::Approx(v.norm()));
  CHECK(t.phi_1(1) == 0.0);
}

TEST_CASE("warm-up is flagged and suppresses alarms") {
  TestWindowState st(5);
  const Matrix l = Matrix::Identity(2, 2);
  const Matrix so = Matrix::Identity(2, 2);
  for (int k = 0; k < 4; ++k) {
    const NewStats s = new_stats(st, Vector::Ones(2), Vector::Ones(2), l, so);
    CHECK(s.warmup);
    CHECK(decide(s.phi_1, s.phi_2, DetectorConfig{}, s.warmup) == 1);
  }
  const NewStats s = new_stats(st, Vector::Ones(2), Vector::Ones(2), l, so);
  CHECK_FALSE(s.warmup);
  CHECK(decide(s.phi_1, s.phi_2, DetectorConfig{}, s.warmup) == 0);
}

TEST_CASE("decision rule") {
  const DetectorConfig cfg;
  CHECK(decide(Vector{{1e-4, 1e-4}}, 1e-4, cfg) == 1);
  CHECK(decide(Vector{{1e-4, 1e-4}}, 7e-4, cfg) == 0);
  CHECK(decide(Vector{{7e-4, 1e-4}}, 1e-4, cfg) == 0);
  CHECK(decide(Vector{{1e-4, 8e-4}}, 1e-4, cfg) == 0);
  CHECK(decide_conventional(1e-4, 1e-3, cfg) == 1);
  CHECK(decide_conventional(2e-4, 1e-3, cfg) == 0);
  CHECK(decide_conventional(1e-4, 1.5e-3, cfg) == 0);
}

TEST_CASE("detector configuration validation") {
  DetectorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.window = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = DetectorConfig{};
  cfg.thresh_new_2 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = DetectorConfig{};
  cfg.thresh_new_1(1) = -1.0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "thresh_new_1");
  }
}

TEST_CASE("compensation delay sequence") {
  CompensationBuffer buf;
  const std::vector<int> eps{1, 1, 0, 0, 1};
  const std::vector<std::int64_t> want{0, 0, 1, 2, 0};
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const Vector y = Vector::Constant(2, static_cast<double>(i));
    const Compensated c = buf.compensate(eps[i], y, static_cast<std::int64_t>(i));
    CHECK(c.h == want[i]);
    CHECK(buf.h_current() == want[i]);
    if (eps[i] == 0) {
      CHECK(c.y_tilde == Vector::Constant(2, 1.0));
    } else {
      CHECK(c.y_tilde == y);
    }
  }
}

TEST_CASE("compensation replays the last healthy output") {
  CompensationBuffer buf;
  buf.compensate(1, Vector{{0.1, 0.2}}, 100);
  const Compensated c = buf.compensate(0, Vector{{9.0, 9.0}}, 101);
  CHECK(c.y_tilde == Vector{{0.1, 0.2}});
  CHECK(c.h == 1);
  CHECK(buf.last_healthy_step() == 100);
}

TEST_CASE("compensation cold start") {
  CompensationBuffer buf;
  CHECK_THROWS_AS(buf.compensate(0, Vector::Zero(2), 0), ColdStartError);
}

TEST_CASE("compensated output equals the decrypted output when healthy") {
  ScenarioConfig cfg = base();
  cfg.compensation = true;
  cfg.horizon = 2000;
  cfg.noise_seed = 5;
  cfg.detector.thresh_new_1 = Vector::Constant(2, 1e9);
  cfg.detector.thresh_new_2 = 1e9;
  const SimTrace t = run_closed_loop(cfg);
  for (const auto& s : t.steps) {
    REQUIRE(s.eps == 1);
    REQUIRE(s.y_tilde == s.y_minus);
  }
}

TEST_CASE("compensated indicator with zero residual") {
  const Matrix& l = base().gains.l;
  const Matrix& so = base().gains.sigma_o;
  const Matrix c = base().model.c;
  TestWindowState st(5);
  const Vector xp{{0.1, -0.05, 0.2, 0.3}};
  const IndicatorValue v = compensated_indicator(st, c * xp, xp, c, l, so);
  CHECK(v.value == doctest::Approx(residual_centering(l, so)));
  CHECK(v.warmup);
}

TEST_CASE("statistics depend only on the last T terms") {
  const Matrix& l = base().gains.l;
  const Matrix& so = base().gains.sigma_o;
  GaussianStream g(8);
  auto term = [&] {
    return std::pair<Vector, Vector>{
        Vector{{1e-2 * g.standard_normal(), 1e-2 * g.standard_normal()}},
        Vector{{1e-3 * g.standard_normal(), 1e-3 * g.standard_normal()}}};
  };
  std::vector<std::pair<Vector, Vector>> tail;
  for (int i = 0; i < 5; ++i) tail.push_back(term());

  TestWindowState a(5), b(5);
  for (int i = 0; i < 3; ++i) {
    auto [w, r] = term();
    new_stats(a, w, r, l, so);
  }
  for (int i = 0; i < 40; ++i) {
    auto [w, r] = term();
    new_stats(b, w, r, l, so);
  }
  NewStats sa, sb;
  for (const auto& [w, r] : tail) {
    sa = new_stats(a, w, r, l, so);
    sb = new_stats(b, w, r, l, so);
  }
  CHECK(sa.phi_1 == sb.phi_1);
  CHECK(sa.phi_2 == sb.phi_2);
}

TEST_CASE("scaling residuals scales the evidence") {
  const Matrix& l = base().gains.l;
  const Matrix& so = base().gains.sigma_o;
  const double c = residual_centering(l, so);
  GaussianStream g(9);
  std::vector<Vector> ws, rs;
  for (int i = 0; i < 5; ++i) {
    ws.push_back(Vector{{g.standard_normal(), g.standard_normal()}});
    rs.push_back(Vector{{g.standard_normal(), g.standard_normal()}});
  }
  const double lambda = 4.0;
  TestWindowState a(5), b(5);
  NewStats sa, sb;
  for (int i = 0; i < 5; ++i) {
    sa = new_stats(a, ws[i], rs[i], l, so);
    sb = new_stats(b, ws[i], lambda * rs[i], l, so);
  }
  for (Eigen::Index i = 0; i < 2; ++i) {
    CHECK(sb.phi_1(i) == doctest::Approx(lambda * sa.phi_1(i)).epsilon(1e-12));
  }
  // |tr(V + L Sigma_o L^T)| is the uncentered window mean of ||L r||^2.
  CHECK(std::abs(b.trace_excess(c) + c) ==
        doctest::Approx(lambda * lambda * std::abs(a.trace_excess(c) + c))
            .epsilon(1e-12));
}

TEST_CASE("no-attack false alarm rate") {
  ScenarioConfig cfg = base();
  cfg.horizon = 100000;
  cfg.noise_seed = 404;
  cfg.safety.enabled = false;
  std::int64_t alarms = 0, steps = 0;
  run_closed_loop(cfg, [&](const StepRecord& s) {
    ++steps;
    if (s.eps == 0) ++alarms;
  });
  CHECK(steps == 100000);
  CHECK(static_cast<double>(alarms) / static_cast<double>(steps) < 0.05);
}

TEST_CASE("compensated indicator stays below threshold without attack") {
  ScenarioConfig cfg = base();
  cfg.compensation = true;
  cfg.horizon = 20000;
  cfg.noise_seed = 405;
  cfg.safety.enabled = false;
  std::int64_t below = 0, steps = 0;
  run_closed_loop(cfg, [&](const StepRecord& s) {
    if (!s.phi_2_tilde) return;
    ++steps;
    if (*s.phi_2_tilde < cfg.detector.thresh_new_2) ++below;
  });
  REQUIRE(steps > 0);
  CHECK(static_cast<double>(below) >= 0.95 * static_cast<double>(steps));
}

TEST_CASE("compensated indicator during the burst attack") {
  ScenarioConfig cfg = base();
  cfg.compensation = true;
  cfg.attack = burst_preset_fig6();
  cfg.noise_seed = 20240101;
  cfg.horizon = 1000;
  const SimTrace t = run_closed_loop(cfg);
  REQUIRE_FALSE(t.off_step.has_value());
  for (const auto& s : t.steps) {
    if (s.k < 100 || s.k > 103) continue;
    REQUIRE(s.phi_2_tilde.has_value());
    CHECK(*s.phi_2_tilde < cfg.detector.thresh_new_2);
  }
}

TEST_CASE("long-window conventional trace statistic is small without attack") {
  ScenarioConfig cfg = pendulum_scenario(Scheme::ConventionalDW);
  cfg.horizon = 100000;
  cfg.noise_seed = 406;
  cfg.safety.enabled = false;
  const Matrix l = cfg.gains.l;
  const Matrix so = cfg.gains.sigma_o;
  TestWindowState st(10000);
  Vector w_prev = Vector::Zero(1);
  ConventionalStats last;
  run_closed_loop(cfg, [&](const StepRecord& s) {
    last = conventional_stats(st, w_prev, s.r, l, so);
    w_prev = s.w_d;
  });
  CHECK_FALSE(last.warmup);
  CHECK(last.phi_d2 < 0.1 * residual_centering(l, so));
}

TEST_CASE("zero-variance watermarks reduce both schemes to the plain innovation") {
  ScenarioConfig plain = pendulum_scenario(Scheme::NoWatermark);
  plain.horizon = 3000;
  plain.noise_seed = 407;
  ScenarioConfig conv = pendulum_scenario(Scheme::ConventionalDW);
  conv.horizon = plain.horizon;
  conv.noise_seed = plain.noise_seed;
  conv.sigma_w = Vector::Zero(1);
  ScenarioConfig nw = base();
  nw.horizon = plain.horizon;
  nw.noise_seed = plain.noise_seed;
  nw.sigma_w = Vector::Zero(2);
  const SimTrace a = run_closed_loop(plain);
  const SimTrace b = run_closed_loop(conv);
  const SimTrace c = run_closed_loop(nw);
  REQUIRE(a.steps.size() == b.steps.size());
  REQUIRE(a.steps.size() == c.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    REQUIRE(a.steps[i].r == b.steps[i].r);
    REQUIRE(a.steps[i].r == c.steps[i].r);
    REQUIRE(b.steps[i].phi_d2.has_value());
    REQUIRE(c.steps[i].phi_2.has_value());
    CHECK(*b.steps[i].phi_d2 == doctest::Approx(*c.steps[i].phi_2));
  }
}
