#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dwsec/detect.hpp"
#include "dwsec/errors.hpp"
#include "dwsec/sim.hpp"

using namespace dwsec;

namespace {

ScenarioConfig scenario(Scheme s, std::int64_t horizon, std::uint64_t seed) {
  ScenarioConfig cfg = pendulum_scenario(s);
  cfg.horizon = horizon;
  cfg.noise_seed = seed;
  return cfg;
}

void require_same_loop(const SimTrace& a, const SimTrace& b) {
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    REQUIRE(a.steps[i].x == b.steps[i].x);
    REQUIRE(a.steps[i].x_hat_prior == b.steps[i].x_hat_prior);
    REQUIRE(a.steps[i].x_hat_post == b.steps[i].x_hat_post);
    REQUIRE(a.steps[i].u == b.steps[i].u);
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::int64_t off_or_never(const SimTrace& t) {
  return t.off_step ? *t.off_step : std::numeric_limits<std::int64_t>::max();
}

}  // namespace

TEST_CASE("new scheme without attack reproduces the unwatermarked loop") {
  const ScenarioConfig plain = scenario(Scheme::NoWatermark, 3000, 17);
  const SimTrace ref = run_closed_loop(plain);
  for (double var : {1e-4, 10.0}) {
    ScenarioConfig cfg = scenario(Scheme::NewDW, 3000, 17);
    cfg.sigma_w = Vector::Constant(2, var);
    require_same_loop(run_closed_loop(cfg), ref);
  }
}

TEST_CASE("conventional scheme with zero variance reproduces the unwatermarked loop") {
  ScenarioConfig cfg = scenario(Scheme::ConventionalDW, 3000, 18);
  cfg.sigma_w = Vector::Zero(1);
  require_same_loop(run_closed_loop(cfg),
                    run_closed_loop(scenario(Scheme::NoWatermark, 3000, 18)));
}

TEST_CASE("equal configurations give bitwise-equal traces") {
  for (Scheme s : {Scheme::NoWatermark, Scheme::ConventionalDW, Scheme::NewDW}) {
    ScenarioConfig cfg = scenario(s, 1000, 19);
    cfg.attack = persistent_fdia_preset();
    const SimTrace a = run_closed_loop(cfg);
    const SimTrace b = run_closed_loop(cfg);
    require_same_loop(a, b);
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
      REQUIRE(a.steps[i].r == b.steps[i].r);
      REQUIRE(a.steps[i].eps == b.steps[i].eps);
    }
    CHECK(a.off_step == b.off_step);
  }
}

TEST_CASE("decrypted output equals the sensor output before the attack") {
  ScenarioConfig cfg = scenario(Scheme::NewDW, 300, 20);
  cfg.attack = burst_preset_fig6();
  const SimTrace t = run_closed_loop(cfg);
  for (const auto& s : t.steps) {
    if (s.k >= 100) break;
    REQUIRE(s.y_minus == s.y);
  }
}

TEST_CASE("burst attack with compensation stays inside the safety region") {
  ScenarioConfig cfg = scenario(Scheme::NewDW, 1000, 20240101);
  cfg.attack = burst_preset_fig6();
  cfg.compensation = true;
  const SimTrace t = run_closed_loop(cfg);
  CHECK_FALSE(t.off_step.has_value());
  CHECK(t.steps.size() == 1000);
}

TEST_CASE("burst attack without compensation disturbs the estimate far more") {
  ScenarioConfig with = scenario(Scheme::NewDW, 400, 21);
  with.attack = burst_preset_fig6();
  with.safety.enabled = false;
  ScenarioConfig without = with;
  with.compensation = true;
  const SimTrace a = run_closed_loop(with);
  const SimTrace b = run_closed_loop(without);
  double peak_a = 0.0, peak_b = 0.0;
  for (std::size_t i = 100; i < 300; ++i) {
    peak_a = std::max(peak_a, std::abs(a.steps[i].x(0)));
    peak_b = std::max(peak_b, std::abs(b.steps[i].x(0)));
  }
  CHECK(peak_b > 10.0 * peak_a);
}

TEST_CASE("twin-run distortion power") {
  ScenarioConfig cfg = scenario(Scheme::NewDW, 2000, 22);
  FdiaSpec empty = burst_preset_fig6();
  empty.windows.clear();
  cfg.attack = empty;
  CHECK(twin_run_distortion_power(cfg) == 0.0);

  ScenarioConfig burst = scenario(Scheme::NewDW, 20000, 23);
  burst.safety.enabled = false;
  FdiaSpec forged = burst_preset_fig6();
  std::vector<double> d;
  for (int i = 0; i < 4; ++i) {
    forged.x_a_init = Vector::Constant(4, 0.02 * i);
    burst.attack = forged;
    d.push_back(twin_run_distortion_power(burst));
    CHECK(d.back() > 0.0);
  }
  // Replacement of y makes the distortion an exact quadratic in the scale.
  const double third = d[3] - 3.0 * d[2] + 3.0 * d[1] - d[0];
  CHECK(std::abs(third) <= 1e-6 * std::max({d[0], d[1], d[2], d[3]}));

  ScenarioConfig shortrun = cfg;
  shortrun.horizon = 3;
  CHECK_THROWS_AS(twin_run_distortion_power(shortrun), WarmupError);
}

TEST_CASE("undetected replay of the intercepted payload adds no distortion") {
  const ScenarioConfig clean = scenario(Scheme::NewDW, 2000, 24);
  const SimTrace ref = run_closed_loop(clean);
  const std::int64_t k0 = 50;
  const Vector yp = ref.steps[k0].y_plus;

  ScenarioConfig cfg = clean;
  FdiaSpec replay;
  replay.a_attack = Matrix::Zero(4, 4);
  replay.x_a_init = Vector{{yp(0) + 1e-6, yp(1), 0.0, 0.0}};
  replay.windows = {{k0, k0}};
  cfg.attack = replay;
  const SimTrace t = run_closed_loop(cfg);
  for (const auto& s : t.steps) {
    if (!s.warmup) REQUIRE(s.eps == 1);
  }
  const double floor = residual_centering(cfg.gains.l, cfg.gains.sigma_o);
  CHECK(twin_run_distortion_power(cfg) < floor);
}

TEST_CASE("lqg cost") {
  SimTrace empty;
  CHECK(lqg_cost(empty, Matrix::Identity(4, 4), Matrix::Identity(1, 1)) == 0.0);

  SimTrace zero;
  StepRecord s;
  s.x = Vector::Zero(4);
  s.u = Vector::Zero(1);
  zero.steps.assign(10, s);
  CHECK(lqg_cost(zero, Matrix::Identity(4, 4), Matrix::Identity(1, 1)) == 0.0);

  const Matrix q = 10.0 * Matrix::Identity(4, 4);
  const Matrix r = Matrix::Identity(1, 1);
  const double a = lqg_cost(run_closed_loop(scenario(Scheme::NewDW, 2000, 25)), q, r);
  const double b =
      lqg_cost(run_closed_loop(scenario(Scheme::NoWatermark, 2000, 25)), q, r);
  CHECK(a - b == 0.0);
}

TEST_CASE("estimation error power") {
  SimTrace t;
  t.c = Matrix::Identity(2, 4);
  for (int k = 0; k < 10; ++k) {
    StepRecord s;
    s.k = k;
    s.x = Vector{{0.3, -0.4, 1.0, 2.0}};
    s.x_hat_post = s.x;
    t.steps.push_back(s);
  }
  CHECK(estimation_error_power(t, 5, 9).value == 0.0);
  for (auto& s : t.steps) s.x_hat_post = Vector::Zero(4);
  const WindowedValue v = estimation_error_power(t, 5, 9);
  CHECK(v.value == doctest::Approx(0.25));
  CHECK_FALSE(v.warmup);
  CHECK(estimation_error_power(t, 5, 2).warmup);
  CHECK_THROWS_AS(estimation_error_power(t, 5, 10), InputError);
}

TEST_CASE("lowering the position limit never delays the OFF event") {
  ScenarioConfig cfg = scenario(Scheme::ConventionalDW, 1000, 20240101);
  cfg.attack = persistent_fdia_preset();
  std::int64_t prev = std::numeric_limits<std::int64_t>::max();
  for (double limit : {0.5, 0.3, 0.25, 0.2, 0.1, 0.05, 0.01}) {
    cfg.safety.position_limit = limit;
    const std::int64_t off = off_or_never(run_closed_loop(cfg));
    CHECK(off <= prev);
    prev = off;
  }
  CHECK(prev < std::numeric_limits<std::int64_t>::max());
}

TEST_CASE("persistent attack without compensation drives the state unbounded") {
  const ScenarioConfig probe = pendulum_scenario(Scheme::NewDW);
  CHECK(numerics::spectral_radius(probe.model.a) > 1.0);
  CHECK(numerics::spectral_radius(probe.model.a) ==
        doctest::Approx(1.0558).epsilon(1e-4));

  ScenarioConfig cfg = scenario(Scheme::NewDW, 10000, 26);
  cfg.attack = persistent_fdia_preset();
  cfg.safety.enabled = false;
  double peak = 0.0;
  const SimTrace t = run_closed_loop(cfg, [&](const StepRecord& s) {
    if (s.x.allFinite()) peak = std::max(peak, s.x.norm());
  });
  CHECK((peak > 1e12 || t.diverged));
}

TEST_CASE("safety events") {
  ScenarioConfig cfg = scenario(Scheme::NoWatermark, 50, 27);
  cfg.x0 = Vector{{0.31, 0.0, 0.0, 0.0}};
  SimTrace t = run_closed_loop(cfg);
  CHECK(t.off_step == 0);
  CHECK(t.steps.size() == 1);
  CHECK(t.steps[0].event == Event::Off);
  CHECK(t.termination == Event::Off);
  CHECK_FALSE(t.diverged);

  cfg.x0 = Vector{{0.0, 0.81, 0.0, 0.0}};
  CHECK(run_closed_loop(cfg).off_step == 0);

  cfg.x0 = Vector{{0.1, 0.0, 6.0, 0.0}};
  t = run_closed_loop(cfg);
  REQUIRE_FALSE(t.back_steps.empty());
  CHECK(t.back_steps.front() == 0);
  CHECK(t.steps[0].event == Event::Back);
  // The reset zeroes cart position and velocity before the plant step.
  CHECK(t.steps[1].x(0) == 0.0);
  CHECK(std::abs(t.steps[1].x(2)) < 1.0);

  cfg.safety.velocity_limit.reset();
  CHECK(run_closed_loop(cfg).back_steps.empty());

  cfg.x0 = Vector::Constant(4, 1e308);
  cfg.safety.enabled = false;
  t = run_closed_loop(cfg);
  CHECK(t.diverged);
  REQUIRE(t.off_step.has_value());
  CHECK(*t.off_step < 5);
}

TEST_CASE("scenario validation") {
  ScenarioConfig cfg = scenario(Scheme::NewDW, 0, 1);
  try {
    run_closed_loop(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "horizon");
  }
  cfg = scenario(Scheme::ConventionalDW, 10, 1);
  cfg.compensation = true;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = scenario(Scheme::NewDW, 10, 1);
  cfg.sigma_w = Vector::Zero(1);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(parse_scheme("quantum"), ConfigError);
  CHECK(parse_scheme("new_dw") == Scheme::NewDW);
}

TEST_CASE("compensation with an alarm before any healthy sample") {
  ScenarioConfig cfg = scenario(Scheme::NewDW, 20, 28);
  cfg.compensation = true;
  cfg.detector.window = 1;
  cfg.detector.thresh_new_2 = 1e-30;
  CHECK_THROWS_AS(run_closed_loop(cfg), ColdStartError);
}

TEST_CASE("trace csv layout") {
  ScenarioConfig cfg = scenario(Scheme::NewDW, 20, 29);
  cfg.compensation = true;
  std::ostringstream os;
  write_trace_csv(run_closed_loop(cfg), os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "k,x1,x2,x3,x4,xhat1,xhat2,xhat3,xhat4,u,y1,y2,ya1,ya2,ytilde1,"
        "ytilde2,r1,r2,phi_d1,phi_d2,phi_11,phi_12,phi_2,phi_2_tilde,eps,h,"
        "event");
  const auto cols = split(header);
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) {
    const auto f = split(line);
    REQUIRE(f.size() == cols.size());
    CHECK(f[18].empty());
    CHECK(f[19].empty());
    CHECK_FALSE(f[22].empty());
    CHECK(f.back() == "RUNNING");
    ++rows;
  }
  CHECK(rows == 20);

  std::ostringstream conv;
  write_trace_csv(run_closed_loop(scenario(Scheme::ConventionalDW, 5, 29)), conv);
  std::istringstream cs(conv.str());
  std::getline(cs, line);
  std::getline(cs, line);
  const auto f = split(line);
  CHECK_FALSE(f[18].empty());
  CHECK(f[20].empty());
  CHECK(f[22].empty());
}
