#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dwsec/attack.hpp"
#include "dwsec/detect.hpp"
#include "dwsec/model.hpp"

namespace dwsec {

enum class Scheme { NoWatermark, ConventionalDW, NewDW };

const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

/// Pendulum state layout: [cart position, angle, cart velocity, angular
/// velocity].
struct SafetyLimits {
  bool enabled = true;
  double position_limit = 0.3;
  double angle_limit = 0.8;
  std::optional<double> velocity_limit = 5.0;
};

struct ScenarioConfig {
  Scheme scheme = Scheme::NewDW;
  bool compensation = false;
  PlantModel model;
  LoopGains gains;
  std::uint64_t watermark_seed = 1;
  /// Per-output variances for NewDW, per-input variances for ConventionalDW.
  Vector sigma_w;
  /// -1 draws the mirrored watermark sequence.
  int watermark_sign = 1;
  std::optional<FdiaSpec> attack;
  DetectorConfig detector;
  std::int64_t horizon = 1000;
  std::uint64_t noise_seed = 1;
  SafetyLimits safety;
  Vector x0;  // empty means zero

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Pendulum scenario with the default detector and sigma^2 = 1e-4.
ScenarioConfig pendulum_scenario(Scheme scheme);

enum class Event { Running, Off, Back };
const char* event_name(Event e);

struct StepRecord {
  std::int64_t k = 0;
  Vector x;  // state at step k, before any BACK reset
  Vector x_hat_prior;
  Vector x_hat_post;
  Vector u;  // applied input, watermark included
  Vector n;
  Vector v;
  Vector y;        // quantized sensor output
  Vector y_plus;   // NewDW only
  Vector y_a;      // received
  Vector y_minus;  // NewDW only
  Vector y_tilde;  // estimator measurement
  Vector r;        // residual fed to the statistical tests
  Vector w_test;   // watermark paired with r in the tests
  Vector w_d;      // ConventionalDW only: w_d(k)
  std::optional<double> phi_d1;
  std::optional<double> phi_d2;
  Vector phi_1;
  std::optional<double> phi_2;
  std::optional<double> phi_2_tilde;
  bool warmup = false;
  int eps = 1;
  std::int64_t h = 0;
  Event event = Event::Running;
};

struct SimTrace {
  Scheme scheme = Scheme::NoWatermark;
  Matrix c;
  std::vector<StepRecord> steps;
  Event termination = Event::Running;  // Off when the run was cut short
  std::optional<std::int64_t> off_step;
  bool diverged = false;
  std::vector<std::int64_t> back_steps;
};

using StepObserver = std::function<void(const StepRecord&)>;

/// Runs the loop and hands each step to `observe` without storing it.
/// The returned trace has an empty `steps` vector.
SimTrace run_closed_loop(const ScenarioConfig& cfg,
                         const StepObserver& observe);
SimTrace run_closed_loop(const ScenarioConfig& cfg);

/// Mean of ||L r(k) - L r0(k)||^2 between the attacked run and its
/// attack-free twin (same seeds). Throws WarmupError when the horizon is
/// shorter than the detector window.
double twin_run_distortion_power(const ScenarioConfig& cfg);

/// Time average of x^T Q x + u^T R u.
double lqg_cost(const SimTrace& trace, const Matrix& q, const Matrix& r);

struct WindowedValue {
  double value = 0.0;
  bool warmup = false;
};

/// Mean of ||C (x - x_hat(k|k))||^2 over the window ending at step index k.
WindowedValue estimation_error_power(const SimTrace& trace,
                                     std::size_t window, std::int64_t k);

void write_trace_csv(const SimTrace& trace, std::ostream& os);

}  // namespace dwsec
