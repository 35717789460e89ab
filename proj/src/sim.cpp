#include "dwsec/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "dwsec/errors.hpp"
#include "dwsec/watermark.hpp"

namespace dwsec {

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::NoWatermark:
      return "no_watermark";
    case Scheme::ConventionalDW:
      return "conventional_dw";
    case Scheme::NewDW:
      return "new_dw";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "no_watermark" || name == "none") return Scheme::NoWatermark;
  if (name == "conventional_dw" || name == "conventional") {
    return Scheme::ConventionalDW;
  }
  if (name == "new_dw" || name == "new") return Scheme::NewDW;
  throw ConfigError("scheme", "unknown scheme '" + name + "'");
}

const char* event_name(Event e) {
  switch (e) {
    case Event::Running:
      return "RUNNING";
    case Event::Off:
      return "OFF";
    case Event::Back:
      return "BACK";
  }
  return "?";
}

void ScenarioConfig::validate() const {
  try {
    model.validate();
  } catch (const Error& e) {
    throw ConfigError("model", e.what());
  }
  const auto nx = model.nx();
  const auto ny = model.ny();
  const auto nu = model.nu();
  if (gains.l.rows() != nx || gains.l.cols() != ny) {
    throw ConfigError("l", "Kalman gain must be m_x x m_y");
  }
  if (gains.k_gain.rows() != nu || gains.k_gain.cols() != nx) {
    throw ConfigError("k_gain", "controller gain must be m_u x m_x");
  }
  if (gains.sigma_o.rows() != ny || gains.sigma_o.cols() != ny) {
    throw ConfigError("sigma_o", "innovation covariance must be m_y x m_y");
  }
  if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
  if (compensation && scheme != Scheme::NewDW) {
    throw ConfigError("compensation", "only available with the new scheme");
  }
  if (scheme == Scheme::NewDW && sigma_w.size() != ny) {
    throw ConfigError("sigma_w", "new scheme needs one variance per output");
  }
  if (scheme == Scheme::ConventionalDW && sigma_w.size() != nu) {
    throw ConfigError("sigma_w",
                      "conventional scheme needs one variance per input");
  }
  for (Eigen::Index i = 0; i < sigma_w.size(); ++i) {
    if (!(sigma_w(i) >= 0.0) || !std::isfinite(sigma_w(i))) {
      throw ConfigError("sigma_w", "variances must be finite and >= 0");
    }
  }
  if (watermark_sign != 1 && watermark_sign != -1) {
    throw ConfigError("watermark_sign", "must be +1 or -1");
  }
  detector.validate();
  if (scheme == Scheme::NewDW && detector.thresh_new_1.size() != ny) {
    throw ConfigError("thresh_new_1", "needs one threshold per output");
  }
  if (attack) {
    try {
      attack->validate();
    } catch (const Error& e) {
      throw ConfigError("attack", e.what());
    }
    if (attack->x_a_init.size() != nx) {
      throw ConfigError("x_a_init", "attack state must have m_x entries");
    }
  }
  if (x0.size() != 0 && x0.size() != nx) {
    throw ConfigError("x0", "initial state must have m_x entries");
  }
  if (safety.enabled && nx < 4) {
    throw ConfigError("safety", "limits assume the 4-state pendulum layout");
  }
}

ScenarioConfig pendulum_scenario(Scheme scheme) {
  static const Preset preset = pendulum_preset();
  ScenarioConfig cfg;
  cfg.scheme = scheme;
  cfg.model = preset.model;
  cfg.gains = preset.gains;
  if (scheme == Scheme::NewDW) {
    cfg.sigma_w = Vector::Constant(cfg.model.ny(), 1e-4);
  } else if (scheme == Scheme::ConventionalDW) {
    cfg.sigma_w = Vector::Constant(cfg.model.nu(), 1e-4);
  }
  cfg.detector.thresh_new_1 = Vector::Constant(cfg.model.ny(), 7e-4);
  return cfg;
}

SimTrace run_closed_loop(const ScenarioConfig& cfg,
                         const StepObserver& observe) {
  cfg.validate();
  const PlantModel& m = cfg.model;
  const LoopGains& g = cfg.gains;
  const auto nx = m.nx();
  const auto nu = m.nu();

  SimTrace trace;
  trace.scheme = cfg.scheme;
  trace.c = m.c;

  GaussianStream noise(cfg.noise_seed);
  Vector wm_var = cfg.sigma_w;
  if (cfg.scheme == Scheme::NoWatermark) wm_var.resize(0);
  WatermarkChannel channel(cfg.watermark_seed, wm_var);
  channel.set_sign(cfg.watermark_sign);

  TestWindowState tests(cfg.detector.window);
  TestWindowState tilde_tests(cfg.detector.window);
  CompensationBuffer buffer;
  AttackState attack_state;

  Vector x = cfg.x0.size() == nx ? cfg.x0 : Vector::Zero(nx);
  EstimatorState est = EstimatorState::zero(nx);
  Vector w_d_prev = Vector::Zero(nu);

  for (std::int64_t k = 0; k < cfg.horizon; ++k) {
    StepRecord rec;
    rec.k = k;
    rec.x = x;
    rec.x_hat_prior = est.x_hat_prior;
    rec.n = sample_noise(noise, m.sigma_n);
    rec.v = sample_noise(noise, m.sigma_v);
    rec.y = quantize_measurement(plant_output(m, x, rec.v));

    Vector transmitted = rec.y;
    Vector w_y;
    if (cfg.scheme == Scheme::NewDW) {
      w_y = channel.next_watermark(Endpoint::Enc);
      rec.y_plus = encrypt_output(rec.y, w_y);
      transmitted = rec.y_plus;
    }
    if (cfg.attack) {
      auto [received, next] =
          attack_channel(*cfg.attack, attack_state, k, transmitted, m.c);
      rec.y_a = std::move(received);
      attack_state = std::move(next);
    } else {
      rec.y_a = transmitted;
    }

    Vector measurement;
    if (cfg.scheme == Scheme::NewDW) {
      const Vector w_dec = channel.next_watermark(Endpoint::Dec);
      rec.y_minus = decrypt_output(rec.y_a, w_dec);
      measurement = rec.y_minus;
      rec.w_test = w_dec;
    } else {
      measurement = rec.y_a;
    }
    rec.r = measurement - m.c * est.x_hat_prior;

    switch (cfg.scheme) {
      case Scheme::NewDW: {
        const NewStats s = new_stats(tests, rec.w_test, rec.r, g.l, g.sigma_o);
        rec.phi_1 = s.phi_1;
        rec.phi_2 = s.phi_2;
        rec.warmup = s.warmup;
        rec.eps = decide(s.phi_1, s.phi_2, cfg.detector, s.warmup);
        break;
      }
      case Scheme::ConventionalDW: {
        rec.w_test = w_d_prev;
        const ConventionalStats s =
            conventional_stats(tests, w_d_prev, rec.r, g.l, g.sigma_o);
        rec.phi_d1 = s.phi_d1;
        rec.phi_d2 = s.phi_d2;
        rec.warmup = s.warmup;
        rec.eps = decide_conventional(s.phi_d1, s.phi_d2, cfg.detector,
                                      s.warmup);
        break;
      }
      case Scheme::NoWatermark: {
        const NewStats s =
            new_stats(tests, Vector(0), rec.r, g.l, g.sigma_o);
        rec.phi_2 = s.phi_2;
        rec.warmup = s.warmup;
        rec.eps = decide(Vector(0), s.phi_2, cfg.detector, s.warmup);
        break;
      }
    }

    if (cfg.compensation) {
      Compensated comp = buffer.compensate(rec.eps, measurement, k);
      rec.y_tilde = std::move(comp.y_tilde);
      rec.h = comp.h;
      rec.phi_2_tilde = compensated_indicator(tilde_tests, rec.y_tilde,
                                              est.x_hat_prior, m.c, g.l,
                                              g.sigma_o)
                            .value;
    } else {
      rec.y_tilde = measurement;
    }

    est = estimator_update(g, m, est, rec.y_tilde);
    rec.x_hat_post = est.x_hat_post;
    Vector u = control_law(g, est);
    if (cfg.scheme == Scheme::ConventionalDW) {
      rec.w_d = channel.next_watermark(Endpoint::Enc);
      u = inject_control_watermark(u, rec.w_d);
    }
    rec.u = u;

    bool stop = false;
    if (!x.allFinite() || !u.allFinite()) {
      rec.event = Event::Off;
      trace.diverged = true;
      stop = true;
    } else if (cfg.safety.enabled) {
      if (std::abs(x(0)) >= cfg.safety.position_limit ||
          std::abs(x(1)) >= cfg.safety.angle_limit) {
        rec.event = Event::Off;
        stop = true;
      } else if (cfg.safety.velocity_limit &&
                 (std::abs(x(2)) > *cfg.safety.velocity_limit ||
                  std::abs(x(3)) > *cfg.safety.velocity_limit)) {
        rec.event = Event::Back;
        x(0) = 0.0;
        x(2) = 0.0;
        trace.back_steps.push_back(k);
      }
    }

    observe(rec);
    if (stop) {
      trace.termination = Event::Off;
      trace.off_step = k;
      break;
    }

    x = plant_step(m, x, u, rec.n);
    est = estimator_predict(g, m, est, u);
    if (cfg.scheme == Scheme::ConventionalDW) w_d_prev = rec.w_d;
  }
  return trace;
}

SimTrace run_closed_loop(const ScenarioConfig& cfg) {
  std::vector<StepRecord> steps;
  steps.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, cfg.horizon)));
  SimTrace trace = run_closed_loop(
      cfg, [&steps](const StepRecord& rec) { steps.push_back(rec); });
  trace.steps = std::move(steps);
  return trace;
}

double twin_run_distortion_power(const ScenarioConfig& cfg) {
  if (!cfg.attack) throw ConfigError("attack", "twin run needs an attack");
  if (cfg.horizon < static_cast<std::int64_t>(cfg.detector.window)) {
    throw WarmupError("twin run: horizon shorter than the detector window");
  }
  ScenarioConfig twin = cfg;
  twin.attack.reset();

  std::vector<Vector> attacked;
  std::vector<Vector> clean;
  const Matrix& l = cfg.gains.l;
  run_closed_loop(cfg,
                  [&](const StepRecord& s) { attacked.push_back(l * s.r); });
  run_closed_loop(twin, [&](const StepRecord& s) { clean.push_back(l * s.r); });

  const std::size_t n = std::min(attacked.size(), clean.size());
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += (attacked[i] - clean[i]).squaredNorm();
  }
  return sum / static_cast<double>(n);
}

double lqg_cost(const SimTrace& trace, const Matrix& q, const Matrix& r) {
  if (trace.steps.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : trace.steps) {
    sum += s.x.dot(q * s.x) + s.u.dot(r * s.u);
  }
  return sum / static_cast<double>(trace.steps.size());
}

WindowedValue estimation_error_power(const SimTrace& trace,
                                     std::size_t window, std::int64_t k) {
  if (window < 1) throw InputError("estimation_error_power: window < 1");
  if (k < 0 || k >= static_cast<std::int64_t>(trace.steps.size())) {
    throw InputError("estimation_error_power: step outside the trace");
  }
  const std::int64_t first =
      std::max<std::int64_t>(0, k - static_cast<std::int64_t>(window) + 1);
  double sum = 0.0;
  for (std::int64_t i = first; i <= k; ++i) {
    const auto& s = trace.steps[static_cast<std::size_t>(i)];
    sum += (trace.c * (s.x - s.x_hat_post)).squaredNorm();
  }
  const auto count = static_cast<double>(k - first + 1);
  return {sum / count, k + 1 < static_cast<std::int64_t>(window)};
}

namespace {

void put_number(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

void put_vector(std::ostream& os, const Vector& v, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    os << ',';
    if (i < v.size()) put_number(os, v(i));
  }
}

void put_optional(std::ostream& os, const std::optional<double>& v) {
  os << ',';
  if (v) put_number(os, *v);
}

}  // namespace

void write_trace_csv(const SimTrace& trace, std::ostream& os) {
  const Eigen::Index ny = trace.c.rows();
  const Eigen::Index nx = trace.c.cols();
  Eigen::Index nu = 1;
  if (!trace.steps.empty()) nu = trace.steps.front().u.size();

  os << "k";
  for (Eigen::Index i = 1; i <= nx; ++i) os << ",x" << i;
  for (Eigen::Index i = 1; i <= nx; ++i) os << ",xhat" << i;
  if (nu == 1) {
    os << ",u";
  } else {
    for (Eigen::Index i = 1; i <= nu; ++i) os << ",u" << i;
  }
  for (Eigen::Index i = 1; i <= ny; ++i) os << ",y" << i;
  for (Eigen::Index i = 1; i <= ny; ++i) os << ",ya" << i;
  for (Eigen::Index i = 1; i <= ny; ++i) os << ",ytilde" << i;
  for (Eigen::Index i = 1; i <= ny; ++i) os << ",r" << i;
  os << ",phi_d1,phi_d2";
  for (Eigen::Index i = 1; i <= ny; ++i) os << ",phi_1" << i;
  os << ",phi_2,phi_2_tilde,eps,h,event\n";

  for (const auto& s : trace.steps) {
    os << s.k;
    put_vector(os, s.x, nx);
    put_vector(os, s.x_hat_post, nx);
    put_vector(os, s.u, nu);
    put_vector(os, s.y, ny);
    put_vector(os, s.y_a, ny);
    put_vector(os, s.y_tilde, ny);
    put_vector(os, s.r, ny);
    put_optional(os, s.phi_d1);
    put_optional(os, s.phi_d2);
    put_vector(os, s.phi_1, ny);
    put_optional(os, s.phi_2);
    put_optional(os, s.phi_2_tilde);
    os << ',' << s.eps << ',' << s.h << ',' << event_name(s.event) << '\n';
  }
}

}  // namespace dwsec
