#include "dwsec/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "dwsec/errors.hpp"

namespace dwsec {

namespace {

using Eigen::Index;

Matrix stable_phi1(const PlantModel& model, const LoopGains& gains) {
  const Index n = model.nx();
  const Matrix abk = model.a + model.b * gains.k_gain;
  Matrix phi1 = abk * (Matrix::Identity(n, n) - gains.l * model.c);
  const double rho = numerics::spectral_radius(phi1);
  if (rho >= 1.0) {
    std::ostringstream os;
    os << "closed loop (A+BK)(I-LC) is not stable: rho = " << rho;
    throw DivergenceError(os.str());
  }
  return phi1;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

struct MeanSe {
  Matrix mean;
  Matrix se;
};

MeanSe across_replicas(const std::vector<Matrix>& xs) {
  const auto n = static_cast<double>(xs.size());
  Matrix mean = Matrix::Zero(xs.front().rows(), xs.front().cols());
  for (const auto& x : xs) mean += x;
  mean /= n;
  Matrix var = Matrix::Zero(mean.rows(), mean.cols());
  for (const auto& x : xs) var += (x - mean).cwiseAbs2();
  var /= (n - 1.0);
  return {mean, (var / n).cwiseSqrt()};
}

}  // namespace

ClosedLoopModel build_closed_loop(const PlantModel& model,
                                  const LoopGains& gains,
                                  const Matrix& a_attack) {
  model.validate();
  const Index n = model.nx();
  const Index ny = model.ny();
  const Index nn = model.nn();
  if (a_attack.rows() != n || a_attack.cols() != n) {
    throw DimensionError("build_closed_loop: A_a must be m_x x m_x");
  }
  if (gains.l.rows() != n || gains.l.cols() != ny ||
      gains.k_gain.rows() != model.nu() || gains.k_gain.cols() != n) {
    throw DimensionError("build_closed_loop: gains do not match the model");
  }
  const Matrix& a = model.a;
  const Matrix& l = gains.l;
  const Matrix i_n = Matrix::Identity(n, n);
  const Matrix bk = model.b * gains.k_gain;
  const Matrix abk = a + bk;
  const Matrix lc = l * model.c;
  const Matrix i_lc = i_n - lc;
  const Matrix z = Matrix::Zero(n, n);

  ClosedLoopModel cl;
  cl.phi1 = abk * i_lc;
  cl.phi2 = a_attack - abk;
  cl.h_block.resize(n, 2 * n);
  cl.h_block << -bk * i_lc, bk;
  cl.xi.resize(2 * n, 2 * n);
  cl.xi << cl.phi1, cl.phi2, z, a_attack;
  cl.a0.resize(3 * n, 3 * n);
  cl.a0 << a, cl.h_block, Matrix::Zero(2 * n, n), cl.xi;

  const Index nu = model.nu();
  const Matrix& g = model.gamma;
  cl.lambda_d = Matrix::Zero(3 * n, nn + ny + nu);
  cl.lambda_d.block(0, 0, n, nn) = g;
  cl.lambda_d.block(0, nn + ny, n, nu) = model.b;
  cl.lambda_d.block(n, nn + ny, n, nu) = -model.b;

  cl.lambda0 = Matrix::Zero(3 * n, nn + ny + ny);
  cl.lambda0.block(0, 0, n, nn) = g;
  cl.lambda0.block(0, nn + ny, n, ny) = -bk * l;
  cl.lambda0.block(n, nn + ny, n, ny) = abk * l;

  cl.a1_switched = Matrix::Zero(3 * n, 3 * n);
  cl.a1_switched.block(0, 0, n, n) = a + bk * lc;
  cl.a1_switched.block(0, n, n, n) = -bk * i_lc;
  cl.a1_switched.block(n, 0, n, n) = -abk * lc;
  cl.a1_switched.block(n, n, n, n) = cl.phi1;

  cl.lambda1 = Matrix::Zero(3 * n, nn + ny + ny);
  cl.lambda1.block(0, 0, n, nn) = g;
  cl.lambda1.block(0, nn, n, ny) = bk * l;
  cl.lambda1.block(n, nn, n, ny) = -abk * l;

  cl.a0_delay.resize(2 * n, 2 * n);
  cl.a0_delay << a, bk * i_lc * abk, z, i_lc * abk;
  cl.a1_delay.resize(2 * n, n);
  cl.a1_delay << bk * lc, lc;
  cl.gamma0_delay = Matrix::Zero(2 * n, nn + ny);
  cl.gamma0_delay.block(0, 0, n, nn) = g;
  cl.gamma0_delay.block(0, nn, n, ny) = bk * l;
  cl.gamma0_delay.block(n, nn, n, ny) = l;
  cl.e_selector.resize(n, 2 * n);
  cl.e_selector << i_n, z;
  cl.e_complement.resize(n, 2 * n);
  cl.e_complement << z, i_n;
  return cl;
}

Expectations limitation1_expectations(const PlantModel& model,
                                      const LoopGains& gains,
                                      double sigma2_wd) {
  const Matrix phi1 = stable_phi1(model, gains);
  const Matrix& b = model.b;
  Expectations e;
  e.cross_cov = -sigma2_wd * gains.l * model.c * b;
  const Matrix q = sigma2_wd * b * b.transpose();
  const Matrix md = numerics::solve_discrete_lyapunov(phi1, q);
  const Matrix lc = gains.l * model.c;
  e.steady_cov = lc * md * lc.transpose();
  return e;
}

Expectations theorem2_expectations(const PlantModel& model,
                                   const LoopGains& gains,
                                   const Matrix& sigma_wy) {
  const Index ny = model.ny();
  if (sigma_wy.rows() != ny || sigma_wy.cols() != ny) {
    throw DimensionError("theorem2_expectations: Sigma_wy must be m_y x m_y");
  }
  const Matrix phi1 = stable_phi1(model, gains);
  const Matrix& l = gains.l;
  Expectations e;
  e.cross_cov = -l * sigma_wy.diagonal().asDiagonal();
  const Matrix abkl = (model.a + model.b * gains.k_gain) * l;
  const Matrix q = abkl * sigma_wy * abkl.transpose();
  const Matrix m = numerics::solve_discrete_lyapunov(phi1, 0.5 * (q + q.transpose()));
  e.steady_cov =
      l * (model.c * m * model.c.transpose() + sigma_wy) * l.transpose();
  return e;
}

double limitation3_delta_j(double sigma2_wd, const Matrix& s, const Matrix& b,
                           const Matrix& r) {
  if (s.rows() != b.rows() || r.rows() != b.cols()) {
    throw DimensionError("limitation3_delta_j: S, B, R do not conform");
  }
  return sigma2_wd * (b.transpose() * s * b + r).trace();
}

double normal_residual_trace(const LoopGains& gains) {
  return residual_centering(gains.l, gains.sigma_o);
}

double complexity_ratio(std::int64_t m_x, std::int64_t m_y) {
  if (m_x < 1 || m_y < 1) throw InputError("complexity_ratio: m_x, m_y >= 1");
  const auto x = static_cast<double>(m_x);
  const auto y = static_cast<double>(m_y);
  return y * y / (x * x + x * y);
}

double dwell_ratio_bound(double lambda_plus, double lambda_minus,
                         double lambda_star) {
  if (!(lambda_minus > 0.0 && lambda_minus < 1.0)) {
    throw InputError("dwell_ratio_bound: lambda_minus must lie in (0,1)");
  }
  if (!(lambda_plus > 0.0)) {
    throw InputError("dwell_ratio_bound: lambda_plus must be positive");
  }
  if (!(lambda_star >= 0.0 && lambda_star < 1.0)) {
    throw InputError("dwell_ratio_bound: lambda_star must lie in [0,1)");
  }
  const double lm = std::log(lambda_minus);
  return (std::log(lambda_plus) - lambda_star * lm) / ((lambda_star - 1.0) * lm);
}

DwellTimeCertificate dwell_time_certificate(double lambda_plus,
                                            double lambda_minus, double g0,
                                            double g1, double lambda_star,
                                            double lambda_dagger,
                                            std::int64_t t0, std::int64_t t1) {
  if (t0 <= 0 || t1 < 0) {
    throw InputError("dwell_time_certificate: need T0 > 0 and T1 >= 0");
  }
  DwellTimeCertificate c;
  c.lambda_plus = lambda_plus;
  c.lambda_minus = lambda_minus;
  c.g0 = g0;
  c.g1 = g1;
  c.g = std::min(g0, g1);
  c.lambda_star = lambda_star;
  c.lambda_dagger = lambda_dagger;
  c.ratio_bound = dwell_ratio_bound(lambda_plus, lambda_minus, lambda_star);
  c.observed_ratio = static_cast<double>(t1) / static_cast<double>(t0);
  c.satisfied = c.observed_ratio >= c.ratio_bound;
  if (c.g < 0.0 && lambda_dagger > 0.0 && lambda_dagger < lambda_star &&
      lambda_star < 1.0) {
    c.tau_ave = c.g / (lambda_dagger - lambda_star);
  }
  if (!(lambda_plus > 1.0)) {
    c.warnings.push_back("lambda_plus <= 1: the attacked mode is not expanding");
  }
  return c;
}

DwellTimeCertificate dwell_time_certificate(const Matrix& a0, const Matrix& a1,
                                            double lambda_star,
                                            double lambda_dagger,
                                            std::int64_t t0, std::int64_t t1) {
  const auto e0 = numerics::eigen_decompose(a0);
  const auto e1 = numerics::eigen_decompose(a1);
  const double lp = e0.eigenvalues.cwiseAbs().maxCoeff();
  const double lm = e1.eigenvalues.cwiseAbs().maxCoeff();
  const double ln_lm = std::log(lm);
  auto g_of = [&](const numerics::EigenResult& e) {
    const auto sv = numerics::singular_value_extremes(e.eigenvectors);
    if (!(sv.s_min > 0.0)) return -std::numeric_limits<double>::infinity();
    return std::log(sv.s_max / sv.s_min) / ln_lm;
  };
  DwellTimeCertificate c = dwell_time_certificate(
      lp, lm, g_of(e0), g_of(e1), lambda_star, lambda_dagger, t0, t1);
  if (e0.warning) c.warnings.push_back("a0: " + *e0.warning);
  if (e1.warning) c.warnings.push_back("a1: " + *e1.warning);
  return c;
}

MonteCarloResult monte_carlo_test_means(const ScenarioConfig& cfg,
                                        std::size_t replicas,
                                        std::int64_t burn_in,
                                        unsigned threads) {
  if (replicas < 2) {
    throw InputError("monte_carlo_test_means: need at least 2 replicas");
  }
  if (cfg.horizon * static_cast<std::int64_t>(replicas) <
      kMonteCarloMinSamples) {
    throw InputError("monte_carlo_test_means: horizon x replicas < 1e4");
  }
  if (burn_in < 0 || burn_in >= cfg.horizon) {
    throw InputError("monte_carlo_test_means: burn-in outside the horizon");
  }
  cfg.validate();
  const Matrix& l = cfg.gains.l;
  const Index nx = cfg.model.nx();
  const Index nw = cfg.sigma_w.size();

  std::vector<std::optional<Matrix>> cross(replicas);
  std::vector<std::optional<Matrix>> cov(replicas);
  std::vector<std::size_t> counts(replicas, 0);
  std::vector<std::string> errors(replicas);

  parallel_for(replicas, threads, [&](std::size_t r) {
    ScenarioConfig rc = cfg;
    rc.noise_seed = cfg.noise_seed + r;
    rc.watermark_seed = cfg.watermark_seed + r;
    Matrix cs = Matrix::Zero(nx, nw);
    Matrix vs = Matrix::Zero(nx, nx);
    std::size_t count = 0;
    try {
      run_closed_loop(rc, [&](const StepRecord& s) {
        if (s.k < burn_in) return;
        const Vector lr = l * s.r;
        if (!lr.allFinite()) return;
        if (nw > 0) cs += lr * s.w_test.transpose();
        vs += lr * lr.transpose();
        ++count;
      });
    } catch (const std::exception& e) {
      errors[r] = e.what();
      return;
    }
    if (count == 0) {
      errors[r] = "no samples after burn-in";
      return;
    }
    cross[r] = cs / static_cast<double>(count);
    cov[r] = vs / static_cast<double>(count);
    counts[r] = count;
  });

  MonteCarloResult out;
  std::vector<Matrix> cs;
  std::vector<Matrix> vs;
  for (std::size_t r = 0; r < replicas; ++r) {
    if (cross[r]) {
      cs.push_back(*cross[r]);
      vs.push_back(*cov[r]);
      out.samples += counts[r];
    } else {
      ++out.failures;
      out.failure_messages.push_back("replica " + std::to_string(r) + ": " +
                                     errors[r]);
    }
  }
  out.replicas_ok = cs.size();
  if (cs.size() < 2) {
    throw ConvergenceError(
        "monte_carlo_test_means: fewer than 2 replicas succeeded",
        static_cast<double>(out.failures));
  }
  auto c = across_replicas(cs);
  auto v = across_replicas(vs);
  out.cross_mean = std::move(c.mean);
  out.cross_se = std::move(c.se);
  out.cov_mean = std::move(v.mean);
  out.cov_se = std::move(v.se);
  return out;
}

DeltaJEstimate delta_j_monte_carlo(const ScenarioConfig& conventional,
                                   std::size_t replicas, unsigned threads) {
  if (conventional.scheme != Scheme::ConventionalDW) {
    throw InputError("delta_j_monte_carlo: needs the conventional scheme");
  }
  if (replicas < 2) throw InputError("delta_j_monte_carlo: replicas < 2");
  const Matrix& q = conventional.gains.q_weight;
  const Matrix& rw = conventional.gains.r_weight;

  std::vector<double> deltas(replicas, 0.0);
  std::vector<std::string> errors(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    auto cost_of = [&](Scheme scheme, int sign) {
      ScenarioConfig c = conventional;
      c.scheme = scheme;
      c.noise_seed = conventional.noise_seed + r;
      c.watermark_seed = conventional.watermark_seed + r;
      c.watermark_sign = sign;
      if (scheme == Scheme::NoWatermark) c.sigma_w.resize(0);
      double sum = 0.0;
      std::int64_t count = 0;
      const SimTrace t = run_closed_loop(c, [&](const StepRecord& s) {
        sum += s.x.dot(q * s.x) + s.u.dot(rw * s.u);
        ++count;
      });
      if (t.termination == Event::Off) {
        throw InputError("delta_j_monte_carlo: run left the safety region");
      }
      return sum / static_cast<double>(count);
    };
    try {
      const double jp = cost_of(Scheme::ConventionalDW, 1);
      const double jm = cost_of(Scheme::ConventionalDW, -1);
      const double j0 = cost_of(Scheme::NoWatermark, 1);
      deltas[r] = 0.5 * (jp + jm) - j0;
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw InputError(e);
  }
  DeltaJEstimate out;
  out.replicas = replicas;
  const auto n = static_cast<double>(replicas);
  for (double d : deltas) out.mean += d;
  out.mean /= n;
  double var = 0.0;
  for (double d : deltas) var += (d - out.mean) * (d - out.mean);
  out.se = std::sqrt(var / (n - 1.0) / n);
  return out;
}

}  // namespace dwsec
