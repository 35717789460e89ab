#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dwsec/model.hpp"
#include "dwsec/sim.hpp"

namespace dwsec {

/// Closed-loop matrices under the FDIA and in the attack-free mode.
///
/// Attacked state zeta = [x; x_a - x_hat(k|k-1); x_a] (3 m_x):
///   zeta(k+1) = a0 zeta + lambda psi,  psi = [n; v; w].
/// Attack-free new scheme, same layout with x_a = 0:
///   zeta(k+1) = a1_switched zeta + lambda1 psi.
/// Compensated delay system, zeta_bar = [x; x_hat(k-1|k-1)] (2 m_x):
///   zeta_bar(k+1) = a0_delay zeta_bar + a1_delay E zeta_bar(k-h)
///                   + gamma0_delay [n; v(k-h)].
struct ClosedLoopModel {
  Matrix phi1;     // (A+BK)(I-LC)
  Matrix phi2;     // A_a - (A+BK)
  Matrix h_block;  // [-BK(I-LC), BK]
  Matrix xi;       // [phi1, phi2; 0, A_a]
  Matrix a0;       // [A, H; 0, xi]
  Matrix lambda_d; // conventional, psi = [n; v; w_d]
  Matrix lambda0;  // new scheme without compensation, psi = [n; v; w_y]
  Matrix a1_switched;
  Matrix lambda1;
  Matrix a0_delay;
  Matrix a1_delay;
  Matrix gamma0_delay;
  Matrix e_selector;
  Matrix e_complement;
};

ClosedLoopModel build_closed_loop(const PlantModel& model,
                                  const LoopGains& gains,
                                  const Matrix& a_attack);

struct Expectations {
  /// Column i: E[w_i(k') L r(k)] for watermark component i.
  Matrix cross_cov;
  /// E[(L r)(L r)^T].
  Matrix steady_cov;
};

/// Conventional scheme under an FDIA whose output has decayed:
/// cross = -sigma^2 L C B, steady = L C M_d C^T L^T with
/// M_d = phi1 M_d phi1^T + sigma^2 B B^T.
Expectations limitation1_expectations(const PlantModel& model,
                                      const LoopGains& gains,
                                      double sigma2_wd);

/// New scheme under the FDIA: cross_i = -sigma^2_i L e_i,
/// steady = L (C M C^T + Sigma_w) L^T with
/// M = phi1 M phi1^T + (A+BK) L Sigma_w ((A+BK) L)^T.
Expectations theorem2_expectations(const PlantModel& model,
                                   const LoopGains& gains,
                                   const Matrix& sigma_wy);

/// sigma^2 tr(B^T S B + R)
double limitation3_delta_j(double sigma2_wd, const Matrix& s, const Matrix& b,
                           const Matrix& r);

/// tr(L Sigma_o L^T)
double normal_residual_trace(const LoopGains& gains);

/// m_y^2 / (m_x^2 + m_x m_y)
double complexity_ratio(std::int64_t m_x, std::int64_t m_y);

struct DwellTimeCertificate {
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;
  double g0 = 0.0;
  double g1 = 0.0;
  double g = 0.0;
  double lambda_star = 0.0;
  double lambda_dagger = 0.0;
  double ratio_bound = 0.0;
  double observed_ratio = 0.0;
  std::optional<double> tau_ave;
  bool satisfied = false;
  std::vector<std::string> warnings;
};

/// (ln l+ - l* ln l-) / ((l* - 1) ln l-)
double dwell_ratio_bound(double lambda_plus, double lambda_minus,
                         double lambda_star);

/// Certificate from given constants (no matrices).
DwellTimeCertificate dwell_time_certificate(double lambda_plus,
                                            double lambda_minus, double g0,
                                            double g1, double lambda_star,
                                            double lambda_dagger,
                                            std::int64_t t0, std::int64_t t1);

/// lambda+ = rho(a0), lambda- = rho(a1), g_i from unit-column eigenvector
/// matrices. Conditioning warnings of the eigendecompositions are carried.
DwellTimeCertificate dwell_time_certificate(const Matrix& a0, const Matrix& a1,
                                            double lambda_star,
                                            double lambda_dagger,
                                            std::int64_t t0, std::int64_t t1);

struct MonteCarloResult {
  Matrix cross_mean;  // column i: mean of w_i L r
  Matrix cross_se;
  Matrix cov_mean;    // mean of (L r)(L r)^T
  Matrix cov_se;
  std::size_t replicas_ok = 0;
  std::size_t failures = 0;
  std::size_t samples = 0;
  std::vector<std::string> failure_messages;
};

inline constexpr std::int64_t kMonteCarloMinSamples = 10000;

/// Replica r uses noise seed cfg.noise_seed + r and watermark seed
/// cfg.watermark_seed + r. The first `burn_in` steps are discarded.
/// Throws InputError when horizon * replicas < 1e4 or replicas < 2.
MonteCarloResult monte_carlo_test_means(const ScenarioConfig& cfg,
                                        std::size_t replicas,
                                        std::int64_t burn_in = 200,
                                        unsigned threads = 0);

struct DeltaJEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t replicas = 0;
};

/// Conventional-scheme cost increase. Each replica runs the +w and -w
/// watermark sequences and the unwatermarked loop on common noise and
/// returns (J(+w) + J(-w)) / 2 - J(0).
DeltaJEstimate delta_j_monte_carlo(const ScenarioConfig& conventional,
                                   std::size_t replicas, unsigned threads = 0);

}  // namespace dwsec
