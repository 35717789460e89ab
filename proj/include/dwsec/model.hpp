#pragma once

#include "dwsec/numerics.hpp"
#include "dwsec/rng.hpp"

namespace dwsec {

/// x(k+1) = A x + B u + Gamma n,  y = C x + v.
struct PlantModel {
  Matrix a;
  Matrix b;
  Matrix c;
  Matrix gamma;
  Matrix sigma_n;
  Matrix sigma_v;

  Eigen::Index nx() const { return a.rows(); }
  Eigen::Index nu() const { return b.cols(); }
  Eigen::Index ny() const { return c.rows(); }
  Eigen::Index nn() const { return gamma.cols(); }

  /// Throws DimensionError / InputError when the invariants fail.
  void validate() const;
};

struct LoopGains {
  Matrix p;        // filter Riccati solution
  Matrix l;        // Kalman gain
  Matrix sigma_o;  // innovation covariance
  Matrix s;        // control Riccati solution
  Matrix k_gain;   // u = K x_hat
  Matrix q_weight;
  Matrix r_weight;
};

struct EstimatorState {
  Vector x_hat_prior;
  Vector x_hat_post;

  static EstimatorState zero(Eigen::Index nx) {
    return {Vector::Zero(nx), Vector::Zero(nx)};
  }
};

/// Solves both Riccati equations of `design` and assembles L, Sigma_o, K.
LoopGains compute_loop_gains(const PlantModel& design, const Matrix& q,
                             const Matrix& r,
                             const numerics::DareOptions& opts = {});

// Pendulum constants as printed (4 decimals).
Matrix pendulum_printed_l();
Matrix pendulum_printed_k();

/// Printed plant matrices; this is the simulated plant.
PlantModel pendulum_plant();

/// Zero-order-hold discretization (10 ms) of the linearized cart-pendulum
/// theta'' = 29.43 theta + 3 u, x'' = u. The printed A, B are its rounding.
PlantModel pendulum_design_model();

struct Preset {
  PlantModel model;
  LoopGains gains;
};

/// Plant from pendulum_plant(), gains from pendulum_design_model() with
/// Q = 10 I, R = 1. Throws PresetIntegrityError when L or K differ from the
/// printed values by more than 5e-3 in any entry.
Preset pendulum_preset();

inline constexpr double kPresetIntegrityTol = 5e-3;

Vector plant_step(const PlantModel& model, const Vector& x, const Vector& u,
                  const Vector& n);
Vector plant_output(const PlantModel& model, const Vector& x, const Vector& v);

EstimatorState estimator_update(const LoopGains& gains,
                                const PlantModel& model,
                                const EstimatorState& st,
                                const Vector& measurement);
EstimatorState estimator_predict(const LoopGains& gains,
                                 const PlantModel& model,
                                 const EstimatorState& st, const Vector& u);
Vector control_law(const LoopGains& gains, const EstimatorState& st);

/// Independent zero-mean Gaussians with the diagonal of cov as variances.
Vector sample_noise(GaussianStream& gen, const Matrix& cov);

}  // namespace dwsec
