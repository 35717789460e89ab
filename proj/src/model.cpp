#include "dwsec/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dwsec/errors.hpp"

namespace dwsec {

namespace {

void check_vector(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << ": expected " << n << " entries, got " << v.size();
    throw DimensionError(os.str());
  }
}

bool is_symmetric(const Matrix& m) {
  return (m - m.transpose()).norm() <=
         numerics::kSymmetryTol * std::max(1.0, m.norm());
}

}  // namespace

void PlantModel::validate() const {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw DimensionError("model: a must be square");
  if (b.rows() != n) throw DimensionError("model: b rows must equal a rows");
  if (c.cols() != n) throw DimensionError("model: c cols must equal a rows");
  if (gamma.rows() != n) throw DimensionError("model: gamma rows");
  if (sigma_n.rows() != gamma.cols() || sigma_n.cols() != gamma.cols()) {
    throw DimensionError("model: sigma_n must be m_n x m_n");
  }
  if (sigma_v.rows() != c.rows() || sigma_v.cols() != c.rows()) {
    throw DimensionError("model: sigma_v must be m_y x m_y");
  }
  if (!is_symmetric(sigma_n) || !is_symmetric(sigma_v)) {
    throw InputError("model: noise covariances must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> en(sigma_n);
  Eigen::SelfAdjointEigenSolver<Matrix> ev(sigma_v);
  if (sigma_n.size() > 0 && en.eigenvalues().minCoeff() < 0.0) {
    throw InputError("model: sigma_n must be positive semidefinite");
  }
  if (ev.eigenvalues().minCoeff() <= 0.0) {
    throw InputError("model: sigma_v must be nonsingular");
  }
}

LoopGains compute_loop_gains(const PlantModel& design, const Matrix& q,
                             const Matrix& r,
                             const numerics::DareOptions& opts) {
  design.validate();
  LoopGains g;
  const Matrix w = design.gamma * design.sigma_n * design.gamma.transpose();
  g.p = numerics::solve_dare_estimator(design.a, design.c, w, design.sigma_v,
                                       opts);
  g.sigma_o = design.c * g.p * design.c.transpose() + design.sigma_v;
  // L = P C^T Sigma_o^-1, solved through the symmetric Sigma_o.
  g.l = g.sigma_o.ldlt().solve(design.c * g.p).transpose();
  g.s = numerics::solve_dare_controller(design.a, design.b, q, r, opts);
  const Matrix btsb = design.b.transpose() * g.s * design.b + r;
  g.k_gain = -btsb.ldlt().solve(design.b.transpose() * g.s * design.a);
  g.q_weight = q;
  g.r_weight = r;
  return g;
}

Matrix pendulum_printed_l() {
  Matrix l(4, 2);
  l << 0.2951, 0, 0, 0.1673, 5.1094, 0, 0, 1.5290;
  return l;
}

Matrix pendulum_printed_k() {
  Matrix k(1, 4);
  k << 2.8889, -36.6415, 4.9141, -7.3267;
  return k;
}

namespace {

PlantModel pendulum_common() {
  PlantModel m;
  m.c = Matrix::Zero(2, 4);
  m.c(0, 0) = 1.0;
  m.c(1, 1) = 1.0;
  m.gamma = Matrix::Zero(4, 2);
  m.gamma(2, 0) = 1.0;
  m.gamma(3, 1) = 1.0;
  m.sigma_n = Vector::Constant(2, 1e-5).asDiagonal();
  m.sigma_v = Vector{{2.7e-7, 5.5e-6}}.asDiagonal();
  return m;
}

}  // namespace

PlantModel pendulum_plant() {
  PlantModel m = pendulum_common();
  m.a.resize(4, 4);
  m.a << 1, 0, 0.0100, 0,
         0, 1.0015, 0, 0.0100,
         0, 0, 1, 0,
         0, 0.2945, 0, 1.0015;
  m.b.resize(4, 1);
  m.b << 0, 0.0002, 0.0100, 0.0300;
  return m;
}

PlantModel pendulum_design_model() {
  constexpr double ts = 0.01;
  constexpr double a = 29.43;  // g / l with g = 9.81, l = 0.25
  constexpr double bu = 3.0;
  const double w = std::sqrt(a);
  const double ch = std::cosh(w * ts);
  const double sh = std::sinh(w * ts);

  PlantModel m = pendulum_common();
  m.a.resize(4, 4);
  m.a << 1, 0, ts, 0,
         0, ch, 0, sh / w,
         0, 0, 1, 0,
         0, w * sh, 0, ch;
  m.b.resize(4, 1);
  m.b << ts * ts / 2.0, bu * (ch - 1.0) / a, ts, bu * sh / w;
  return m;
}

Preset pendulum_preset() {
  Preset p;
  p.model = pendulum_plant();
  const Matrix q = 10.0 * Matrix::Identity(4, 4);
  const Matrix r = Matrix::Identity(1, 1);
  p.gains = compute_loop_gains(pendulum_design_model(), q, r);

  const double dl = (p.gains.l - pendulum_printed_l()).cwiseAbs().maxCoeff();
  const double dk =
      (p.gains.k_gain - pendulum_printed_k()).cwiseAbs().maxCoeff();
  if (dl > kPresetIntegrityTol || dk > kPresetIntegrityTol) {
    std::ostringstream os;
    os << "pendulum preset: recomputed gains differ from printed values (max "
          "|dL| = "
       << dl << ", max |dK| = " << dk << ")";
    throw PresetIntegrityError(os.str());
  }
  return p;
}

Vector plant_step(const PlantModel& model, const Vector& x, const Vector& u,
                  const Vector& n) {
  check_vector(x, model.nx(), "plant_step(x)");
  check_vector(u, model.nu(), "plant_step(u)");
  check_vector(n, model.nn(), "plant_step(n)");
  return model.a * x + model.b * u + model.gamma * n;
}

Vector plant_output(const PlantModel& model, const Vector& x,
                    const Vector& v) {
  check_vector(x, model.nx(), "plant_output(x)");
  check_vector(v, model.ny(), "plant_output(v)");
  return model.c * x + v;
}

EstimatorState estimator_update(const LoopGains& gains,
                                const PlantModel& model,
                                const EstimatorState& st,
                                const Vector& measurement) {
  check_vector(measurement, model.ny(), "estimator_update(measurement)");
  check_vector(st.x_hat_prior, model.nx(), "estimator_update(x_hat_prior)");
  EstimatorState out = st;
  out.x_hat_post =
      st.x_hat_prior + gains.l * (measurement - model.c * st.x_hat_prior);
  return out;
}

EstimatorState estimator_predict(const LoopGains&, const PlantModel& model,
                                 const EstimatorState& st, const Vector& u) {
  check_vector(st.x_hat_post, model.nx(), "estimator_predict(x_hat_post)");
  check_vector(u, model.nu(), "estimator_predict(u)");
  EstimatorState out = st;
  out.x_hat_prior = model.a * st.x_hat_post + model.b * u;
  return out;
}

Vector control_law(const LoopGains& gains, const EstimatorState& st) {
  return gains.k_gain * st.x_hat_post;
}

Vector sample_noise(GaussianStream& gen, const Matrix& cov) {
  if (cov.rows() != cov.cols()) {
    throw DimensionError("sample_noise: covariance must be square");
  }
  const Eigen::Index n = cov.rows();
  Matrix off = cov;
  off.diagonal().setZero();
  if (n > 1 && off.cwiseAbs().maxCoeff() != 0.0) {
    throw UnsupportedCovarianceError(
        "sample_noise: only diagonal covariances are supported");
  }
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double var = cov(i, i);
    if (var < 0.0) throw InputError("sample_noise: negative variance");
    // Always draw so the stream position does not depend on the variances.
    const double z = gen.standard_normal();
    out(i) = var == 0.0 ? 0.0 : std::sqrt(var) * z;
  }
  return out;
}

}  // namespace dwsec
