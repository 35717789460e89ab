#include "dwsec/detect.hpp"

#include <cmath>
#include <sstream>

#include "dwsec/errors.hpp"

namespace dwsec {

void DetectorConfig::validate() const {
  if (window < 1) throw ConfigError("window_T", "must be >= 1");
  if (!(thresh_conv_1 > 0.0) || !(thresh_conv_2 > 0.0)) {
    throw ConfigError("thresh_conv", "thresholds must be > 0");
  }
  for (Eigen::Index i = 0; i < thresh_new_1.size(); ++i) {
    if (!(thresh_new_1(i) > 0.0)) {
      throw ConfigError("thresh_new_1", "thresholds must be > 0");
    }
  }
  if (!(thresh_new_2 > 0.0)) {
    throw ConfigError("thresh_new_2", "threshold must be > 0");
  }
}

TestWindowState::TestWindowState(std::size_t window) : window_(window) {
  if (window_ < 1) throw InputError("test window must hold at least 1 term");
}

void TestWindowState::push(Matrix cross, Vector lr) {
  cross_.push_back(std::move(cross));
  lr_.push_back(std::move(lr));
  if (lr_.size() > window_) {
    cross_.pop_front();
    lr_.pop_front();
  }
}

Matrix TestWindowState::mean_cross() const {
  if (cross_.empty()) return Matrix();
  Matrix sum = Matrix::Zero(cross_.front().rows(), cross_.front().cols());
  for (const auto& m : cross_) sum += m;
  return sum / static_cast<double>(cross_.size());
}

double TestWindowState::trace_excess(double centering) const {
  if (lr_.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& v : lr_) sum += v.squaredNorm() - centering;
  return sum / static_cast<double>(lr_.size());
}

double residual_centering(const Matrix& l, const Matrix& sigma_o) {
  if (l.cols() != sigma_o.rows() || sigma_o.rows() != sigma_o.cols()) {
    throw DimensionError("residual_centering: L and Sigma_o do not conform");
  }
  return (l * sigma_o * l.transpose()).trace();
}

namespace {

Vector gain_residual(const Vector& r, const Matrix& l) {
  if (r.size() != l.cols()) {
    std::ostringstream os;
    os << "residual has " << r.size() << " entries, L has " << l.cols()
       << " columns";
    throw DimensionError(os.str());
  }
  return l * r;
}

}  // namespace

ConventionalStats conventional_stats(TestWindowState& state,
                                     const Vector& w_d_prev, const Vector& r_d,
                                     const Matrix& l, const Matrix& sigma_o) {
  const Vector lr = gain_residual(r_d, l);
  state.push(lr * w_d_prev.transpose(), lr);
  ConventionalStats out;
  out.phi_d1 = state.mean_cross().norm();
  out.phi_d2 = std::abs(state.trace_excess(residual_centering(l, sigma_o)));
  out.warmup = state.warmup();
  return out;
}

NewStats new_stats(TestWindowState& state, const Vector& w_y, const Vector& r,
                   const Matrix& l, const Matrix& sigma_o) {
  const Vector lr = gain_residual(r, l);
  state.push(lr * w_y.transpose(), lr);
  NewStats out;
  out.phi_1 = state.mean_cross().colwise().norm().transpose();
  out.phi_2 = std::abs(state.trace_excess(residual_centering(l, sigma_o)));
  out.warmup = state.warmup();
  return out;
}

IndicatorValue compensated_indicator(TestWindowState& state,
                                     const Vector& y_tilde,
                                     const Vector& x_hat_prior,
                                     const Matrix& c, const Matrix& l,
                                     const Matrix& sigma_o) {
  if (c.rows() != y_tilde.size() || c.cols() != x_hat_prior.size()) {
    throw DimensionError("compensated_indicator: C does not conform");
  }
  const Vector lr = gain_residual(y_tilde - c * x_hat_prior, l);
  state.push(Matrix(lr.size(), 0), lr);
  return {std::abs(state.trace_excess(residual_centering(l, sigma_o))),
          state.warmup()};
}

int decide(const Vector& phi_1, double phi_2, const DetectorConfig& cfg,
           bool warmup) {
  if (warmup) return 1;
  if (phi_1.size() > cfg.thresh_new_1.size()) {
    throw DimensionError("decide: more statistics than thresholds");
  }
  for (Eigen::Index i = 0; i < phi_1.size(); ++i) {
    if (phi_1(i) >= cfg.thresh_new_1(i)) return 0;
  }
  return phi_2 >= cfg.thresh_new_2 ? 0 : 1;
}

int decide_conventional(double phi_d1, double phi_d2,
                        const DetectorConfig& cfg, bool warmup) {
  if (warmup) return 1;
  return (phi_d1 >= cfg.thresh_conv_1 || phi_d2 >= cfg.thresh_conv_2) ? 0 : 1;
}

Compensated CompensationBuffer::compensate(int eps, const Vector& y_minus,
                                           std::int64_t k) {
  if (eps == 1) {
    last_ = y_minus;
    last_step_ = k;
    h_ = 0;
    return {y_minus, 0};
  }
  if (!last_step_) {
    std::ostringstream os;
    os << "compensate: alarm at step " << k
       << " before any healthy output was stored";
    throw ColdStartError(os.str());
  }
  h_ = k - *last_step_;
  return {last_, h_};
}

}  // namespace dwsec
