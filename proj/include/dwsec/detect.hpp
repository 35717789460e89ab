#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>

#include "dwsec/numerics.hpp"

namespace dwsec {

struct DetectorConfig {
  std::size_t window = 5;
  double thresh_conv_1 = 2e-4;
  double thresh_conv_2 = 1.5e-3;
  Vector thresh_new_1 = Vector::Constant(2, 7e-4);
  double thresh_new_2 = 7e-4;

  void validate() const;
};

/// Sliding window of the last T step terms. Statistics are recomputed from
/// the buffer in arrival order, so they depend only on the stored terms.
class TestWindowState {
 public:
  explicit TestWindowState(std::size_t window);

  void push(Matrix cross, Vector lr);

  std::size_t window() const { return window_; }
  std::size_t size() const { return lr_.size(); }
  bool warmup() const { return lr_.size() < window_; }

  /// Mean of the stored cross terms (column i pairs watermark i with L r).
  Matrix mean_cross() const;
  /// tr(mean((L r)(L r)^T)) - centering.
  double trace_excess(double centering) const;

 private:
  std::size_t window_;
  std::deque<Matrix> cross_;
  std::deque<Vector> lr_;
};

struct ConventionalStats {
  double phi_d1 = 0.0;
  double phi_d2 = 0.0;
  bool warmup = false;
};

struct NewStats {
  Vector phi_1;
  double phi_2 = 0.0;
  bool warmup = false;
};

struct IndicatorValue {
  double value = 0.0;
  bool warmup = false;
};

/// tr(L Sigma_o L^T)
double residual_centering(const Matrix& l, const Matrix& sigma_o);

/// Pushes w_d(k-1) (L r_d(k)) and (L r_d)(L r_d)^T - L Sigma_o L^T.
ConventionalStats conventional_stats(TestWindowState& state,
                                     const Vector& w_d_prev, const Vector& r_d,
                                     const Matrix& l, const Matrix& sigma_o);

/// Pushes w_{y,i}(k) (L r(k)) per output and the centered outer product.
NewStats new_stats(TestWindowState& state, const Vector& w_y, const Vector& r,
                   const Matrix& l, const Matrix& sigma_o);

/// Same trace statistic as phi_2, over r~ = y~ - C x_hat(k|k-1).
IndicatorValue compensated_indicator(TestWindowState& state,
                                     const Vector& y_tilde,
                                     const Vector& x_hat_prior,
                                     const Matrix& c, const Matrix& l,
                                     const Matrix& sigma_o);

/// 0 on alarm (any phi_1i >= thresh_1i or phi_2 >= thresh_2), else 1.
/// Alarms are suppressed while the window is filling.
int decide(const Vector& phi_1, double phi_2, const DetectorConfig& cfg,
           bool warmup = false);
int decide_conventional(double phi_d1, double phi_d2,
                        const DetectorConfig& cfg, bool warmup = false);

struct Compensated {
  Vector y_tilde;
  std::int64_t h = 0;
};

class CompensationBuffer {
 public:
  /// eps = 1 stores y_minus and returns it with h = 0; eps = 0 replays the
  /// last healthy output with h = k - last healthy step.
  /// Throws ColdStartError when eps = 0 before any healthy sample.
  Compensated compensate(int eps, const Vector& y_minus, std::int64_t k);

  std::optional<std::int64_t> last_healthy_step() const { return last_step_; }
  std::int64_t h_current() const { return h_; }

 private:
  Vector last_;
  std::optional<std::int64_t> last_step_;
  std::int64_t h_ = 0;
};

}  // namespace dwsec
