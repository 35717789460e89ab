#include "dwsec/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dwsec/errors.hpp"
#include "dwsec/rng.hpp"

namespace dwsec {

namespace {

double to_grid(double v, double range) {
  if (!std::isfinite(v)) return v;
  const double q = std::nearbyint(v / kChannelQuantum) * kChannelQuantum;
  return std::clamp(q, -range, range);
}

void same_size(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    std::ostringstream os;
    os << what << ": size mismatch " << a.size() << " vs " << b.size();
    throw DimensionError(os.str());
  }
}

}  // namespace

Vector quantize_measurement(const Vector& y) {
  return y.unaryExpr([](double v) { return to_grid(v, kChannelRange); });
}

WatermarkChannel::WatermarkChannel(std::uint64_t seed, Vector variances)
    : seed_(seed), variances_(std::move(variances)) {
  for (Eigen::Index i = 0; i < variances_.size(); ++i) {
    if (!(variances_(i) >= 0.0) || !std::isfinite(variances_(i))) {
      throw InputError("watermark: variances must be finite and nonnegative");
    }
  }
}

Vector WatermarkChannel::draw(std::uint64_t counter) const {
  SplitMix64 stream = SplitMix64::keyed(seed_, counter);
  Vector w(variances_.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double z = polar_normal([&] { return stream.uniform(); });
    // Half the channel range keeps y + w inside the exact band.
    w(i) = to_grid(std::sqrt(variances_(i)) * z, kChannelRange / 2);
  }
  return sign_ < 0 ? Vector(-w) : w;
}

Vector WatermarkChannel::next_watermark(Endpoint ep) {
  std::uint64_t& ctr = ep == Endpoint::Enc ? enc_counter_ : dec_counter_;
  if (ctr == std::numeric_limits<std::uint64_t>::max()) {
    throw ChannelExhaustedError("watermark: counter exhausted");
  }
  Vector w = draw(ctr);
  ++ctr;
  return w;
}

void WatermarkChannel::set_counters(std::uint64_t enc, std::uint64_t dec) {
  if (enc == 0 || dec == 0) {
    throw InputError("watermark: counters start at 1");
  }
  enc_counter_ = enc;
  dec_counter_ = dec;
}

void WatermarkChannel::set_sign(int sign) {
  if (sign != 1 && sign != -1) throw InputError("watermark: sign must be +-1");
  sign_ = sign;
}

Vector encrypt_output(const Vector& y, const Vector& w) {
  same_size(y, w, "encrypt_output");
  return y + w;
}

Vector decrypt_output(const Vector& y_a, const Vector& w) {
  same_size(y_a, w, "decrypt_output");
  return y_a - w;
}

Vector inject_control_watermark(const Vector& u_d, const Vector& w_d) {
  same_size(u_d, w_d, "inject_control_watermark");
  return u_d + w_d;
}

}  // namespace dwsec
