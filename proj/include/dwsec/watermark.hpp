#pragma once

#include <cstdint>

#include "dwsec/numerics.hpp"

namespace dwsec {

/// Channel grid. Sensor values and watermark draws both live on multiples
/// of 2^-40, so y + w and (y + w) - w are exact in double precision.
inline constexpr double kChannelQuantum = 0x1.0p-40;
inline constexpr double kChannelRange = 0x1.0p12;

/// Rounds to the channel grid and saturates at +-kChannelRange.
/// Non-finite entries are passed through unchanged.
Vector quantize_measurement(const Vector& y);

enum class Endpoint { Enc, Dec };

class WatermarkChannel {
 public:
  /// variances: diagonal of Sigma_wy (one per output) or sigma^2_wd.
  WatermarkChannel(std::uint64_t seed, Vector variances);

  /// Draw number `counter` of the designated endpoint, then advance that
  /// counter only. Throws ChannelExhaustedError at the last counter value.
  Vector next_watermark(Endpoint ep);

  /// Draw keyed by (seed, counter); no state change.
  Vector draw(std::uint64_t counter) const;

  std::uint64_t seed() const { return seed_; }
  const Vector& variances() const { return variances_; }
  std::uint64_t enc_counter() const { return enc_counter_; }
  std::uint64_t dec_counter() const { return dec_counter_; }

  /// Counters start at 1. Exposed for tests and resumption.
  void set_counters(std::uint64_t enc, std::uint64_t dec);

  /// -1 mirrors every draw (antithetic replicas); default +1.
  void set_sign(int sign);
  int sign() const { return sign_; }

 private:
  std::uint64_t seed_;
  Vector variances_;
  std::uint64_t enc_counter_ = 1;
  std::uint64_t dec_counter_ = 1;
  int sign_ = 1;
};

Vector encrypt_output(const Vector& y, const Vector& w);
Vector decrypt_output(const Vector& y_a, const Vector& w);
Vector inject_control_watermark(const Vector& u_d, const Vector& w_d);

}  // namespace dwsec
