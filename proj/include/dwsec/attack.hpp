#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dwsec/numerics.hpp"

namespace dwsec {

/// Inclusive step interval; no end means the window never closes.
struct AttackWindow {
  std::int64_t start = 0;
  std::optional<std::int64_t> end;

  bool contains(std::int64_t k) const {
    return k >= start && (!end || k <= *end);
  }
};

struct FdiaSpec {
  Matrix a_attack;
  Vector x_a_init;
  std::vector<AttackWindow> windows;

  /// Throws on inconsistent dimensions or unsorted/overlapping windows.
  void validate() const;
  /// Set when rho(a_attack) >= 1.
  std::optional<std::string> warning() const;
};

struct AttackState {
  Vector x_a;
  bool active = false;
  std::optional<std::int64_t> last_k;
};

/// Replaces y_transmitted by C x_a inside a window. x_a is reset to
/// x_a_init at each window start and advanced by A_a after use.
/// Throws SequencingError when k does not increase.
std::pair<Vector, AttackState> attack_channel(const FdiaSpec& spec,
                                              const AttackState& state,
                                              std::int64_t k,
                                              const Vector& y_transmitted,
                                              const Matrix& c);

/// A_a = 0.1 I, x_a(100) = [2;2;2;2], active at k = 100..103.
FdiaSpec burst_preset_fig6();

/// A_a = 0.1 I, x_a(2) = [1e-7;0;0;1e-7], active from k = 2 on.
FdiaSpec persistent_fdia_preset();

}  // namespace dwsec
