#include "dwsec/attack.hpp"

#include <sstream>

#include "dwsec/errors.hpp"

namespace dwsec {

void FdiaSpec::validate() const {
  if (a_attack.rows() != a_attack.cols()) {
    throw DimensionError("attack: a_attack must be square");
  }
  if (x_a_init.size() != a_attack.rows()) {
    throw DimensionError("attack: x_a_init size must match a_attack");
  }
  if (!a_attack.allFinite() || !x_a_init.allFinite()) {
    throw InputError("attack: non-finite entries");
  }
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    if (w.end && *w.end < w.start) {
      throw InputError("attack: window end precedes start");
    }
    if (i + 1 < windows.size()) {
      const auto& next = windows[i + 1];
      if (!w.end || *w.end >= next.start) {
        throw InputError("attack: windows must be sorted and disjoint");
      }
    }
  }
}

std::optional<std::string> FdiaSpec::warning() const {
  if (a_attack.size() == 0) return std::nullopt;
  const double rho = numerics::spectral_radius(a_attack);
  if (rho >= 1.0) {
    std::ostringstream os;
    os << "attack dynamics not contractive: rho(A_a) = " << rho;
    return os.str();
  }
  return std::nullopt;
}

std::pair<Vector, AttackState> attack_channel(const FdiaSpec& spec,
                                              const AttackState& state,
                                              std::int64_t k,
                                              const Vector& y_transmitted,
                                              const Matrix& c) {
  if (state.last_k && k <= *state.last_k) {
    std::ostringstream os;
    os << "attack_channel: step " << k << " after step " << *state.last_k;
    throw SequencingError(os.str());
  }
  AttackState next = state;
  next.last_k = k;

  const AttackWindow* win = nullptr;
  for (const auto& w : spec.windows) {
    if (w.contains(k)) {
      win = &w;
      break;
    }
  }
  if (!win) {
    next.active = false;
    return {y_transmitted, next};
  }
  if (c.cols() != spec.x_a_init.size() || c.rows() != y_transmitted.size()) {
    throw DimensionError("attack_channel: c does not match attack state");
  }
  if (k == win->start || !state.active || state.x_a.size() == 0) {
    next.x_a = spec.x_a_init;
  }
  next.active = true;
  Vector y = c * next.x_a;
  next.x_a = spec.a_attack * next.x_a;
  return {y, next};
}

FdiaSpec burst_preset_fig6() {
  FdiaSpec s;
  s.a_attack = 0.1 * Matrix::Identity(4, 4);
  s.x_a_init = Vector::Constant(4, 2.0);
  s.windows = {{100, 103}};
  return s;
}

FdiaSpec persistent_fdia_preset() {
  FdiaSpec s;
  s.a_attack = 0.1 * Matrix::Identity(4, 4);
  s.x_a_init = Vector{{1e-7, 0.0, 0.0, 1e-7}};
  s.windows = {{2, std::nullopt}};
  return s;
}

}  // namespace dwsec
