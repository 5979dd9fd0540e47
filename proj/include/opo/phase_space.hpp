#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace opo {

using cplx = std::complex<double>;

// Positive-P amplitudes. Each "p" member is the independent partner of the
// amplitude before it; it equals the complex conjugate only in the classical
// (noise-free) limit.
struct PhaseSpaceState {
  cplx a0{}, a0p{};
  cplx ax{}, axp{};
  cplx ay{}, ayp{};

  bool finite() const;
  double max_abs() const;

  // Classical state with a_m^+ = a_m^*.
  static PhaseSpaceState classical(cplx a0, cplx ax, cplx ay) {
    return {a0, std::conj(a0), ax, std::conj(ax), ay, std::conj(ay)};
  }
};

inline bool PhaseSpaceState::finite() const {
  for (const cplx* v : {&a0, &a0p, &ax, &axp, &ay, &ayp}) {
    if (!std::isfinite(v->real()) || !std::isfinite(v->imag())) return false;
  }
  return true;
}

inline double PhaseSpaceState::max_abs() const {
  double m = 0.0;
  for (const cplx* v : {&a0, &a0p, &ax, &axp, &ay, &ayp}) m = std::max(m, std::abs(*v));
  return m;
}

struct Trajectory {
  std::vector<double> times;
  std::vector<PhaseSpaceState> states;
  // Times the pump amplitude a0 or a0^+ crossed the negative real axis, where
  // the principal square root in the noise amplitude is discontinuous.
  std::size_t branch_cut_crossings = 0;

  std::size_t size() const { return times.size(); }
};

}  // namespace opo
