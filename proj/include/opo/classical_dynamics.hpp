#pragma once

#include "opo/phase_space.hpp"

namespace opo {

// Dynamical parameters of the two-transverse-mode OPO. Rates are in any
// consistent unit; the toolkit's convention is gamma_s = 1.
struct OpoParams {
  double gamma_p = 1.0;  // pump decay
  double gamma_s = 1.0;  // signal decay
  double chi = 1e-3;     // nonlinear coupling (real)
  double pump_Ep = 0.0;  // pump amplitude (real)
  double delta = 0.0;    // TEM01 detuning

  // gamma_s = 1 units: sigma = E_p / E_th,x, chi_tilde = chi / gamma_s, ...
  static OpoParams dimensionless(double sigma, double chi_tilde, double gamma_p_tilde,
                                 double delta_tilde);

  double delta_tilde() const { return delta / gamma_s; }
  double sigma() const;  // E_p / E_th,x
};

// Throws ValidationError on non-positive rates or a negative pump.
void validate(const OpoParams& params);

struct Thresholds {
  double x = 0.0;  // TEM10 (resonant)
  double y = 0.0;  // TEM01 (detuned)
};

Thresholds thresholds(const OpoParams& params);

enum class Branch { BelowThreshold, AboveThreshold };

struct SteadyState {
  cplx alpha0{};
  cplx alphax{};
  cplx alphay{};
  Branch branch = Branch::BelowThreshold;
  double rho = 0.0;

  PhaseSpaceState as_phase_space() const {
    return PhaseSpaceState::classical(alpha0, alphax, alphay);
  }
};

// Stable stationary solution. Above threshold the bright amplitude is
// reported on the +rho branch; sigma == 1 counts as below threshold.
SteadyState steady_state(const OpoParams& params);

// Noise-free drift (a_m^+ replaced by conj(a_m)) for the three amplitudes.
struct ClassicalDrift {
  cplx a0{}, ax{}, ay{};
};
ClassicalDrift classical_drift(const OpoParams& params, cplx a0, cplx ax, cplx ay);

// Fixed-step RK4 integration of the classical equations. Only a0, ax, ay of
// init are used; partners in the output are conjugates. One state is stored
// every `stride` steps (the first and last states are always stored).
// Throws DivergenceError once any amplitude exceeds 1e6 times the reference
// scale max(rho, E_p/gamma_p, 1).
Trajectory integrate_classical(const OpoParams& params, const PhaseSpaceState& init,
                               double t_end, double dt, std::size_t stride = 1);

}  // namespace opo
