#include "opo/classical_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "opo/errors.hpp"

namespace opo {

OpoParams OpoParams::dimensionless(double sigma, double chi_tilde, double gamma_p_tilde,
                                   double delta_tilde) {
  OpoParams p;
  p.gamma_s = 1.0;
  p.gamma_p = gamma_p_tilde;
  p.chi = chi_tilde;
  p.delta = delta_tilde;
  p.pump_Ep = sigma * gamma_p_tilde / chi_tilde;
  return p;
}

double OpoParams::sigma() const { return pump_Ep / (gamma_p * gamma_s / chi); }

void validate(const OpoParams& p) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(p.gamma_p)) throw ValidationError("pump decay rate gamma_p must be positive");
  if (!positive(p.gamma_s)) throw ValidationError("signal decay rate gamma_s must be positive");
  if (!positive(p.chi)) throw ValidationError("nonlinear coupling chi must be positive");
  if (!std::isfinite(p.pump_Ep) || p.pump_Ep < 0.0)
    throw ValidationError("pump amplitude E_p must be non-negative");
  if (!std::isfinite(p.delta)) throw ValidationError("detuning must be finite");
}

Thresholds thresholds(const OpoParams& p) {
  validate(p);
  Thresholds th;
  th.x = p.gamma_p * p.gamma_s / p.chi;
  th.y = std::hypot(1.0, p.delta / p.gamma_s) * th.x;
  return th;
}

SteadyState steady_state(const OpoParams& p) {
  const Thresholds th = thresholds(p);
  SteadyState s;
  if (p.pump_Ep <= th.x) {
    s.branch = Branch::BelowThreshold;
    s.alpha0 = p.pump_Ep / p.gamma_p;
    return s;
  }
  s.branch = Branch::AboveThreshold;
  s.alpha0 = p.gamma_s / p.chi;
  s.rho = std::sqrt(2.0 * (p.pump_Ep - th.x) / p.chi);
  s.alphax = s.rho;
  return s;
}

ClassicalDrift classical_drift(const OpoParams& p, cplx a0, cplx ax, cplx ay) {
  const cplx i{0.0, 1.0};
  ClassicalDrift d;
  d.a0 = p.pump_Ep - p.gamma_p * a0 - 0.5 * p.chi * (ax * ax + ay * ay);
  d.ax = -p.gamma_s * ax + p.chi * a0 * std::conj(ax);
  d.ay = -(p.gamma_s + i * p.delta) * ay + p.chi * a0 * std::conj(ay);
  return d;
}

Trajectory integrate_classical(const OpoParams& p, const PhaseSpaceState& init, double t_end,
                               double dt, std::size_t stride) {
  validate(p);
  if (!(dt > 0.0) || !(t_end >= 0.0) || stride == 0) {
    throw ValidationError("integrate_classical needs dt > 0, t_end >= 0 and stride >= 1");
  }
  if (dt * p.gamma_s > 1e-2) {
    throw ValidationError("integrate_classical requires dt * gamma_s <= 1e-2");
  }
  if (!init.finite()) throw ValidationError("initial state is not finite");

  const SteadyState ss = steady_state(p);
  const double scale = std::max({ss.rho, p.pump_Ep / p.gamma_p, 1.0});
  const double limit = 1e6 * scale;

  const auto n_steps = static_cast<std::size_t>(std::llround(t_end / dt));
  Trajectory traj;
  traj.times.reserve(n_steps / stride + 2);
  traj.states.reserve(n_steps / stride + 2);

  cplx a0 = init.a0, ax = init.ax, ay = init.ay;
  auto record = [&](std::size_t step) {
    traj.times.push_back(static_cast<double>(step) * dt);
    traj.states.push_back(PhaseSpaceState::classical(a0, ax, ay));
  };
  record(0);

  for (std::size_t step = 1; step <= n_steps; ++step) {
    const ClassicalDrift k1 = classical_drift(p, a0, ax, ay);
    const ClassicalDrift k2 = classical_drift(p, a0 + 0.5 * dt * k1.a0, ax + 0.5 * dt * k1.ax,
                                              ay + 0.5 * dt * k1.ay);
    const ClassicalDrift k3 = classical_drift(p, a0 + 0.5 * dt * k2.a0, ax + 0.5 * dt * k2.ax,
                                              ay + 0.5 * dt * k2.ay);
    const ClassicalDrift k4 =
        classical_drift(p, a0 + dt * k3.a0, ax + dt * k3.ax, ay + dt * k3.ay);
    a0 += dt / 6.0 * (k1.a0 + 2.0 * k2.a0 + 2.0 * k3.a0 + k4.a0);
    ax += dt / 6.0 * (k1.ax + 2.0 * k2.ax + 2.0 * k3.ax + k4.ax);
    ay += dt / 6.0 * (k1.ay + 2.0 * k2.ay + 2.0 * k3.ay + k4.ay);

    const double biggest = std::max({std::abs(a0), std::abs(ax), std::abs(ay)});
    if (!std::isfinite(biggest) || biggest > limit) {
      std::ostringstream msg;
      msg << "classical integration diverged at t = " << static_cast<double>(step) * dt
          << " (|alpha| = " << biggest << ")";
      throw DivergenceError(msg.str());
    }
    if (step % stride == 0 || step == n_steps) record(step);
  }
  return traj;
}

}  // namespace opo
