#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "opo/classical_dynamics.hpp"
#include "opo/phase_space.hpp"
#include "opo/stochastic_engine.hpp"

namespace opo {

// Reduced orientation dynamics  dx/dt = -M x + sqrt(2 gamma_s) eta(t)  with
// x = (2 rho theta, c1) and M = [[0, i delta], [i delta, 2 gamma_s]].
struct OrientationSystem {
  Eigen::Matrix2cd M;
  double noise_strength = 0.0;
  double rho = 0.0;
  double gamma_s = 1.0;
  double delta = 0.0;
};

// Throws BelowThresholdError when the bright mode is off.
OrientationSystem orientation_matrix(const OpoParams& params);
OrientationSystem orientation_matrix(double rho, double delta, double gamma_s = 1.0);

// Solves M P + P M^T = 2 gamma_s I. Throws NoStationaryState for delta = 0.
Eigen::Matrix2cd stationary_covariance_lyapunov(const OrientationSystem& sys);

struct ThetaVariance {
  double value = 0.0;
  // False once V >= 0.1; the small-angle expansion assumes V << 1.
  bool linearization_valid = true;
};

// 1 / (2 rho^2 delta_tilde^2)
ThetaVariance theta_variance_closed_form(double rho, double delta_tilde);

// Decay rate of the slowest eigenmode of M (gamma_s for |delta_tilde| >= 1).
double slow_relaxation_rate(double delta_tilde, double gamma_s = 1.0);

struct ThetaSeries {
  std::vector<double> times;
  std::vector<double> theta_hat;
  std::vector<double> imag_residual;
};

// theta = Re[(a_y + a_y^+) / (2 rho)], using the gauge c0 = 0. Throws
// InvalidRegime when the time-averaged |<a_x>| is more than 10% away from rho.
ThetaSeries estimate_theta(const Trajectory& trajectory, double rho);

enum class Fidelity { Reduced, Full };

struct OrientationConfig {
  Fidelity fidelity = Fidelity::Reduced;
  double dt = 1e-2;
  double t_end = 50.0;
  double sample_dt = 0.5;
  std::uint64_t n_traj = 200;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  Scheme scheme = Scheme::EulerMaruyama;
};

struct VarianceRow {
  double t = 0.0;
  double var_theta = 0.0;
  double stderr_ = 0.0;
  double v_theta_inf_ref = 0.0;  // NaN for delta = 0
};

// Ensemble variance of theta at each sample time, starting from the classical
// steady state (theta = 0) at t = 0.
std::vector<VarianceRow> orientation_variance_vs_time(const OpoParams& params,
                                                      const OrientationConfig& cfg);

struct StationaryThetaVariance {
  double value = 0.0;
  double stderr_ = 0.0;
  double t_burn = 0.0;
  double mean_imag_residual = 0.0;
  double mean_imag_residual_stderr = 0.0;
};

// Time average over (t_burn, t_end] combined with the ensemble average. A
// negative t_burn selects five slow relaxation times.
StationaryThetaVariance stationary_theta_variance(const OpoParams& params,
                                                  const OrientationConfig& cfg,
                                                  double t_burn = -1.0);

}  // namespace opo
