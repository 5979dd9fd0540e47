#include "opo/orientation.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <sstream>

#include "ensemble_support.hpp"
#include "opo/errors.hpp"

namespace opo {

OrientationSystem orientation_matrix(double rho, double delta, double gamma_s) {
  if (!(rho > 0.0)) throw BelowThresholdError("orientation analysis needs rho > 0");
  if (!(gamma_s > 0.0)) throw ValidationError("gamma_s must be positive");
  const cplx i{0.0, 1.0};
  OrientationSystem sys;
  sys.M << 0.0, i * delta, i * delta, 2.0 * gamma_s;
  sys.noise_strength = std::sqrt(2.0 * gamma_s);
  sys.rho = rho;
  sys.gamma_s = gamma_s;
  sys.delta = delta;
  return sys;
}

OrientationSystem orientation_matrix(const OpoParams& params) {
  const SteadyState ss = steady_state(params);
  if (ss.branch != Branch::AboveThreshold) {
    throw BelowThresholdError("orientation analysis needs the bright mode above threshold");
  }
  return orientation_matrix(ss.rho, params.delta, params.gamma_s);
}

Eigen::Matrix2cd stationary_covariance_lyapunov(const OrientationSystem& sys) {
  if (sys.delta == 0.0) {
    throw NoStationaryState("M has a zero eigenvalue at delta = 0: orientation diffuses freely");
  }
  // vec(M P + P M^T) = (I (x) M + M (x) I) vec(P), column-major vec.
  Eigen::Matrix4cd K = Eigen::Matrix4cd::Zero();
  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d)
          K(2 * a + c, 2 * b + d) = id(a, b) * sys.M(c, d) + sys.M(a, b) * id(c, d);

  Eigen::Vector4cd rhs;
  const double q = sys.noise_strength * sys.noise_strength;
  rhs << q, 0.0, 0.0, q;

  const Eigen::FullPivLU<Eigen::Matrix4cd> lu(K);
  if (!lu.isInvertible()) throw NoStationaryState("Lyapunov operator is singular");
  const Eigen::Vector4cd p = lu.solve(rhs);
  Eigen::Matrix2cd P;
  P << p(0), p(2), p(1), p(3);
  return P;
}

ThetaVariance theta_variance_closed_form(double rho, double delta_tilde) {
  if (!(rho > 0.0)) throw BelowThresholdError("theta variance needs rho > 0");
  if (delta_tilde == 0.0) {
    throw NoStationaryState("theta variance grows without bound at zero detuning");
  }
  ThetaVariance v;
  v.value = 1.0 / (2.0 * rho * rho * delta_tilde * delta_tilde);
  v.linearization_valid = v.value < 0.1;
  return v;
}

double slow_relaxation_rate(double delta_tilde, double gamma_s) {
  const double d2 = delta_tilde * delta_tilde;
  if (d2 >= 1.0) return gamma_s;
  // 1 - sqrt(1 - d2), written to avoid cancellation at small detuning.
  return gamma_s * d2 / (1.0 + std::sqrt(1.0 - d2));
}

ThetaSeries estimate_theta(const Trajectory& trajectory, double rho) {
  if (!(rho > 0.0)) throw BelowThresholdError("theta estimate needs rho > 0");
  if (trajectory.states.empty()) throw InsufficientData("empty trajectory");

  detail::CompensatedSum<cplx> sum_ax;
  for (const auto& s : trajectory.states) sum_ax.add(s.ax);
  const double rho_seen =
      std::abs(sum_ax.value()) / static_cast<double>(trajectory.states.size());
  if (std::abs(rho_seen - rho) > 0.1 * rho) {
    std::ostringstream msg;
    msg << "trajectory bright amplitude |<a_x>| = " << rho_seen << " differs from rho = " << rho
        << " by more than 10%";
    throw InvalidRegime(msg.str());
  }

  ThetaSeries out;
  out.times = trajectory.times;
  out.theta_hat.reserve(trajectory.states.size());
  out.imag_residual.reserve(trajectory.states.size());
  for (const auto& s : trajectory.states) {
    const cplx t = (s.ay + s.ayp) / (2.0 * rho);
    out.theta_hat.push_back(t.real());
    out.imag_residual.push_back(t.imag());
  }
  return out;
}

namespace {

void validate(const OrientationConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw ValidationError("dt must be positive");
  if (!(cfg.t_end > 0.0)) throw ValidationError("t_end must be positive");
  if (!(cfg.sample_dt >= cfg.dt)) throw ValidationError("sample_dt must be at least dt");
  if (cfg.n_traj < 2) throw ValidationError("n_traj must be at least 2");
}

ThetaSeries reduced_theta(const OrientationSystem& sys, const OrientationConfig& cfg,
                          std::uint64_t traj_index) {
  const double h = cfg.dt / sys.gamma_s;
  const double noise = sys.noise_strength * std::sqrt(h);
  const auto steps = static_cast<std::size_t>(std::llround(cfg.t_end / cfg.dt));
  const auto stride =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.sample_dt / cfg.dt)));
  const cplx m12 = sys.M(0, 1), m21 = sys.M(1, 0), m22 = sys.M(1, 1);

  auto rng = detail::trajectory_rng(cfg.seed, traj_index);
  boost::random::normal_distribution<double> normal;

  ThetaSeries out;
  out.times.reserve(steps / stride + 1);
  out.theta_hat.reserve(steps / stride + 1);
  out.imag_residual.reserve(steps / stride + 1);
  cplx x1{}, x2{};
  for (std::size_t step = 0;; ++step) {
    if (step % stride == 0) {
      out.times.push_back(static_cast<double>(step) * cfg.dt);
      out.theta_hat.push_back(x1.real() / (2.0 * sys.rho));
      out.imag_residual.push_back(x1.imag() / (2.0 * sys.rho));
    }
    if (step == steps) break;
    const double w1 = noise * normal(rng);
    const double w2 = noise * normal(rng);
    const cplx d1 = -(m12 * x2);
    const cplx d2 = -(m21 * x1 + m22 * x2);
    x1 += d1 * h + w1;
    x2 += d2 * h + w2;
  }
  return out;
}

std::vector<ThetaSeries> theta_ensemble(const OpoParams& params, const OrientationConfig& cfg) {
  validate(params);
  validate(cfg);
  const OrientationSystem sys = orientation_matrix(params);
  std::vector<ThetaSeries> series(cfg.n_traj);

  if (cfg.fidelity == Fidelity::Reduced) {
    detail::parallel_for(cfg.n_traj, std::max(1u, cfg.threads),
                         [&](std::size_t i, unsigned) { series[i] = reduced_theta(sys, cfg, i); });
    return series;
  }

  SdeConfig sde;
  sde.dt = cfg.dt;
  sde.t_burn = 0.0;
  sde.t_sample = cfg.t_end;
  sde.sample_dt = cfg.sample_dt;
  sde.n_traj = cfg.n_traj;
  sde.seed = cfg.seed;
  sde.scheme = cfg.scheme;
  detail::parallel_for(cfg.n_traj, std::max(1u, cfg.threads), [&](std::size_t i, unsigned) {
    series[i] = estimate_theta(integrate_trajectory(params, sde, i), sys.rho);
  });
  return series;
}

}  // namespace

std::vector<VarianceRow> orientation_variance_vs_time(const OpoParams& params,
                                                      const OrientationConfig& cfg) {
  const std::vector<ThetaSeries> series = theta_ensemble(params, cfg);
  const double rho = steady_state(params).rho;
  const double reference = params.delta == 0.0
                               ? std::numeric_limits<double>::quiet_NaN()
                               : theta_variance_closed_form(rho, params.delta_tilde()).value;

  const std::size_t n_times = series.front().times.size();
  const std::size_t n = series.size();
  std::vector<VarianceRow> rows;
  rows.reserve(n_times);
  std::vector<double> sq(n);
  for (std::size_t k = 0; k < n_times; ++k) {
    detail::CompensatedSum<double> sum;
    for (const auto& s : series) sum.add(s.theta_hat[k]);
    const double mean = sum.value() / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double dev = series[i].theta_hat[k] - mean;
      sq[i] = dev * dev;
    }
    const auto stats = detail::mean_and_stderr(sq);
    VarianceRow row;
    row.t = series.front().times[k];
    // Unbiased sample variance.
    row.var_theta = stats.mean * static_cast<double>(n) / static_cast<double>(n - 1);
    row.stderr_ = stats.stderr_;
    row.v_theta_inf_ref = reference;
    rows.push_back(row);
  }
  return rows;
}

StationaryThetaVariance stationary_theta_variance(const OpoParams& params,
                                                  const OrientationConfig& cfg, double t_burn) {
  if (params.delta == 0.0) {
    throw NoStationaryState("theta has no stationary variance at zero detuning");
  }
  StationaryThetaVariance out;
  out.t_burn = t_burn >= 0.0 ? t_burn : 5.0 / slow_relaxation_rate(params.delta_tilde());
  if (!(out.t_burn < cfg.t_end)) {
    throw ValidationError("t_end must exceed the burn-in time for a stationary estimate");
  }

  const std::vector<ThetaSeries> series = theta_ensemble(params, cfg);

  detail::CompensatedSum<double> grand;
  std::size_t count = 0;
  std::vector<double> second, imag;
  second.reserve(series.size());
  imag.reserve(series.size());
  for (const auto& s : series) {
    detail::CompensatedSum<double> sq, im;
    std::size_t used = 0;
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      if (s.times[k] <= out.t_burn) continue;
      grand.add(s.theta_hat[k]);
      sq.add(s.theta_hat[k] * s.theta_hat[k]);
      im.add(s.imag_residual[k]);
      ++used;
    }
    count += used;
    second.push_back(sq.value() / static_cast<double>(used));
    imag.push_back(im.value() / static_cast<double>(used));
  }
  const double mean = grand.value() / static_cast<double>(count);
  const auto m2 = detail::mean_and_stderr(second);
  const auto im = detail::mean_and_stderr(imag);
  out.value = m2.mean - mean * mean;
  out.stderr_ = m2.stderr_;
  out.mean_imag_residual = im.mean;
  out.mean_imag_residual_stderr = im.stderr_;
  return out;
}

}  // namespace opo
