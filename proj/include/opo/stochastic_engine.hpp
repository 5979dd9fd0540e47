#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "opo/classical_dynamics.hpp"
#include "opo/phase_space.hpp"

namespace opo {

enum class Scheme { EulerMaruyama, SemiImplicitMidpoint };

enum class Mode { X, Y };

// Times are in units of 1/gamma_s.
struct SdeConfig {
  double dt = 1e-3;
  double t_burn = 100.0;
  double t_sample = 400.0;
  std::uint64_t n_traj = 400;
  std::uint64_t seed = 1;
  // Absolute bound on any |a|; 0 selects 1e6 * max(rho, 1).
  double divergence_threshold = 0.0;
  Scheme scheme = Scheme::EulerMaruyama;
  // Spacing of stored samples; rounded to a whole number of steps.
  double sample_dt = 0.05;
  // Worker threads. Results do not depend on this.
  unsigned threads = 1;
  // The run fails once more than this fraction of trajectories diverged.
  double max_divergence_fraction = 0.01;
  // Each step's Wiener increment is the sum of this many normal draws of
  // variance dt/substeps. A run with (dt, k) sees the same Brownian path as
  // (dt/k, 1) for the same seed, which couples step-halving comparisons.
  unsigned noise_substeps = 1;
};

// Throws ValidationError. Warns (returns false) when dt > 1e-3.
bool validate(const SdeConfig& cfg);

double resolved_divergence_threshold(const OpoParams& params, const SdeConfig& cfg);

struct NoiseAmplitudes {
  cplx x{}, xp{}, y{}, yp{};
};

struct DriftAndNoise {
  PhaseSpaceState drift;
  NoiseAmplitudes noise;
};

// Right-hand side of the positive-P Langevin equations. Each signal amplitude
// receives sqrt(chi a0) (or sqrt(chi a0^+)) times its own real white noise;
// the pump equations are noise free.
DriftAndNoise drift_and_noise(const PhaseSpaceState& state, const OpoParams& params);

// Deterministic given (cfg.seed, traj_index). Starts from the positive-branch
// classical steady state and stores samples for t in [t_burn, t_burn + t_sample]
// every sample_dt. Throws TrajectoryDiverged.
Trajectory integrate_trajectory(const OpoParams& params, const SdeConfig& cfg,
                                std::uint64_t traj_index);

struct SpectralConfig {
  // Non-overlapping segments per trajectory; segment length t_sample / segments.
  std::size_t segments = 8;
  // Largest reported omega / gamma_s.
  double omega_max = 10.0;
};

struct SimulatedSpectrumRow {
  double omega_tilde = 0.0;
  double phi = 0.0;
  double V_hat = 1.0;
  double V_stderr = 0.0;
  double V_imag = 0.0;  // signed mean imaginary part
  double V_imag_stderr = 0.0;
  double V_closed_ref = 0.0;  // NaN where no closed form applies
};

struct EnsembleResult {
  std::vector<SimulatedSpectrumRow> spectra;  // phi-major, ascending omega
  std::size_t n_traj = 0;
  std::size_t n_diverged = 0;
  std::vector<std::uint64_t> diverged_trajectories;
  std::size_t branch_cut_crossings = 0;
  std::size_t usable_segments = 0;
  // Ensemble means of the bright and dark amplitudes over the sampling window.
  cplx mean_ax{}, mean_ay{};
  double mean_ax_stderr = 0.0;
  double mean_ay_stderr = 0.0;
  bool step_warning = false;
};

// Quadrature noise spectrum from stored trajectories: Hann-windowed segments
// of X = exp(-i phi) a + exp(i phi) a^+, periodograms formed without complex
// conjugation, averaged over segments and then over trajectories.
// V = 1 + 2 gamma_s S. Throws InsufficientData below 8 usable segments.
EnsembleResult estimate_noise_spectrum(std::span<const Trajectory> ensemble, Mode mode,
                                       std::span<const double> phis, const OpoParams& params,
                                       const SpectralConfig& spectral);

struct SpectralMinimum {
  double omega_tilde = 0.0;
  double V = 0.0;
  double V_stderr = 0.0;
  std::size_t points_used = 0;
};

// Minimum of V_hat(omega) at angle phi over omega in [omega_lo, omega_hi]:
// a weighted quadratic fit through the bins within half_width of the raw
// argmin. Falls back to the raw minimum when the fit has no interior vertex.
SpectralMinimum estimate_spectral_minimum(const EnsembleResult& result, double phi,
                                          double omega_lo, double omega_hi,
                                          double half_width = 0.35);

// Integrates cfg.n_traj trajectories (in parallel when cfg.threads > 1) and
// estimates the spectra while streaming. Diverged trajectories are dropped and
// logged; throws DivergenceBudgetError past cfg.max_divergence_fraction.
EnsembleResult simulate_spectrum(const OpoParams& params, const SdeConfig& cfg, Mode mode,
                                 std::span<const double> phis, const SpectralConfig& spectral);

}  // namespace opo
