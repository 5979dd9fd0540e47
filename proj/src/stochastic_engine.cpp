#include "opo/stochastic_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>

#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>
#include <fftw3.h>

#include "ensemble_support.hpp"
#include "opo/errors.hpp"
#include "opo/linear_spectra.hpp"

namespace opo {

bool validate(const SdeConfig& cfg) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ValidationError("dt must be positive");
  if (!(cfg.t_burn >= 0.0)) throw ValidationError("t_burn must be non-negative");
  if (!(cfg.t_sample > 0.0)) throw ValidationError("t_sample must be positive");
  if (cfg.n_traj < 1) throw ValidationError("n_traj must be at least 1");
  if (!(cfg.divergence_threshold >= 0.0))
    throw ValidationError("divergence threshold must be positive (or 0 for the default)");
  if (!(cfg.sample_dt >= cfg.dt)) throw ValidationError("sample_dt must be at least dt");
  if (cfg.noise_substeps < 1) throw ValidationError("noise_substeps must be at least 1");
  if (!(cfg.max_divergence_fraction >= 0.0 && cfg.max_divergence_fraction <= 1.0))
    throw ValidationError("max divergence fraction must lie in [0,1]");
  return cfg.dt <= 1e-3;
}

double resolved_divergence_threshold(const OpoParams& params, const SdeConfig& cfg) {
  if (cfg.divergence_threshold > 0.0) return cfg.divergence_threshold;
  return 1e6 * std::max(steady_state(params).rho, 1.0);
}

DriftAndNoise drift_and_noise(const PhaseSpaceState& s, const OpoParams& p) {
  const cplx i{0.0, 1.0};
  DriftAndNoise out;
  auto& d = out.drift;
  d.a0 = p.pump_Ep - p.gamma_p * s.a0 - 0.5 * p.chi * (s.ax * s.ax + s.ay * s.ay);
  d.a0p = p.pump_Ep - p.gamma_p * s.a0p - 0.5 * p.chi * (s.axp * s.axp + s.ayp * s.ayp);
  d.ax = -p.gamma_s * s.ax + p.chi * s.a0 * s.axp;
  d.axp = -p.gamma_s * s.axp + p.chi * s.a0p * s.ax;
  d.ay = -(p.gamma_s + i * p.delta) * s.ay + p.chi * s.a0 * s.ayp;
  d.ayp = -(p.gamma_s - i * p.delta) * s.ayp + p.chi * s.a0p * s.ay;

  // Principal branch.
  const cplx amp = std::sqrt(p.chi * s.a0);
  const cplx amp_p = std::sqrt(p.chi * s.a0p);
  out.noise = {amp, amp_p, amp, amp_p};
  return out;
}

namespace {

struct Increments {
  double x, xp, y, yp;
};

PhaseSpaceState advance(const PhaseSpaceState& s, const DriftAndNoise& f, double h,
                        const Increments& dw) {
  PhaseSpaceState n = s;
  n.a0 += f.drift.a0 * h;
  n.a0p += f.drift.a0p * h;
  n.ax += f.drift.ax * h + f.noise.x * dw.x;
  n.axp += f.drift.axp * h + f.noise.xp * dw.xp;
  n.ay += f.drift.ay * h + f.noise.y * dw.y;
  n.ayp += f.drift.ayp * h + f.noise.yp * dw.yp;
  return n;
}

// The noise amplitude of each signal mode depends only on the noise-free pump,
// so the Ito and Stratonovich forms coincide and the midpoint rule needs no
// drift correction.
PhaseSpaceState midpoint_step(const PhaseSpaceState& s, const OpoParams& p, double h,
                              const Increments& dw) {
  PhaseSpaceState mid = s;
  const Increments half{0.5 * dw.x, 0.5 * dw.xp, 0.5 * dw.y, 0.5 * dw.yp};
  for (int iter = 0; iter < 3; ++iter) mid = advance(s, drift_and_noise(mid, p), 0.5 * h, half);
  PhaseSpaceState n;
  n.a0 = 2.0 * mid.a0 - s.a0;
  n.a0p = 2.0 * mid.a0p - s.a0p;
  n.ax = 2.0 * mid.ax - s.ax;
  n.axp = 2.0 * mid.axp - s.axp;
  n.ay = 2.0 * mid.ay - s.ay;
  n.ayp = 2.0 * mid.ayp - s.ayp;
  return n;
}

bool crossed_cut(cplx before, cplx after) {
  return after.real() < 0.0 && before.real() < 0.0 &&
         std::signbit(before.imag()) != std::signbit(after.imag());
}

std::size_t steps_for(double duration, double dt) {
  return static_cast<std::size_t>(std::llround(duration / dt));
}

std::size_t sample_stride(const SdeConfig& cfg) {
  return std::max<std::size_t>(1, steps_for(cfg.sample_dt, cfg.dt));
}

}  // namespace

Trajectory integrate_trajectory(const OpoParams& params, const SdeConfig& cfg,
                                std::uint64_t traj_index) {
  validate(params);
  validate(cfg);

  const double h = cfg.dt / params.gamma_s;
  const double sqrt_h = std::sqrt(h / static_cast<double>(cfg.noise_substeps));
  const std::size_t stride = sample_stride(cfg);
  const std::size_t burn_steps = steps_for(cfg.t_burn, cfg.dt);
  const std::size_t total_steps = burn_steps + steps_for(cfg.t_sample, cfg.dt);
  const double limit2 = std::pow(resolved_divergence_threshold(params, cfg), 2);

  Trajectory traj;
  const std::size_t n_samples = (total_steps - burn_steps) / stride + 1;
  traj.times.reserve(n_samples);
  traj.states.reserve(n_samples);

  auto rng = detail::trajectory_rng(cfg.seed, traj_index);
  boost::random::normal_distribution<double> normal;

  PhaseSpaceState s = steady_state(params).as_phase_space();
  for (std::size_t step = 0;; ++step) {
    if (step >= burn_steps && (step - burn_steps) % stride == 0) {
      traj.times.push_back(static_cast<double>(step) * cfg.dt);
      traj.states.push_back(s);
    }
    if (step == total_steps) break;

    Increments dw{0.0, 0.0, 0.0, 0.0};
    for (unsigned sub = 0; sub < cfg.noise_substeps; ++sub) {
      dw.x += sqrt_h * normal(rng);
      dw.xp += sqrt_h * normal(rng);
      dw.y += sqrt_h * normal(rng);
      dw.yp += sqrt_h * normal(rng);
    }

    const PhaseSpaceState next = cfg.scheme == Scheme::EulerMaruyama
                                     ? advance(s, drift_and_noise(s, params), h, dw)
                                     : midpoint_step(s, params, h, dw);
    if (crossed_cut(s.a0, next.a0)) ++traj.branch_cut_crossings;
    if (crossed_cut(s.a0p, next.a0p)) ++traj.branch_cut_crossings;
    s = next;

    const double biggest = std::max({std::norm(s.a0), std::norm(s.a0p), std::norm(s.ax),
                                     std::norm(s.axp), std::norm(s.ay), std::norm(s.ayp)});
    if (!(biggest <= limit2)) {
      std::ostringstream msg;
      msg << "trajectory " << traj_index << " (seed " << cfg.seed << ") diverged at t = "
          << static_cast<double>(step + 1) * cfg.dt;
      throw TrajectoryDiverged(msg.str());
    }
  }
  return traj;
}

namespace {

// The FFTW planner is not re-entrant; execution with new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    std::lock_guard lock(planner_mutex());
    auto* in = fftw_alloc_complex(n);
    auto* out = fftw_alloc_complex(n);
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }
  ~FftPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t size() const { return n_; }
  void forward(fftw_complex* in, fftw_complex* out) const { fftw_execute_dft(plan_, in, out); }

 private:
  std::size_t n_;
  fftw_plan plan_;
};

class FftBuffer {
 public:
  explicit FftBuffer(std::size_t n) : data_(fftw_alloc_complex(n)) {}
  ~FftBuffer() { fftw_free(data_); }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;

  fftw_complex* raw() { return data_; }
  cplx operator[](std::size_t k) const { return {data_[k][0], data_[k][1]}; }
  void set(std::size_t k, cplx v) {
    data_[k][0] = v.real();
    data_[k][1] = v.imag();
  }

 private:
  fftw_complex* data_;
};

// Segment layout shared by every trajectory of one run.
struct SegmentLayout {
  std::size_t segments = 0;
  std::size_t length = 0;   // samples per segment
  std::size_t bins = 0;     // reported bins k = 0 .. bins-1
  double sample_dt = 0.0;   // gamma_s units
  std::vector<double> window;
  std::vector<cplx> window_transform;  // W_k, k = 0 .. bins-1
  double window_power = 0.0;           // sum of w^2

  double omega_tilde(std::size_t k) const {
    return 2.0 * std::numbers::pi * static_cast<double>(k) /
           (static_cast<double>(length) * sample_dt);
  }
};

SegmentLayout make_layout(std::size_t n_samples, double sample_dt, const SpectralConfig& sc) {
  if (sc.segments == 0) throw ValidationError("segment count must be positive");
  if (!(sc.omega_max >= 0.0)) throw ValidationError("omega_max must be non-negative");
  SegmentLayout lay;
  lay.segments = sc.segments;
  lay.length = n_samples / sc.segments;
  lay.sample_dt = sample_dt;
  if (lay.length < 4) throw InsufficientData("segments hold fewer than 4 samples");

  const double resolution = lay.omega_tilde(1);
  const std::size_t nyquist = lay.length / 2;
  lay.bins = std::min(nyquist, static_cast<std::size_t>(std::floor(sc.omega_max / resolution))) + 1;

  // Hann window sampled at bin centres: only W_0 and W_{+-1} are non-zero.
  lay.window.resize(lay.length);
  for (std::size_t n = 0; n < lay.length; ++n) {
    const double s = std::sin(std::numbers::pi * (static_cast<double>(n) + 0.5) /
                              static_cast<double>(lay.length));
    lay.window[n] = s * s;
    lay.window_power += lay.window[n] * lay.window[n];
  }
  lay.window_transform.resize(lay.bins);
  for (std::size_t k = 0; k < lay.bins; ++k) {
    cplx acc{};
    for (std::size_t n = 0; n < lay.length; ++n) {
      acc += lay.window[n] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * n) /
                                                 static_cast<double>(lay.length));
    }
    lay.window_transform[k] = acc;
  }
  return lay;
}

// Per-trajectory segment sums at every reported bin. With A = FFT(w a) and
// P = FFT(w a^+), "m" denotes the value at -omega_k.
struct BinSums {
  cplx aa{}, ap{}, pa{}, pp{};  // A_k A_m, A_k P_m, P_k A_m, P_k P_m
  cplx a{}, am{}, p{}, pm{};
};

struct TrajectorySums {
  std::vector<BinSums> bins;
  cplx sum_a{}, sum_ap{};
  std::size_t n_samples = 0;
  cplx mean_ax{}, mean_ay{};
  std::size_t branch_cut_crossings = 0;
};

class SegmentAnalyzer {
 public:
  SegmentAnalyzer(const SegmentLayout& layout, const FftPlan& plan)
      : lay_(layout), plan_(plan), in_(layout.length), fa_(layout.length), fp_(layout.length) {}

  TrajectorySums analyze(const Trajectory& traj, Mode mode) {
    TrajectorySums out;
    out.bins.assign(lay_.bins, BinSums{});
    out.branch_cut_crossings = traj.branch_cut_crossings;

    auto amp = [mode](const PhaseSpaceState& s) { return mode == Mode::X ? s.ax : s.ay; };
    auto amp_p = [mode](const PhaseSpaceState& s) { return mode == Mode::X ? s.axp : s.ayp; };

    detail::CompensatedSum<cplx> sa, sp, sx, sy;
    for (const auto& s : traj.states) {
      sa.add(amp(s));
      sp.add(amp_p(s));
      sx.add(s.ax);
      sy.add(s.ay);
    }
    out.n_samples = traj.states.size();
    out.sum_a = sa.value();
    out.sum_ap = sp.value();
    out.mean_ax = sx.value() / static_cast<double>(out.n_samples);
    out.mean_ay = sy.value() / static_cast<double>(out.n_samples);

    const std::size_t N = lay_.length;
    for (std::size_t seg = 0; seg < lay_.segments; ++seg) {
      const std::size_t start = seg * N;
      for (std::size_t n = 0; n < N; ++n) in_.set(n, lay_.window[n] * amp(traj.states[start + n]));
      plan_.forward(in_.raw(), fa_.raw());
      for (std::size_t n = 0; n < N; ++n)
        in_.set(n, lay_.window[n] * amp_p(traj.states[start + n]));
      plan_.forward(in_.raw(), fp_.raw());

      for (std::size_t k = 0; k < lay_.bins; ++k) {
        const std::size_t m = (N - k) % N;
        const cplx A = fa_[k], Am = fa_[m], P = fp_[k], Pm = fp_[m];
        BinSums& b = out.bins[k];
        b.aa += A * Am;
        b.ap += A * Pm;
        b.pa += P * Am;
        b.pp += P * Pm;
        b.a += A;
        b.am += Am;
        b.p += P;
        b.pm += Pm;
      }
    }
    return out;
  }

 private:
  const SegmentLayout& lay_;
  const FftPlan& plan_;
  FftBuffer in_, fa_, fp_;
};

EnsembleResult reduce(const std::vector<std::optional<TrajectorySums>>& per_traj,
                      const SegmentLayout& lay, Mode mode, std::span<const double> phis,
                      const OpoParams& params) {
  EnsembleResult res;
  res.n_traj = per_traj.size();

  detail::CompensatedSum<cplx> total_a, total_ap;
  std::size_t total_samples = 0;
  std::vector<double> ax_re, ay_re;
  for (std::size_t i = 0; i < per_traj.size(); ++i) {
    if (!per_traj[i]) {
      ++res.n_diverged;
      res.diverged_trajectories.push_back(i);
      continue;
    }
    const auto& t = *per_traj[i];
    total_a.add(t.sum_a);
    total_ap.add(t.sum_ap);
    total_samples += t.n_samples;
    res.branch_cut_crossings += t.branch_cut_crossings;
    ax_re.push_back(t.mean_ax.real());
    ay_re.push_back(t.mean_ay.real());
  }
  const std::size_t used = per_traj.size() - res.n_diverged;
  res.usable_segments = used * lay.segments;
  if (res.usable_segments < 8) {
    std::ostringstream msg;
    msg << "only " << res.usable_segments << " usable segments (need at least 8)";
    throw InsufficientData(msg.str());
  }

  {
    const auto ax = detail::mean_and_stderr(ax_re);
    const auto ay = detail::mean_and_stderr(ay_re);
    std::vector<double> ax_im, ay_im;
    for (const auto& t : per_traj) {
      if (!t) continue;
      ax_im.push_back(t->mean_ax.imag());
      ay_im.push_back(t->mean_ay.imag());
    }
    const auto axi = detail::mean_and_stderr(ax_im);
    const auto ayi = detail::mean_and_stderr(ay_im);
    res.mean_ax = {ax.mean, axi.mean};
    res.mean_ay = {ay.mean, ayi.mean};
    res.mean_ax_stderr = std::hypot(ax.stderr_, axi.stderr_);
    res.mean_ay_stderr = std::hypot(ay.stderr_, ayi.stderr_);
  }

  const cplx mu_a = total_a.value() / static_cast<double>(total_samples);
  const cplx mu_ap = total_ap.value() / static_cast<double>(total_samples);
  // 2 gamma_s * (physical sample spacing) / sum w^2
  const double scale = 2.0 * lay.sample_dt / lay.window_power;
  const double inv_seg = 1.0 / static_cast<double>(lay.segments);

  std::vector<double> re(used), im(used);
  for (double phi : phis) {
    const cplx c = std::polar(1.0, -phi);
    const cplx d = std::polar(1.0, phi);
    const cplx mu = c * mu_a + d * mu_ap;
    for (std::size_t k = 0; k < lay.bins; ++k) {
      const cplx W = lay.window_transform[k];
      const cplx Wm = std::conj(W);
      std::size_t j = 0;
      for (const auto& t : per_traj) {
        if (!t) continue;
        const BinSums& b = t->bins[k];
        const cplx ff = c * c * b.aa + c * d * (b.ap + b.pa) + d * d * b.pp;
        const cplx f = c * b.a + d * b.p;
        const cplx fm = c * b.am + d * b.pm;
        const cplx periodogram = (ff - mu * (Wm * f + W * fm)) * inv_seg + mu * mu * W * Wm;
        const cplx v = 1.0 + scale * periodogram;
        re[j] = v.real();
        im[j] = v.imag();
        ++j;
      }
      const auto r = detail::mean_and_stderr(re);
      const auto i = detail::mean_and_stderr(im);

      SimulatedSpectrumRow row;
      row.omega_tilde = lay.omega_tilde(k);
      row.phi = phi;
      row.V_hat = r.mean;
      row.V_stderr = r.stderr_;
      row.V_imag = i.mean;
      row.V_imag_stderr = i.stderr_;
      row.V_closed_ref = std::numeric_limits<double>::quiet_NaN();
      if (mode == Mode::Y) {
        try {
          row.V_closed_ref =
              noise_spectrum_closed_form(params.delta_tilde(), row.omega_tilde, phi).V;
        } catch (const SingularityError&) {
        }
      }
      res.spectra.push_back(row);
    }
  }
  return res;
}

std::size_t samples_per_trajectory(const SdeConfig& cfg) {
  return steps_for(cfg.t_sample, cfg.dt) / sample_stride(cfg) + 1;
}

}  // namespace

EnsembleResult estimate_noise_spectrum(std::span<const Trajectory> ensemble, Mode mode,
                                       std::span<const double> phis, const OpoParams& params,
                                       const SpectralConfig& spectral) {
  validate(params);
  if (ensemble.empty()) throw InsufficientData("empty ensemble");
  if (phis.empty()) throw ValidationError("no quadrature angles requested");
  const auto& first = ensemble.front();
  if (first.size() < 2) throw InsufficientData("trajectory holds fewer than 2 samples");
  const double sample_dt = first.times[1] - first.times[0];

  std::size_t n_samples = first.size();
  for (const auto& t : ensemble) n_samples = std::min(n_samples, t.size());
  const SegmentLayout lay = make_layout(n_samples, sample_dt, spectral);
  const FftPlan plan(lay.length);
  SegmentAnalyzer analyzer(lay, plan);

  std::vector<std::optional<TrajectorySums>> sums;
  sums.reserve(ensemble.size());
  for (const auto& t : ensemble) sums.emplace_back(analyzer.analyze(t, mode));
  return reduce(sums, lay, mode, phis, params);
}

SpectralMinimum estimate_spectral_minimum(const EnsembleResult& result, double phi,
                                          double omega_lo, double omega_hi, double half_width) {
  std::vector<const SimulatedSpectrumRow*> rows;
  for (const auto& r : result.spectra)
    if (r.phi == phi && r.omega_tilde >= omega_lo && r.omega_tilde <= omega_hi) rows.push_back(&r);
  if (rows.empty()) throw InsufficientData("no spectrum bins at this angle in the omega range");

  const auto* best = *std::min_element(rows.begin(), rows.end(), [](auto* a, auto* b) {
    return a->V_hat < b->V_hat;
  });
  SpectralMinimum out{best->omega_tilde, best->V_hat, best->V_stderr, 1};

  std::vector<const SimulatedSpectrumRow*> near;
  for (auto* r : rows)
    if (std::abs(r->omega_tilde - best->omega_tilde) <= half_width && r->V_stderr > 0.0)
      near.push_back(r);
  if (near.size() < 4) return out;

  const Eigen::Index n = static_cast<Eigen::Index>(near.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double w = 1.0 / near[j]->V_stderr;
    const double d = near[j]->omega_tilde - best->omega_tilde;
    A.row(j) << w, w * d, w * d * d;
    y(j) = w * near[j]->V_hat;
  }
  const Eigen::Matrix3d normal = A.transpose() * A;
  const Eigen::Vector3d coef = normal.ldlt().solve(A.transpose() * y);
  if (!(coef(2) > 0.0)) return out;
  const double d = -coef(1) / (2.0 * coef(2));
  const double lo = near.front()->omega_tilde - best->omega_tilde;
  const double hi = near.back()->omega_tilde - best->omega_tilde;
  if (d < lo || d > hi) return out;

  const Eigen::Vector3d g(1.0, d, d * d);
  const Eigen::Matrix3d cov = normal.inverse();
  out.omega_tilde = best->omega_tilde + d;
  out.V = coef(0) + coef(1) * d + coef(2) * d * d;
  out.V_stderr = std::sqrt(std::max(0.0, g.dot(cov * g)));
  out.points_used = near.size();
  return out;
}

EnsembleResult simulate_spectrum(const OpoParams& params, const SdeConfig& cfg, Mode mode,
                                 std::span<const double> phis, const SpectralConfig& spectral) {
  validate(params);
  const bool step_ok = validate(cfg);
  if (phis.empty()) throw ValidationError("no quadrature angles requested");

  const double sample_dt = static_cast<double>(sample_stride(cfg)) * cfg.dt;
  const SegmentLayout lay = make_layout(samples_per_trajectory(cfg), sample_dt, spectral);
  const FftPlan plan(lay.length);

  std::vector<std::optional<TrajectorySums>> sums(cfg.n_traj);
  const unsigned workers = std::max(1u, cfg.threads);
  std::vector<std::unique_ptr<SegmentAnalyzer>> analyzers;
  for (unsigned w = 0; w < workers; ++w)
    analyzers.push_back(std::make_unique<SegmentAnalyzer>(lay, plan));

  detail::parallel_for(cfg.n_traj, workers, [&](std::size_t i, unsigned worker) {
    try {
      const Trajectory traj = integrate_trajectory(params, cfg, i);
      sums[i] = analyzers[worker]->analyze(traj, mode);
    } catch (const TrajectoryDiverged&) {
      sums[i].reset();
    }
  });

  const auto n_diverged = static_cast<std::size_t>(
      std::count_if(sums.begin(), sums.end(), [](const auto& s) { return !s.has_value(); }));
  if (static_cast<double>(n_diverged) >
      cfg.max_divergence_fraction * static_cast<double>(cfg.n_traj)) {
    std::ostringstream msg;
    msg << n_diverged << " of " << cfg.n_traj
        << " trajectories diverged, above the allowed fraction " << cfg.max_divergence_fraction;
    throw DivergenceBudgetError(msg.str());
  }
  EnsembleResult res = reduce(sums, lay, mode, phis, params);
  res.step_warning = !step_ok;
  return res;
}

}  // namespace opo
