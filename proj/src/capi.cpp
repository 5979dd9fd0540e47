#include "opo/opo_api.h"

#include <cmath>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "opo/cavity_geometry.hpp"
#include "opo/classical_dynamics.hpp"
#include "opo/errors.hpp"
#include "opo/linear_spectra.hpp"
#include "opo/orientation.hpp"
#include "opo/stochastic_engine.hpp"

struct opo_table {
  std::vector<std::string> columns;
  std::vector<double> data;
  size_t rows = 0;

  explicit opo_table(std::vector<std::string> names) : columns(std::move(names)) {}
  void push(std::initializer_list<double> row) {
    data.insert(data.end(), row.begin(), row.end());
    ++rows;
  }
};

struct opo_geometry {
  opo::CavityGeometry geom;
};

struct opo_trajectory {
  opo::Trajectory traj;
};

struct opo_ensemble {
  opo::EnsembleResult result;
};

namespace {

thread_local std::string last_error;

opo_status fail(opo_status status, const char* what) {
  last_error = what;
  return status;
}

// Runs body, translating any exception into a status code.
template <class Body>
opo_status guarded(Body&& body) {
  try {
    body();
    last_error.clear();
    return OPO_OK;
  } catch (const opo::ValidationError& e) {
    return fail(OPO_ERR_VALIDATION, e.what());
  } catch (const opo::StabilityError& e) {
    return fail(OPO_ERR_STABILITY, e.what());
  } catch (const opo::NoBracketError& e) {
    return fail(OPO_ERR_NO_BRACKET, e.what());
  } catch (const opo::SingularityError& e) {
    return fail(OPO_ERR_SINGULARITY, e.what());
  } catch (const opo::DivergenceBudgetError& e) {
    return fail(OPO_ERR_DIVERGENCE_BUDGET, e.what());
  } catch (const opo::DivergenceError& e) {
    return fail(OPO_ERR_DIVERGENCE, e.what());
  } catch (const opo::TrajectoryDiverged& e) {
    return fail(OPO_ERR_TRAJECTORY_DIVERGED, e.what());
  } catch (const opo::InsufficientData& e) {
    return fail(OPO_ERR_INSUFFICIENT_DATA, e.what());
  } catch (const opo::BelowThresholdError& e) {
    return fail(OPO_ERR_BELOW_THRESHOLD, e.what());
  } catch (const opo::NoStationaryState& e) {
    return fail(OPO_ERR_NO_STATIONARY_STATE, e.what());
  } catch (const opo::InvalidRegime& e) {
    return fail(OPO_ERR_INVALID_REGIME, e.what());
  } catch (const std::bad_alloc&) {
    return fail(OPO_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(OPO_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(OPO_ERR_INTERNAL, "unknown failure");
  }
}

#define OPO_REQUIRE(ptr)                                                  \
  do {                                                                    \
    if ((ptr) == nullptr) return fail(OPO_ERR_NULL_ARGUMENT, #ptr " is null"); \
  } while (0)

opo_complex to_c(opo::cplx z) { return {z.real(), z.imag()}; }
opo::cplx from_c(opo_complex z) { return {z.re, z.im}; }

opo::OpoParams from_c(const opo_params& p) {
  opo::OpoParams o;
  o.gamma_p = p.gamma_p;
  o.gamma_s = p.gamma_s;
  o.chi = p.chi;
  o.pump_Ep = p.pump_Ep;
  o.delta = p.delta;
  return o;
}

opo_params to_c(const opo::OpoParams& o) {
  return {o.gamma_p, o.gamma_s, o.chi, o.pump_Ep, o.delta};
}

opo::Scheme from_c(opo_scheme s) {
  switch (s) {
    case OPO_SCHEME_EULER_MARUYAMA:
      return opo::Scheme::EulerMaruyama;
    case OPO_SCHEME_SEMI_IMPLICIT_MIDPOINT:
      return opo::Scheme::SemiImplicitMidpoint;
  }
  throw opo::ValidationError("unknown integration scheme");
}

opo::SdeConfig from_c(const opo_sde_config& c) {
  opo::SdeConfig o;
  o.dt = c.dt;
  o.t_burn = c.t_burn;
  o.t_sample = c.t_sample;
  o.n_traj = c.n_traj;
  o.seed = c.seed;
  o.divergence_threshold = c.divergence_threshold;
  o.scheme = from_c(c.scheme);
  o.sample_dt = c.sample_dt;
  o.threads = c.threads;
  o.max_divergence_fraction = c.max_divergence_fraction;
  o.noise_substeps = c.noise_substeps;
  return o;
}

opo::OrientationConfig from_c(const opo_orientation_config& c) {
  opo::OrientationConfig o;
  switch (c.fidelity) {
    case OPO_FIDELITY_REDUCED:
      o.fidelity = opo::Fidelity::Reduced;
      break;
    case OPO_FIDELITY_FULL:
      o.fidelity = opo::Fidelity::Full;
      break;
    default:
      throw opo::ValidationError("unknown orientation fidelity");
  }
  o.dt = c.dt;
  o.t_end = c.t_end;
  o.sample_dt = c.sample_dt;
  o.n_traj = c.n_traj;
  o.seed = c.seed;
  o.threads = c.threads;
  o.scheme = from_c(c.scheme);
  return o;
}

void to_c(const Eigen::Matrix2cd& m, opo_complex out[4]) {
  out[0] = to_c(m(0, 0));
  out[1] = to_c(m(0, 1));
  out[2] = to_c(m(1, 0));
  out[3] = to_c(m(1, 1));
}

opo_state to_c(const opo::PhaseSpaceState& s) {
  return {to_c(s.a0), to_c(s.a0p), to_c(s.ax), to_c(s.axp), to_c(s.ay), to_c(s.ayp)};
}

}  // namespace

extern "C" {

const char* opo_version(void) { return "1.0.0"; }

const char* opo_status_name(opo_status status) {
  switch (status) {
    case OPO_OK: return "ok";
    case OPO_ERR_INTERNAL: return "internal error";
    case OPO_ERR_VALIDATION: return "validation error";
    case OPO_ERR_SINGULARITY: return "singularity";
    case OPO_ERR_DIVERGENCE_BUDGET: return "divergence budget exceeded";
    case OPO_ERR_IO: return "i/o error";
    case OPO_ERR_STABILITY: return "unstable cavity";
    case OPO_ERR_NO_BRACKET: return "no bracket";
    case OPO_ERR_DIVERGENCE: return "divergence";
    case OPO_ERR_TRAJECTORY_DIVERGED: return "trajectory diverged";
    case OPO_ERR_INSUFFICIENT_DATA: return "insufficient data";
    case OPO_ERR_BELOW_THRESHOLD: return "below threshold";
    case OPO_ERR_NO_STATIONARY_STATE: return "no stationary state";
    case OPO_ERR_INVALID_REGIME: return "invalid regime";
    case OPO_ERR_NULL_ARGUMENT: return "null argument";
    case OPO_ERR_OUT_OF_RANGE: return "index out of range";
  }
  return "unknown status";
}

const char* opo_last_error(void) { return last_error.c_str(); }

// ---- tables

size_t opo_table_rows(const opo_table* t) { return t ? t->rows : 0; }
size_t opo_table_cols(const opo_table* t) { return t ? t->columns.size() : 0; }

const char* opo_table_column_name(const opo_table* t, size_t col) {
  if (!t || col >= t->columns.size()) return nullptr;
  return t->columns[col].c_str();
}

const double* opo_table_data(const opo_table* t) { return t ? t->data.data() : nullptr; }

opo_status opo_table_get(const opo_table* t, size_t row, size_t col, double* value) {
  OPO_REQUIRE(t);
  OPO_REQUIRE(value);
  if (row >= t->rows || col >= t->columns.size())
    return fail(OPO_ERR_OUT_OF_RANGE, "table index out of range");
  *value = t->data[row * t->columns.size() + col];
  return OPO_OK;
}

void opo_table_destroy(opo_table* t) { delete t; }

// ---- geometry

void opo_geometry_desc_default(opo_geometry_desc* d) {
  if (!d) return;
  *d = {1.0, 2.0, 2.0, 2.0, 0.1, 2.0, 0.0, 0.01, 1.0};
}

opo_status opo_geometry_create(const opo_geometry_desc* d, opo_geometry** out) {
  OPO_REQUIRE(d);
  OPO_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    opo::CavityGeometry g;
    g.length_L = d->L;
    g.mirror1 = opo::MirrorSpec::spherical(d->R);
    g.mirror2 = opo::MirrorSpec{d->R2x, d->R2y};
    g.crystal = opo::CrystalSpec{d->lc, d->nc, d->beta};
    g.transmissivity_T = d->T;
    g.speed_of_light_c = d->c;
    opo::validate(g);
    *out = new opo_geometry{g};
  });
}

void opo_geometry_destroy(opo_geometry* g) { delete g; }

opo_status opo_geometry_effective_lengths(const opo_geometry* g, double* x, double* y) {
  OPO_REQUIRE(g);
  OPO_REQUIRE(x);
  OPO_REQUIRE(y);
  return guarded([&] {
    const auto l = opo::effective_lengths(g->geom);
    *x = l.x;
    *y = l.y;
  });
}

opo_status opo_geometry_optical_length(const opo_geometry* g, double* l_opt) {
  OPO_REQUIRE(g);
  OPO_REQUIRE(l_opt);
  return guarded([&] { *l_opt = opo::optical_length(g->geom); });
}

opo_status opo_geometry_g_parameters(const opo_geometry* g, double out[4]) {
  OPO_REQUIRE(g);
  OPO_REQUIRE(out);
  return guarded([&] {
    const auto p = opo::g_parameters(g->geom);
    out[0] = p.g1x;
    out[1] = p.g2x;
    out[2] = p.g1y;
    out[3] = p.g2y;
  });
}

opo_status opo_geometry_resonance_frequency(const opo_geometry* g, uint32_t q, uint32_t m,
                                            uint32_t n, double* omega) {
  OPO_REQUIRE(g);
  OPO_REQUIRE(omega);
  return guarded([&] { *omega = opo::resonance_frequency(g->geom, {q, m, n}); });
}

opo_status opo_geometry_signal_decay_rate(const opo_geometry* g, double* gamma_s) {
  OPO_REQUIRE(g);
  OPO_REQUIRE(gamma_s);
  return guarded([&] { *gamma_s = opo::signal_decay_rate(g->geom); });
}

opo_status opo_geometry_detuning(const opo_geometry* g, double* delta) {
  OPO_REQUIRE(g);
  OPO_REQUIRE(delta);
  return guarded([&] { *delta = opo::detuning(g->geom); });
}

opo_status opo_geometry_detuning_normalized(const opo_geometry* g, double* delta_tilde) {
  OPO_REQUIRE(g);
  OPO_REQUIRE(delta_tilde);
  return guarded([&] { *delta_tilde = opo::detuning_normalized(g->geom); });
}

opo_status opo_geometry_detuning_small_anisotropy(const opo_geometry* g, double* delta_tilde,
                                                  int* degraded) {
  OPO_REQUIRE(g);
  OPO_REQUIRE(delta_tilde);
  return guarded([&] {
    const auto r = opo::detuning_small_anisotropy(g->geom);
    *delta_tilde = r.delta_tilde;
    if (degraded) *degraded = r.expansion_degraded ? 1 : 0;
  });
}

opo_status opo_anisotropy_tolerance(const opo_geometry* g, double target, double* beta_max,
                                    double* epsilon_max, double* delta_tilde_max) {
  OPO_REQUIRE(g);
  return guarded([&] {
    const auto t = opo::anisotropy_tolerance(g->geom, target);
    if (beta_max) *beta_max = t.beta_max;
    if (epsilon_max) *epsilon_max = t.epsilon_max;
    if (delta_tilde_max) *delta_tilde_max = t.delta_tilde_max;
  });
}

// ---- params and classical layer

opo_status opo_params_dimensionless(double sigma, double chi_tilde, double gamma_p_tilde,
                                    double delta_tilde, opo_params* out) {
  OPO_REQUIRE(out);
  return guarded([&] {
    const auto p = opo::OpoParams::dimensionless(sigma, chi_tilde, gamma_p_tilde, delta_tilde);
    opo::validate(p);
    *out = to_c(p);
  });
}

opo_status opo_params_from_rho2(double rho2, double sigma, double gamma_p_tilde,
                                double delta_tilde, opo_params* out) {
  OPO_REQUIRE(out);
  return guarded([&] {
    if (!(rho2 > 0.0)) throw opo::ValidationError("rho2 must be positive");
    if (!(sigma > 1.0)) throw opo::ValidationError("sigma must exceed 1 for a bright mode");
    if (!(gamma_p_tilde > 0.0)) throw opo::ValidationError("gamma_p_tilde must be positive");
    // rho^2 = 2 (sigma - 1) gamma_p gamma_s / chi^2 with gamma_s = 1
    const double chi = std::sqrt(2.0 * (sigma - 1.0) * gamma_p_tilde / rho2);
    const auto p = opo::OpoParams::dimensionless(sigma, chi, gamma_p_tilde, delta_tilde);
    opo::validate(p);
    *out = to_c(p);
  });
}

opo_status opo_thresholds(const opo_params* params, double* x, double* y) {
  OPO_REQUIRE(params);
  OPO_REQUIRE(x);
  OPO_REQUIRE(y);
  return guarded([&] {
    const auto p = from_c(*params);
    opo::validate(p);
    const auto t = opo::thresholds(p);
    *x = t.x;
    *y = t.y;
  });
}

opo_status opo_steady_state_solve(const opo_params* params, opo_steady_state* out) {
  OPO_REQUIRE(params);
  OPO_REQUIRE(out);
  return guarded([&] {
    const auto p = from_c(*params);
    opo::validate(p);
    const auto s = opo::steady_state(p);
    out->alpha0 = to_c(s.alpha0);
    out->alphax = to_c(s.alphax);
    out->alphay = to_c(s.alphay);
    out->rho = s.rho;
    out->above_threshold = s.branch == opo::Branch::AboveThreshold ? 1 : 0;
  });
}

opo_status opo_integrate_classical(const opo_params* params, opo_complex a0, opo_complex ax,
                                   opo_complex ay, double t_end, double dt, size_t stride,
                                   opo_table** out) {
  OPO_REQUIRE(params);
  OPO_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const auto init = opo::PhaseSpaceState::classical(from_c(a0), from_c(ax), from_c(ay));
    const auto traj = opo::integrate_classical(from_c(*params), init, t_end, dt, stride);
    auto table = std::make_unique<opo_table>(std::vector<std::string>{
        "t", "re_a0", "im_a0", "re_ax", "im_ax", "re_ay", "im_ay"});
    table->data.reserve(traj.size() * 7);
    for (size_t k = 0; k < traj.size(); ++k) {
      const auto& s = traj.states[k];
      table->push({traj.times[k], s.a0.real(), s.a0.imag(), s.ax.real(), s.ax.imag(),
                   s.ay.real(), s.ay.imag()});
    }
    *out = table.release();
  });
}

// ---- linear spectra

opo_status opo_stability_matrix(const opo_params* params, opo_complex m[4]) {
  OPO_REQUIRE(params);
  OPO_REQUIRE(m);
  return guarded([&] {
    const auto p = from_c(*params);
    opo::validate(p);
    to_c(opo::stability_matrix(p).entries, m);
  });
}

opo_status opo_spectral_covariance(const opo_params* params, double omega, opo_complex s[4]) {
  OPO_REQUIRE(params);
  OPO_REQUIRE(s);
  return guarded([&] {
    const auto p = from_c(*params);
    opo::validate(p);
    to_c(opo::spectral_covariance(opo::stability_matrix(p), omega), s);
  });
}

opo_status opo_noise_spectrum_matrix(const opo_params* params, double omega_tilde, double phi,
                                     double* v) {
  OPO_REQUIRE(params);
  OPO_REQUIRE(v);
  return guarded([&] {
    const auto p = from_c(*params);
    opo::validate(p);
    *v = opo::noise_spectrum_matrix(p, omega_tilde, phi).V;
  });
}

opo_status opo_noise_spectrum_closed_form(double delta_tilde, double omega_tilde, double phi,
                                          double* v) {
  OPO_REQUIRE(v);
  return guarded([&] { *v = opo::noise_spectrum_closed_form(delta_tilde, omega_tilde, phi).V; });
}

opo_status opo_optimum_squeezing(double delta_tilde, double* omega_opt, double* v_opt) {
  OPO_REQUIRE(omega_opt);
  OPO_REQUIRE(v_opt);
  return guarded([&] {
    const auto o = opo::optimum_squeezing(delta_tilde);
    *omega_opt = o.omega_opt_tilde;
    *v_opt = o.V_opt;
  });
}

opo_status opo_spectrum_grid(const opo_params* params, double omega_min, double omega_max,
                             size_t omega_steps, const double* phis, size_t n_phi,
                             opo_table** out, size_t* skipped) {
  OPO_REQUIRE(params);
  OPO_REQUIRE(out);
  if (n_phi > 0) OPO_REQUIRE(phis);
  *out = nullptr;
  return guarded([&] {
    const auto p = from_c(*params);
    opo::validate(p);
    const auto grid = opo::spectrum_grid(p, opo::OmegaRange{omega_min, omega_max, omega_steps},
                                         std::span<const double>(phis, n_phi));
    auto table = std::make_unique<opo_table>(
        std::vector<std::string>{"omega_tilde", "phi_rad", "V_matrix", "V_closed"});
    for (const auto& r : grid.rows) table->push({r.omega_tilde, r.phi, r.V_matrix, r.V_closed});
    if (skipped) *skipped = grid.skipped_singular;
    *out = table.release();
  });
}

// ---- stochastic engine

void opo_sde_config_default(opo_sde_config* cfg) {
  if (!cfg) return;
  const opo::SdeConfig d;
  cfg->dt = d.dt;
  cfg->t_burn = d.t_burn;
  cfg->t_sample = d.t_sample;
  cfg->n_traj = d.n_traj;
  cfg->seed = d.seed;
  cfg->divergence_threshold = d.divergence_threshold;
  cfg->scheme = OPO_SCHEME_EULER_MARUYAMA;
  cfg->sample_dt = d.sample_dt;
  cfg->threads = d.threads;
  cfg->max_divergence_fraction = d.max_divergence_fraction;
  cfg->noise_substeps = d.noise_substeps;
}

void opo_spectral_config_default(opo_spectral_config* cfg) {
  if (!cfg) return;
  const opo::SpectralConfig d;
  cfg->segments = d.segments;
  cfg->omega_max = d.omega_max;
}

opo_status opo_integrate_trajectory(const opo_params* params, const opo_sde_config* cfg,
                                    uint64_t traj_index, opo_trajectory** out) {
  OPO_REQUIRE(params);
  OPO_REQUIRE(cfg);
  OPO_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto t = std::make_unique<opo_trajectory>();
    t->traj = opo::integrate_trajectory(from_c(*params), from_c(*cfg), traj_index);
    *out = t.release();
  });
}

size_t opo_trajectory_length(const opo_trajectory* t) { return t ? t->traj.size() : 0; }

opo_status opo_trajectory_sample(const opo_trajectory* t, size_t k, double* time,
                                 opo_state* state) {
  OPO_REQUIRE(t);
  if (k >= t->traj.size()) return fail(OPO_ERR_OUT_OF_RANGE, "sample index out of range");
  if (time) *time = t->traj.times[k];
  if (state) *state = to_c(t->traj.states[k]);
  return OPO_OK;
}

size_t opo_trajectory_branch_cut_crossings(const opo_trajectory* t) {
  return t ? t->traj.branch_cut_crossings : 0;
}

void opo_trajectory_destroy(opo_trajectory* t) { delete t; }

opo_status opo_simulate_spectrum(const opo_params* params, const opo_sde_config* cfg,
                                 const opo_spectral_config* spectral, opo_mode mode,
                                 const double* phis, size_t n_phi, opo_ensemble** out) {
  OPO_REQUIRE(params);
  OPO_REQUIRE(cfg);
  OPO_REQUIRE(out);
  if (n_phi > 0) OPO_REQUIRE(phis);
  *out = nullptr;
  return guarded([&] {
    opo::SpectralConfig sc;
    if (spectral) {
      sc.segments = spectral->segments;
      sc.omega_max = spectral->omega_max;
    }
    opo::Mode m;
    switch (mode) {
      case OPO_MODE_X: m = opo::Mode::X; break;
      case OPO_MODE_Y: m = opo::Mode::Y; break;
      default: throw opo::ValidationError("mode must be x or y");
    }
    auto e = std::make_unique<opo_ensemble>();
    e->result = opo::simulate_spectrum(from_c(*params), from_c(*cfg), m,
                                       std::span<const double>(phis, n_phi), sc);
    *out = e.release();
  });
}

opo_status opo_ensemble_summary_get(const opo_ensemble* e, opo_ensemble_summary* out) {
  OPO_REQUIRE(e);
  OPO_REQUIRE(out);
  const auto& r = e->result;
  out->n_traj = r.n_traj;
  out->n_diverged = r.n_diverged;
  out->branch_cut_crossings = r.branch_cut_crossings;
  out->usable_segments = r.usable_segments;
  out->mean_ax = to_c(r.mean_ax);
  out->mean_ay = to_c(r.mean_ay);
  out->mean_ax_stderr = r.mean_ax_stderr;
  out->mean_ay_stderr = r.mean_ay_stderr;
  out->step_warning = r.step_warning ? 1 : 0;
  return OPO_OK;
}

opo_status opo_ensemble_spectrum(const opo_ensemble* e, opo_table** out) {
  OPO_REQUIRE(e);
  OPO_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto table = std::make_unique<opo_table>(
        std::vector<std::string>{"omega_tilde", "phi_rad", "V_hat", "V_stderr", "V_imag",
                                 "V_imag_stderr", "V_closed_ref"});
    for (const auto& r : e->result.spectra)
      table->push({r.omega_tilde, r.phi, r.V_hat, r.V_stderr, r.V_imag, r.V_imag_stderr,
                   r.V_closed_ref});
    *out = table.release();
  });
}

size_t opo_ensemble_diverged_count(const opo_ensemble* e) {
  return e ? e->result.diverged_trajectories.size() : 0;
}

opo_status opo_ensemble_diverged_index(const opo_ensemble* e, size_t k, uint64_t* traj_index) {
  OPO_REQUIRE(e);
  OPO_REQUIRE(traj_index);
  if (k >= e->result.diverged_trajectories.size())
    return fail(OPO_ERR_OUT_OF_RANGE, "divergence log index out of range");
  *traj_index = e->result.diverged_trajectories[k];
  return OPO_OK;
}

opo_status opo_ensemble_spectral_minimum(const opo_ensemble* e, double phi, double omega_lo,
                                         double omega_hi, double half_width, double* omega_tilde,
                                         double* v, double* v_stderr) {
  OPO_REQUIRE(e);
  return guarded([&] {
    const auto m = opo::estimate_spectral_minimum(e->result, phi, omega_lo, omega_hi, half_width);
    if (omega_tilde) *omega_tilde = m.omega_tilde;
    if (v) *v = m.V;
    if (v_stderr) *v_stderr = m.V_stderr;
  });
}

void opo_ensemble_destroy(opo_ensemble* e) { delete e; }

// ---- orientation

void opo_orientation_config_default(opo_orientation_config* cfg) {
  if (!cfg) return;
  const opo::OrientationConfig d;
  cfg->fidelity = OPO_FIDELITY_REDUCED;
  cfg->dt = d.dt;
  cfg->t_end = d.t_end;
  cfg->sample_dt = d.sample_dt;
  cfg->n_traj = d.n_traj;
  cfg->seed = d.seed;
  cfg->threads = d.threads;
  cfg->scheme = OPO_SCHEME_EULER_MARUYAMA;
}

opo_status opo_orientation_matrix(const opo_params* params, opo_complex m[4],
                                  double* noise_strength, double* rho) {
  OPO_REQUIRE(params);
  return guarded([&] {
    const auto p = from_c(*params);
    opo::validate(p);
    const auto sys = opo::orientation_matrix(p);
    if (m) to_c(sys.M, m);
    if (noise_strength) *noise_strength = sys.noise_strength;
    if (rho) *rho = sys.rho;
  });
}

opo_status opo_orientation_lyapunov(double rho, double delta, double gamma_s, opo_complex p[4]) {
  OPO_REQUIRE(p);
  return guarded([&] {
    to_c(opo::stationary_covariance_lyapunov(opo::orientation_matrix(rho, delta, gamma_s)), p);
  });
}

opo_status opo_theta_variance_closed_form(double rho, double delta_tilde, double* v,
                                          int* linearization_valid) {
  OPO_REQUIRE(v);
  return guarded([&] {
    const auto r = opo::theta_variance_closed_form(rho, delta_tilde);
    *v = r.value;
    if (linearization_valid) *linearization_valid = r.linearization_valid ? 1 : 0;
  });
}

opo_status opo_slow_relaxation_rate(double delta_tilde, double gamma_s, double* rate) {
  OPO_REQUIRE(rate);
  return guarded([&] { *rate = opo::slow_relaxation_rate(delta_tilde, gamma_s); });
}

opo_status opo_estimate_theta(const opo_trajectory* traj, double rho, opo_table** out) {
  OPO_REQUIRE(traj);
  OPO_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const auto s = opo::estimate_theta(traj->traj, rho);
    auto table = std::make_unique<opo_table>(
        std::vector<std::string>{"t", "theta_hat", "imag_residual"});
    for (size_t k = 0; k < s.times.size(); ++k)
      table->push({s.times[k], s.theta_hat[k], s.imag_residual[k]});
    *out = table.release();
  });
}

opo_status opo_orientation_variance_vs_time(const opo_params* params,
                                            const opo_orientation_config* cfg, opo_table** out) {
  OPO_REQUIRE(params);
  OPO_REQUIRE(cfg);
  OPO_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const auto rows = opo::orientation_variance_vs_time(from_c(*params), from_c(*cfg));
    auto table = std::make_unique<opo_table>(
        std::vector<std::string>{"t", "var_theta", "stderr", "v_theta_inf_ref"});
    for (const auto& r : rows) table->push({r.t, r.var_theta, r.stderr_, r.v_theta_inf_ref});
    *out = table.release();
  });
}

opo_status opo_stationary_theta_variance(const opo_params* params,
                                         const opo_orientation_config* cfg, double t_burn,
                                         opo_stationary_theta* out) {
  OPO_REQUIRE(params);
  OPO_REQUIRE(cfg);
  OPO_REQUIRE(out);
  return guarded([&] {
    const auto r = opo::stationary_theta_variance(from_c(*params), from_c(*cfg), t_burn);
    out->value = r.value;
    out->stderr_value = r.stderr_;
    out->t_burn = r.t_burn;
    out->mean_imag_residual = r.mean_imag_residual;
    out->mean_imag_residual_stderr = r.mean_imag_residual_stderr;
  });
}

}  // extern "C"
