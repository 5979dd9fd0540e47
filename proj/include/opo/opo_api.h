#ifndef OPO_API_H
#define OPO_API_H

/* C interface to the OPO toolkit. Every function returns an opo_status; on
 * failure opo_last_error() describes the problem for the calling thread.
 * Angles are radians; times and rates are in units where gamma_s = 1 unless
 * a full opo_params is passed. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(OPO_BUILDING_LIBRARY)
#    define OPO_API __declspec(dllexport)
#  else
#    define OPO_API __declspec(dllimport)
#  endif
#else
#  define OPO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum opo_status {
  OPO_OK = 0,
  OPO_ERR_INTERNAL = 1,
  OPO_ERR_VALIDATION = 2,
  OPO_ERR_SINGULARITY = 3,
  OPO_ERR_DIVERGENCE_BUDGET = 4,
  OPO_ERR_IO = 5,
  OPO_ERR_STABILITY = 6,
  OPO_ERR_NO_BRACKET = 7,
  OPO_ERR_DIVERGENCE = 8,
  OPO_ERR_TRAJECTORY_DIVERGED = 9,
  OPO_ERR_INSUFFICIENT_DATA = 10,
  OPO_ERR_BELOW_THRESHOLD = 11,
  OPO_ERR_NO_STATIONARY_STATE = 12,
  OPO_ERR_INVALID_REGIME = 13,
  OPO_ERR_NULL_ARGUMENT = 14,
  OPO_ERR_OUT_OF_RANGE = 15
} opo_status;

OPO_API const char* opo_version(void);
OPO_API const char* opo_status_name(opo_status status);
/* Message of the most recent failure on this thread ("" if none). */
OPO_API const char* opo_last_error(void);

typedef struct opo_complex {
  double re;
  double im;
} opo_complex;

/* ---- tables --------------------------------------------------------- */

/* Row-major table of doubles with named columns. */
typedef struct opo_table opo_table;

OPO_API size_t opo_table_rows(const opo_table* table);
OPO_API size_t opo_table_cols(const opo_table* table);
OPO_API const char* opo_table_column_name(const opo_table* table, size_t col);
/* rows * cols values, row-major; valid until the table is destroyed. */
OPO_API const double* opo_table_data(const opo_table* table);
OPO_API opo_status opo_table_get(const opo_table* table, size_t row, size_t col, double* value);
OPO_API void opo_table_destroy(opo_table* table);

/* ---- cavity geometry ------------------------------------------------ */

typedef struct opo_geometry opo_geometry;

typedef struct opo_geometry_desc {
  double L;    /* cavity length */
  double R;    /* spherical mirror 1 radius */
  double R2x;  /* mirror 2 radius in x */
  double R2y;  /* mirror 2 radius in y */
  double lc;   /* crystal length */
  double nc;   /* crystal refractive index */
  double beta; /* crystal tilt */
  double T;    /* output coupler transmissivity */
  double c;    /* speed of light */
} opo_geometry_desc;

/* R = R2x = R2y = 2, L = c = 1, lc = 0.1, nc = 2, T = 0.01, beta = 0. */
OPO_API void opo_geometry_desc_default(opo_geometry_desc* desc);
OPO_API opo_status opo_geometry_create(const opo_geometry_desc* desc, opo_geometry** out);
OPO_API void opo_geometry_destroy(opo_geometry* geom);

OPO_API opo_status opo_geometry_effective_lengths(const opo_geometry* geom, double* l_eff_x,
                                                  double* l_eff_y);
OPO_API opo_status opo_geometry_optical_length(const opo_geometry* geom, double* l_opt);
/* g[0..3] = g1x, g2x, g1y, g2y */
OPO_API opo_status opo_geometry_g_parameters(const opo_geometry* geom, double g[4]);
OPO_API opo_status opo_geometry_resonance_frequency(const opo_geometry* geom, uint32_t q,
                                                    uint32_t m, uint32_t n, double* omega);
OPO_API opo_status opo_geometry_signal_decay_rate(const opo_geometry* geom, double* gamma_s);
OPO_API opo_status opo_geometry_detuning(const opo_geometry* geom, double* delta);
OPO_API opo_status opo_geometry_detuning_normalized(const opo_geometry* geom,
                                                    double* delta_tilde);
OPO_API opo_status opo_geometry_detuning_small_anisotropy(const opo_geometry* geom,
                                                          double* delta_tilde, int* degraded);
/* Largest beta (epsilon = 0) and epsilon (beta = 0) keeping V_opt <= target. */
OPO_API opo_status opo_anisotropy_tolerance(const opo_geometry* geom_template, double target_v_opt,
                                            double* beta_max, double* epsilon_max,
                                            double* delta_tilde_max);

/* ---- dynamical parameters and classical layer ----------------------- */

typedef struct opo_params {
  double gamma_p;
  double gamma_s;
  double chi;
  double pump_Ep;
  double delta;
} opo_params;

/* gamma_s = 1 units; pump_Ep = sigma * gamma_p_tilde / chi_tilde. */
OPO_API opo_status opo_params_dimensionless(double sigma, double chi_tilde, double gamma_p_tilde,
                                            double delta_tilde, opo_params* out);
/* Chooses chi so that the above-threshold bright amplitude satisfies
 * rho^2 = rho2 at pump ratio sigma > 1. */
OPO_API opo_status opo_params_from_rho2(double rho2, double sigma, double gamma_p_tilde,
                                        double delta_tilde, opo_params* out);

OPO_API opo_status opo_thresholds(const opo_params* params, double* e_th_x, double* e_th_y);

typedef struct opo_steady_state {
  opo_complex alpha0;
  opo_complex alphax;
  opo_complex alphay;
  double rho;
  int above_threshold;
} opo_steady_state;

OPO_API opo_status opo_steady_state_solve(const opo_params* params, opo_steady_state* out);

/* Positive-P phase-space point; the "p" members are the partner amplitudes. */
typedef struct opo_state {
  opo_complex a0, a0p, ax, axp, ay, ayp;
} opo_state;

/* RK4 integration of the noise-free equations from (a0, ax, ay). Columns:
 * t, re_a0, im_a0, re_ax, im_ax, re_ay, im_ay. */
OPO_API opo_status opo_integrate_classical(const opo_params* params, opo_complex a0,
                                           opo_complex ax, opo_complex ay, double t_end,
                                           double dt, size_t stride, opo_table** out);

/* ---- linear spectra ------------------------------------------------- */

/* Row-major 2x2 matrices. */
OPO_API opo_status opo_stability_matrix(const opo_params* params, opo_complex m[4]);
OPO_API opo_status opo_spectral_covariance(const opo_params* params, double omega,
                                           opo_complex s[4]);
OPO_API opo_status opo_noise_spectrum_matrix(const opo_params* params, double omega_tilde,
                                             double phi, double* v);
OPO_API opo_status opo_noise_spectrum_closed_form(double delta_tilde, double omega_tilde,
                                                  double phi, double* v);
OPO_API opo_status opo_optimum_squeezing(double delta_tilde, double* omega_opt_tilde,
                                         double* v_opt);
/* Columns: omega_tilde, phi_rad, V_matrix, V_closed. phi-major; singular
 * points are omitted and counted in *skipped (may be NULL). */
OPO_API opo_status opo_spectrum_grid(const opo_params* params, double omega_min,
                                     double omega_max, size_t omega_steps, const double* phis,
                                     size_t n_phi, opo_table** out, size_t* skipped);

/* ---- stochastic engine ---------------------------------------------- */

typedef enum opo_scheme { OPO_SCHEME_EULER_MARUYAMA = 0, OPO_SCHEME_SEMI_IMPLICIT_MIDPOINT = 1 } opo_scheme;
typedef enum opo_mode { OPO_MODE_X = 0, OPO_MODE_Y = 1 } opo_mode;

typedef struct opo_sde_config {
  double dt;
  double t_burn;
  double t_sample;
  uint64_t n_traj;
  uint64_t seed;
  double divergence_threshold; /* 0 selects 1e6 * max(rho, 1) */
  opo_scheme scheme;
  double sample_dt;
  unsigned threads;
  double max_divergence_fraction;
  unsigned noise_substeps;
} opo_sde_config;

typedef struct opo_spectral_config {
  size_t segments;
  double omega_max;
} opo_spectral_config;

OPO_API void opo_sde_config_default(opo_sde_config* cfg);
OPO_API void opo_spectral_config_default(opo_spectral_config* cfg);

typedef struct opo_trajectory opo_trajectory;

OPO_API opo_status opo_integrate_trajectory(const opo_params* params, const opo_sde_config* cfg,
                                            uint64_t traj_index, opo_trajectory** out);
OPO_API size_t opo_trajectory_length(const opo_trajectory* traj);
OPO_API opo_status opo_trajectory_sample(const opo_trajectory* traj, size_t k, double* t,
                                         opo_state* state);
OPO_API size_t opo_trajectory_branch_cut_crossings(const opo_trajectory* traj);
OPO_API void opo_trajectory_destroy(opo_trajectory* traj);

typedef struct opo_ensemble opo_ensemble;

typedef struct opo_ensemble_summary {
  size_t n_traj;
  size_t n_diverged;
  size_t branch_cut_crossings;
  size_t usable_segments;
  opo_complex mean_ax;
  opo_complex mean_ay;
  double mean_ax_stderr;
  double mean_ay_stderr;
  int step_warning;
} opo_ensemble_summary;

OPO_API opo_status opo_simulate_spectrum(const opo_params* params, const opo_sde_config* cfg,
                                         const opo_spectral_config* spectral, opo_mode mode,
                                         const double* phis, size_t n_phi, opo_ensemble** out);
OPO_API opo_status opo_ensemble_summary_get(const opo_ensemble* ens, opo_ensemble_summary* out);
/* Columns: omega_tilde, phi_rad, V_hat, V_stderr, V_imag, V_imag_stderr,
 * V_closed_ref (NaN where no closed form applies). */
OPO_API opo_status opo_ensemble_spectrum(const opo_ensemble* ens, opo_table** out);
OPO_API size_t opo_ensemble_diverged_count(const opo_ensemble* ens);
OPO_API opo_status opo_ensemble_diverged_index(const opo_ensemble* ens, size_t k,
                                               uint64_t* traj_index);
OPO_API opo_status opo_ensemble_spectral_minimum(const opo_ensemble* ens, double phi,
                                                 double omega_lo, double omega_hi,
                                                 double half_width, double* omega_tilde,
                                                 double* v, double* v_stderr);
OPO_API void opo_ensemble_destroy(opo_ensemble* ens);

/* ---- orientation ---------------------------------------------------- */

typedef enum opo_fidelity { OPO_FIDELITY_REDUCED = 0, OPO_FIDELITY_FULL = 1 } opo_fidelity;

typedef struct opo_orientation_config {
  opo_fidelity fidelity;
  double dt;
  double t_end;
  double sample_dt;
  uint64_t n_traj;
  uint64_t seed;
  unsigned threads;
  opo_scheme scheme;
} opo_orientation_config;

OPO_API void opo_orientation_config_default(opo_orientation_config* cfg);

OPO_API opo_status opo_orientation_matrix(const opo_params* params, opo_complex m[4],
                                          double* noise_strength, double* rho);
OPO_API opo_status opo_orientation_lyapunov(double rho, double delta, double gamma_s,
                                            opo_complex p[4]);
OPO_API opo_status opo_theta_variance_closed_form(double rho, double delta_tilde, double* v,
                                                  int* linearization_valid);
OPO_API opo_status opo_slow_relaxation_rate(double delta_tilde, double gamma_s, double* rate);
/* Columns: t, theta_hat, imag_residual. */
OPO_API opo_status opo_estimate_theta(const opo_trajectory* traj, double rho, opo_table** out);
/* Columns: t, var_theta, stderr, v_theta_inf_ref. */
OPO_API opo_status opo_orientation_variance_vs_time(const opo_params* params,
                                                    const opo_orientation_config* cfg,
                                                    opo_table** out);

typedef struct opo_stationary_theta {
  double value;
  double stderr_value;
  double t_burn;
  double mean_imag_residual;
  double mean_imag_residual_stderr;
} opo_stationary_theta;

/* t_burn < 0 selects five slow relaxation times. */
OPO_API opo_status opo_stationary_theta_variance(const opo_params* params,
                                                 const opo_orientation_config* cfg,
                                                 double t_burn, opo_stationary_theta* out);

#ifdef __cplusplus
}
#endif

#endif
