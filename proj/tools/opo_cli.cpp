// Command-line front end. Talks to the toolkit only through opo_api.h.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "opo/opo_api.h"

namespace {

using json = nlohmann::ordered_json;

// Exit codes.
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSingularity = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitIo = 5;

struct CliError {
  int code;
  std::string message;
};

int exit_code_for(opo_status s) {
  switch (s) {
    case OPO_OK:
      return kExitOk;
    case OPO_ERR_SINGULARITY:
      return kExitSingularity;
    case OPO_ERR_DIVERGENCE_BUDGET:
    case OPO_ERR_DIVERGENCE:
    case OPO_ERR_TRAJECTORY_DIVERGED:
      return kExitDivergence;
    case OPO_ERR_IO:
      return kExitIo;
    case OPO_ERR_INTERNAL:
      return kExitInternal;
    default:
      return kExitConfig;
  }
}

void check(opo_status s) {
  if (s != OPO_OK) {
    throw CliError{exit_code_for(s), std::string(opo_status_name(s)) + ": " + opo_last_error()};
  }
}

// ---- parameters ------------------------------------------------------

enum class Kind { Real, Angle, Count, Choice, AngleList, Text };

struct Param {
  std::string key;
  Kind kind;
  json fallback;  // null = unset
  std::string help;
  std::vector<std::string> choices{};

  std::string flag() const {
    std::string f = "--" + key;
    for (auto& ch : f)
      if (ch == '_') ch = '-';
    return f;
  }
};

double parse_real(const std::string& key, const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || *end != '\0' || !std::isfinite(v))
    throw CliError{kExitConfig, key + ": expected a number, got '" + text + "'"};
  return v;
}

// Bare numbers are radians; a "deg" suffix selects degrees.
double parse_angle(const std::string& key, std::string text) {
  while (!text.empty() && text.back() == ' ') text.pop_back();
  if (text.size() > 3 && text.compare(text.size() - 3, 3, "deg") == 0) {
    return parse_real(key, text.substr(0, text.size() - 3)) * std::numbers::pi / 180.0;
  }
  return parse_real(key, text);
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
    throw CliError{kExitConfig, key + ": expected a non-negative integer, got '" + text + "'"};
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw CliError{kExitConfig, key + ": integer out of range: " + text};
  }
}

json convert_text(const Param& s, const std::string& text) {
  switch (s.kind) {
    case Kind::Real:
      return parse_real(s.key, text);
    case Kind::Angle:
      return parse_angle(s.key, text);
    case Kind::Count:
      return parse_count(s.key, text);
    case Kind::Choice:
      if (std::find(s.choices.begin(), s.choices.end(), text) == s.choices.end()) {
        std::string allowed;
        for (const auto& c : s.choices) allowed += (allowed.empty() ? "" : ", ") + c;
        throw CliError{kExitConfig, s.key + ": '" + text + "' is not one of " + allowed};
      }
      return text;
    case Kind::Text:
      return text;
    case Kind::AngleList:
      return json::array({parse_angle(s.key, text)});
  }
  return nullptr;
}

json convert_json(const Param& s, const json& v) {
  if (v.is_null()) return nullptr;
  if (v.is_string()) return convert_text(s, v.get<std::string>());
  switch (s.kind) {
    case Kind::Real:
    case Kind::Angle:
      if (v.is_number()) return v.get<double>();
      break;
    case Kind::Count:
      if (v.is_number_unsigned()) return v.get<std::uint64_t>();
      if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
      break;
    case Kind::AngleList:
      if (v.is_number()) return json::array({v.get<double>()});
      if (v.is_array()) {
        json out = json::array();
        for (const auto& item : v) {
          if (item.is_number())
            out.push_back(item.get<double>());
          else if (item.is_string())
            out.push_back(parse_angle(s.key, item.get<std::string>()));
          else
            throw CliError{kExitConfig, s.key + ": list entries must be numbers or strings"};
        }
        return out;
      }
      break;
    default:
      break;
  }
  throw CliError{kExitConfig, s.key + ": unsupported value " + v.dump()};
}

// ---- output helpers ------------------------------------------------------

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << '\n';
  }
  void row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      out_ << (first ? "" : ",") << fmt(v);
      first = false;
    }
    out_ << '\n';
    ++rows_;
  }
  void raw_row(const std::string& line) {
    out_ << line << '\n';
    ++rows_;
  }
  std::string str() const { return out_.str(); }
  std::size_t rows() const { return rows_; }

 private:
  std::ostringstream out_;
  std::size_t rows_ = 0;
};

struct TableHandle {
  opo_table* t = nullptr;
  ~TableHandle() { opo_table_destroy(t); }
  double at(std::size_t r, std::size_t c) const { return opo_table_data(t)[r * opo_table_cols(t) + c]; }
  std::size_t rows() const { return opo_table_rows(t); }
};

struct GeometryHandle {
  opo_geometry* g = nullptr;
  ~GeometryHandle() { opo_geometry_destroy(g); }
};

struct EnsembleHandle {
  opo_ensemble* e = nullptr;
  ~EnsembleHandle() { opo_ensemble_destroy(e); }
};

struct RunOutput {
  std::string csv;
  json info = json::object();
  std::vector<std::pair<std::string, std::string>> extra_files;  // path, content
};

double num(const json& cfg, const char* key) { return cfg.at(key).get<double>(); }
std::uint64_t count(const json& cfg, const char* key) { return cfg.at(key).get<std::uint64_t>(); }
std::string text(const json& cfg, const char* key) { return cfg.at(key).get<std::string>(); }

std::vector<double> angles(const json& cfg, const char* key) {
  return cfg.at(key).get<std::vector<double>>();
}

unsigned threads_of(const json& cfg) {
  const auto n = count(cfg, "threads");
  return n == 0 ? std::max(1u, std::thread::hardware_concurrency()) : static_cast<unsigned>(n);
}

std::vector<double> linspace(double lo, double hi, std::uint64_t steps) {
  if (steps == 0) throw CliError{kExitConfig, "sweep steps must be at least 1"};
  if (lo == hi || steps == 1) return {lo};
  std::vector<double> v(steps);
  for (std::uint64_t k = 0; k < steps; ++k)
    v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1);
  return v;
}

// ---- geometry --------------------------------------------------------

std::vector<Param> cavity_params() {
  return {
      {"L", Kind::Real, 1.0, "cavity length"},
      {"R", Kind::Real, 2.0, "spherical mirror radius"},
      {"R2x", Kind::Real, 2.0, "astigmatic mirror radius along x"},
      {"R2y", Kind::Real, nullptr, "astigmatic mirror radius along y (excludes --epsilon)"},
      {"epsilon", Kind::Real, nullptr, "ellipticity 1 - R2y/R2x (excludes --R2y)"},
      {"lc", Kind::Real, 0.1, "crystal length"},
      {"nc", Kind::Real, 2.0, "crystal refractive index"},
      {"beta", Kind::Angle, 0.0, "crystal tilt (radians, or with deg suffix)"},
      {"T", Kind::Real, 0.01, "output coupler transmissivity"},
      {"c", Kind::Real, 1.0, "speed of light"},
  };
}

opo_geometry_desc cavity_desc(const json& cfg, std::optional<double> beta,
                              std::optional<double> epsilon) {
  opo_geometry_desc d;
  d.L = num(cfg, "L");
  d.R = num(cfg, "R");
  d.R2x = num(cfg, "R2x");
  d.lc = num(cfg, "lc");
  d.nc = num(cfg, "nc");
  d.T = num(cfg, "T");
  d.c = num(cfg, "c");
  d.beta = beta ? *beta : num(cfg, "beta");
  if (epsilon) {
    d.R2y = d.R2x * (1.0 - *epsilon);
  } else if (!cfg.at("R2y").is_null()) {
    d.R2y = num(cfg, "R2y");
  } else {
    const double eps = cfg.at("epsilon").is_null() ? 0.0 : num(cfg, "epsilon");
    d.R2y = d.R2x * (1.0 - eps);
  }
  return d;
}

void check_astigmatism_keys(const json& cfg) {
  if (!cfg.at("R2y").is_null() && !cfg.at("epsilon").is_null())
    throw CliError{kExitConfig, "R2y and epsilon both set; give only one of them"};
}

RunOutput run_geometry(const json& cfg) {
  check_astigmatism_keys(cfg);
  const std::string sweep = text(cfg, "sweep");
  Csv csv({"beta_rad", "epsilon", "delta_over_gammas_exact", "delta_over_gammas_approx"});
  std::size_t degraded_rows = 0, approx_unavailable = 0;

  auto emit = [&](const opo_geometry_desc& d) {
    GeometryHandle g;
    check(opo_geometry_create(&d, &g.g));
    double exact = 0.0;
    check(opo_geometry_detuning_normalized(g.g, &exact));
    double approx = std::nan("");
    int degraded = 0;
    const opo_status s = opo_geometry_detuning_small_anisotropy(g.g, &approx, &degraded);
    if (s == OPO_ERR_VALIDATION) {
      approx = std::nan("");
      ++approx_unavailable;
    } else {
      check(s);
    }
    degraded_rows += degraded ? 1 : 0;
    csv.row({d.beta, 1.0 - d.R2y / d.R2x, exact, approx});
  };

  if (sweep == "point") {
    emit(cavity_desc(cfg, std::nullopt, std::nullopt));
  } else {
    if (sweep == "both" || sweep == "beta") {
      for (double b : linspace(num(cfg, "beta_min"), num(cfg, "beta_max"), count(cfg, "beta_steps")))
        emit(cavity_desc(cfg, b, 0.0));
    }
    if (sweep == "both" || sweep == "epsilon") {
      for (double e : linspace(num(cfg, "epsilon_min"), num(cfg, "epsilon_max"),
                               count(cfg, "epsilon_steps")))
        emit(cavity_desc(cfg, 0.0, e));
    }
  }
  if (degraded_rows)
    std::cerr << "warning: " << degraded_rows
              << " rows lie where the small-anisotropy expansion degrades\n";
  if (approx_unavailable)
    std::cerr << "warning: approximate column unavailable (needs R2x equal to R)\n";

  RunOutput out;
  out.csv = csv.str();
  out.info["rows"] = csv.rows();
  out.info["approx_degraded_rows"] = degraded_rows;
  out.info["approx_unavailable_rows"] = approx_unavailable;
  return out;
}

RunOutput run_tolerance(const json& cfg) {
  check_astigmatism_keys(cfg);
  GeometryHandle g;
  const opo_geometry_desc d = cavity_desc(cfg, std::nullopt, std::nullopt);
  check(opo_geometry_create(&d, &g.g));
  double beta_max = 0.0, eps_max = 0.0, dmax = 0.0;
  const double target = num(cfg, "target_v");
  check(opo_anisotropy_tolerance(g.g, target, &beta_max, &eps_max, &dmax));
  Csv csv({"target_v", "delta_tilde_max", "beta_max_rad", "beta_max_deg", "epsilon_max"});
  csv.row({target, dmax, beta_max, beta_max * 180.0 / std::numbers::pi, eps_max});
  RunOutput out;
  out.csv = csv.str();
  return out;
}

// ---- dynamics ----------------------------------------------------------

std::vector<Param> dynamics_params(double chi_tilde) {
  return {
      {"sigma", Kind::Real, 1.5, "pump amplitude over the TEM10 threshold"},
      {"chi_tilde", Kind::Real, chi_tilde, "nonlinear coupling chi / gamma_s"},
      {"gamma_p_tilde", Kind::Real, 1.0, "pump decay gamma_p / gamma_s"},
      {"delta_tilde", Kind::Real, 0.2, "TEM01 detuning Delta / gamma_s"},
  };
}

opo_params dynamics_params(const json& cfg) {
  opo_params p;
  check(opo_params_dimensionless(num(cfg, "sigma"), num(cfg, "chi_tilde"),
                                 num(cfg, "gamma_p_tilde"), num(cfg, "delta_tilde"), &p));
  return p;
}

RunOutput run_steady_state(const json& cfg) {
  const opo_params p = dynamics_params(cfg);
  opo_steady_state ss;
  check(opo_steady_state_solve(&p, &ss));
  double ex = 0.0, ey = 0.0;
  check(opo_thresholds(&p, &ex, &ey));

  Csv csv({"branch", "re_alpha0", "im_alpha0", "rho", "E_th_x", "E_th_y"});
  csv.raw_row(std::string(ss.above_threshold ? "above" : "below") + "," + fmt(ss.alpha0.re) +
              "," + fmt(ss.alpha0.im) + "," + fmt(ss.rho) + "," + fmt(ex) + "," + fmt(ey));
  RunOutput out;
  out.csv = csv.str();

  const std::string traj_path = text(cfg, "trajectory_out");
  if (!traj_path.empty()) {
    // Perturb the classical fixed point along both signal modes.
    const double scale = num(cfg, "perturbation") * std::max(ss.rho, 1.0);
    const opo_complex ax{ss.alphax.re + scale, ss.alphax.im};
    const opo_complex ay{scale, scale};
    TableHandle t;
    check(opo_integrate_classical(&p, ss.alpha0, ax, ay, num(cfg, "t_end"), num(cfg, "dt"),
                                  count(cfg, "stride"), &t.t));
    Csv traj({"t", "re_a0", "im_a0", "re_ax", "im_ax", "re_ay", "im_ay"});
    for (std::size_t r = 0; r < t.rows(); ++r)
      traj.row({t.at(r, 0), t.at(r, 1), t.at(r, 2), t.at(r, 3), t.at(r, 4), t.at(r, 5),
                t.at(r, 6)});
    out.extra_files.emplace_back(traj_path, traj.str());
    out.info["trajectory_rows"] = traj.rows();
  }
  return out;
}

RunOutput run_spectrum(const json& cfg) {
  opo_params p;
  check(opo_params_dimensionless(1.5, 1e-3, 1.0, num(cfg, "delta_tilde"), &p));
  const auto phis = angles(cfg, "phi");
  TableHandle t;
  std::size_t skipped = 0;
  check(opo_spectrum_grid(&p, num(cfg, "omega_min"), num(cfg, "omega_max"),
                          count(cfg, "omega_steps"), phis.data(), phis.size(), &t.t, &skipped));
  Csv csv({"omega_tilde", "phi_rad", "V_matrix", "V_closed"});
  for (std::size_t r = 0; r < t.rows(); ++r) csv.row({t.at(r, 0), t.at(r, 1), t.at(r, 2), t.at(r, 3)});
  if (t.rows() == 0 && skipped > 0)
    throw CliError{kExitSingularity, "every requested point sits on the spectral pole"};
  if (skipped) std::cerr << "note: " << skipped << " singular grid points omitted\n";
  RunOutput out;
  out.csv = csv.str();
  out.info["skipped_singular"] = skipped;
  return out;
}

opo_scheme scheme_of(const json& cfg) {
  return text(cfg, "scheme") == "midpoint" ? OPO_SCHEME_SEMI_IMPLICIT_MIDPOINT
                                           : OPO_SCHEME_EULER_MARUYAMA;
}

RunOutput run_simulate(const json& cfg) {
  const opo_params p = dynamics_params(cfg);
  opo_sde_config sc;
  opo_sde_config_default(&sc);
  sc.dt = num(cfg, "dt");
  sc.t_burn = num(cfg, "t_burn");
  sc.t_sample = num(cfg, "t_sample");
  sc.n_traj = count(cfg, "n_traj");
  sc.seed = count(cfg, "seed");
  sc.divergence_threshold = num(cfg, "divergence_threshold");
  sc.scheme = scheme_of(cfg);
  sc.sample_dt = num(cfg, "sample_dt");
  sc.threads = threads_of(cfg);
  sc.max_divergence_fraction = num(cfg, "max_divergence_fraction");
  opo_spectral_config spec;
  spec.segments = count(cfg, "segments");
  spec.omega_max = num(cfg, "omega_max");
  const auto phis = angles(cfg, "phi");
  const opo_mode mode = text(cfg, "mode") == "x" ? OPO_MODE_X : OPO_MODE_Y;

  if (sc.dt > 1e-3) std::cerr << "warning: dt above 1e-3 may bias the stochastic estimates\n";

  EnsembleHandle e;
  check(opo_simulate_spectrum(&p, &sc, &spec, mode, phis.data(), phis.size(), &e.e));
  TableHandle t;
  check(opo_ensemble_spectrum(e.e, &t.t));

  Csv csv({"omega_tilde", "phi_rad", "V_hat", "V_stderr", "V_imag_abs", "V_closed_ref"});
  for (std::size_t r = 0; r < t.rows(); ++r)
    csv.row({t.at(r, 0), t.at(r, 1), t.at(r, 2), t.at(r, 3), std::abs(t.at(r, 4)), t.at(r, 6)});

  opo_ensemble_summary s;
  check(opo_ensemble_summary_get(e.e, &s));
  json diverged = json::array();
  for (std::size_t k = 0; k < opo_ensemble_diverged_count(e.e); ++k) {
    std::uint64_t idx = 0;
    check(opo_ensemble_diverged_index(e.e, k, &idx));
    diverged.push_back({{"traj_index", idx}, {"seed", sc.seed}});
  }
  RunOutput out;
  out.csv = csv.str();
  out.info["n_traj"] = s.n_traj;
  out.info["n_diverged"] = s.n_diverged;
  out.info["divergence_log"] = diverged;
  out.info["branch_cut_crossings"] = s.branch_cut_crossings;
  out.info["usable_segments"] = s.usable_segments;
  out.info["mean_ax"] = {s.mean_ax.re, s.mean_ax.im};
  out.info["mean_ax_stderr"] = s.mean_ax_stderr;
  out.info["mean_ay"] = {s.mean_ay.re, s.mean_ay.im};
  out.info["mean_ay_stderr"] = s.mean_ay_stderr;
  out.info["step_warning"] = s.step_warning != 0;
  return out;
}

RunOutput run_orientation(const json& cfg) {
  const bool has_rho2 = !cfg.at("rho2").is_null();
  opo_params p;
  if (has_rho2) {
    if (!cfg.at("chi_tilde").is_null())
      throw CliError{kExitConfig, "rho2 and chi_tilde both set; give only one of them"};
    check(opo_params_from_rho2(num(cfg, "rho2"), num(cfg, "sigma"), num(cfg, "gamma_p_tilde"),
                               num(cfg, "delta_tilde"), &p));
  } else {
    const double chi = cfg.at("chi_tilde").is_null() ? 1e-2 : num(cfg, "chi_tilde");
    check(opo_params_dimensionless(num(cfg, "sigma"), chi, num(cfg, "gamma_p_tilde"),
                                   num(cfg, "delta_tilde"), &p));
  }
  opo_orientation_config oc;
  opo_orientation_config_default(&oc);
  oc.fidelity = text(cfg, "fidelity") == "full" ? OPO_FIDELITY_FULL : OPO_FIDELITY_REDUCED;
  oc.dt = num(cfg, "dt");
  oc.t_end = num(cfg, "t_end");
  oc.sample_dt = num(cfg, "sample_dt");
  oc.n_traj = count(cfg, "n_traj");
  oc.seed = count(cfg, "seed");
  oc.threads = threads_of(cfg);
  oc.scheme = scheme_of(cfg);

  TableHandle t;
  check(opo_orientation_variance_vs_time(&p, &oc, &t.t));
  Csv csv({"t", "var_theta", "stderr", "v_theta_inf_ref"});
  for (std::size_t r = 0; r < t.rows(); ++r) csv.row({t.at(r, 0), t.at(r, 1), t.at(r, 2), t.at(r, 3)});

  opo_steady_state ss;
  check(opo_steady_state_solve(&p, &ss));
  RunOutput out;
  out.csv = csv.str();
  out.info["rho2"] = ss.rho * ss.rho;
  out.info["chi_tilde"] = p.chi;
  if (p.delta != 0.0) {
    double v = 0.0;
    int valid = 0;
    check(opo_theta_variance_closed_form(ss.rho, p.delta / p.gamma_s, &v, &valid));
    out.info["v_theta_inf"] = v;
    out.info["linearization_valid"] = valid != 0;
    if (!valid) std::cerr << "warning: V_theta_inf >= 0.1, small-angle expansion unreliable\n";
    double rate = 0.0;
    check(opo_slow_relaxation_rate(p.delta / p.gamma_s, p.gamma_s, &rate));
    out.info["slow_relaxation_rate"] = rate;
  }
  return out;
}

// ---- command table ----------------------------------------------------

struct Command {
  std::string name;
  std::string help;
  std::vector<Param> specs;
  std::function<RunOutput(const json&)> run;
};

std::vector<Param> join(std::vector<Param> a, const std::vector<Param>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::vector<std::string> kSchemes{"euler-maruyama", "midpoint"};

std::vector<Command> commands() {
  std::vector<Command> cmds;
  cmds.push_back({"geometry", "TEM01/TEM10 detuning versus tilt and ellipticity",
                  join(cavity_params(),
                       {{"sweep", Kind::Choice, "both", "which sweep to run",
                         {"both", "beta", "epsilon", "point"}},
                        {"beta_min", Kind::Angle, 0.0, "tilt sweep start"},
                        {"beta_max", Kind::Angle, 10.0 * std::numbers::pi / 180.0, "tilt sweep end"},
                        {"beta_steps", Kind::Count, 101, "tilt sweep points"},
                        {"epsilon_min", Kind::Real, 0.0, "ellipticity sweep start"},
                        {"epsilon_max", Kind::Real, 3e-3, "ellipticity sweep end"},
                        {"epsilon_steps", Kind::Count, 101, "ellipticity sweep points"}}),
                  run_geometry});
  cmds.push_back({"tolerance", "largest tilt and ellipticity compatible with a target V_opt",
                  join(cavity_params(), {{"target_v", Kind::Real, 0.0909, "target optimum noise"}}),
                  run_tolerance});
  cmds.push_back({"steady-state", "classical thresholds and steady state",
                  join(dynamics_params(1e-3),
                       {{"trajectory_out", Kind::Text, "", "also write a classical trajectory CSV"},
                        {"t_end", Kind::Real, 50.0, "trajectory duration"},
                        {"dt", Kind::Real, 1e-3, "trajectory step"},
                        {"stride", Kind::Count, 100, "store every n-th step"},
                        {"perturbation", Kind::Real, 1e-2, "initial kick relative to max(rho,1)"}}),
                  run_steady_state});
  cmds.push_back({"spectrum", "analytic dark-mode noise spectra",
                  {{"delta_tilde", Kind::Real, 0.1, "TEM01 detuning Delta / gamma_s"},
                   {"phi", Kind::AngleList, json::array({0.0, std::numbers::pi / 2}),
                    "quadrature angle (repeatable)"},
                   {"omega_min", Kind::Real, -10.0, "lowest omega / gamma_s"},
                   {"omega_max", Kind::Real, 10.0, "highest omega / gamma_s"},
                   {"omega_steps", Kind::Count, 201, "grid points"}},
                  run_spectrum});
  cmds.push_back({"simulate", "stochastic estimate of the noise spectrum",
                  join(dynamics_params(1e-3),
                       {{"dt", Kind::Real, 1e-3, "integration step"},
                        {"t_burn", Kind::Real, 100.0, "burn-in duration"},
                        {"t_sample", Kind::Real, 400.0, "sampled duration per trajectory"},
                        {"sample_dt", Kind::Real, 0.05, "sample spacing"},
                        {"n_traj", Kind::Count, 400, "trajectories"},
                        {"phi", Kind::AngleList, json::array({std::numbers::pi / 2}),
                         "quadrature angle (repeatable)"},
                        {"mode", Kind::Choice, "y", "signal mode", {"x", "y"}},
                        {"scheme", Kind::Choice, "euler-maruyama", "integrator", kSchemes},
                        {"segments", Kind::Count, 8, "segments per trajectory"},
                        {"omega_max", Kind::Real, 10.0, "largest reported omega / gamma_s"},
                        {"divergence_threshold", Kind::Real, 0.0, "|a| bound, 0 = 1e6 max(rho,1)"},
                        {"max_divergence_fraction", Kind::Real, 0.01, "allowed diverged fraction"}}),
                  run_simulate});
  cmds.push_back({"orientation", "bright-mode orientation variance versus time",
                  {{"delta_tilde", Kind::Real, 0.1, "TEM01 detuning Delta / gamma_s"},
                   {"rho2", Kind::Real, nullptr, "bright intensity rho^2 (sets chi_tilde)"},
                   {"sigma", Kind::Real, 1.5, "pump amplitude over threshold"},
                   {"chi_tilde", Kind::Real, nullptr, "nonlinear coupling (default 1e-2)"},
                   {"gamma_p_tilde", Kind::Real, 1.0, "pump decay gamma_p / gamma_s"},
                   {"fidelity", Kind::Choice, "reduced", "model", {"reduced", "full"}},
                   {"dt", Kind::Real, 1e-2, "integration step"},
                   {"t_end", Kind::Real, 50.0, "duration"},
                   {"sample_dt", Kind::Real, 0.5, "sample spacing"},
                   {"n_traj", Kind::Count, 200, "trajectories"},
                   {"scheme", Kind::Choice, "euler-maruyama", "integrator", kSchemes}},
                  run_orientation});
  for (auto& c : cmds) {
    c.specs.push_back({"seed", Kind::Count, 1, "random seed"});
    c.specs.push_back({"threads", Kind::Count, 0, "worker threads (0 = all cores)"});
  }
  return cmds;
}

// ---- config resolution ------------------------------------------------

json read_config_file(const std::string& path, const std::string& subcommand) {
  std::ifstream in(path);
  if (!in) throw CliError{kExitIo, "cannot read config file " + path};
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CliError{kExitConfig, "config file " + path + ": " + e.what()};
  }
  if (!doc.is_object()) throw CliError{kExitConfig, "config file must hold a JSON object"};
  // A run sidecar nests the resolved values under "config".
  if (doc.contains("config") && doc.contains("subcommand")) {
    if (doc["subcommand"] != subcommand)
      throw CliError{kExitConfig, "sidecar was written by '" + doc["subcommand"].get<std::string>() +
                                      "', not '" + subcommand + "'"};
    doc = doc["config"];
  }
  return doc;
}

json resolve(const Command& cmd, const json& file_cfg,
             const std::map<std::string, std::vector<std::string>>& given) {
  json resolved = json::object();
  for (const auto& s : cmd.specs) resolved[s.key] = s.fallback;

  for (const auto& [key, value] : file_cfg.items()) {
    const auto it = std::find_if(cmd.specs.begin(), cmd.specs.end(),
                                 [&](const Param& s) { return s.key == key; });
    if (it == cmd.specs.end())
      throw CliError{kExitConfig, "config key '" + key + "' is not used by " + cmd.name};
    resolved[key] = convert_json(*it, value);
  }
  for (const auto& s : cmd.specs) {
    const auto it = given.find(s.key);
    if (it == given.end() || it->second.empty()) continue;
    if (s.kind == Kind::AngleList) {
      json list = json::array();
      for (const auto& v : it->second) list.push_back(parse_angle(s.key, v));
      resolved[s.key] = list;
    } else {
      resolved[s.key] = convert_text(s, it->second.back());
    }
  }
  return resolved;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError{kExitIo, "cannot open " + path + " for writing"};
  out << content;
  out.close();
  if (!out) throw CliError{kExitIo, "failed writing " + path};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anisotropic two-transverse-mode OPO toolkit"};
  app.set_version_flag("--version", std::string(opo_version()));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_path;
  app.add_option("--config", config_path, "JSON config or run sidecar; flags override it");
  app.add_option("--out", out_path, "output CSV path ('-' for stdout)");

  const auto cmds = commands();
  std::map<std::string, std::map<std::string, std::vector<std::string>>> raw;
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    subs[c.name] = sub;
    auto& store = raw[c.name];
    for (const auto& s : c.specs) {
      auto& slot = store[s.key];
      if (s.key == "seed" || s.key == "threads") {
        // Global flags; accepted on either side of the subcommand.
        continue;
      }
      auto* opt = sub->add_option(s.flag(), slot, s.help);
      if (s.kind == Kind::AngleList) opt->delimiter(',');
      else opt->expected(1);
      if (!s.fallback.is_null() && s.kind != Kind::AngleList) opt->description(s.help + " [" + s.fallback.dump() + "]");
    }
    if (c.name == "orientation") {
      sub->add_flag_callback("--reduced", [&store] { store["fidelity"] = {"reduced"}; },
                             "reduced linear SDE");
      sub->add_flag_callback("--full", [&store] { store["fidelity"] = {"full"}; },
                             "full nonlinear engine");
    }
  }
  std::vector<std::string> seed_text, threads_text;
  app.add_option("--seed", seed_text, "random seed (u64)")->expected(1);
  app.add_option("--threads", threads_text, "worker threads (0 = all cores)")->expected(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    const Command* cmd = nullptr;
    for (const auto& c : cmds)
      if (subs[c.name]->parsed()) cmd = &c;
    if (!cmd) throw CliError{kExitConfig, "no subcommand given"};

    auto given = raw[cmd->name];
    if (!seed_text.empty()) given["seed"] = seed_text;
    if (!threads_text.empty()) given["threads"] = threads_text;

    const json file_cfg =
        config_path.empty() ? json::object() : read_config_file(config_path, cmd->name);
    const json resolved = resolve(*cmd, file_cfg, given);

    RunOutput result = cmd->run(resolved);

    const std::string target = out_path.empty() ? cmd->name + ".csv" : out_path;
    for (const auto& [path, content] : result.extra_files) write_file(path, content);
    if (target == "-") {
      std::cout << result.csv;
      std::cout.flush();
      return kExitOk;
    }
    write_file(target, result.csv);

    json sidecar = json::object();
    sidecar["tool"] = "opo";
    sidecar["version"] = opo_version();
    sidecar["subcommand"] = cmd->name;
    sidecar["config"] = resolved;
    sidecar["output"] = target;
    sidecar["run"] = result.info;
    write_file(target + ".meta.json", sidecar.dump(2) + "\n");
    return kExitOk;
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}
