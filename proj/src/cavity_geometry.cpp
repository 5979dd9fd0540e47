#include "opo/cavity_geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "opo/errors.hpp"

namespace opo {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

// arccos(sqrt(g1 g2)) after the stability check.
double gouy_phase(double g1, double g2, const char* axis) {
  const double product = g1 * g2;
  if (!(product > 0.0 && product < 1.0)) {
    std::ostringstream msg;
    msg << "unstable cavity: g1" << axis << "*g2" << axis << " = " << product
        << " is outside (0,1)";
    throw StabilityError(msg.str());
  }
  return std::acos(std::sqrt(product));
}

}  // namespace

CavityGeometry reference_cavity(double tilt_beta, double epsilon) {
  CavityGeometry geom;
  geom.length_L = 1.0;
  geom.mirror1 = MirrorSpec::spherical(2.0);
  geom.mirror2 = MirrorSpec::astigmatic(2.0, epsilon);
  geom.crystal = CrystalSpec{0.1, 2.0, tilt_beta};
  geom.transmissivity_T = 0.01;
  geom.speed_of_light_c = 1.0;
  return geom;
}

void validate(const CavityGeometry& geom) {
  const auto& cr = geom.crystal;
  require(std::isfinite(geom.length_L) && geom.length_L > 0.0,
          "cavity length L must be positive");
  require(std::isfinite(cr.length_lc) && cr.length_lc >= 0.0,
          "crystal length lc must be non-negative");
  require(cr.length_lc <= geom.length_L,
          "crystal length lc cannot exceed the cavity length L");
  require(std::isfinite(cr.refractive_index_nc) && cr.refractive_index_nc > 1.0,
          "crystal refractive index nc must exceed 1");
  require(std::isfinite(cr.tilt_beta) &&
              std::abs(cr.tilt_beta) < std::numbers::pi / 2,
          "crystal tilt |beta| must be below pi/2");
  for (const MirrorSpec* mirror : {&geom.mirror1, &geom.mirror2}) {
    require(std::isfinite(mirror->radius_x) && mirror->radius_x > 0.0 &&
                std::isfinite(mirror->radius_y) && mirror->radius_y > 0.0,
            "mirror curvature radii must be positive (concave mirrors)");
  }
  require(geom.transmissivity_T > 0.0 && geom.transmissivity_T < 1.0,
          "output-coupler transmissivity T must lie in (0,1)");
  require(std::isfinite(geom.speed_of_light_c) && geom.speed_of_light_c > 0.0,
          "speed of light c must be positive");
}

EffectiveLengths effective_lengths(const CavityGeometry& geom) {
  validate(geom);
  const double L = geom.length_L;
  const double lc = geom.crystal.length_lc;
  const double n2 = geom.crystal.refractive_index_nc * geom.crystal.refractive_index_nc;
  const double beta = geom.crystal.tilt_beta;
  const double s2 = std::sin(beta) * std::sin(beta);
  const double c = std::abs(std::cos(beta));
  const double root = std::sqrt(n2 - s2);

  EffectiveLengths out;
  out.x = L - lc * (c + (s2 * (2.0 * n2 - s2) - n2) / (root * root * root));
  out.y = L - lc * (c - std::cos(beta) * std::cos(beta) / root);
  return out;
}

double optical_length(const CavityGeometry& geom) {
  validate(geom);
  const double n = geom.crystal.refractive_index_nc;
  const double beta = geom.crystal.tilt_beta;
  const double s = std::sin(beta);
  return geom.length_L +
         (std::sqrt(n * n - s * s) - std::abs(std::cos(beta))) * geom.crystal.length_lc;
}

GParameters g_parameters(const CavityGeometry& geom) {
  const EffectiveLengths leff = effective_lengths(geom);
  GParameters g;
  g.g1x = 1.0 - leff.x / geom.mirror1.radius_x;
  g.g2x = 1.0 - leff.x / geom.mirror2.radius_x;
  g.g1y = 1.0 - leff.y / geom.mirror1.radius_y;
  g.g2y = 1.0 - leff.y / geom.mirror2.radius_y;
  gouy_phase(g.g1x, g.g2x, "x");
  gouy_phase(g.g1y, g.g2y, "y");
  return g;
}

double resonance_frequency(const CavityGeometry& geom, ModeIndex mode) {
  const GParameters g = g_parameters(geom);
  const double phase_x = gouy_phase(g.g1x, g.g2x, "x");
  const double phase_y = gouy_phase(g.g1y, g.g2y, "y");
  const double pi = std::numbers::pi;
  return (pi * geom.speed_of_light_c / optical_length(geom)) *
         (mode.q + (mode.m + 0.5) * phase_x / pi + (mode.n + 0.5) * phase_y / pi);
}

double signal_decay_rate(const CavityGeometry& geom) {
  return geom.speed_of_light_c * geom.transmissivity_T / (4.0 * optical_length(geom));
}

double detuning(const CavityGeometry& geom) {
  const GParameters g = g_parameters(geom);
  const double phase_x = gouy_phase(g.g1x, g.g2x, "x");
  const double phase_y = gouy_phase(g.g1y, g.g2y, "y");
  return geom.speed_of_light_c * (phase_y - phase_x) / optical_length(geom);
}

double detuning_normalized(const CavityGeometry& geom) {
  return detuning(geom) / signal_decay_rate(geom);
}

SmallAnisotropyDetuning detuning_small_anisotropy(const CavityGeometry& geom) {
  validate(geom);
  const double R = geom.mirror1.radius_x;
  if (std::abs(geom.mirror2.radius_x - R) > 1e-12 * R ||
      std::abs(geom.mirror1.radius_y - R) > 1e-12 * R) {
    throw ValidationError(
        "small-anisotropy detuning requires a spherical mirror 1 and R2x = R");
  }
  const double lc = geom.crystal.length_lc;
  const double n = geom.crystal.refractive_index_nc;
  const double beta = geom.crystal.tilt_beta;
  const double eps = geom.mirror2.ellipticity();

  // Isotropic g-parameter of the untilted cavity.
  const double l_eff = geom.length_L - lc * (1.0 - 1.0 / n);
  const double g = 1.0 - l_eff / R;
  if (!(g * g > 0.0 && g * g < 1.0)) {
    throw StabilityError("isotropic cavity is unstable: g^2 outside (0,1)");
  }

  const double tilt_term =
      2.0 * lc * (n * n - 1.0) * beta * beta / (R * n * n * n * std::sqrt(1.0 - g * g));
  const double mirror_term = std::sqrt((1.0 - g) / (1.0 + g)) * std::abs(eps);

  SmallAnisotropyDetuning out;
  out.delta_tilde = (2.0 / geom.transmissivity_T) * (tilt_term + mirror_term);
  out.expansion_degraded = std::abs(beta) > 0.2 || std::abs(eps) > 0.01;
  return out;
}

namespace {

// Bisection for the largest x in [0, limit) with |delta_tilde(x)| <= bound,
// assuming monotone growth. The upper bracket is found by doubling.
template <class Detuning>
double largest_within(Detuning&& delta_tilde_at, double bound, double first_guess,
                      double limit, const char* name) {
  auto excess = [&](double x) {
    double value = 0.0;
    try {
      value = std::abs(delta_tilde_at(x));
    } catch (const StabilityError&) {
      // Anything beyond the stability edge is certainly out of tolerance.
      return 1.0;
    }
    return value - bound;
  };

  if (excess(0.0) > 0.0) {
    throw NoBracketError(std::string("target already violated at zero ") + name);
  }
  double lo = 0.0;
  double hi = first_guess;
  while (excess(hi) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi >= limit) {
      if (excess(std::nextafter(limit, 0.0)) <= 0.0) {
        throw NoBracketError(std::string("no ") + name +
                             " within the validity range exceeds the target detuning");
      }
      hi = std::nextafter(limit, 0.0);
      break;
    }
  }
  auto converged = [](double a, double b) { return std::abs(b - a) <= 1e-6 * std::abs(b); };
  const auto bracket = boost::math::tools::bisect(excess, lo, hi, converged);
  return bracket.first;
}

}  // namespace

AnisotropyTolerance anisotropy_tolerance(const CavityGeometry& geom_template,
                                         double target_v_opt) {
  if (!(target_v_opt > 0.0 && target_v_opt < 1.0)) {
    throw ValidationError("target optimum noise must lie in (0,1)");
  }
  validate(geom_template);

  AnisotropyTolerance out;
  // Inverse of V_opt = |D| / (1 + |D|).
  out.delta_tilde_max = target_v_opt / (1.0 - target_v_opt);

  const double radius_2x = geom_template.mirror2.radius_x;

  auto tilted = [&](double beta) {
    CavityGeometry g = geom_template;
    g.crystal.tilt_beta = beta;
    g.mirror2 = MirrorSpec::spherical(radius_2x);
    return detuning_normalized(g);
  };
  auto elliptic = [&](double eps) {
    CavityGeometry g = geom_template;
    g.crystal.tilt_beta = 0.0;
    g.mirror2 = MirrorSpec::astigmatic(radius_2x, eps);
    return detuning_normalized(g);
  };

  out.beta_max = largest_within(tilted, out.delta_tilde_max, std::numbers::pi / 180.0,
                                std::numbers::pi / 2, "tilt");
  out.epsilon_max = largest_within(elliptic, out.delta_tilde_max, 1e-4, 1.0, "ellipticity");
  return out;
}

}  // namespace opo
