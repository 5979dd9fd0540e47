#pragma once

#include <cstdint>

namespace opo {

struct CrystalSpec {
  double length_lc = 0.0;
  double refractive_index_nc = 2.0;
  double tilt_beta = 0.0;  // radians, tilt in the zx plane
};

struct MirrorSpec {
  double radius_x = 0.0;
  double radius_y = 0.0;

  static MirrorSpec spherical(double radius) { return {radius, radius}; }
  // epsilon = 1 - R_y / R_x
  static MirrorSpec astigmatic(double radius_x, double epsilon) {
    return {radius_x, radius_x * (1.0 - epsilon)};
  }
  double ellipticity() const { return 1.0 - radius_y / radius_x; }
};

// Two-mirror cavity; mirror 2 carries the astigmatism.
struct CavityGeometry {
  double length_L = 1.0;
  MirrorSpec mirror1 = MirrorSpec::spherical(2.0);
  MirrorSpec mirror2 = MirrorSpec::spherical(2.0);
  CrystalSpec crystal{};
  double transmissivity_T = 0.01;
  double speed_of_light_c = 1.0;
};

// The reference cavity used throughout the detuning study:
// R = R_x = 2L, l_c = 0.1 L, n_c = 2, T = 0.01, with L = c = 1.
CavityGeometry reference_cavity(double tilt_beta = 0.0, double epsilon = 0.0);

struct ModeIndex {
  std::uint32_t q = 0;
  std::uint32_t m = 0;
  std::uint32_t n = 0;
};

struct EffectiveLengths {
  double x = 0.0;
  double y = 0.0;
};

struct GParameters {
  double g1x = 0.0;
  double g2x = 0.0;
  double g1y = 0.0;
  double g2y = 0.0;
};

// Throws ValidationError when the crystal, mirror or transmissivity fields
// are out of range. Stability is checked separately by g_parameters.
void validate(const CavityGeometry& geom);

EffectiveLengths effective_lengths(const CavityGeometry& geom);
double optical_length(const CavityGeometry& geom);

// Throws StabilityError unless both g1*g2 products lie strictly in (0,1).
GParameters g_parameters(const CavityGeometry& geom);

double resonance_frequency(const CavityGeometry& geom, ModeIndex mode);

// gamma_s = c T / (4 L_opt)
double signal_decay_rate(const CavityGeometry& geom);

// Signed TEM01 - TEM10 splitting; positive when the y resonance is higher.
double detuning(const CavityGeometry& geom);

// Delta / gamma_s from the exact resonance formula.
double detuning_normalized(const CavityGeometry& geom);

struct SmallAnisotropyDetuning {
  double delta_tilde = 0.0;
  // Set when beta > 0.2 rad or |epsilon| > 0.01, where the leading-order
  // expansion is no longer accurate.
  bool expansion_degraded = false;
};

// Leading-order expansion in beta and epsilon. Requires mirror2.radius_x to
// equal the spherical mirror radius.
SmallAnisotropyDetuning detuning_small_anisotropy(const CavityGeometry& geom);

struct AnisotropyTolerance {
  double beta_max = 0.0;
  double epsilon_max = 0.0;
  double delta_tilde_max = 0.0;
};

// Largest tilt (at zero ellipticity) and largest ellipticity (at zero tilt)
// keeping the optimum dark-mode noise below target_v_opt. Anisotropy already
// present in the template is replaced, not added to.
AnisotropyTolerance anisotropy_tolerance(const CavityGeometry& geom_template,
                                         double target_v_opt);

}  // namespace opo
