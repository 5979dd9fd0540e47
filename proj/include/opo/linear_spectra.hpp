#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "opo/classical_dynamics.hpp"

namespace opo {

// Drift matrix of the linearized dark-mode pair (a_y, a_y^+) with the pump
// clamped at gamma_s / chi:
//   [ -(gamma_s + i delta)   gamma_s              ]
//   [  gamma_s              -(gamma_s - i delta)  ]
struct StabilityMatrix {
  Eigen::Matrix2cd entries;
  double gamma_s = 1.0;
  double delta = 0.0;
};

enum class SpectrumMethod { MatrixRoute, ClosedForm, Simulated };

struct SpectrumPoint {
  double omega_tilde = 0.0;
  double phi = 0.0;
  double V = 1.0;
  SpectrumMethod method = SpectrumMethod::ClosedForm;
};

// Number of identical cross terms (<a a+> and <a+ a>) in the quadrature
// autocorrelation. Together with the 2 gamma_s output-coupling factor it fixes
// the map from the spectral covariance to V; pinned by the calibration
// V(Delta=0, omega=0, phi=pi/2) = 0.
inline constexpr double kQuadratureCrossTerms = 2.0;

StabilityMatrix stability_matrix(const OpoParams& params);

// gamma_s (L + i w)^-1 (L^T - i w)^-1. Throws SingularityError at
// delta = 0, omega = 0.
Eigen::Matrix2cd spectral_covariance(const StabilityMatrix& mat, double omega);

SpectrumPoint noise_spectrum_matrix(const OpoParams& params, double omega_tilde, double phi);

// Convenience overload in gamma_s = 1 units.
SpectrumPoint noise_spectrum_matrix(double delta_tilde, double omega_tilde, double phi);

SpectrumPoint noise_spectrum_closed_form(double delta_tilde, double omega_tilde, double phi);

struct OptimumSqueezing {
  double omega_opt_tilde = 0.0;
  double V_opt = 0.0;
};

OptimumSqueezing optimum_squeezing(double delta_tilde);

struct SpectrumRow {
  double omega_tilde = 0.0;
  double phi = 0.0;
  double V_matrix = 1.0;
  double V_closed = 1.0;
};

struct SpectrumTable {
  double delta_tilde = 0.0;
  std::vector<SpectrumRow> rows;
  std::size_t skipped_singular = 0;
};

struct OmegaRange {
  double min = -10.0;
  double max = 10.0;
  std::size_t steps = 201;

  double at(std::size_t k) const;
};

// Rows ordered phi-major. Exact singular points are left out and counted.
SpectrumTable spectrum_grid(const OpoParams& params, const OmegaRange& omega,
                            std::span<const double> phis);

}  // namespace opo
