#include "opo/linear_spectra.hpp"

#include <cmath>
#include <complex>

#include "opo/errors.hpp"

namespace opo {

namespace {

constexpr double kCosineZero = 1e-12;

bool is_pole(double delta, double omega) { return delta == 0.0 && omega == 0.0; }

// V from the spectral covariance of (a_y, a_y^+).
double quadrature_noise(const Eigen::Matrix2cd& cov, double gamma_s, double phi) {
  const cplx rotation = std::polar(1.0, -2.0 * phi);
  const double s = 2.0 * gamma_s * kQuadratureCrossTerms *
                   std::real(rotation * cov(0, 0) + cov(0, 1));
  return 1.0 + s;
}

}  // namespace

StabilityMatrix stability_matrix(const OpoParams& params) {
  validate(params);
  const cplx i{0.0, 1.0};
  StabilityMatrix m;
  m.gamma_s = params.gamma_s;
  m.delta = params.delta;
  m.entries << -(params.gamma_s + i * params.delta), params.gamma_s, params.gamma_s,
      -(params.gamma_s - i * params.delta);
  return m;
}

Eigen::Matrix2cd spectral_covariance(const StabilityMatrix& mat, double omega) {
  if (is_pole(mat.delta, omega)) {
    throw SingularityError("spectral covariance is singular at delta = 0, omega = 0");
  }
  const cplx iw{0.0, omega};
  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  const Eigen::Matrix2cd forward = mat.entries + iw * id;
  const Eigen::Matrix2cd backward = mat.entries.transpose() - iw * id;
  if (std::abs(forward.determinant()) == 0.0) {
    throw SingularityError("L + i omega I is not invertible");
  }
  return mat.gamma_s * forward.inverse() * backward.inverse();
}

SpectrumPoint noise_spectrum_matrix(const OpoParams& params, double omega_tilde, double phi) {
  const StabilityMatrix mat = stability_matrix(params);
  const double omega = omega_tilde * params.gamma_s;
  SpectrumPoint pt{omega_tilde, phi, 1.0, SpectrumMethod::MatrixRoute};

  if (is_pole(mat.delta, omega)) {
    // The zero mode u0 = (1,1) carries a cos^2(phi) / omega^2 pole. When the
    // quadrature is orthogonal to it the limit is finite and comes from the
    // damped mode u1 = (1,-1) alone.
    if (std::abs(std::cos(phi)) > kCosineZero) {
      throw SingularityError("noise spectrum diverges at delta = 0, omega = 0 unless phi = pi/2");
    }
    // L u1 = L^T u1 = -2 gamma_s u1; u1 u1^T / 2 is the projector.
    const Eigen::Vector2cd u1(1.0, -1.0);
    const double damped = 2.0 * mat.gamma_s;
    const Eigen::Matrix2cd cov =
        mat.gamma_s * (u1 * u1.transpose()) / (2.0 * damped * damped);
    pt.V = quadrature_noise(cov, mat.gamma_s, phi);
    return pt;
  }

  pt.V = quadrature_noise(spectral_covariance(mat, omega), mat.gamma_s, phi);
  return pt;
}

SpectrumPoint noise_spectrum_matrix(double delta_tilde, double omega_tilde, double phi) {
  OpoParams p;
  p.delta = delta_tilde;
  return noise_spectrum_matrix(p, omega_tilde, phi);
}

SpectrumPoint noise_spectrum_closed_form(double delta_tilde, double omega_tilde, double phi) {
  SpectrumPoint pt{omega_tilde, phi, 1.0, SpectrumMethod::ClosedForm};
  const double c = std::cos(phi);
  if (is_pole(delta_tilde, omega_tilde)) {
    if (std::abs(c) > kCosineZero) {
      throw SingularityError("noise spectrum diverges at delta = 0, omega = 0 unless phi = pi/2");
    }
    // Limit of 1 - 4 / (4 + w^2).
    pt.V = 0.0;
    return pt;
  }
  const double d2 = delta_tilde * delta_tilde;
  const double w2 = omega_tilde * omega_tilde;
  const double u = d2 - w2;
  const double numerator = 4.0 * u + 8.0 * (2.0 - u) * c * c;
  const double denominator = 4.0 * w2 + u * u;
  pt.V = 1.0 + numerator / denominator;
  return pt;
}

OptimumSqueezing optimum_squeezing(double delta_tilde) {
  const double a = std::abs(delta_tilde);
  return {std::sqrt(a * a + 2.0 * a), a / (1.0 + a)};
}

double OmegaRange::at(std::size_t k) const {
  if (steps <= 1) return min;
  return min + (max - min) * static_cast<double>(k) / static_cast<double>(steps - 1);
}

SpectrumTable spectrum_grid(const OpoParams& params, const OmegaRange& omega,
                            std::span<const double> phis) {
  validate(params);
  if (omega.steps == 0 || phis.empty()) throw ValidationError("spectrum grid is empty");
  if (!(omega.max >= omega.min)) throw ValidationError("omega max must not be below omega min");

  SpectrumTable table;
  table.delta_tilde = params.delta_tilde();
  table.rows.reserve(omega.steps * phis.size());
  for (double phi : phis) {
    for (std::size_t k = 0; k < omega.steps; ++k) {
      const double w = omega.at(k);
      if (is_pole(table.delta_tilde, w) && std::abs(std::cos(phi)) > kCosineZero) {
        ++table.skipped_singular;
        continue;
      }
      SpectrumRow row;
      row.omega_tilde = w;
      row.phi = phi;
      row.V_matrix = noise_spectrum_matrix(params, w, phi).V;
      row.V_closed = noise_spectrum_closed_form(table.delta_tilde, w, phi).V;
      table.rows.push_back(row);
    }
  }
  return table;
}

}  // namespace opo
