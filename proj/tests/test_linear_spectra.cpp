#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "opo/errors.hpp"
#include "opo/linear_spectra.hpp"

using namespace opo;

namespace {

constexpr double kPi = std::numbers::pi;

double closed(double d, double w, double phi) { return noise_spectrum_closed_form(d, w, phi).V; }

// Brent minimisation of the closed form over omega in [lo, hi].
std::pair<double, double> minimise(double d, double phi, double lo, double hi) {
  const auto r = boost::math::tools::brent_find_minima(
      [&](double w) { return closed(d, w, phi); }, lo, hi, 52);
  return {r.first, r.second};
}

std::vector<double> omega_grid() {
  std::vector<double> w(200);
  for (int k = 0; k < 200; ++k) w[k] = -10.0 + 20.0 * k / 199.0;
  return w;
}

}  // namespace

TEST_CASE("stability matrix") {
  const auto m0 = stability_matrix(OpoParams::dimensionless(1.5, 1e-3, 1.0, 0.0));
  CHECK(m0.entries(0, 0) == cplx(-1.0, 0.0));
  CHECK(m0.entries(0, 1) == cplx(1.0, 0.0));
  CHECK(m0.entries(1, 0) == cplx(1.0, 0.0));
  CHECK(m0.entries(1, 1) == cplx(-1.0, 0.0));
  const Eigen::Vector2cd ev0 = m0.entries.eigenvalues();
  const double lo = std::min(ev0(0).real(), ev0(1).real());
  const double hi = std::max(ev0(0).real(), ev0(1).real());
  CHECK(lo == doctest::Approx(-2.0));
  CHECK(hi == doctest::Approx(0.0).epsilon(1e-14));

  const auto m1 = stability_matrix(OpoParams::dimensionless(1.5, 1e-3, 1.0, 1.0));
  CHECK(m1.entries(0, 0) == cplx(-1.0, -1.0));
  CHECK(m1.entries(1, 1) == cplx(-1.0, 1.0));
  // Double eigenvalue -1; the matrix is defective so the eigensolver is only
  // accurate to sqrt(machine epsilon).
  const Eigen::Vector2cd ev1 = m1.entries.eigenvalues();
  CHECK(std::abs(ev1(0) + 1.0) < 1e-7);
  CHECK(std::abs(ev1(1) + 1.0) < 1e-7);
  CHECK(m1.entries.trace() == cplx(-2.0, 0.0));
  CHECK(std::abs(m1.entries.determinant() - cplx(1.0, 0.0)) < 1e-15);

  // Clamped pump: independent of sigma and chi.
  const auto other = stability_matrix(OpoParams::dimensionless(3.0, 0.2, 2.0, 1.0));
  CHECK(other.entries == m1.entries);

  for (double d : {0.01, 0.5, 2.0, 10.0}) {
    const Eigen::Vector2cd ev = stability_matrix(OpoParams::dimensionless(1.5, 1e-3, 1.0, d))
                                    .entries.eigenvalues();
    CHECK(ev(0).real() <= 1e-12);
    CHECK(ev(1).real() <= 1e-12);
  }
}

TEST_CASE("spectral covariance") {
  const auto m1 = stability_matrix(OpoParams::dimensionless(1.5, 1e-3, 1.0, 1.0));
  const Eigen::Matrix2cd s = spectral_covariance(m1, 0.0);
  // |d|^2 = Delta^4 = 1
  CHECK(std::abs(s(0, 0) - cplx(1.0, -2.0)) < 1e-14);
  CHECK(std::abs(s(0, 1) - cplx(2.0, 0.0)) < 1e-14);
  CHECK(std::abs(s(1, 1) - std::conj(s(0, 0))) < 1e-14);

  for (double d : {0.1, 0.5, 2.0}) {
    const auto m = stability_matrix(OpoParams::dimensionless(1.5, 1e-3, 1.0, d));
    for (double w : {0.0, 0.3, 1.7, 6.0}) {
      const Eigen::Matrix2cd a = spectral_covariance(m, w);
      const Eigen::Matrix2cd b = spectral_covariance(m, -w);
      CHECK(std::abs(a(0, 1).imag()) < 1e-12 * std::abs(a(0, 1)) + 1e-15);
      CHECK(std::abs(a(1, 1) - std::conj(a(0, 0))) < 1e-12 * a.norm());
      CHECK(std::abs(a(0, 1) - b(0, 1)) < 1e-12 * std::abs(a(0, 1)));
    }
    // 1/omega^2 decay
    const double big = 1e4;
    CHECK(spectral_covariance(m, big).norm() * big * big == doctest::Approx(spectral_covariance(m, 2 * big).norm() * 4 * big * big).epsilon(1e-3));
  }

  const auto m0 = stability_matrix(OpoParams::dimensionless(1.5, 1e-3, 1.0, 0.0));
  CHECK_THROWS_AS(spectral_covariance(m0, 0.0), SingularityError);
  CHECK_NOTHROW(spectral_covariance(m0, 1e-6));
}

TEST_CASE("normalisation calibration") {
  // Unit prefactor route; the factor mapping it onto V - 1 is recovered from
  // the isotropic perfect-squeezing limit and must then hold everywhere.
  auto raw = [](double d, double w, double phi) {
    const auto m = stability_matrix(OpoParams::dimensionless(1.5, 1e-3, 1.0, d));
    const Eigen::Matrix2cd s = spectral_covariance(m, w);
    return std::real(std::polar(1.0, -2.0 * phi) * s(0, 0) + s(0, 1));
  };
  // Delta = 0, phi = pi/2: V = 1 + c raw -> 0 as omega -> 0.
  const double w_small = 1e-6;
  const double c = -1.0 / raw(0.0, w_small, kPi / 2);
  CHECK(c == doctest::Approx(2.0 * kQuadratureCrossTerms).epsilon(1e-9));
  for (double d : {0.01, 0.3, 1.0, 4.0})
    for (double w : {0.0, 0.2, 1.5, 7.0})
      for (double phi : {0.0, kPi / 2}) {
        CHECK(1.0 + c * raw(d, w, phi) == doctest::Approx(closed(d, w, phi)).epsilon(1e-10));
      }
}

TEST_CASE("closed-form spectrum") {
  SUBCASE("isotropic limit") {
    for (double w : {0.1, 1.0, 3.0})
      CHECK(closed(0.0, w, kPi / 2) == doctest::Approx(1.0 - 4.0 / (4.0 + w * w)).epsilon(1e-14));
    CHECK(closed(0.0, 0.0, kPi / 2) == 0.0);
    CHECK(noise_spectrum_matrix(0.0, 0.0, kPi / 2).V == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(closed(0.0, 0.0, 0.0), SingularityError);
    CHECK_THROWS_AS(noise_spectrum_matrix(0.0, 0.0, 1.0), SingularityError);
  }
  SUBCASE("hand values") {
    CHECK(closed(2.0, 0.0, kPi / 2) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(closed(2.0, 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(closed(1.0, 0.0, kPi / 2) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(closed(0.1, std::sqrt(0.21), kPi / 2) == doctest::Approx(1.0 / 11.0).epsilon(1e-14));
  }
  SUBCASE("even in omega and vacuum out of band") {
    for (double d : {0.1, 1.0, 3.0})
      for (double w : {0.2, 1.0, 5.0})
        for (double phi : {0.0, 0.7, kPi / 2}) {
          CHECK(closed(d, w, phi) == closed(d, -w, phi));
          CHECK(noise_spectrum_matrix(d, w, phi).V ==
                doctest::Approx(noise_spectrum_matrix(d, -w, phi).V).epsilon(1e-12));
        }
    CHECK(closed(0.5, 1e5, 0.3) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(noise_spectrum_matrix(0.5, 1e5, 0.3).V == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("non-negative") {
    for (double d : {0.0, 0.05, 0.5, 2.0, 5.0})
      for (double w = -6.0; w <= 6.0; w += 0.05)
        for (int k = 0; k < 8; ++k) {
          if (d == 0.0 && std::abs(w) < 1e-9) continue;
          CHECK(closed(d, w, k * kPi / 8) >= -1e-12);
        }
  }
}

TEST_CASE("matrix and closed routes") {
  SUBCASE("agree on the principal quadratures") {
    double worst = 0.0;
    for (double d : {0.01, 0.1, 0.5, 1.0, 2.0, 4.0})
      for (double w : omega_grid())
        for (double phi : {0.0, kPi / 2}) {
          const double v = closed(d, w, phi);
          worst = std::max(worst, std::abs(noise_spectrum_matrix(d, w, phi).V - v) / std::max(1.0, v));
        }
    CHECK(worst <= 1e-10);
  }
  SUBCASE("differ elsewhere by the Im S11 rotation term") {
    // Re{e^{-2i phi} S11} keeps sin(2 phi) Im S11, the closed form drops it.
    for (double d : {0.01, 0.1, 0.5, 1.0, 2.0, 4.0})
      for (double w : omega_grid())
        for (int k = 0; k < 8; ++k) {
          const double phi = k * kPi / 8;
          const double D = 4 * w * w + std::pow(d * d - w * w, 2);
          const double v = closed(d, w, phi);
          const double expected = v - 8.0 * d * std::sin(2 * phi) / D;
          CHECK(std::abs(noise_spectrum_matrix(d, w, phi).V - expected) <= 1e-10 * std::max(1.0, std::abs(v)));
        }
    CHECK(noise_spectrum_matrix(1.0, 0.0, kPi / 4).V == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(closed(1.0, 0.0, kPi / 4) == doctest::Approx(9.0).epsilon(1e-14));
  }
}

TEST_CASE("uncertainty product") {
  for (double d : {0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 4.0})
    for (double w : omega_grid()) {
      const double D = 4 * w * w + std::pow(d * d - w * w, 2);
      const double product = closed(d, w, 0.0) * closed(d, w, kPi / 2);
      CHECK(std::abs(product - 1.0 - 64.0 * d * d / (D * D)) <= 1e-10 * std::max(1.0, product));
      CHECK(product >= 1.0 - 1e-12);
    }
}

TEST_CASE("optimum squeezing") {
  CHECK(optimum_squeezing(0.0).omega_opt_tilde == 0.0);
  CHECK(optimum_squeezing(0.0).V_opt == 0.0);
  CHECK(optimum_squeezing(0.1).V_opt == doctest::Approx(1.0 / 11.0).epsilon(1e-15));
  CHECK(optimum_squeezing(1.0).omega_opt_tilde == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(optimum_squeezing(1.0).V_opt == 0.5);
  CHECK(optimum_squeezing(-0.3).V_opt == optimum_squeezing(0.3).V_opt);

  double prev = -1.0;
  for (double d = 0.0; d < 10.0; d += 0.1) {
    const double v = optimum_squeezing(d).V_opt;
    CHECK(v > prev);
    CHECK(v < 1.0);
    prev = v;
  }

  SUBCASE("dense-grid minimisation agrees to grid resolution") {
    for (double d : {0.05, 0.2, 1.0, 3.0}) {
      const auto opt = optimum_squeezing(d);
      double best_w = 0.0, best_v = 1e300;
      const double step = 1e-4;
      for (double w = 0.0; w <= 10.0; w += step) {
        const double v = closed(d, w, kPi / 2);
        if (v < best_v) best_v = v, best_w = w;
      }
      CHECK(std::abs(best_w - opt.omega_opt_tilde) <= step);
      CHECK(best_v == doctest::Approx(opt.V_opt).epsilon(1e-6));
    }
  }
  SUBCASE("Brent minimisation") {
    for (double d : {0.01, 1.0}) {
      const auto [w, v] = minimise(d, kPi / 2, 0.0, 20.0);
      CHECK(w * w == doctest::Approx(d * d + 2 * d).epsilon(1e-6));
      CHECK(v == doctest::Approx(d / (1 + d)).epsilon(1e-9));
    }
  }
}

TEST_CASE("pi/2 quadrature holds the global minimum") {
  for (double d : {0.05, 0.5, 1.5, 2.5, 3.5}) {
    double best_half_pi = 1e300;
    for (double w = 0.0; w <= 12.0; w += 1e-3) best_half_pi = std::min(best_half_pi, closed(d, w, kPi / 2));
    for (int k = 0; k < 16; ++k) {
      double best = 1e300;
      for (double w = 0.0; w <= 12.0; w += 1e-3) best = std::min(best, closed(d, w, k * kPi / 16));
      CHECK(best_half_pi <= best + 1e-6);  // grid resolution
    }
  }
}

TEST_CASE("regime claims") {
  const double edge = 2.0 * (3.0 + std::sqrt(5.0));
  auto min_phi0 = [](double d) {
    double best_w = 0.0, best_v = 1e300;
    for (double w = 0.0; w <= 15.0; w += 1e-4) {
      const double v = closed(d, w, 0.0);
      if (v < best_v) best_v = v, best_w = w;
    }
    return std::pair{best_w, best_v};
  };
  for (double d2 : {2.1, 3.0, 5.0, 9.0, 11.0, 20.0, 40.0})
    CHECK(closed(std::sqrt(d2), 0.0, kPi / 2) > closed(std::sqrt(d2), 0.0, 0.0));
  for (double d2 : {0.5, 1.9}) CHECK(closed(std::sqrt(d2), 0.0, kPi / 2) < closed(std::sqrt(d2), 0.0, 0.0));
  for (double d2 : {4.5, 6.0, 9.0, 10.0}) {
    const auto [w, v] = min_phi0(std::sqrt(d2));
    CHECK(v < 1.0);
    CHECK(w == 0.0);
  }
  for (double d2 : {edge + 0.5, 20.0, 40.0}) {
    const double d = std::sqrt(d2);
    const auto [w, v] = min_phi0(d);
    CHECK(v < 1.0);
    CHECK(std::abs(w - std::sqrt(d2 - 2 * d - 4)) <= 1e-4);
    CHECK(v == doctest::Approx(optimum_squeezing(d).V_opt).epsilon(1e-6));
  }
  for (double d2 : {1.0, 3.0}) CHECK(min_phi0(std::sqrt(d2)).second >= 1.0 - 1e-12);
}

TEST_CASE("spectrum grid") {
  const double phis[] = {0.0, kPi / 2};
  SUBCASE("layout and cross-route columns") {
    const auto t = spectrum_grid(OpoParams::dimensionless(1.5, 1e-3, 1.0, 0.5), OmegaRange{}, phis);
    REQUIRE(t.rows.size() == 402);
    CHECK(t.rows.front().phi == 0.0);
    CHECK(t.rows.back().phi == kPi / 2);
    CHECK(t.rows[0].omega_tilde == -10.0);
    CHECK(t.rows[200].omega_tilde == 10.0);
    for (std::size_t k = 0; k < 201; ++k) {
      CHECK(t.rows[k].V_closed == doctest::Approx(t.rows[200 - k].V_closed).epsilon(1e-12));
      CHECK(std::abs(t.rows[k].V_matrix - t.rows[k].V_closed) < 1e-10);
    }
  }
  SUBCASE("single point") {
    const double one[] = {0.3};
    const auto t = spectrum_grid(OpoParams::dimensionless(1.5, 1e-3, 1.0, 0.5),
                                 OmegaRange{1.0, 1.0, 1}, one);
    CHECK(t.rows.size() == 1);
  }
  SUBCASE("singular points are skipped and counted") {
    const auto t = spectrum_grid(OpoParams::dimensionless(1.5, 1e-3, 1.0, 0.0),
                                 OmegaRange{-1.0, 1.0, 3}, phis);
    CHECK(t.skipped_singular == 1);
    CHECK(t.rows.size() == 5);
    for (const auto& r : t.rows) CHECK(std::isfinite(r.V_matrix));
  }
  SUBCASE("representative detunings in each spectral regime") {
    for (double d2 : {1.0, 3.0, 6.0, 12.0}) {
      const auto t = spectrum_grid(OpoParams::dimensionless(1.5, 1e-3, 1.0, std::sqrt(d2)),
                                   OmegaRange{}, phis);
      CHECK(t.rows.size() == 402);
    }
  }
  SUBCASE("empty grids are rejected") {
    CHECK_THROWS_AS(spectrum_grid(OpoParams::dimensionless(1.5, 1e-3, 1.0, 0.5),
                                  OmegaRange{0.0, 1.0, 0}, phis),
                    ValidationError);
  }
}
