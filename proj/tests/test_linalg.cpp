#include <gtest/gtest.h>

#include <algorithm>
#include <complex>
#include <random>

#include "sos/errors.hpp"
#include "sos/linalg.hpp"

namespace {

using sos::Mat;

// Plain Taylor series in long double, no scaling. Adequate for ||a|| <~ 2.
Mat taylor_expm(const Mat& a, int terms) {
  using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LMat al = a.cast<long double>();
  LMat term = LMat::Identity(a.rows(), a.cols());
  LMat sum = term;
  for (int k = 1; k <= terms; ++k) {
    term = term * al / static_cast<long double>(k);
    sum += term;
  }
  return sum.cast<double>();
}

// Characteristic polynomial coefficients (monic, highest first) by
// Faddeev-LeVerrier.
std::vector<double> char_poly(const Mat& a) {
  const auto n = a.rows();
  std::vector<double> c(static_cast<std::size_t>(n) + 1);
  c[0] = 1.0;
  Mat m = Mat::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    m = a * m + c[k - 1] * Mat::Identity(n, n);
    c[k] = -(a * m).trace() / static_cast<double>(k);
  }
  return c;
}

// Durand-Kerner root finder.
std::vector<std::complex<double>> poly_roots(const std::vector<double>& c) {
  const std::size_t n = c.size() - 1;
  std::vector<std::complex<double>> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = std::pow(std::complex<double>(0.4, 0.9), k);
  auto eval = [&](std::complex<double> x) {
    std::complex<double> v = c[0];
    for (std::size_t k = 1; k < c.size(); ++k) v = v * x + c[k];
    return v;
  };
  for (int it = 0; it < 2000; ++it) {
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> den = 1.0;
      for (std::size_t m = 0; m < n; ++m) {
        if (m != k) den *= z[k] - z[m];
      }
      z[k] -= eval(z[k]) / den;
    }
  }
  return z;
}

TEST(Expm, ZeroMatrixIsIdentity) {
  EXPECT_EQ(sos::expm(Mat::Zero(3, 3)), Mat::Identity(3, 3));
}

TEST(Expm, NilpotentIsExact) {
  Mat n(3, 3);
  n << 0, 2, 3,
       0, 0, 4,
       0, 0, 0;
  // I + N + N^2/2
  Mat expect = Mat::Identity(3, 3) + n + 0.5 * n * n;
  EXPECT_LE((sos::expm(n) - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Expm, MatchesHighOrderSeries) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Mat a = Mat::NullaryExpr(4, 4, [&] { return d(gen); });
    EXPECT_LE((sos::expm(a) - taylor_expm(a, 60)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Expm, DiagonalLargeNorm) {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = -20.0;
  a(1, 1) = 3.0;
  const Mat e = sos::expm(a);
  EXPECT_NEAR(e(0, 0), std::exp(-20.0), 1e-20);
  EXPECT_NEAR(e(1, 1) / std::exp(3.0), 1.0, 1e-13);
}

TEST(Zoh, ScalarClosedForm) {
  Mat a(1, 1), b(1, 1);
  a << -2.0;
  b << 3.0;
  const double dt = 0.1;
  const auto z = sos::zoh(a, b, dt);
  EXPECT_NEAR(z.state(0, 0), std::exp(-0.2), 1e-15);
  EXPECT_NEAR(z.input(0, 0), 3.0 * (1.0 - std::exp(-0.2)) / 2.0, 1e-15);
}

TEST(Zoh, IntegratorChain) {
  Mat a(2, 2), b(2, 1);
  a << 0, 1,
       0, 0;
  b << 0, 1;
  const auto z = sos::zoh(a, b, 0.5);
  EXPECT_NEAR(z.input(0, 0), 0.125, 1e-15);
  EXPECT_NEAR(z.input(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(z.state(0, 1), 0.5, 1e-15);
}

TEST(Zoh, HeldFeedbackLocalErrorIsSecondOrder) {
  // One ZOH step with u = -K x held over the step against the exact flow of
  // x' = (A - B K) x: the local error scales as dt^2.
  Mat a(2, 2), b(2, 1), k(1, 2);
  a << -0.5, -0.3,
       1.0, -1.0;
  b << 1.0, 0.3;
  k << 0.8, 0.4;
  auto local_error = [&](double dt) {
    const auto z = sos::zoh(a, b, dt);
    const Mat held = z.state - z.input * k;
    const Mat exact = taylor_expm((a - b * k) * dt, 40);
    return (held - exact).cwiseAbs().maxCoeff();
  };
  for (double dt : {0.1, 0.05, 0.025}) {
    const double order = std::log2(local_error(dt) / local_error(dt / 2));
    EXPECT_GE(order, 1.9) << "dt=" << dt;
  }
}

TEST(SpectralRadius, MatchesCharacteristicPolynomialRoots) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat a = Mat::NullaryExpr(5, 5, [&] { return d(gen); });
    double rho = 0.0;
    for (auto r : poly_roots(char_poly(a))) rho = std::max(rho, std::abs(r));
    EXPECT_NEAR(sos::spectral_radius(a), rho, 1e-8);
  }
}

TEST(SpectralRadius, RotationHasUnitRadius) {
  Mat r(2, 2);
  r << 0, -1,
       1, 0;
  EXPECT_NEAR(sos::spectral_radius(r), 1.0, 1e-14);
}

TEST(SpectralRadius, RejectsNonSquare) {
  EXPECT_THROW(sos::spectral_radius(Mat::Zero(2, 3)), sos::ValidationError);
}

TEST(Kron, SmallExample) {
  Mat a(2, 2), b(1, 2);
  a << 1, 2,
       3, 4;
  b << 1, -1;
  Mat expect(2, 4);
  expect << 1, -1, 2, -2,
            3, -3, 4, -4;
  EXPECT_EQ(sos::kron(a, b), expect);
}

}  // namespace
