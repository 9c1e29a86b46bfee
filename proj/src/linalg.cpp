#include "sos/linalg.hpp"

#include <cmath>
#include <string>

#include "sos/errors.hpp"

namespace sos {

Mat expm(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw ValidationError("expm: matrix is " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + ", expected square");
  }
  const Eigen::Index n = a.rows();
  if (n == 0) return a;

  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Mat scaled = a / std::ldexp(1.0, squarings);

  Mat result = Mat::Identity(n, n);
  Mat term = Mat::Identity(n, n);
  for (int k = 1; k < 64; ++k) {
    term = (term * scaled) / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-16) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

ZohPair zoh(const Mat& a, const Mat& g, double dt) {
  const Eigen::Index nx = a.rows();
  const Eigen::Index ng = g.cols();
  Mat aug = Mat::Zero(nx + ng, nx + ng);
  aug.topLeftCorner(nx, nx) = a * dt;
  aug.topRightCorner(nx, ng) = g * dt;
  const Mat e = expm(aug);
  return {e.topLeftCorner(nx, nx), e.topRightCorner(nx, ng)};
}

double spectral_radius(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw ValidationError("spectral_radius: matrix is " + std::to_string(m.rows()) +
                          "x" + std::to_string(m.cols()) + ", expected square");
  }
  if (m.rows() == 0) return 0.0;
  if (m.rows() == 1) return std::abs(m(0, 0));
  Eigen::EigenSolver<Mat> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericError("spectral_radius: eigenvalue iteration did not converge");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace sos
