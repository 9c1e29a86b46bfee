#pragma once

#include <Eigen/Dense>

namespace sos {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Matrix exponential by scaling and squaring: the argument is halved until
/// its 1-norm is at most 0.5, the Taylor series is summed until the next term
/// falls below 1e-16 in max-abs, and the result is squared back.
Mat expm(const Mat& a);

/// Zero-order-hold discretization of x' = A x + G v over one step:
/// returns exp(A dt) and (integral_0^dt exp(A s) ds) G, both read off the
/// exponential of the augmented matrix [[A, G], [0, 0]] dt.
struct ZohPair {
  Mat state;
  Mat input;
};
ZohPair zoh(const Mat& a, const Mat& g, double dt);

/// Largest eigenvalue magnitude. Throws ValidationError on non-square input.
double spectral_radius(const Mat& m);

/// Kronecker product a (x) b.
Mat kron(const Mat& a, const Mat& b);

}  // namespace sos
