#pragma once

// Reference implementations used only by the tests. Nothing here calls into
// the library's arithmetic, so agreement is an independent check.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "spamm/dense.hpp"

namespace oracle {

using spamm::DenseMatrix;

inline DenseMatrix random_matrix(std::size_t n, std::mt19937_64 &rng,
                                 double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DenseMatrix m(n, n);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = u(rng);
  return m;
}

inline DenseMatrix random_symmetric(std::size_t n, std::mt19937_64 &rng) {
  DenseMatrix m = random_matrix(n, rng);
  return 0.5 * (m + m.transpose());
}

// Triple loop in plain k-inner order.
inline DenseMatrix naive_gemm(const DenseMatrix &a, const DenseMatrix &b) {
  DenseMatrix c = DenseMatrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      long double acc = 0.0L;
      for (Eigen::Index k = 0; k < a.cols(); ++k)
        acc += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(acc);
    }
  return c;
}

inline double frob(const DenseMatrix &m) {
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      acc += static_cast<long double>(m(i, j)) * m(i, j);
  return static_cast<double>(std::sqrt(acc));
}

inline Eigen::VectorXd eigenvalues(const DenseMatrix &m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym,
                                                        Eigen::EigenvaluesOnly)
      .eigenvalues();
}

inline double condition(const DenseMatrix &m) {
  const Eigen::VectorXd l = eigenvalues(m);
  return l.maxCoeff() / l.minCoeff();
}

// f(s) for symmetric s through its eigendecomposition.
template <class F> DenseMatrix spectral(const DenseMatrix &s, F f) {
  Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  Eigen::VectorXd l = eig.eigenvalues();
  for (Eigen::Index i = 0; i < l.size(); ++i)
    l(i) = f(l(i));
  Eigen::MatrixXd v = eig.eigenvectors();
  return v * l.asDiagonal() * v.transpose();
}

inline DenseMatrix inv_sqrt(const DenseMatrix &s) {
  return spectral(s, [](double l) { return 1.0 / std::sqrt(l); });
}

inline DenseMatrix sqrt_m(const DenseMatrix &s) {
  return spectral(s, [](double l) { return std::sqrt(l); });
}

// Random orthogonal similarity of a prescribed spectrum, log-spaced between
// 1/kappa and 1.
inline DenseMatrix spd_with_condition(std::size_t n, double kappa,
                                      std::mt19937_64 &rng) {
  Eigen::MatrixXd g = random_matrix(n, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd l(n);
  for (std::size_t i = 0; i < n; ++i)
    l(i) = n == 1 ? 1.0
                  : std::pow(kappa, -static_cast<double>(i) /
                                        static_cast<double>(n - 1));
  Eigen::MatrixXd s = q * l.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

// Scalar Newton-Schulz recursion on one eigenvalue, written out from the
// definitions: h = (sqrt(a)/2)(3 - a x~), x~ = (1-2e) x + e, then
// y <- h y, z <- z h, x <- y z.
struct ScalarNS {
  double y, z, x;
};

inline ScalarNS scalar_dual_step(ScalarNS st, double alpha, double eps) {
  const double xs = eps > 1e-6 ? (1.0 - 2.0 * eps) * st.x + eps : st.x;
  const double h = std::sqrt(alpha) / 2.0 * (3.0 - alpha * xs);
  const double y = h * st.y;
  const double z = st.z * h;
  return {y, z, y * z};
}

// Single instance: z <- z h, y <- s z, x <- z s z.
inline ScalarNS scalar_single_step(ScalarNS st, double s, double alpha,
                                   double eps) {
  const double xs = eps > 1e-6 ? (1.0 - 2.0 * eps) * st.x + eps : st.x;
  const double h = std::sqrt(alpha) / 2.0 * (3.0 - alpha * xs);
  const double z = st.z * h;
  const double y = s * z;
  return {y, z, z * y};
}

inline double logistic(double amp, double rate, double mid, double t) {
  return amp / (1.0 + std::exp(-rate * (t - mid)));
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double> &x,
                           const std::vector<double> &y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

} // namespace oracle
