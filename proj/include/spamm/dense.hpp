#pragma once

#include <Eigen/Dense>

namespace spamm {

/// Dense square matrix, row-major. Used for ingestion, export and as the
/// exact reference representation.
using DenseMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using DenseVector = Eigen::VectorXd;

inline double frobenius(const DenseMatrix &m) { return m.norm(); }

} // namespace spamm
