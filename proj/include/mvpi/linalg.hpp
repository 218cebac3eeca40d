#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace mvpi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Solves A x = b by LU with partial pivoting. Throws NumericFailure with a
/// reciprocal-condition estimate when A is numerically singular.
Vector solve_dense(const Matrix& a, const Vector& b, std::string_view what);

/// Unique stationary distribution of a row-stochastic matrix. Throws
/// NonErgodicChain when (I - P^T) has rank below n - 1 at pivot tolerance 1e-9.
Vector stationary_of(const Matrix& transition);

}  // namespace mvpi
