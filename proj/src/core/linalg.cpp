#include "mvpi/linalg.hpp"

#include "mvpi/errors.hpp"

#include <cmath>
#include <sstream>

namespace mvpi {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::InvariantViolation: return "invariant violation";
    case ErrorCode::NumericFailure: return "numeric failure";
    case ErrorCode::NonErgodicChain: return "non-ergodic chain";
    case ErrorCode::UncoveredStateAction: return "uncovered state-action pair";
    case ErrorCode::ZeroDenominator: return "zero denominator";
    case ErrorCode::DegenerateSample: return "degenerate sample";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::ConvergenceFailure: return "convergence failure";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Parse: return "parse error";
  }
  return "unknown error";
}

Vector solve_dense(const Matrix& a, const Vector& b, std::string_view what) {
  Eigen::PartialPivLU<Matrix> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    std::ostringstream msg;
    msg << what << ": singular linear system (" << a.rows() << "x" << a.cols()
        << ", rcond estimate " << rcond << ")";
    fail(ErrorCode::NumericFailure, msg.str());
  }
  Vector x = lu.solve(b);
  if (!x.allFinite()) {
    fail(ErrorCode::NumericFailure, std::string(what) + ": non-finite solution");
  }
  return x;
}

Vector stationary_of(const Matrix& transition) {
  const Eigen::Index n = transition.rows();
  Matrix system = Matrix::Identity(n, n) - transition.transpose();

  Eigen::FullPivLU<Matrix> rank_check(system);
  rank_check.setThreshold(1e-9);
  if (rank_check.rank() < n - 1) {
    std::ostringstream msg;
    msg << "stationary system has rank " << rank_check.rank() << " < " << n - 1
        << "; policy-induced chain is not unichain";
    fail(ErrorCode::NonErgodicChain, msg.str());
  }

  // Rows of (I - P^T) sum to zero, so the last one is redundant.
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Vector x = solve_dense(system, rhs, "stationary distribution");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x(i) < 0.0 && x(i) > -1e-12) x(i) = 0.0;
  }
  return x;
}

}  // namespace mvpi
