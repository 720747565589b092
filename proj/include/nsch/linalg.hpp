#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <Eigen/SparseCholesky>

#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsch {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

/// A linear solve that failed to reach its residual target.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what + " (relative residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Normwise backward error ‖Ax - b‖ / (‖A‖ ‖x‖ + ‖b‖); equals the usual
/// relative residual up to a modest factor whenever b is not tiny.
inline double relative_residual(const SparseMatrix& a, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& b, double anorm = -1.0) {
  if (anorm < 0.0) anorm = a.norm();
  const double denom = anorm * x.norm() + b.norm();
  const double rn = (a * x - b).norm();
  return denom > 0.0 ? rn / denom : rn;
}

/// Sparse LU that keeps its factorization while the matrix is unchanged.
class CachedLU {
 public:
  /// Returns true when a new factorization was computed.
  bool prepare(SparseMatrix a) {
    a.makeCompressed();
    if (matrix_ && same(*matrix_, a)) return false;
    matrix_ = std::move(a);
    anorm_ = matrix_->norm();
    lu_.analyzePattern(*matrix_);
    lu_.factorize(*matrix_);
    if (lu_.info() != Eigen::Success) {
      matrix_.reset();
      throw SolverError("sparse LU factorization failed: " + lu_.lastErrorMessage(), 1.0);
    }
    return true;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b, double tolerance, const char* what) const {
    Eigen::VectorXd x = lu_.solve(b);
    const double r = relative_residual(*matrix_, x, b, anorm_);
    if (!(r <= tolerance)) throw SolverError(std::string(what) + " did not converge", r);
    return x;
  }

  const SparseMatrix& matrix() const { return *matrix_; }

 private:
  static bool same(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros()) return false;
    const auto n = a.nonZeros();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (a.valuePtr()[k] != b.valuePtr()[k] || a.innerIndexPtr()[k] != b.innerIndexPtr()[k])
        return false;
    }
    for (Eigen::Index k = 0; k <= a.outerSize(); ++k)
      if (a.outerIndexPtr()[k] != b.outerIndexPtr()[k]) return false;
    return true;
  }

  std::optional<SparseMatrix> matrix_;
  double anorm_ = 0.0;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

/// Thread cap from NSCH_THREADS (0 or unset = library default).
inline int thread_cap_from_env() {
  const char* s = std::getenv("NSCH_THREADS");
  if (s == nullptr) return 0;
  const int n = std::atoi(s);
  return n > 0 ? n : 0;
}

}  // namespace nsch
