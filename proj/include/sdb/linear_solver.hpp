#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#ifdef SDB_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include "sdb/assembly.hpp"
#include "sdb/error.hpp"

namespace sdb {

struct LinearSolveReport {
  double residual_norm = 0.0;  // ||Ax - b|| / ||b||, absolute when b = 0
  bool factorization_ok = false;
};

inline constexpr double kAcceptedResidual = 1e-10;

namespace detail {

// Names the block containing an empty row or column, if any.
inline std::string empty_line_block(const SparseMatrix& a, const BlockLayout& l) {
  std::vector<char> row_seen(static_cast<std::size_t>(a.rows()), 0);
  for (Eigen::Index col = 0; col < a.outerSize(); ++col) {
    bool any = false;
    for (SparseMatrix::InnerIterator it(a, col); it; ++it)
      if (it.value() != 0.0) {
        any = true;
        row_seen[static_cast<std::size_t>(it.row())] = 1;
      }
    if (!any) return std::string(l.block_name(static_cast<std::size_t>(col))) + " (column " +
                     std::to_string(col) + ")";
  }
  for (std::size_t r = 0; r < row_seen.size(); ++r)
    if (!row_seen[r]) return std::string(l.block_name(r)) + " (row " + std::to_string(r) + ")";
  return {};
}

inline std::string zero_pivot_block(const SparseMatrix& a, const BlockLayout& l) {
  if (auto s = empty_line_block(a, l); !s.empty()) return s;
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(a);
  if (lu.info() == Eigen::Success) return "none detected";
  const std::string msg = lu.lastErrorMessage();
  const auto pos = msg.find_last_of(' ');
  try {
    const auto permuted = static_cast<Eigen::Index>(std::stol(msg.substr(pos + 1))) - 1;
    if (permuted >= 0 && permuted < a.cols()) {
      const auto col = lu.colsPermutation().indices()[permuted];
      return std::string(l.block_name(static_cast<std::size_t>(col))) + " (column " +
             std::to_string(col) + ")";
    }
  } catch (const std::exception&) {
  }
  return "unknown";
}

}  // namespace detail

/// Direct sparse LU with cached symbolic analysis. The analysis is redone
/// only when the sparsity pattern changes between calls.
class LinearSolver {
 public:
  std::pair<Eigen::VectorXd, LinearSolveReport> solve(const BlockSystem& sys) {
    const auto& a = sys.matrix;
    if (a.rows() != a.cols() || a.rows() != sys.rhs.size())
      throw InputError("linear system dimensions do not match");
    if (!a.isCompressed()) throw InputError("matrix must be compressed");

    LinearSolveReport report;
    if (!same_pattern(a)) {
      lu_.analyzePattern(a);
      outer_.assign(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1);
      inner_.assign(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros());
    }
    lu_.factorize(a);
    report.factorization_ok = lu_.info() == Eigen::Success;
    if (!report.factorization_ok) {
      outer_.clear();
      throw SolverError("factorization failed: zero pivot in block " +
                        detail::zero_pivot_block(a, sys.layout));
    }
    Eigen::VectorXd x = lu_.solve(sys.rhs);
    const double bnorm = sys.rhs.norm();
    Eigen::VectorXd r = sys.rhs - a * x;
    report.residual_norm = bnorm > 0.0 ? r.norm() / bnorm : r.norm();
    if (!(report.residual_norm < kAcceptedResidual)) {
      // One step of iterative refinement before giving up.
      x += lu_.solve(r);
      r = sys.rhs - a * x;
      report.residual_norm = bnorm > 0.0 ? r.norm() / bnorm : r.norm();
    }
    if (!(report.residual_norm < kAcceptedResidual))
      throw SolverError("linear solve residual " + std::to_string(report.residual_norm) +
                        " exceeds tolerance");
    return {std::move(x), report};
  }

 private:
  bool same_pattern(const SparseMatrix& a) const {
    if (outer_.size() != static_cast<std::size_t>(a.outerSize() + 1) ||
        inner_.size() != static_cast<std::size_t>(a.nonZeros()))
      return false;
    return std::equal(outer_.begin(), outer_.end(), a.outerIndexPtr()) &&
           std::equal(inner_.begin(), inner_.end(), a.innerIndexPtr());
  }

#ifdef SDB_HAVE_UMFPACK
  Eigen::UmfPackLU<SparseMatrix> lu_;
#else
  Eigen::SparseLU<SparseMatrix> lu_;
#endif
  std::vector<int> outer_, inner_;
};

/// One-shot solve.
inline std::pair<Eigen::VectorXd, LinearSolveReport> solve_linear(const BlockSystem& sys) {
  LinearSolver solver;
  return solver.solve(sys);
}

}  // namespace sdb
