#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fosr/errors.hpp"

namespace fosr::qpcore {

// One inequality row a.x >= 0, stored sparse.
struct SparseRow {
  std::vector<int> idx;
  std::vector<double> val;

  void add(int i, double v) {
    idx.push_back(i);
    val.push_back(v);
  }
  double dot(const Eigen::VectorXd& x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) s += val[k] * x(idx[k]);
    return s;
  }
  Eigen::VectorXd dense(int d) const {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k < idx.size(); ++k) row(idx[k]) += val[k];
    return row;
  }
};

// minimize (x - anchor)' gram (x - anchor)  subject to  rows * x >= 0
struct QuadraticProgram {
  Eigen::MatrixXd gram;
  Eigen::VectorXd anchor;
  std::vector<SparseRow> rows;
};

struct SolveOptions {
  double kkt_tol = 1e-8;
  double feasibility_tol = 1e-9;
  int max_iterations = 0;  // 0 -> 50 * max(m, 1)
};

struct QpSolution {
  Eigen::VectorXd x;
  std::vector<int> active_set;
  Eigen::VectorXd multipliers;  // length m, zero off the active set
  double kkt_residual = 0.0;
  int iterations = 0;
};

// Thrown when the active-set iteration hits its limit; carries the best iterate.
struct QpNonconvergence : NumericError {
  QpNonconvergence(const std::string& msg, QpSolution best)
      : NumericError(msg), best_iterate(std::move(best)) {}
  QpSolution best_iterate;
};

// Projects the anchor onto the polyhedral cone {x : rows*x >= 0} in the
// gram metric, by a dual active-set iteration: start from the anchor, add
// the most violated row, drop rows with negative multipliers. Factors are
// computed once per instance so many anchors can be projected cheaply
// (bootstrap replicates share gram and rows).
class ConeProjector {
 public:
  ConeProjector(Eigen::MatrixXd gram, std::vector<SparseRow> rows, SolveOptions opts = {});

  QpSolution project(const Eigen::VectorXd& anchor) const;

  int dimension() const { return d_; }
  int row_count() const { return m_; }
  double applied_ridge() const { return ridge_; }
  const std::vector<SparseRow>& rows() const { return rows_; }

 private:
  int d_ = 0;
  int m_ = 0;
  SolveOptions opts_;
  double ridge_ = 0.0;
  std::vector<SparseRow> rows_;
  Eigen::MatrixXd gram_;        // after ridge repair
  Eigen::LLT<Eigen::MatrixXd> gram_llt_;
  Eigen::MatrixXd a_dense_;     // m x d
  Eigen::MatrixXd gram_inv_at_; // d x m, gram^{-1} A'
  Eigen::MatrixXd a_gram_inv_at_;  // m x m, A gram^{-1} A'
};

QpSolution solve(const QuadraticProgram& qp, const SolveOptions& opts = {});

// max of stationarity ||2 G (x - anchor) - A' lambda||_inf, primal violation,
// dual negativity, and complementarity |lambda_k (A x)_k|.
double kkt_residual(const QuadraticProgram& qp, const Eigen::VectorXd& candidate,
                    const Eigen::VectorXd& multipliers);

// Weighted nondecreasing (isotonic) projection by pool-adjacent-violators.
Eigen::VectorXd pava(const Eigen::VectorXd& values, const Eigen::VectorXd& weights);

// Symmetrizes and, when the smallest eigenvalue is below -1e-12 or a Cholesky
// factorization fails, adds ridge eps*tr(G)/d*I with eps escalating from
// 1e-10 by factors of 10 up to 1e-6. Returns the ridge applied; throws
// NumericError when the matrix stays indefinite.
double ridge_repair_psd(Eigen::MatrixXd& gram);

}  // namespace fosr::qpcore
