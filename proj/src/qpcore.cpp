#include "fosr/qpcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fosr::qpcore {

double ridge_repair_psd(Eigen::MatrixXd& gram) {
  const int d = static_cast<int>(gram.rows());
  if (d == 0 || gram.cols() != d) throw NumericError("gram matrix must be square");

  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw NumericError("gram matrix is not symmetric");
  gram = 0.5 * (gram + gram.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();

  auto factorable = [](const Eigen::MatrixXd& g) {
    return Eigen::LLT<Eigen::MatrixXd>(g).info() == Eigen::Success;
  };

  if (min_eig >= -1e-12 && factorable(gram)) return 0.0;
  if (min_eig >= -1e-12 && gram.trace() <= 0.0)
    throw NumericError("gram matrix is singular with nonpositive trace; cannot repair");

  const double base = gram.trace() / d;
  for (double eps = 1e-10; eps <= 1.0000001e-6; eps *= 10.0) {
    Eigen::MatrixXd repaired = gram;
    repaired.diagonal().array() += eps * base;
    if (min_eig + eps * base > 0.0 && factorable(repaired)) {
      gram = std::move(repaired);
      return eps * base;
    }
  }
  throw NumericError("gram matrix is not positive semidefinite (min eigenvalue " +
                     std::to_string(min_eig) + ") and ridge repair up to 1e-6 failed");
}

ConeProjector::ConeProjector(Eigen::MatrixXd gram, std::vector<SparseRow> rows, SolveOptions opts)
    : d_(static_cast<int>(gram.rows())),
      m_(static_cast<int>(rows.size())),
      opts_(opts),
      rows_(std::move(rows)),
      gram_(std::move(gram)) {
  if (gram_.cols() != d_) throw NumericError("gram matrix must be square");
  ridge_ = ridge_repair_psd(gram_);
  gram_llt_.compute(gram_);
  if (gram_llt_.info() != Eigen::Success)
    throw NumericError("gram matrix factorization failed after ridge repair");

  a_dense_.resize(m_, d_);
  for (int k = 0; k < m_; ++k) {
    for (int i : rows_[static_cast<std::size_t>(k)].idx)
      if (i < 0 || i >= d_) throw NumericError("constraint row index out of range");
    a_dense_.row(k) = rows_[static_cast<std::size_t>(k)].dense(d_).transpose();
  }
  if (m_ > 0) {
    gram_inv_at_ = gram_llt_.solve(a_dense_.transpose());
    a_gram_inv_at_ = a_dense_ * gram_inv_at_;
    a_gram_inv_at_ = 0.5 * (a_gram_inv_at_ + a_gram_inv_at_.transpose()).eval();
  }
}

QpSolution ConeProjector::project(const Eigen::VectorXd& anchor) const {
  if (static_cast<int>(anchor.size()) != d_)
    throw NumericError("anchor length does not match gram dimension");

  QpSolution sol;
  sol.multipliers = Eigen::VectorXd::Zero(m_);
  const Eigen::VectorXd r0 = m_ > 0 ? (a_dense_ * anchor).eval() : Eigen::VectorXd();

  // Anchor already feasible: the projection of an interior point is itself.
  if (m_ == 0 || r0.minCoeff() >= -opts_.feasibility_tol) {
    sol.x = anchor;
    sol.kkt_residual = 0.0;
    return sol;
  }

  const int max_iter =
      opts_.max_iterations > 0 ? opts_.max_iterations : 50 * std::max(m_, 1);

  std::vector<int> working;        // active row indices, insertion order
  std::vector<char> in_working(static_cast<std::size_t>(m_), 0);
  Eigen::VectorXd y;               // B_WW^{-1} (A anchor)_W; multipliers are -2y
  Eigen::VectorXd residual = r0;   // A x for the current iterate

  auto solve_working = [&] {
    const int w = static_cast<int>(working.size());
    if (w == 0) {
      y.resize(0);
      residual = r0;
      return;
    }
    Eigen::MatrixXd b(w, w);
    Eigen::VectorXd rhs(w);
    for (int a = 0; a < w; ++a) {
      rhs(a) = r0(working[static_cast<std::size_t>(a)]);
      for (int c = 0; c < w; ++c)
        b(a, c) = a_gram_inv_at_(working[static_cast<std::size_t>(a)],
                                 working[static_cast<std::size_t>(c)]);
    }
    y = Eigen::LDLT<Eigen::MatrixXd>(b).solve(rhs);
    residual = r0;
    for (int a = 0; a < w; ++a)
      residual -= a_gram_inv_at_.col(working[static_cast<std::size_t>(a)]) * y(a);
  };

  int iterations = 0;
  for (;;) {
    solve_working();

    if (++iterations > max_iter) {
      sol.x = anchor;
      for (std::size_t a = 0; a < working.size(); ++a)
        sol.x -= gram_inv_at_.col(working[a]) * y(static_cast<int>(a));
      for (std::size_t a = 0; a < working.size(); ++a)
        sol.multipliers(working[a]) = -2.0 * y(static_cast<int>(a));
      sol.active_set = working;
      sol.iterations = iterations;
      sol.kkt_residual = std::numeric_limits<double>::infinity();
      throw QpNonconvergence("cone projection did not converge in " +
                                 std::to_string(max_iter) + " iterations",
                             std::move(sol));
    }

    // Dual feasibility: multipliers lambda = -2y must be nonnegative. Drop
    // the row with the most negative multiplier (lowest index on ties).
    if (!working.empty()) {
      const double lambda_scale = std::max(1.0, 2.0 * y.cwiseAbs().maxCoeff());
      int drop = -1;
      double most_negative = -1e-12 * lambda_scale;
      for (std::size_t a = 0; a < working.size(); ++a) {
        const double lambda = -2.0 * y(static_cast<int>(a));
        const bool better = lambda < most_negative ||
                            (drop >= 0 && lambda == most_negative &&
                             working[a] < working[static_cast<std::size_t>(drop)]);
        if (better) {
          most_negative = lambda;
          drop = static_cast<int>(a);
        }
      }
      if (drop >= 0) {
        in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = 0;
        working.erase(working.begin() + drop);
        continue;
      }
    }

    // Primal feasibility: add the most violated row (lowest index on ties).
    int add = -1;
    double worst = -opts_.feasibility_tol;
    for (int k = 0; k < m_; ++k) {
      if (in_working[static_cast<std::size_t>(k)]) continue;
      if (residual(k) < worst) {
        worst = residual(k);
        add = k;
      }
    }
    if (add == -1) break;
    working.push_back(add);
    in_working[static_cast<std::size_t>(add)] = 1;
  }

  sol.x = anchor;
  for (std::size_t a = 0; a < working.size(); ++a)
    sol.x -= gram_inv_at_.col(working[a]) * y(static_cast<int>(a));
  for (std::size_t a = 0; a < working.size(); ++a)
    sol.multipliers(working[a]) = std::max(0.0, -2.0 * y(static_cast<int>(a)));
  sol.active_set = working;
  std::sort(sol.active_set.begin(), sol.active_set.end());
  sol.iterations = iterations;

  QuadraticProgram qp{gram_, anchor, rows_};
  sol.kkt_residual = fosr::qpcore::kkt_residual(qp, sol.x, sol.multipliers);
  if (sol.kkt_residual > opts_.kkt_tol)
    throw NumericError("cone projection finished with KKT residual " +
                       std::to_string(sol.kkt_residual) + " above tolerance");
  return sol;
}

QpSolution solve(const QuadraticProgram& qp, const SolveOptions& opts) {
  ConeProjector projector(qp.gram, qp.rows, opts);
  return projector.project(qp.anchor);
}

double kkt_residual(const QuadraticProgram& qp, const Eigen::VectorXd& candidate,
                    const Eigen::VectorXd& multipliers) {
  const int d = static_cast<int>(qp.gram.rows());
  const int m = static_cast<int>(qp.rows.size());
  if (candidate.size() != d || multipliers.size() != m)
    throw NumericError("kkt_residual: dimension mismatch");

  Eigen::VectorXd stationarity = 2.0 * qp.gram * (candidate - qp.anchor);
  for (int k = 0; k < m; ++k) {
    const auto& row = qp.rows[static_cast<std::size_t>(k)];
    for (std::size_t j = 0; j < row.idx.size(); ++j)
      stationarity(row.idx[j]) -= row.val[j] * multipliers(k);
  }
  double worst = stationarity.cwiseAbs().maxCoeff();
  for (int k = 0; k < m; ++k) {
    const double ax = qp.rows[static_cast<std::size_t>(k)].dot(candidate);
    worst = std::max(worst, -ax);                             // primal violation
    worst = std::max(worst, -multipliers(k));                 // dual negativity
    worst = std::max(worst, std::abs(multipliers(k) * ax));   // complementarity
  }
  return std::max(worst, 0.0);
}

Eigen::VectorXd pava(const Eigen::VectorXd& values, const Eigen::VectorXd& weights) {
  const int n = static_cast<int>(values.size());
  if (weights.size() != n) throw NumericError("pava: values and weights differ in length");
  if (n > 0 && weights.minCoeff() <= 0.0) throw NumericError("pava: weights must be positive");

  std::vector<double> block_value, block_weight;
  std::vector<int> block_count;
  block_value.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    block_value.push_back(values(i));
    block_weight.push_back(weights(i));
    block_count.push_back(1);
    while (block_value.size() >= 2 &&
           block_value[block_value.size() - 2] > block_value.back()) {
      const std::size_t last = block_value.size() - 1;
      const double w = block_weight[last - 1] + block_weight[last];
      block_value[last - 1] =
          (block_weight[last - 1] * block_value[last - 1] + block_weight[last] * block_value[last]) / w;
      block_weight[last - 1] = w;
      block_count[last - 1] += block_count[last];
      block_value.pop_back();
      block_weight.pop_back();
      block_count.pop_back();
    }
  }

  Eigen::VectorXd out(n);
  int pos = 0;
  for (std::size_t b = 0; b < block_value.size(); ++b)
    for (int c = 0; c < block_count[b]; ++c) out(pos++) = block_value[b];
  return out;
}

}  // namespace fosr::qpcore
