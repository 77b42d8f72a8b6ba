#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fosr/longdata.hpp"
#include "fosr/qpcore.hpp"

namespace fosr::splinefit {

// Piecewise polynomial on shared breakpoints; coefficients are stored in the
// local variable (t - break[i]) per interval, ascending degree. Exact
// differentiation/integration keeps the basis construction free of quadrature.
class PiecewisePoly {
 public:
  PiecewisePoly() = default;
  PiecewisePoly(std::vector<double> breaks, std::vector<std::vector<double>> coef);

  static PiecewisePoly zero(std::vector<double> breaks);

  double value(double t) const;
  PiecewisePoly derivative() const;
  // Cumulative integral from the first breakpoint.
  PiecewisePoly antiderivative() const;

  PiecewisePoly& add_scaled(const PiecewisePoly& other, double s);
  // Multiplies in place by the global-coordinate linear factor (a + b*t).
  PiecewisePoly& mul_linear(double a, double b);

  const std::vector<double>& breaks() const { return breaks_; }

 private:
  int interval_of(double t) const;
  std::vector<double> breaks_;
  std::vector<std::vector<double>> coef_;
};

// M-splines of the given order on interior knots in (0,1) with boundary knots
// {0,1}: nonnegative, each integrating to one over its support.
struct MSplineFamily {
  std::vector<PiecewisePoly> funcs;
  std::vector<Interval> supports;
  int order = 0;
};

MSplineFamily mspline_family(const std::vector<double>& interior_knots, int order);

// Per-operation entry points; t must lie in [0,1].
Eigen::VectorXd mspline_basis(double t, const std::vector<double>& interior_knots, int order);
std::pair<Eigen::VectorXd, Eigen::VectorXd> ispline_basis(double t,
                                                          const std::vector<double>& interior_knots);
std::tuple<Eigen::VectorXd, Eigen::VectorXd, Eigen::VectorXd> cspline_basis(
    double t, const std::vector<double>& interior_knots);

enum class BasisFamily { ISpline, CSpline };

// Expansion of one coefficient function: free polynomial terms (intercept,
// plus a linear term for the C-family) followed by the shape basis built on
// order-2 M-splines (quadratic I-splines / cubic C-splines).
class CovariateBasis {
 public:
  CovariateBasis() = default;
  CovariateBasis(BasisFamily family, std::vector<double> interior_knots);

  BasisFamily family() const { return family_; }
  const std::vector<double>& interior_knots() const { return interior_; }
  const std::vector<double>& all_knots() const { return knots_; }  // with boundaries
  int free_terms() const { return family_ == BasisFamily::CSpline ? 2 : 1; }
  int basis_count() const { return static_cast<int>(shape_.size()); }
  int dim() const { return free_terms() + basis_count(); }

  // Row of length dim(): value / first / second derivative of every column.
  Eigen::VectorXd eval(double t) const;
  Eigen::VectorXd eval_d1(double t) const;
  Eigen::VectorXd eval_d2(double t) const;

  // Support of the underlying M-spline: where the I-spline rises / the
  // C-spline bends. Index is into the shape basis (excludes free terms).
  const Interval& active_support(int k) const { return supports_[static_cast<std::size_t>(k)]; }

 private:
  BasisFamily family_ = BasisFamily::ISpline;
  std::vector<double> interior_;
  std::vector<double> knots_;
  std::vector<PiecewisePoly> shape_;     // I_k or C_k
  std::vector<PiecewisePoly> shape_d1_;  // M_k or I_k
  std::vector<PiecewisePoly> shape_d2_;  // M'_k or M_k
  std::vector<Interval> supports_;
};

// Picks the basis family per covariate from the hypothesis (C when any
// curvature term is present, I otherwise) and assembles interior knots as
// `equispaced_count` equispaced points plus the covariate's own constraint
// interval endpoints.
std::vector<CovariateBasis> make_bases(int p, const longdata::Hypothesis& hypothesis,
                                       int equispaced_count);
std::vector<CovariateBasis> make_bases(int p, const longdata::Hypothesis& hypothesis,
                                       const std::vector<double>& interior_knots);

struct SplineModel {
  std::vector<CovariateBasis> bases;
  Eigen::VectorXd coefficients;
  std::vector<int> offsets;  // start of each covariate's coefficient block

  double beta(int j, double t) const;
  double beta_d1(int j, double t) const;
  Eigen::MatrixXd evaluate(const std::vector<double>& grid) const;  // p x grid.size()
};

// Design rows, normal matrix and pivoted factorization are computed once so
// bootstrap replicates can refit cheaply for new responses.
class SplineDesign {
 public:
  SplineDesign(const longdata::LongitudinalSample& sample, std::vector<CovariateBasis> bases);

  const std::vector<CovariateBasis>& bases() const { return bases_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  int total_dim() const { return total_dim_; }
  const std::vector<int>& offsets() const { return offsets_; }

  Eigen::VectorXd solve_unconstrained(const Eigen::VectorXd& y_flat) const;
  Eigen::VectorXd fitted(const Eigen::VectorXd& coefficients) const;  // at all observations
  const Eigen::VectorXd& responses() const { return y_; }
  double weighted_rss(const Eigen::VectorXd& coefficients) const;

 private:
  std::vector<CovariateBasis> bases_;
  std::vector<int> offsets_;
  int total_dim_ = 0;
  Eigen::MatrixXd design_;   // sqrt(weight)-scaled rows
  Eigen::VectorXd y_;        // raw responses, observation order
  Eigen::VectorXd sqrt_w_;
  Eigen::MatrixXd gram_;
  Eigen::LDLT<Eigen::MatrixXd> gram_ldlt_;
};

enum class ConstraintMode {
  Reduced,  // coefficient sign / weighted-sum rows specific to I- and C-bases
  Generic,  // derivative or value rows on a dense grid of each interval
};

struct CoefficientConstraintSet {
  std::vector<qpcore::SparseRow> rows;
  std::vector<std::string> labels;  // one per row group, for reports
};

CoefficientConstraintSet coefficient_constraints(const std::vector<CovariateBasis>& bases,
                                                 const std::vector<int>& offsets,
                                                 const longdata::Hypothesis& hypothesis,
                                                 ConstraintMode mode = ConstraintMode::Reduced,
                                                 int generic_grid = 201);

SplineModel unconstrained_fit(const longdata::LongitudinalSample& sample,
                              std::vector<CovariateBasis> bases);

struct ConstrainedSplineFit {
  SplineModel model;
  qpcore::QpSolution qp;
};

ConstrainedSplineFit constrained_fit(const longdata::LongitudinalSample& sample,
                                     std::vector<CovariateBasis> bases,
                                     const longdata::Hypothesis& hypothesis,
                                     ConstraintMode mode = ConstraintMode::Reduced);

struct KnotSelection {
  int count = 0;
  std::vector<double> cv_errors;  // per candidate
  std::vector<CovariateBasis> bases;
};

// Subject-level k-fold cross-validation over candidate counts of equispaced
// interior knots; ties resolve to fewer knots.
KnotSelection select_knots(const longdata::LongitudinalSample& sample,
                           const std::vector<int>& candidate_counts,
                           const longdata::Hypothesis& hypothesis, int folds, std::uint64_t seed,
                           int threads = 1);

}  // namespace fosr::splinefit
