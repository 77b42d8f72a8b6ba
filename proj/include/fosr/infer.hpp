#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "fosr/kernelfit.hpp"
#include "fosr/longdata.hpp"
#include "fosr/splinefit.hpp"

namespace fosr::infer {

enum class Engine { Kernel, Spline };

enum class MultiplierLaw { Mammen, Rademacher };

// Bootstrap responses are always recentered on the constrained (null) fit;
// the residuals multiplied per subject may come from either estimator.
enum class ResidualSource { Unconstrained, Constrained };

struct EngineSpec {
  Engine engine = Engine::Kernel;

  // kernel engine
  simd::WeightFn kernel = simd::WeightFn::Epanechnikov;
  double bandwidth = 0.0;  // normalized units; <= 0 requests cross-validation
  std::vector<double> bandwidth_candidates;  // empty -> defaults

  // spline engine
  std::vector<double> interior_knots;  // normalized; when set, used as-is
  int knot_count = -1;                 // >= 0 -> equispaced count; -1 -> cross-validation
  std::vector<int> knot_candidates;    // empty -> {0,1,2,3,4}
};

struct TestSpec {
  longdata::Hypothesis hypothesis;
  EngineSpec engine;
  int bootstrap_replicates = 250;
  double alpha = 0.05;
  int grid_size = 30;  // estimation/quadrature grid density
  MultiplierLaw multiplier = MultiplierLaw::Mammen;
  ResidualSource residuals = ResidualSource::Unconstrained;
  std::uint64_t seed = 0;
  int threads = 1;
  int cv_folds = 5;
};

struct TestReport {
  double d_observed = 0.0;
  std::vector<double> d_bootstrap;  // successful replicates, in replicate order
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  int requested_replicates = 0;
  int failed_replicates = 0;

  Engine engine = Engine::Kernel;
  double bandwidth = 0.0;                        // resolved, normalized units
  std::vector<std::vector<double>> knots;        // resolved interior knots per covariate
  double max_kkt_residual = 0.0;                 // across the original fit and replicates

  std::vector<double> grid;                      // quadrature grid
  Eigen::MatrixXd beta_constrained;              // p x grid, original-sample fit
  Eigen::MatrixXd beta_unconstrained;
  double seconds = 0.0;
};

// Covariate-weighted L2 distance between the two estimates on a common grid:
// integral of (beta_c - beta_u)' Sigma_X (beta_c - beta_u) by the trapezoid
// rule; algebraically equal to the per-subject average of integrated squared
// fitted differences.
double test_statistic(const Eigen::MatrixXd& sigma_x, const std::vector<double>& grid,
                      const Eigen::MatrixXd& constrained, const Eigen::MatrixXd& unconstrained);

// One fit of both estimators, reusable across bootstrap replicates: weights,
// grams and constraint factorizations are computed once at construction.
class EngineContext {
 public:
  virtual ~EngineContext() = default;

  struct FitResult {
    Eigen::MatrixXd beta_unconstrained;  // p x grid
    Eigen::MatrixXd beta_constrained;
    Eigen::VectorXd fitted_constrained;    // at every observation, flat order
    Eigen::VectorXd fitted_unconstrained;  // same layout
    double kkt_residual = 0.0;
  };

  virtual FitResult fit(const Eigen::VectorXd& y_flat) const = 0;
  virtual const Eigen::VectorXd& responses() const = 0;
  virtual const std::vector<double>& grid() const = 0;
};

std::unique_ptr<EngineContext> make_engine_context(const longdata::LongitudinalSample& sample,
                                                   const TestSpec& spec,
                                                   const std::vector<double>& grid);

// Clustered wild bootstrap under the null: one multiplier per subject applied
// to null-model residuals, both estimators refit per replicate with frozen
// tuning. Expects resolved tuning (bandwidth/knots) in the spec.
TestReport wild_bootstrap(const longdata::LongitudinalSample& sample, const TestSpec& spec);

// End-to-end: normalize, cross-validate unset tuning, fit, bootstrap.
TestReport run_test(const longdata::LongitudinalSample& sample, const TestSpec& spec);

double draw_multiplier(MultiplierLaw law, std::mt19937_64& g);

}  // namespace fosr::infer
