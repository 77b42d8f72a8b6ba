#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

#include "fosr/infer.hpp"
#include "fosr/longdata.hpp"

namespace fosr::simlab {

enum class CohortMode { FullCohort, SubCohort };

struct SimScenario {
  int n = 100;
  Interval interval{0.0, 0.5};  // sub-interval under test
  infer::EngineSpec engine;
  int repetitions = 250;
  int bootstrap = 250;
  CohortMode mode = CohortMode::FullCohort;
  std::uint64_t seed = 0;
  std::vector<double> alphas{0.05, 0.1};
  int grid_size = 30;
  int threads = 1;
  bool run_tests = true;          // false: estimation study only (ISB/IVar)
  bool collect_estimates = true;  // keep per-run estimate grids
};

struct MonteCarloReport {
  std::map<double, double> gamma;    // alpha -> rejection rate
  double isb = 0.0;
  double ivar = 0.0;
  std::vector<double> p_values;      // per successful run
  int failures = 0;

  // per-run constrained estimates over the scenario interval, original scale
  std::vector<double> estimate_grid;             // may be empty
  std::vector<Eigen::MatrixXd> estimates;        // p x grid per run
};

// Surrogate truth: beta_1 = beta_3 = sin(pi t) (increasing exactly on
// [0, 0.5]), beta_2 = cos(2 pi t), beta_4 = 1 - t.
Eigen::Vector4d true_beta(double t);

// The generator: T ~ Beta(1,1.25), L_i uniform on {5..15}, correlated uniform
// covariates, AR(1)-coupled sine expansion noise plus white noise.
longdata::LongitudinalSample generate_sample(int n, std::uint64_t seed);

// Monotone-increasing hypothesis on covariates 1 and 3 over `interval`.
longdata::Hypothesis scenario_hypothesis(const Interval& interval);

MonteCarloReport run_power_study(const SimScenario& scenario);

// Trapezoid ISB/IVar over `interval`, normalized by its length. All runs
// share `grid` (which must cover the interval); `truth` is evaluated
// column-wise on the grid.
std::pair<double, double> isb_ivar(const std::vector<Eigen::MatrixXd>& runs,
                                   const std::vector<double>& grid, const Eigen::MatrixXd& truth,
                                   const Interval& interval);

}  // namespace fosr::simlab
