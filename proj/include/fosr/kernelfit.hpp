#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fosr/grid.hpp"
#include "fosr/longdata.hpp"
#include "fosr/qpcore.hpp"
#include "fosr/simd/ops.hpp"

namespace fosr::kernelfit {

using simd::WeightFn;

struct KernelSpec {
  WeightFn kernel = WeightFn::Epanechnikov;
  double bandwidth = 0.2;  // normalized time units, in (0, 1]
};

// Local-linear evaluations on a grid: column m is (beta(t_m), beta_dot(t_m))
// stacked, with the kernel-weighted local gram of each grid point alongside.
struct LocalFit {
  std::vector<double> grid;
  Eigen::MatrixXd values;               // 2p x (M+1)
  std::vector<Eigen::MatrixXd> grams;   // M+1 matrices, each 2p x 2p

  int p() const { return static_cast<int>(values.rows()) / 2; }
  Eigen::MatrixXd beta() const { return values.topRows(p()); }
  // Linear interpolation of the value rows at t.
  Eigen::VectorXd beta_at(double t) const;
};

Eigen::VectorXd interpolate_columns(const std::vector<double>& grid,
                                    const Eigen::MatrixXd& values, double t);

struct ConstraintBlock {
  int covariate;
  longdata::ShapeFamily family;
  Interval interval;
  int row_begin;
  int row_end;
};

// Inequality rows over the stacked vector (vec B(t_0), ..., vec B(t_M)).
struct ConstraintAssembly {
  std::vector<qpcore::SparseRow> rows;
  std::vector<ConstraintBlock> blocks;
  int dimension = 0;
};

// Precomputes kernel weights, local grams and their factorizations for one
// (sample, bandwidth, grid) so refits for new responses cost only the
// weighted cross-moments. Immutable and safe to share across threads.
class KernelDesign {
 public:
  KernelDesign(const longdata::LongitudinalSample& sample, const KernelSpec& spec,
               std::vector<double> grid);

  const std::vector<double>& grid() const { return grid_; }
  int p() const { return p_; }
  int n() const { return n_; }
  const KernelSpec& spec() const { return spec_; }
  const std::vector<Eigen::MatrixXd>& grams() const { return grams_; }
  const Eigen::VectorXd& responses() const { return responses_; }

  LocalFit fit(const Eigen::VectorXd& y_flat) const;
  LocalFit fit() const { return fit(responses_); }

 private:
  int p_ = 0;
  int n_ = 0;
  KernelSpec spec_;
  std::vector<double> grid_;
  Eigen::VectorXd times_, responses_, wpre_;
  std::vector<int> offsets_;  // subject segment starts, length n+1
  Eigen::MatrixXd x_;         // n x p
  std::vector<Eigen::MatrixXd> grams_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> gram_llt_;
  std::vector<Eigen::VectorXd> k_, kd_;  // per grid point, one weight per observation
};

LocalFit unconstrained_fit(const longdata::LongitudinalSample& sample, const KernelSpec& spec,
                           const std::vector<double>& grid);

ConstraintAssembly assemble_constraints(const longdata::Hypothesis& hypothesis,
                                        const std::vector<double>& grid, int p);

// Block-diagonal gram of the stacked quadratic form.
Eigen::MatrixXd stacked_gram(const std::vector<Eigen::MatrixXd>& grams);

struct ConstrainedLocalFit {
  LocalFit fit;
  qpcore::QpSolution qp;
};

ConstrainedLocalFit constrained_fit(const longdata::LongitudinalSample& sample,
                                    const KernelSpec& spec,
                                    const longdata::Hypothesis& hypothesis,
                                    const std::vector<double>& grid);

struct BandwidthSelection {
  double bandwidth = 0.0;
  std::vector<double> cv_errors;  // per candidate, ascending bandwidth order
  std::vector<double> candidates;
};

// Subject-level k-fold cross-validation of the unconstrained fit; held-out
// trajectories are predicted by grid interpolation. Ties pick the smaller
// bandwidth.
BandwidthSelection select_bandwidth(const longdata::LongitudinalSample& sample,
                                    const std::vector<double>& candidates, WeightFn kernel,
                                    int folds, std::uint64_t seed, int threads = 1);

inline std::vector<double> default_bandwidth_candidates() {
  return {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4};
}

}  // namespace fosr::kernelfit
