#include "fosr/kernelfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fosr/cvfolds.hpp"
#include "fosr/parallel.hpp"

namespace fosr::kernelfit {

using longdata::Hypothesis;
using longdata::LongitudinalSample;
using longdata::ShapeFamily;

Eigen::VectorXd interpolate_columns(const std::vector<double>& grid,
                                    const Eigen::MatrixXd& values, double t) {
  if (t <= grid.front()) return values.col(0);
  if (t >= grid.back()) return values.col(static_cast<int>(grid.size()) - 1);
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  const int hi = static_cast<int>(it - grid.begin());
  const int lo = hi - 1;
  const double gap = grid[static_cast<std::size_t>(hi)] - grid[static_cast<std::size_t>(lo)];
  const double w = gap > 0.0 ? (t - grid[static_cast<std::size_t>(lo)]) / gap : 0.0;
  return (1.0 - w) * values.col(lo) + w * values.col(hi);
}

Eigen::VectorXd LocalFit::beta_at(double t) const {
  return interpolate_columns(grid, values, t).head(p());
}

KernelDesign::KernelDesign(const LongitudinalSample& sample, const KernelSpec& spec,
                           std::vector<double> grid)
    : p_(sample.p()), n_(sample.n()), spec_(spec), grid_(std::move(grid)) {
  if (!sample.normalized()) throw DataError("kernel design expects a normalized sample");
  if (!(spec_.bandwidth > 0.0 && spec_.bandwidth <= 1.0))
    throw ConfigError("bandwidth must lie in (0, 1] after normalization");
  if (grid_.size() < 2 || !std::is_sorted(grid_.begin(), grid_.end()))
    throw ConfigError("evaluation grid must be sorted with at least two points");

  const std::size_t total = sample.total_observations();
  times_.resize(static_cast<int>(total));
  responses_.resize(static_cast<int>(total));
  wpre_.resize(static_cast<int>(total));
  offsets_.assign(static_cast<std::size_t>(n_) + 1, 0);
  x_.resize(n_, p_);

  int pos = 0;
  for (int i = 0; i < n_; ++i) {
    const auto& s = sample.subjects()[static_cast<std::size_t>(i)];
    x_.row(i) = s.covariates;
    offsets_[static_cast<std::size_t>(i)] = pos;
    const double w = 1.0 / (static_cast<double>(n_) * static_cast<double>(s.times.size()));
    for (std::size_t l = 0; l < s.times.size(); ++l) {
      times_(pos) = s.times[l];
      responses_(pos) = s.responses[l];
      wpre_(pos) = w;
      ++pos;
    }
  }
  offsets_[static_cast<std::size_t>(n_)] = pos;

  std::vector<Eigen::MatrixXd> outer(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i)
    outer[static_cast<std::size_t>(i)] = x_.row(i).transpose() * x_.row(i);

  const int m_points = static_cast<int>(grid_.size());
  grams_.resize(static_cast<std::size_t>(m_points));
  gram_llt_.resize(static_cast<std::size_t>(m_points));
  k_.resize(static_cast<std::size_t>(m_points));
  kd_.resize(static_cast<std::size_t>(m_points));

  for (int m = 0; m < m_points; ++m) {
    const double t0 = grid_[static_cast<std::size_t>(m)];
    auto& k = k_[static_cast<std::size_t>(m)];
    auto& kd = kd_[static_cast<std::size_t>(m)];
    k.resize(static_cast<int>(total));
    kd.resize(static_cast<int>(total));
    simd::kernel_weights(spec_.kernel, times_.data(), wpre_.data(), total, t0, spec_.bandwidth,
                         k.data(), kd.data());

    Eigen::MatrixXd m0 = Eigen::MatrixXd::Zero(p_, p_);
    Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(p_, p_);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(p_, p_);
    for (int i = 0; i < n_; ++i) {
      const int lo = offsets_[static_cast<std::size_t>(i)];
      const int len = offsets_[static_cast<std::size_t>(i) + 1] - lo;
      double sums[5];
      simd::kernel_moments(spec_.kernel, times_.data() + lo, responses_.data() + lo,
                           wpre_.data() + lo, static_cast<std::size_t>(len), t0, spec_.bandwidth,
                           sums);
      if (sums[0] == 0.0 && sums[1] == 0.0 && sums[2] == 0.0) continue;
      m0 += sums[0] * outer[static_cast<std::size_t>(i)];
      m1 += sums[1] * outer[static_cast<std::size_t>(i)];
      m2 += sums[2] * outer[static_cast<std::size_t>(i)];
    }

    Eigen::MatrixXd psi(2 * p_, 2 * p_);
    psi.topLeftCorner(p_, p_) = m0;
    psi.topRightCorner(p_, p_) = m1;
    psi.bottomLeftCorner(p_, p_) = m1;
    psi.bottomRightCorner(p_, p_) = m2;
    try {
      qpcore::ridge_repair_psd(psi);
    } catch (const NumericError&) {
      throw FitError("local gram is irreparably singular at grid point " + std::to_string(m) +
                     " (t=" + std::to_string(t0) + "); consider a larger bandwidth");
    }
    gram_llt_[static_cast<std::size_t>(m)].compute(psi);
    if (gram_llt_[static_cast<std::size_t>(m)].info() != Eigen::Success)
      throw FitError("local gram factorization failed at grid point " + std::to_string(m) +
                     " (t=" + std::to_string(t0) + "); consider a larger bandwidth");
    grams_[static_cast<std::size_t>(m)] = std::move(psi);
  }
}

LocalFit KernelDesign::fit(const Eigen::VectorXd& y_flat) const {
  if (y_flat.size() != responses_.size())
    throw FitError("response length mismatch in kernel fit");

  LocalFit out;
  out.grid = grid_;
  out.grams = grams_;
  out.values.resize(2 * p_, static_cast<int>(grid_.size()));

  Eigen::VectorXd b(2 * p_);
  for (std::size_t m = 0; m < grid_.size(); ++m) {
    b.setZero();
    const auto& k = k_[m];
    const auto& kd = kd_[m];
    for (int i = 0; i < n_; ++i) {
      const int lo = offsets_[static_cast<std::size_t>(i)];
      const int len = offsets_[static_cast<std::size_t>(i) + 1] - lo;
      const double u0 = simd::dot(k.data() + lo, y_flat.data() + lo,
                                  static_cast<std::size_t>(len));
      const double u1 = simd::dot(kd.data() + lo, y_flat.data() + lo,
                                  static_cast<std::size_t>(len));
      if (u0 != 0.0) b.head(p_) += u0 * x_.row(i).transpose();
      if (u1 != 0.0) b.tail(p_) += u1 * x_.row(i).transpose();
    }
    out.values.col(static_cast<int>(m)) = gram_llt_[m].solve(b);
  }
  return out;
}

LocalFit unconstrained_fit(const LongitudinalSample& sample, const KernelSpec& spec,
                           const std::vector<double>& grid) {
  return KernelDesign(sample, spec, grid).fit();
}

namespace {

int find_exact(const std::vector<double>& grid, double x) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), x);
  if (it == grid.end() || *it != x) return -1;
  return static_cast<int>(it - grid.begin());
}

}  // namespace

Eigen::MatrixXd stacked_gram(const std::vector<Eigen::MatrixXd>& grams) {
  if (grams.empty()) throw NumericError("no gram blocks to stack");
  const int block = static_cast<int>(grams.front().rows());
  const int d = block * static_cast<int>(grams.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t m = 0; m < grams.size(); ++m)
    g.block(static_cast<int>(m) * block, static_cast<int>(m) * block, block, block) = grams[m];
  return g;
}

ConstraintAssembly assemble_constraints(const Hypothesis& hypothesis,
                                        const std::vector<double>& grid, int p) {
  hypothesis.validate(p);
  const int points = static_cast<int>(grid.size());
  ConstraintAssembly out;
  out.dimension = 2 * p * points;

  const auto beta_index = [&](int m, int j) { return 2 * p * m + j; };
  const auto deriv_index = [&](int m, int j) { return 2 * p * m + p + j; };

  for (const auto& constraint : hypothesis.constraints) {
    const int j = constraint.covariate;
    for (const auto& term : constraint.terms) {
      const Interval& iv = term.interval;
      if (find_exact(grid, iv.lo) < 0 || find_exact(grid, iv.hi) < 0)
        throw FitError("constraint interval endpoints are not members of the grid");
      const auto idx = grid::indices_in(grid, iv);
      if (static_cast<int>(idx.size()) < 2)
        throw FitError("constraint interval contains fewer than two grid points");

      const double sign = longdata::is_flipped(term.family) ? -1.0 : 1.0;
      ConstraintBlock block{j, term.family, iv, static_cast<int>(out.rows.size()), 0};

      if (longdata::is_monotone(term.family)) {
        for (std::size_t m = 1; m < idx.size(); ++m) {
          qpcore::SparseRow row;
          row.add(beta_index(idx[m - 1], j), -sign);
          row.add(beta_index(idx[m], j), sign);
          out.rows.push_back(std::move(row));
        }
      } else if (longdata::is_curvature(term.family)) {
        for (std::size_t m = 1; m < idx.size(); ++m) {
          const double gap = grid[static_cast<std::size_t>(idx[m])] -
                             grid[static_cast<std::size_t>(idx[m - 1])];
          qpcore::SparseRow row;
          row.add(beta_index(idx[m - 1], j), -sign / gap);
          row.add(beta_index(idx[m], j), sign / gap);
          row.add(deriv_index(idx[m - 1], j), -sign);
          out.rows.push_back(std::move(row));
        }
      } else {
        for (int m : idx) {
          qpcore::SparseRow row;
          row.add(beta_index(m, j), sign);
          out.rows.push_back(std::move(row));
        }
      }

      block.row_end = static_cast<int>(out.rows.size());
      out.blocks.push_back(block);
    }
  }

  if (static_cast<int>(out.rows.size()) > out.dimension)
    throw FitError("constraint row count " + std::to_string(out.rows.size()) +
                   " exceeds the feasibility bound 2p(M+1) = " + std::to_string(out.dimension));
  return out;
}

ConstrainedLocalFit constrained_fit(const LongitudinalSample& sample, const KernelSpec& spec,
                                    const Hypothesis& hypothesis,
                                    const std::vector<double>& grid) {
  KernelDesign design(sample, spec, grid);
  LocalFit unconstrained = design.fit();
  ConstraintAssembly assembly = assemble_constraints(hypothesis, grid, sample.p());

  qpcore::ConeProjector projector(stacked_gram(design.grams()), assembly.rows);
  const Eigen::Map<const Eigen::VectorXd> anchor(unconstrained.values.data(),
                                                 unconstrained.values.size());
  ConstrainedLocalFit out;
  out.qp = projector.project(anchor);
  out.fit = unconstrained;
  out.fit.values = Eigen::Map<const Eigen::MatrixXd>(out.qp.x.data(),
                                                     unconstrained.values.rows(),
                                                     unconstrained.values.cols());
  return out;
}

BandwidthSelection select_bandwidth(const LongitudinalSample& sample,
                                    const std::vector<double>& candidates, WeightFn kernel,
                                    int folds, std::uint64_t seed, int threads) {
  if (candidates.empty()) throw ConfigError("no candidate bandwidths supplied");
  if (sample.n() < folds)
    throw FitError("cross-validation needs at least " + std::to_string(folds) + " subjects");

  std::vector<double> hs = candidates;
  std::sort(hs.begin(), hs.end());
  const auto fold_of = cv::assign_folds(sample.n(), folds, seed);
  const auto cv_grid = grid::build_plain(30);

  std::vector<double> errors(hs.size(), std::numeric_limits<double>::infinity());
  parallel_for(static_cast<int>(hs.size()), threads, [&](int ci) {
    const double h = hs[static_cast<std::size_t>(ci)];
    double total = 0.0;
    try {
      for (int f = 0; f < folds; ++f) {
        std::vector<longdata::SubjectRecord> train, held;
        for (int i = 0; i < sample.n(); ++i) {
          const auto& s = sample.subjects()[static_cast<std::size_t>(i)];
          (fold_of[static_cast<std::size_t>(i)] == f ? held : train).push_back(s);
        }
        if (train.empty() || held.empty()) continue;
        LongitudinalSample training(std::move(train), sample.domain(), true);
        const LocalFit fit = unconstrained_fit(training, {kernel, h}, cv_grid);
        for (const auto& s : held) {
          double subject_err = 0.0;
          for (std::size_t l = 0; l < s.times.size(); ++l) {
            const double yhat = s.covariates.dot(fit.beta_at(s.times[l]));
            const double r = s.responses[l] - yhat;
            subject_err += r * r;
          }
          total += subject_err / static_cast<double>(s.times.size());
        }
      }
      errors[static_cast<std::size_t>(ci)] = total;
    } catch (const std::exception&) {
      // candidate unusable at this bandwidth; keep +inf
    }
  });

  // ties up to numerical noise resolve to the earlier, smaller bandwidth
  double response_scale = 0.0;
  for (const auto& s : sample.subjects()) {
    double sq = 0.0;
    for (double y : s.responses) sq += y * y;
    response_scale += sq / static_cast<double>(s.responses.size());
  }
  const double tie_eps = 1e-12 * std::max(response_scale, 1.0);
  int best = -1;
  for (std::size_t ci = 0; ci < hs.size(); ++ci) {
    if (!std::isfinite(errors[ci])) continue;
    if (best < 0 ||
        errors[ci] < errors[static_cast<std::size_t>(best)] * (1.0 - 1e-9) - tie_eps)
      best = static_cast<int>(ci);
  }
  if (best < 0) throw FitError("bandwidth selection failed for every candidate");

  BandwidthSelection out;
  out.bandwidth = hs[static_cast<std::size_t>(best)];
  out.cv_errors = errors;
  out.candidates = hs;
  return out;
}

}  // namespace fosr::kernelfit
