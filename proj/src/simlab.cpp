#include "fosr/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "fosr/parallel.hpp"
#include "fosr/rng.hpp"

namespace fosr::simlab {

using longdata::LongitudinalSample;

Eigen::Vector4d true_beta(double t) {
  // beta_1 = beta_3 rise exactly on [0, 0.5] and fall on [0.5, 1]; the
  // amplitude keeps the signal visible against the heavy noise process.
  Eigen::Vector4d beta;
  beta(0) = 2.0 * std::sin(std::numbers::pi * t);
  beta(1) = std::cos(2.0 * std::numbers::pi * t);
  beta(2) = 2.0 * std::sin(std::numbers::pi * t);
  beta(3) = 1.0 - t;
  return beta;
}

namespace {

constexpr int kNoiseTerms = 50;

const Eigen::MatrixXd& noise_cholesky() {
  static const Eigen::MatrixXd chol = [] {
    Eigen::MatrixXd cov(kNoiseTerms, kNoiseTerms);
    for (int a = 0; a < kNoiseTerms; ++a)
      for (int b = 0; b < kNoiseTerms; ++b) cov(a, b) = std::pow(0.5, std::abs(a - b));
    return Eigen::MatrixXd(cov.llt().matrixL());
  }();
  return chol;
}

}  // namespace

LongitudinalSample generate_sample(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample size must be positive");
  auto g = rng::stream(seed, 0x5a317);
  rng::Normal normal;
  const Eigen::MatrixXd& chol = noise_cholesky();

  std::vector<longdata::SubjectRecord> subjects;
  subjects.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    longdata::SubjectRecord rec;

    const int li = rng::uniform_int(g, 5, 15);
    rec.times.resize(static_cast<std::size_t>(li));
    for (double& t : rec.times) {
      // Beta(1, 1.25) via inverse CDF; right-skewed on [0,1].
      t = 1.0 - std::pow(1.0 - rng::uniform01(g), 1.0 / 1.25);
    }
    std::sort(rec.times.begin(), rec.times.end());

    double u5 = 0.0;
    Eigen::Vector4d u;
    for (int j = 0; j < 4; ++j) u(j) = rng::uniform01(g);
    u5 = rng::uniform01(g);
    rec.covariates = ((u.array() + 0.5 * u5) / 1.5).matrix();

    Eigen::VectorXd z(kNoiseTerms);
    for (int k = 0; k < kNoiseTerms; ++k) z(k) = normal(g);
    const Eigen::VectorXd xi = chol * z;

    rec.responses.resize(static_cast<std::size_t>(li));
    for (int l = 0; l < li; ++l) {
      const double t = rec.times[static_cast<std::size_t>(l)];
      double eps = 0.0;
      for (int k = 1; k <= kNoiseTerms; ++k)
        eps += xi(k - 1) / std::sqrt(static_cast<double>(k)) * std::numbers::sqrt2 *
               std::sin(2.0 * k * std::numbers::pi * t);
      eps += 0.1 * normal(g);
      rec.responses[static_cast<std::size_t>(l)] =
          rec.covariates.dot(true_beta(t)) + eps;
    }
    subjects.push_back(std::move(rec));
  }
  return LongitudinalSample(std::move(subjects), Interval{0.0, 1.0}, true);
}

longdata::Hypothesis scenario_hypothesis(const Interval& interval) {
  longdata::Hypothesis hyp;
  hyp.constraints.push_back(
      {0, {{longdata::ShapeFamily::MonotoneIncreasing, interval}}});
  hyp.constraints.push_back(
      {2, {{longdata::ShapeFamily::MonotoneIncreasing, interval}}});
  return hyp;
}

namespace {

LongitudinalSample make_subcohort(const LongitudinalSample& sample, const Interval& interval) {
  auto restricted = longdata::restrict_to_interval(sample, interval);
  std::vector<longdata::SubjectRecord> subjects = restricted.sample.subjects();
  for (auto& s : subjects)
    for (auto& t : s.times) t = (t - interval.lo) / interval.length();
  // The sub-interval becomes the whole domain; constraints become global.
  return LongitudinalSample(std::move(subjects), interval, true);
}

std::vector<int> covered_indices(const std::vector<double>& grid, const Interval& interval) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] >= interval.lo - 1e-12 && grid[i] <= interval.hi + 1e-12)
      idx.push_back(static_cast<int>(i));
  return idx;
}

}  // namespace

std::pair<double, double> isb_ivar(const std::vector<Eigen::MatrixXd>& runs,
                                   const std::vector<double>& grid, const Eigen::MatrixXd& truth,
                                   const Interval& interval) {
  if (runs.empty()) throw NumericError("isb_ivar: no runs supplied");
  const auto idx = covered_indices(grid, interval);
  if (idx.size() < 2 || grid[static_cast<std::size_t>(idx.front())] > interval.lo + 1e-9 ||
      grid[static_cast<std::size_t>(idx.back())] < interval.hi - 1e-9)
    throw NumericError("isb_ivar: grid does not cover the interval");

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(runs.front().rows(), runs.front().cols());
  for (const auto& r : runs) mean += r;
  mean /= static_cast<double>(runs.size());

  auto integrate = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
      const int i0 = idx[k];
      const int i1 = idx[k + 1];
      const double f0 = (a.col(i0) - b.col(i0)).squaredNorm();
      const double f1 = (a.col(i1) - b.col(i1)).squaredNorm();
      acc += 0.5 * (f0 + f1) *
             (grid[static_cast<std::size_t>(i1)] - grid[static_cast<std::size_t>(i0)]);
    }
    return acc;
  };

  const double isb = integrate(mean, truth) / interval.length();
  double ivar = 0.0;
  for (const auto& r : runs) ivar += integrate(r, mean);
  ivar /= static_cast<double>(runs.size()) * interval.length();
  return {isb, ivar};
}

MonteCarloReport run_power_study(const SimScenario& scenario) {
  if (scenario.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  const longdata::Hypothesis full_hypothesis = scenario_hypothesis(scenario.interval);
  const longdata::Hypothesis sub_hypothesis = scenario_hypothesis(Interval{0.0, 1.0});
  const bool subcohort = scenario.mode == CohortMode::SubCohort;

  const int runs = scenario.repetitions;
  std::vector<double> p_values(static_cast<std::size_t>(runs),
                               std::numeric_limits<double>::quiet_NaN());
  std::vector<Eigen::MatrixXd> estimates(static_cast<std::size_t>(runs));
  std::vector<std::vector<double>> grids(static_cast<std::size_t>(runs));
  std::vector<char> ok(static_cast<std::size_t>(runs), 0);

  parallel_for(runs, scenario.threads, [&](int r) {
    const std::uint64_t sample_seed = rng::derive(scenario.seed, 2 * static_cast<std::uint64_t>(r));
    const std::uint64_t test_seed =
        rng::derive(scenario.seed, 2 * static_cast<std::uint64_t>(r) + 1);
    try {
      LongitudinalSample sample = generate_sample(scenario.n, sample_seed);
      if (subcohort) sample = make_subcohort(sample, scenario.interval);

      infer::TestSpec spec;
      spec.hypothesis = subcohort ? sub_hypothesis : full_hypothesis;
      spec.engine = scenario.engine;
      spec.bootstrap_replicates = std::max(scenario.bootstrap, 1);
      spec.grid_size = scenario.grid_size;
      spec.seed = test_seed;
      spec.threads = 1;

      if (scenario.run_tests) {
        const infer::TestReport report = infer::run_test(sample, spec);
        p_values[static_cast<std::size_t>(r)] = report.p_value;
        grids[static_cast<std::size_t>(r)] = report.grid;
        estimates[static_cast<std::size_t>(r)] = report.beta_constrained;
      } else {
        // Estimation-only: resolve tuning and fit once, no bootstrap.
        infer::TestSpec resolved = spec;
        if (spec.engine.engine == infer::Engine::Kernel && !(spec.engine.bandwidth > 0.0)) {
          auto candidates = spec.engine.bandwidth_candidates;
          if (candidates.empty()) candidates = kernelfit::default_bandwidth_candidates();
          resolved.engine.bandwidth =
              kernelfit::select_bandwidth(sample, candidates, spec.engine.kernel, spec.cv_folds,
                                          test_seed)
                  .bandwidth;
        } else if (spec.engine.engine == infer::Engine::Spline &&
                   spec.engine.interior_knots.empty() && spec.engine.knot_count < 0) {
          auto counts = spec.engine.knot_candidates;
          if (counts.empty()) counts = {0, 1, 2, 3, 4};
          resolved.engine.knot_count =
              splinefit::select_knots(sample, counts, spec.hypothesis, spec.cv_folds, test_seed)
                  .count;
        }
        const auto grid = grid::build(spec.grid_size, resolved.hypothesis, 3);
        const auto context = infer::make_engine_context(sample, resolved, grid);
        const auto fit = context->fit(context->responses());
        grids[static_cast<std::size_t>(r)] = grid;
        estimates[static_cast<std::size_t>(r)] = fit.beta_constrained;
      }

      if (subcohort) {
        // Map the sub-domain grid back to the outer time scale.
        for (auto& t : grids[static_cast<std::size_t>(r)])
          t = scenario.interval.lo + t * scenario.interval.length();
      }
      ok[static_cast<std::size_t>(r)] = 1;
    } catch (const std::exception&) {
      // run failed; counted below
    }
  });

  MonteCarloReport report;
  std::vector<Eigen::MatrixXd> collected;
  std::vector<double> common_grid;
  for (int r = 0; r < runs; ++r) {
    if (!ok[static_cast<std::size_t>(r)]) {
      ++report.failures;
      continue;
    }
    if (scenario.run_tests) report.p_values.push_back(p_values[static_cast<std::size_t>(r)]);
    if (common_grid.empty()) common_grid = grids[static_cast<std::size_t>(r)];
    collected.push_back(estimates[static_cast<std::size_t>(r)]);
  }
  if (collected.empty()) throw FitError("every Monte Carlo run failed");

  if (scenario.run_tests) {
    for (double alpha : scenario.alphas) {
      int rejections = 0;
      for (double p : report.p_values)
        if (p < alpha) ++rejections;
      report.gamma[alpha] =
          static_cast<double>(rejections) / static_cast<double>(report.p_values.size());
    }
  }

  Eigen::MatrixXd truth(4, static_cast<int>(common_grid.size()));
  for (std::size_t g = 0; g < common_grid.size(); ++g)
    truth.col(static_cast<int>(g)) = true_beta(common_grid[g]);
  const auto [isb, ivar] = isb_ivar(collected, common_grid, truth, scenario.interval);
  report.isb = isb;
  report.ivar = ivar;

  if (scenario.collect_estimates) {
    report.estimate_grid = common_grid;
    report.estimates = std::move(collected);
  }
  return report;
}

}  // namespace fosr::simlab
