#pragma once

#include <functional>
#include <random>
#include <vector>

#include "fosr/longdata.hpp"
#include "fosr/rng.hpp"

namespace fosr::testutil {

// Synthetic normalized sample: times uniform on [0,1], covariates uniform on
// [low, high], responses y = x' beta(t) + noise_sd * N(0,1).
inline longdata::LongitudinalSample make_sample(
    int n, int p, int obs_per_subject, std::uint64_t seed,
    const std::function<Eigen::VectorXd(double)>& beta, double noise_sd = 0.0,
    double cov_low = -1.0, double cov_high = 1.0) {
  auto g = rng::stream(seed, 0x7e57);
  rng::Normal normal;
  std::vector<longdata::SubjectRecord> subjects;
  for (int i = 0; i < n; ++i) {
    longdata::SubjectRecord rec;
    rec.covariates.resize(p);
    for (int j = 0; j < p; ++j) rec.covariates(j) = rng::uniform(g, cov_low, cov_high);
    rec.times.resize(static_cast<std::size_t>(obs_per_subject));
    for (auto& t : rec.times) t = rng::uniform01(g);
    std::sort(rec.times.begin(), rec.times.end());
    rec.responses.resize(rec.times.size());
    for (std::size_t l = 0; l < rec.times.size(); ++l) {
      rec.responses[l] = rec.covariates.dot(beta(rec.times[l]));
      if (noise_sd > 0.0) rec.responses[l] += noise_sd * normal(g);
    }
    subjects.push_back(std::move(rec));
  }
  return longdata::LongitudinalSample(std::move(subjects), Interval{0.0, 1.0}, true);
}

}  // namespace fosr::testutil
