#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "fosr/errors.hpp"
#include "fosr/interval.hpp"

namespace fosr::longdata {

enum class ShapeFamily {
  MonotoneIncreasing,
  MonotoneDecreasing,
  Convex,
  Concave,
  Positive,
  Negative,
};

bool is_monotone(ShapeFamily f);
bool is_curvature(ShapeFamily f);
// Decreasing/concave/negative are the sign-flipped counterparts of
// increasing/convex/positive.
bool is_flipped(ShapeFamily f);
std::string family_name(ShapeFamily f);
ShapeFamily family_from_name(const std::string& name);

struct ShapeTerm {
  ShapeFamily family;
  Interval interval;  // sub-interval of the normalized domain [0,1]
};

// All shape terms attached to one covariate. A single-element term list is
// the plain case; multiple terms form a combined constraint whose intervals
// may overlap.
struct ShapeConstraint {
  int covariate = 0;  // 0-based column index into the design
  std::vector<ShapeTerm> terms;
};

struct Hypothesis {
  std::vector<ShapeConstraint> constraints;

  void validate(int p) const;  // nonempty, unique covariates, intervals in [0,1]
};

struct SubjectRecord {
  Eigen::VectorXd covariates;   // length p
  std::vector<double> times;    // sorted, length L_i >= 1
  std::vector<double> responses;
};

class LongitudinalSample {
 public:
  LongitudinalSample() = default;
  // Validates invariants: nonempty subjects, equal covariate lengths, sorted
  // times inside the domain, full-column-rank design.
  LongitudinalSample(std::vector<SubjectRecord> subjects, Interval domain, bool normalized);

  int n() const { return static_cast<int>(subjects_.size()); }
  int p() const { return p_; }
  const std::vector<SubjectRecord>& subjects() const { return subjects_; }
  const Interval& domain() const { return domain_; }
  bool normalized() const { return normalized_; }

  std::size_t total_observations() const;
  Eigen::MatrixXd design_matrix() const;  // n x p

  // Affine maps between original time units and the normalized [0,1] scale.
  double to_unit(double t) const { return (t - domain_.lo) / domain_.length(); }
  double from_unit(double u) const { return domain_.lo + u * domain_.length(); }
  Interval to_unit(const Interval& iv) const { return {to_unit(iv.lo), to_unit(iv.hi)}; }
  Interval from_unit(const Interval& iv) const { return {from_unit(iv.lo), from_unit(iv.hi)}; }

 private:
  std::vector<SubjectRecord> subjects_;
  int p_ = 0;
  Interval domain_{0.0, 1.0};
  bool normalized_ = false;
};

struct CsvSchema {
  std::string id_column;
  std::string time_column;
  std::string response_column;
  std::vector<std::string> covariate_columns;
  char delimiter = ',';
  bool add_intercept = false;  // prepend an all-ones covariate
};

// Long-format ingest: one observation per row, subjects grouped by id, times
// sorted per subject. Domain defaults to [min T, max T].
LongitudinalSample load_csv(const std::string& path, const CsvSchema& schema,
                            std::optional<Interval> domain_override = {});

// Maps observation times affinely onto [0,1]; the original domain is kept so
// reports can convert back.
LongitudinalSample normalize_domain(const LongitudinalSample& sample);

struct RestrictionResult {
  LongitudinalSample sample;
  int subjects_dropped = 0;
  int observations_dropped = 0;
};

// Keeps only observations with time in `interval` (normalized units);
// subjects left empty are dropped. Errors when nothing remains.
RestrictionResult restrict_to_interval(const LongitudinalSample& sample, const Interval& interval);

}  // namespace fosr::longdata
