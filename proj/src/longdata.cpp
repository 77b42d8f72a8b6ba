#include "fosr/longdata.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace fosr::longdata {

bool is_monotone(ShapeFamily f) {
  return f == ShapeFamily::MonotoneIncreasing || f == ShapeFamily::MonotoneDecreasing;
}

bool is_curvature(ShapeFamily f) {
  return f == ShapeFamily::Convex || f == ShapeFamily::Concave;
}

bool is_flipped(ShapeFamily f) {
  return f == ShapeFamily::MonotoneDecreasing || f == ShapeFamily::Concave ||
         f == ShapeFamily::Negative;
}

std::string family_name(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::MonotoneIncreasing: return "monotone_increasing";
    case ShapeFamily::MonotoneDecreasing: return "monotone_decreasing";
    case ShapeFamily::Convex: return "convex";
    case ShapeFamily::Concave: return "concave";
    case ShapeFamily::Positive: return "positive";
    case ShapeFamily::Negative: return "negative";
  }
  return "?";
}

ShapeFamily family_from_name(const std::string& name) {
  if (name == "monotone_increasing" || name == "increasing") return ShapeFamily::MonotoneIncreasing;
  if (name == "monotone_decreasing" || name == "decreasing") return ShapeFamily::MonotoneDecreasing;
  if (name == "convex") return ShapeFamily::Convex;
  if (name == "concave") return ShapeFamily::Concave;
  if (name == "positive") return ShapeFamily::Positive;
  if (name == "negative") return ShapeFamily::Negative;
  throw ConfigError("unknown shape family '" + name + "'");
}

void Hypothesis::validate(int p) const {
  if (constraints.empty()) throw ConfigError("hypothesis has no constraints");
  std::vector<bool> seen(static_cast<std::size_t>(p), false);
  for (const auto& c : constraints) {
    if (c.covariate < 0 || c.covariate >= p)
      throw ConfigError("constraint covariate index " + std::to_string(c.covariate) +
                        " outside design with p=" + std::to_string(p));
    if (seen[static_cast<std::size_t>(c.covariate)])
      throw ConfigError("multiple constraint lists for covariate index " +
                        std::to_string(c.covariate));
    seen[static_cast<std::size_t>(c.covariate)] = true;
    if (c.terms.empty()) throw ConfigError("constraint with empty term list");
    for (const auto& term : c.terms) {
      if (!term.interval.valid() || term.interval.lo < 0.0 || term.interval.hi > 1.0)
        throw ConfigError("constraint interval must satisfy 0 <= a < b <= 1");
    }
  }
}

namespace {

void check_design_rank(const Eigen::MatrixXd& design) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) throw DataError("empty design matrix");
  const double tol = 1e-10 * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  if (rank < design.cols())
    throw DataError("design matrix is rank deficient (rank " + std::to_string(rank) + " < p=" +
                    std::to_string(design.cols()) + "); remove collinear covariates");
}

}  // namespace

LongitudinalSample::LongitudinalSample(std::vector<SubjectRecord> subjects, Interval domain,
                                       bool normalized)
    : subjects_(std::move(subjects)), domain_(domain), normalized_(normalized) {
  if (subjects_.empty()) throw DataError("sample has no subjects");
  if (!(domain_.length() >= 0.0)) throw DataError("invalid time domain");
  p_ = static_cast<int>(subjects_.front().covariates.size());
  if (p_ < 1) throw DataError("subjects carry no covariates");

  const Interval unit{0.0, 1.0};
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    auto& s = subjects_[i];
    if (static_cast<int>(s.covariates.size()) != p_)
      throw DataError("subject " + std::to_string(i) + " has covariate length " +
                      std::to_string(s.covariates.size()) + ", expected " + std::to_string(p_));
    if (s.times.empty() || s.times.size() != s.responses.size())
      throw DataError("subject " + std::to_string(i) + " has mismatched or empty observations");
    if (!std::is_sorted(s.times.begin(), s.times.end()))
      throw DataError("subject " + std::to_string(i) + " has unsorted times");
    const Interval& range = normalized_ ? unit : domain_;
    for (double t : s.times) {
      if (t < range.lo - 1e-12 || t > range.hi + 1e-12)
        throw DataError("subject " + std::to_string(i) + " has time outside the domain");
    }
  }
  check_design_rank(design_matrix());
}

std::size_t LongitudinalSample::total_observations() const {
  std::size_t total = 0;
  for (const auto& s : subjects_) total += s.times.size();
  return total;
}

Eigen::MatrixXd LongitudinalSample::design_matrix() const {
  Eigen::MatrixXd x(n(), p_);
  for (int i = 0; i < n(); ++i) x.row(i) = subjects_[static_cast<std::size_t>(i)].covariates;
  return x;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) {
    // trim surrounding whitespace and optional quotes
    auto first = field.find_first_not_of(" \t\r");
    auto last = field.find_last_not_of(" \t\r");
    field = (first == std::string::npos) ? "" : field.substr(first, last - first + 1);
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"')
      field = field.substr(1, field.size() - 2);
    out.push_back(field);
  }
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

double parse_number(const std::string& field, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw DataError("non-numeric value '" + field + "' in column '" + column + "' at data row " +
                    std::to_string(row));
  return value;
}

}  // namespace

LongitudinalSample load_csv(const std::string& path, const CsvSchema& schema,
                            std::optional<Interval> domain_override) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV file '" + path + "' is empty");
  if (!line.empty() && line.back() == '\n') line.pop_back();
  const auto header = split_line(line, schema.delimiter);

  auto column_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw DataError("column '" + name + "' not found in CSV header of '" + path + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t id_idx = column_index(schema.id_column);
  const std::size_t time_idx = column_index(schema.time_column);
  const std::size_t resp_idx = column_index(schema.response_column);
  std::vector<std::size_t> cov_idx;
  for (const auto& name : schema.covariate_columns) cov_idx.push_back(column_index(name));
  if (cov_idx.empty() && !schema.add_intercept)
    throw DataError("schema names no covariate columns");

  struct Row {
    double time, response;
    Eigen::VectorXd covariates;
  };
  // keyed by the id string; insertion order preserved separately
  std::map<std::string, std::vector<Row>> groups;
  std::vector<std::string> order;

  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_line(line, schema.delimiter);
    if (fields.size() < header.size())
      throw DataError("row " + std::to_string(row_number) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    Row row;
    row.time = parse_number(fields[time_idx], row_number, schema.time_column);
    row.response = parse_number(fields[resp_idx], row_number, schema.response_column);
    const int extra = schema.add_intercept ? 1 : 0;
    row.covariates.resize(static_cast<int>(cov_idx.size()) + extra);
    if (schema.add_intercept) row.covariates(0) = 1.0;
    for (std::size_t c = 0; c < cov_idx.size(); ++c)
      row.covariates(static_cast<int>(c) + extra) =
          parse_number(fields[cov_idx[c]], row_number, schema.covariate_columns[c]);

    const std::string& id = fields[id_idx];
    auto [it, inserted] = groups.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(std::move(row));
  }
  if (groups.empty()) throw DataError("CSV file '" + path + "' has no data rows");

  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -std::numeric_limits<double>::infinity();
  std::vector<SubjectRecord> subjects;
  subjects.reserve(order.size());
  for (const auto& id : order) {
    auto& rows = groups[id];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.time < b.time; });
    SubjectRecord rec;
    rec.covariates = rows.front().covariates;
    for (const auto& r : rows) {
      if ((r.covariates - rec.covariates).lpNorm<Eigen::Infinity>() > 0.0)
        throw DataError("subject id '" + id + "' has varying covariate values across rows");
      rec.times.push_back(r.time);
      rec.responses.push_back(r.response);
      t_min = std::min(t_min, r.time);
      t_max = std::max(t_max, r.time);
    }
    subjects.push_back(std::move(rec));
  }

  Interval domain{t_min, t_max};
  if (domain_override) {
    if (t_min < domain_override->lo || t_max > domain_override->hi)
      throw DataError("observed times fall outside the overridden domain");
    domain = *domain_override;
  }
  return LongitudinalSample(std::move(subjects), domain, false);
}

LongitudinalSample normalize_domain(const LongitudinalSample& sample) {
  if (sample.normalized()) return sample;
  const Interval domain = sample.domain();
  if (!(domain.length() > 0.0)) throw DataError("cannot normalize a zero-length domain");
  std::vector<SubjectRecord> subjects = sample.subjects();
  for (auto& s : subjects)
    for (auto& t : s.times) t = (t - domain.lo) / domain.length();
  return LongitudinalSample(std::move(subjects), domain, true);
}

RestrictionResult restrict_to_interval(const LongitudinalSample& sample,
                                       const Interval& interval) {
  if (!sample.normalized()) throw DataError("restrict_to_interval expects a normalized sample");
  if (!interval.valid() || interval.lo < 0.0 || interval.hi > 1.0)
    throw ConfigError("restriction interval must satisfy 0 <= a < b <= 1");

  RestrictionResult result;
  std::vector<SubjectRecord> kept;
  for (const auto& s : sample.subjects()) {
    SubjectRecord rec;
    rec.covariates = s.covariates;
    for (std::size_t l = 0; l < s.times.size(); ++l) {
      if (interval.contains(s.times[l])) {
        rec.times.push_back(s.times[l]);
        rec.responses.push_back(s.responses[l]);
      } else {
        ++result.observations_dropped;
      }
    }
    if (rec.times.empty())
      ++result.subjects_dropped;
    else
      kept.push_back(std::move(rec));
  }
  if (kept.empty())
    throw DataError("no observations fall inside [" + std::to_string(interval.lo) + ", " +
                    std::to_string(interval.hi) + "]");
  result.sample = LongitudinalSample(std::move(kept), sample.domain(), true);
  return result;
}

}  // namespace fosr::longdata
