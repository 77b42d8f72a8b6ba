#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "fosr/longdata.hpp"

using namespace fosr;
using longdata::CsvSchema;
using longdata::LongitudinalSample;

namespace {

struct TempCsv {
  std::string path;
  explicit TempCsv(const std::string& contents) {
    path = std::string("fosr_test_") + std::to_string(reinterpret_cast<std::uintptr_t>(this)) +
           ".csv";
    std::ofstream out(path);
    out << contents;
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

CsvSchema basic_schema() {
  CsvSchema s;
  s.id_column = "id";
  s.time_column = "t";
  s.response_column = "y";
  s.covariate_columns = {"x"};
  return s;
}

LongitudinalSample toy_sample() {
  std::vector<longdata::SubjectRecord> subjects;
  longdata::SubjectRecord a;
  a.covariates = Eigen::VectorXd::Constant(1, 1.0);
  a.times = {0.0, 4.0, 8.0};
  a.responses = {1.0, 2.0, 3.0};
  longdata::SubjectRecord b;
  b.covariates = Eigen::VectorXd::Constant(1, 2.0);
  b.times = {2.0, 16.0};
  b.responses = {4.0, 5.0};
  subjects.push_back(a);
  subjects.push_back(b);
  return LongitudinalSample(std::move(subjects), Interval{0.0, 16.0}, false);
}

}  // namespace

TEST_CASE("load_csv groups subjects, sorts times, and sets the domain") {
  TempCsv csv(
      "id,t,y,x\n"
      "s1,4,2.0,1.5\n"
      "s1,0,1.0,1.5\n"
      "s2,2,0.5,-0.5\n"
      "s2,6,0.7,-0.5\n");
  const auto sample = longdata::load_csv(csv.path, basic_schema());
  CHECK(sample.n() == 2);
  CHECK(sample.p() == 1);
  CHECK(sample.domain().lo == 0.0);
  CHECK(sample.domain().hi == 6.0);
  CHECK(sample.subjects()[0].times == std::vector<double>{0.0, 4.0});
  CHECK(sample.subjects()[0].responses == std::vector<double>{1.0, 2.0});
  CHECK(sample.total_observations() == 4);
}

TEST_CASE("load_csv: single observation for a single subject") {
  TempCsv csv("id,t,y,x\n1,0.5,2.0,1\n");
  const auto sample = longdata::load_csv(csv.path, basic_schema());
  CHECK(sample.n() == 1);
  CHECK(sample.subjects()[0].times.size() == 1);
}

TEST_CASE("load_csv errors: schema, parse, rank") {
  TempCsv missing("id,t,y\n1,0.5,2.0\n");
  CHECK_THROWS_AS(longdata::load_csv(missing.path, basic_schema()), DataError);

  TempCsv bad("id,t,y,x\n1,abc,2.0,1\n");
  CHECK_THROWS_WITH_AS(longdata::load_csv(bad.path, basic_schema()),
                       doctest::Contains("non-numeric"), DataError);

  // duplicated covariate column makes the design collinear
  TempCsv collinear(
      "id,t,y,x,x2\n"
      "1,0,1,2,2\n"
      "2,1,2,3,3\n"
      "3,2,3,4,4\n");
  CsvSchema schema = basic_schema();
  schema.covariate_columns = {"x", "x2"};
  CHECK_THROWS_WITH_AS(longdata::load_csv(collinear.path, schema),
                       doctest::Contains("rank deficient"), DataError);
}

TEST_CASE("intercept flag prepends a ones column") {
  TempCsv csv(
      "id,t,y,x\n"
      "1,0,1,2\n"
      "2,1,2,3\n");
  CsvSchema schema = basic_schema();
  schema.add_intercept = true;
  const auto sample = longdata::load_csv(csv.path, schema);
  CHECK(sample.p() == 2);
  CHECK(sample.subjects()[0].covariates(0) == 1.0);
  CHECK(sample.subjects()[0].covariates(1) == 2.0);
}

TEST_CASE("normalize_domain maps affinely and keeps the inverse") {
  const auto sample = toy_sample();
  const auto normalized = longdata::normalize_domain(sample);
  CHECK(normalized.normalized());
  CHECK(normalized.subjects()[0].times[1] == doctest::Approx(0.25).epsilon(1e-15));  // t=4 on [0,16]
  CHECK(normalized.from_unit(0.25) == doctest::Approx(4.0).epsilon(1e-15));

  // round trip reproduces original times
  for (int i = 0; i < sample.n(); ++i)
    for (std::size_t l = 0; l < sample.subjects()[i].times.size(); ++l)
      CHECK(normalized.from_unit(normalized.subjects()[i].times[l]) ==
            doctest::Approx(sample.subjects()[i].times[l]).epsilon(1e-12));

  // observation count is conserved
  CHECK(normalized.total_observations() == sample.total_observations());

  // domain [0,1] is the identity map
  std::vector<longdata::SubjectRecord> unit_subjects = normalized.subjects();
  LongitudinalSample unit(std::move(unit_subjects), Interval{0.0, 1.0}, false);
  const auto renorm = longdata::normalize_domain(unit);
  for (std::size_t l = 0; l < renorm.subjects()[0].times.size(); ++l)
    CHECK(renorm.subjects()[0].times[l] == normalized.subjects()[0].times[l]);
}

TEST_CASE("normalize_domain rejects zero-length domains") {
  std::vector<longdata::SubjectRecord> subjects(1);
  subjects[0].covariates = Eigen::VectorXd::Constant(1, 1.0);
  subjects[0].times = {0.5};
  subjects[0].responses = {2.0};
  LongitudinalSample degenerate(std::move(subjects), Interval{0.5, 0.5}, false);
  CHECK_THROWS_AS(longdata::normalize_domain(degenerate), DataError);
}

TEST_CASE("restrict_to_interval keeps inside observations and counts drops") {
  const auto normalized = longdata::normalize_domain(toy_sample());

  const auto full = longdata::restrict_to_interval(normalized, {0.0, 1.0});
  CHECK(full.subjects_dropped == 0);
  CHECK(full.observations_dropped == 0);
  CHECK(full.sample.total_observations() == normalized.total_observations());

  const auto half = longdata::restrict_to_interval(normalized, {0.0, 0.5});
  CHECK(half.observations_dropped == 1);  // t=16 -> 1.0 falls outside
  CHECK(half.sample.n() == 2);

  CHECK_THROWS_AS(longdata::restrict_to_interval(normalized, {0.9, 0.95}), DataError);
}

TEST_CASE("hypothesis validation") {
  longdata::Hypothesis hyp;
  CHECK_THROWS_AS(hyp.validate(2), ConfigError);

  hyp.constraints.push_back({0, {{longdata::ShapeFamily::MonotoneIncreasing, {0.0, 0.5}}}});
  CHECK_NOTHROW(hyp.validate(2));

  hyp.constraints.push_back({0, {{longdata::ShapeFamily::Convex, {0.5, 1.0}}}});
  CHECK_THROWS_AS(hyp.validate(2), ConfigError);  // duplicate covariate

  hyp.constraints.pop_back();
  hyp.constraints.push_back({1, {{longdata::ShapeFamily::Positive, {0.2, 1.2}}}});
  CHECK_THROWS_AS(hyp.validate(2), ConfigError);  // interval beyond [0,1]
}
