#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fosr/splinefit.hpp"
#include "test_util.hpp"

using namespace fosr;
using namespace fosr::splinefit;

namespace {

const std::vector<double> kKnots{0.3, 0.7};

// random points in (0,1) staying clear of the knots so finite differences on
// the piecewise pieces are valid
std::vector<double> random_points(int count, const std::vector<double>& interior,
                                  std::uint64_t seed, double margin = 1e-4) {
  auto g = rng::stream(seed, 99);
  std::vector<double> knots{0.0};
  knots.insert(knots.end(), interior.begin(), interior.end());
  knots.push_back(1.0);
  std::vector<double> out;
  while (static_cast<int>(out.size()) < count) {
    const double t = rng::uniform(g, margin, 1.0 - margin);
    bool clear = true;
    for (double z : knots)
      if (std::abs(t - z) < margin) clear = false;
    if (clear) out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("order-1 M-spline with no interior knots is the unit box") {
  for (double t : {0.0, 0.25, 0.99, 1.0}) {
    const auto v = mspline_basis(t, {}, 1);
    REQUIRE(v.size() == 1);
    CHECK(v(0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(mspline_basis(1.5, {}, 1), ConfigError);
}

TEST_CASE("every M-spline integrates to one (quadrature oracle)") {
  // composite Simpson per knot span, ~1000 points total; exact for the
  // polynomial pieces so only the tolerance of the rule itself remains
  std::vector<double> spans{0.0};
  spans.insert(spans.end(), kKnots.begin(), kKnots.end());
  spans.push_back(1.0);
  for (int order : {1, 2, 3, 4}) {
    const auto family = mspline_family(kKnots, order);
    for (std::size_t k = 0; k < family.funcs.size(); ++k) {
      double integral = 0.0;
      for (std::size_t s = 0; s + 1 < spans.size(); ++s) {
        const int panels = 160;  // even
        const double h = (spans[s + 1] - spans[s]) / panels;
        for (int i = 0; i <= panels; ++i) {
          // evaluate strictly inside the span: order-1 pieces are only
          // right-continuous at their knots
          const double t = std::clamp(spans[s] + i * h, spans[s] + 1e-12 * h,
                                      spans[s + 1] - 1e-12 * h);
          const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
          integral += w * family.funcs[k].value(t) * h / 3.0;
        }
      }
      CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(family.funcs[k].value(0.123) >= 0.0);
    }
  }
}

TEST_CASE("normalized M-splines form a partition of unity") {
  for (int order : {2, 3}) {
    const auto family = mspline_family(kKnots, order);
    for (double t : random_points(25, kKnots, 5)) {
      double total = 0.0;
      for (std::size_t k = 0; k < family.funcs.size(); ++k)
        total += family.supports[k].length() / order * family.funcs[k].value(t);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("I-splines: boundary values, monotonicity, derivative oracle") {
  const auto [v0, d0] = ispline_basis(0.0, kKnots);
  const auto [v1, d1] = ispline_basis(1.0, kKnots);
  REQUIRE(v0.size() == static_cast<int>(kKnots.size()) + 2);
  CHECK(v0.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
  for (int k = 0; k < v1.size(); ++k) CHECK(v1(k) == doctest::Approx(1.0).epsilon(1e-12));

  auto g = rng::stream(42, 1);
  for (int rep = 0; rep < 1000; ++rep) {
    const double a = rng::uniform01(g);
    const double b = rng::uniform01(g);
    const double lo = std::min(a, b), hi = std::max(a, b);
    const auto [vlo, dlo] = ispline_basis(lo, kKnots);
    const auto [vhi, dhi] = ispline_basis(hi, kKnots);
    for (int k = 0; k < vlo.size(); ++k) {
      CHECK(vhi(k) >= vlo(k) - 1e-12);
      CHECK(vlo(k) >= -1e-12);
      CHECK(vlo(k) <= 1.0 + 1e-12);
      CHECK(dlo(k) >= 0.0);
    }
  }

  const double step = 1e-5;
  for (double t : random_points(100, kKnots, 7)) {
    const auto [v_plus, d_plus] = ispline_basis(t + step, kKnots);
    const auto [v_minus, d_minus] = ispline_basis(t - step, kKnots);
    const auto [v, d] = ispline_basis(t, kKnots);
    for (int k = 0; k < v.size(); ++k) {
      const double fd = (v_plus(k) - v_minus(k)) / (2.0 * step);
      CHECK(std::abs(fd - d(k)) < 1e-6);
    }
  }
}

TEST_CASE("C-splines: zero at origin, convexity, derivative oracles") {
  const auto [v0, d0, dd0] = cspline_basis(0.0, kKnots);
  CHECK(v0.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));

  for (double t : random_points(100, kKnots, 9)) {
    const auto [v, d1, d2] = cspline_basis(t, kKnots);
    const auto [iv, id] = ispline_basis(t, kKnots);
    for (int k = 0; k < v.size(); ++k) {
      CHECK(d2(k) >= 0.0);                                     // convex by construction
      CHECK(d1(k) == doctest::Approx(iv(k)).epsilon(1e-12));   // C' = I
    }
  }

  const double step = 1e-4;
  for (double t : random_points(100, kKnots, 11, 5e-4)) {
    const auto [vp, d1p, d2p] = cspline_basis(t + step, kKnots);
    const auto [vm, d1m, d2m] = cspline_basis(t - step, kKnots);
    const auto [v, d1, d2] = cspline_basis(t, kKnots);
    for (int k = 0; k < v.size(); ++k) {
      const double fd1 = (vp(k) - vm(k)) / (2.0 * step);
      const double fd2 = (vp(k) - 2.0 * v(k) + vm(k)) / (step * step);
      CHECK(std::abs(fd1 - d1(k)) < 1e-6);
      CHECK(std::abs(fd2 - d2(k)) < 1e-4);
    }
  }
}

TEST_CASE("basis dimensions: interior knots + 2, plus free terms") {
  CovariateBasis ibasis(BasisFamily::ISpline, kKnots);
  CHECK(ibasis.basis_count() == 4);
  CHECK(ibasis.free_terms() == 1);
  CHECK(ibasis.dim() == 5);
  CovariateBasis cbasis(BasisFamily::CSpline, kKnots);
  CHECK(cbasis.basis_count() == 4);
  CHECK(cbasis.free_terms() == 2);
  CHECK(cbasis.dim() == 6);
}

TEST_CASE("unconstrained fit: in-span truth is interpolated exactly") {
  // quadratic truth lies in the span of quadratic I-splines + intercept
  auto beta = [](double t) {
    Eigen::VectorXd b(2);
    b << 1.0 + t - 0.5 * t * t, -2.0 + 0.25 * t * t;
    return b;
  };
  const auto sample = testutil::make_sample(40, 2, 8, 3, beta);
  SplineDesign design(sample, make_bases(2, {}, 1));
  const Eigen::VectorXd coeffs = design.solve_unconstrained(design.responses());
  CHECK(design.weighted_rss(coeffs) <= 1e-16);

  SplineModel model = unconstrained_fit(sample, make_bases(2, {}, 1));
  for (double t : {0.05, 0.3, 0.77, 1.0})
    for (int j = 0; j < 2; ++j)
      CHECK(model.beta(j, t) == doctest::Approx(beta(t)(j)).epsilon(1e-8));
}

TEST_CASE("unconstrained fit: constant truth lands on the intercept") {
  auto beta = [](double) { return Eigen::VectorXd::Constant(1, 3.25).eval(); };
  const auto sample = testutil::make_sample(25, 1, 6, 5, beta);
  SplineModel model = unconstrained_fit(sample, make_bases(1, {}, 1));
  CHECK(model.coefficients(0) == doctest::Approx(3.25).epsilon(1e-10));
  for (int k = 1; k < model.coefficients.size(); ++k)
    CHECK(model.coefficients(k) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("monotone increasing on [0,1]: nonnegative coefficients, monotone fit") {
  auto beta = [](double t) { return Eigen::VectorXd::Constant(1, std::sin(1.5 * t)).eval(); };
  const auto sample = testutil::make_sample(60, 1, 8, 7, beta, 0.3, 0.5, 1.5);
  longdata::Hypothesis hyp;
  hyp.constraints.push_back({0, {{longdata::ShapeFamily::MonotoneIncreasing, {0.0, 1.0}}}});

  const auto fit = constrained_fit(sample, make_bases(1, hyp, 2), hyp);
  const auto& basis = fit.model.bases[0];
  for (int k = 0; k < basis.basis_count(); ++k)
    CHECK(fit.model.coefficients(basis.free_terms() + k) >= -1e-10);
  for (int i = 0; i + 1 < 200; ++i) {
    const double t0 = i / 199.0, t1 = (i + 1) / 199.0;
    CHECK(fit.model.beta(0, t1) - fit.model.beta(0, t0) >= -1e-8);
  }
  CHECK(fit.qp.kkt_residual <= 1e-8);
}

TEST_CASE("feasible unconstrained fit is returned unchanged") {
  auto beta = [](double t) { return Eigen::VectorXd::Constant(1, 2.0 * t).eval(); };
  const auto sample = testutil::make_sample(50, 1, 8, 11, beta);
  longdata::Hypothesis hyp;
  hyp.constraints.push_back({0, {{longdata::ShapeFamily::MonotoneIncreasing, {0.0, 1.0}}}});
  const auto bases = make_bases(1, hyp, 1);
  const SplineModel u = unconstrained_fit(sample, bases);
  const auto c = constrained_fit(sample, bases, hyp);
  CHECK((u.coefficients - c.model.coefficients).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(c.qp.active_set.empty());
}

TEST_CASE("partial monotone constraint holds on its interval") {
  // truth rises then falls; constraint only on [0, 0.4]
  auto beta = [](double t) {
    return Eigen::VectorXd::Constant(1, std::sin(3.1415926535 * t)).eval();
  };
  const auto sample = testutil::make_sample(80, 1, 10, 13, beta, 0.4, 0.5, 1.5);
  longdata::Hypothesis hyp;
  hyp.constraints.push_back({0, {{longdata::ShapeFamily::MonotoneIncreasing, {0.0, 0.4}}}});
  const auto fit = constrained_fit(sample, make_bases(1, hyp, 3), hyp);
  for (int i = 0; i + 1 < 200; ++i) {
    const double t0 = 0.4 * i / 199.0, t1 = 0.4 * (i + 1) / 199.0;
    CHECK(fit.model.beta(0, t1) - fit.model.beta(0, t0) >= -1e-8);
  }
}

TEST_CASE("positivity rows keep the fit nonnegative on the interval") {
  auto beta = [](double t) { return Eigen::VectorXd::Constant(1, 0.3 - t).eval(); };
  const auto sample = testutil::make_sample(70, 1, 9, 17, beta, 0.3, 0.5, 1.5);
  longdata::Hypothesis hyp;
  hyp.constraints.push_back({0, {{longdata::ShapeFamily::Positive, {0.2, 0.8}}}});
  const auto fit = constrained_fit(sample, make_bases(1, hyp, 2), hyp);
  // a quadratic spline nonnegative at consecutive knots stays nonnegative
  // between them up to curvature; verify on a dense grid with slack
  for (int i = 0; i < 200; ++i) {
    const double t = 0.2 + 0.6 * i / 199.0;
    CHECK(fit.model.beta(0, t) >= -1e-8);
  }
}

TEST_CASE("convexity via C-splines") {
  auto beta = [](double t) { return Eigen::VectorXd::Constant(1, std::sin(3.0 * t)).eval(); };
  const auto sample = testutil::make_sample(80, 1, 10, 19, beta, 0.2, 0.5, 1.5);
  longdata::Hypothesis hyp;
  hyp.constraints.push_back({0, {{longdata::ShapeFamily::Convex, {0.0, 1.0}}}});
  const auto fit = constrained_fit(sample, make_bases(1, hyp, 2), hyp);
  const auto& basis = fit.model.bases[0];
  CHECK(basis.family() == BasisFamily::CSpline);
  // second differences nonnegative
  const int grid = 200;
  std::vector<double> values(grid);
  for (int i = 0; i < grid; ++i) values[i] = fit.model.beta(0, i / (grid - 1.0));
  for (int i = 1; i + 1 < grid; ++i)
    CHECK(values[i + 1] - 2.0 * values[i] + values[i - 1] >= -1e-6);
}

TEST_CASE("generic derivative rows agree with reduced coefficient rows") {
  auto beta = [](double t) {
    return Eigen::VectorXd::Constant(1, std::sin(3.1415926535 * t)).eval();
  };
  const auto sample = testutil::make_sample(60, 1, 9, 23, beta, 0.4, 0.5, 1.5);
  longdata::Hypothesis hyp;
  hyp.constraints.push_back({0, {{longdata::ShapeFamily::MonotoneIncreasing, {0.0, 0.5}}}});
  const auto bases = make_bases(1, hyp, 2);
  const auto reduced = constrained_fit(sample, bases, hyp, ConstraintMode::Reduced);
  const auto generic = constrained_fit(sample, bases, hyp, ConstraintMode::Generic);
  CHECK((reduced.model.coefficients - generic.model.coefficients).lpNorm<Eigen::Infinity>() <
        1e-6);
}

TEST_CASE("constrained RSS is never below unconstrained RSS") {
  auto beta = [](double t) {
    return Eigen::VectorXd::Constant(1, std::cos(2.0 * 3.1415926535 * t)).eval();
  };
  const auto sample = testutil::make_sample(60, 1, 8, 29, beta, 0.3, 0.5, 1.5);
  longdata::Hypothesis hyp;
  hyp.constraints.push_back({0, {{longdata::ShapeFamily::MonotoneIncreasing, {0.0, 0.5}}}});
  const auto bases = make_bases(1, hyp, 2);
  SplineDesign design(sample, bases);
  const Eigen::VectorXd u = design.solve_unconstrained(design.responses());
  const auto c = constrained_fit(sample, bases, hyp);
  CHECK(design.weighted_rss(c.model.coefficients) >= design.weighted_rss(u) - 1e-14);
}

TEST_CASE("decreasing-then-increasing combo forces a flat joint") {
  // shape change at 0.5: decreasing before, increasing after
  auto beta = [](double t) {
    return Eigen::VectorXd::Constant(1, (t - 0.5) * (t - 0.5)).eval();
  };
  const auto sample = testutil::make_sample(80, 1, 10, 31, beta, 0.2, 0.5, 1.5);
  longdata::Hypothesis hyp;
  hyp.constraints.push_back({0,
                             {{longdata::ShapeFamily::MonotoneDecreasing, {0.0, 0.5}},
                              {longdata::ShapeFamily::MonotoneIncreasing, {0.5, 1.0}}}});
  const auto fit = constrained_fit(sample, make_bases(1, hyp, 1), hyp);
  for (int i = 0; i + 1 < 100; ++i) {
    const double t0 = 0.5 * i / 99.0, t1 = 0.5 * (i + 1) / 99.0;
    CHECK(fit.model.beta(0, t1) - fit.model.beta(0, t0) <= 1e-8);
    CHECK(fit.model.beta(0, 0.5 + t1) - fit.model.beta(0, 0.5 + t0) >= -1e-8);
  }
}

TEST_CASE("curvature constraint on an I-basis is a configuration error") {
  longdata::Hypothesis hyp;
  hyp.constraints.push_back({0, {{longdata::ShapeFamily::Convex, {0.0, 1.0}}}});
  std::vector<CovariateBasis> bases;
  bases.emplace_back(BasisFamily::ISpline, std::vector<double>{0.5});
  std::vector<int> offsets{0};
  CHECK_THROWS_AS(coefficient_constraints(bases, offsets, hyp), ConfigError);
}

TEST_CASE("select_knots: flat CV curve resolves to the fewest knots") {
  auto beta = [](double t) {
    Eigen::VectorXd b(1);
    b << 0.5 + t - 0.3 * t * t;  // representable for every candidate count
    return b;
  };
  const auto sample = testutil::make_sample(40, 1, 8, 37, beta);
  const auto selection = select_knots(sample, {0, 1, 2, 3}, {}, 5, 11);
  CHECK(selection.count == 0);
  CHECK(selection.cv_errors.size() == 4);
}

TEST_CASE("knot sequences append constraint endpoints only for that covariate") {
  longdata::Hypothesis hyp;
  hyp.constraints.push_back({0, {{longdata::ShapeFamily::MonotoneIncreasing, {0.0, 0.25}}}});
  const auto bases = make_bases(2, hyp, 1);
  CHECK(bases[0].interior_knots() == std::vector<double>{0.25, 0.5});
  CHECK(bases[1].interior_knots() == std::vector<double>{0.5});
}
