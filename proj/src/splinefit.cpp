#include "fosr/splinefit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fosr/cvfolds.hpp"
#include "fosr/parallel.hpp"

namespace fosr::splinefit {

using longdata::Hypothesis;
using longdata::LongitudinalSample;
using longdata::ShapeFamily;

PiecewisePoly::PiecewisePoly(std::vector<double> breaks, std::vector<std::vector<double>> coef)
    : breaks_(std::move(breaks)), coef_(std::move(coef)) {
  if (breaks_.size() < 2 || coef_.size() != breaks_.size() - 1)
    throw NumericError("piecewise polynomial: breaks/coefficients mismatch");
}

PiecewisePoly PiecewisePoly::zero(std::vector<double> breaks) {
  std::vector<std::vector<double>> coef(breaks.size() - 1, std::vector<double>{0.0});
  return PiecewisePoly(std::move(breaks), std::move(coef));
}

int PiecewisePoly::interval_of(double t) const {
  if (t <= breaks_.front()) return 0;
  if (t >= breaks_.back()) return static_cast<int>(coef_.size()) - 1;
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
  return static_cast<int>(it - breaks_.begin()) - 1;
}

double PiecewisePoly::value(double t) const {
  const int i = interval_of(t);
  const double s = t - breaks_[static_cast<std::size_t>(i)];
  const auto& c = coef_[static_cast<std::size_t>(i)];
  double v = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) v = v * s + c[k];
  return v;
}

PiecewisePoly PiecewisePoly::derivative() const {
  std::vector<std::vector<double>> coef(coef_.size());
  for (std::size_t i = 0; i < coef_.size(); ++i) {
    const auto& c = coef_[i];
    std::vector<double> d(std::max<std::size_t>(c.size() - 1, 1), 0.0);
    for (std::size_t k = 1; k < c.size(); ++k) d[k - 1] = static_cast<double>(k) * c[k];
    coef[i] = std::move(d);
  }
  return PiecewisePoly(breaks_, std::move(coef));
}

PiecewisePoly PiecewisePoly::antiderivative() const {
  std::vector<std::vector<double>> coef(coef_.size());
  double running = 0.0;
  for (std::size_t i = 0; i < coef_.size(); ++i) {
    const auto& c = coef_[i];
    std::vector<double> a(c.size() + 1, 0.0);
    a[0] = running;
    for (std::size_t k = 0; k < c.size(); ++k) a[k + 1] = c[k] / static_cast<double>(k + 1);
    const double width = breaks_[i + 1] - breaks_[i];
    double end = 0.0;
    for (std::size_t k = a.size(); k-- > 0;) end = end * width + a[k];
    running = end;
    coef[i] = std::move(a);
  }
  return PiecewisePoly(breaks_, std::move(coef));
}

PiecewisePoly& PiecewisePoly::add_scaled(const PiecewisePoly& other, double s) {
  if (other.breaks_ != breaks_) throw NumericError("piecewise polynomial: incompatible breaks");
  for (std::size_t i = 0; i < coef_.size(); ++i) {
    auto& c = coef_[i];
    const auto& o = other.coef_[i];
    if (o.size() > c.size()) c.resize(o.size(), 0.0);
    for (std::size_t k = 0; k < o.size(); ++k) c[k] += s * o[k];
  }
  return *this;
}

PiecewisePoly& PiecewisePoly::mul_linear(double a, double b) {
  for (std::size_t i = 0; i < coef_.size(); ++i) {
    auto& c = coef_[i];
    const double a_local = a + b * breaks_[i];  // (a + b t) = a_local + b s
    std::vector<double> out(c.size() + 1, 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
      out[k] += a_local * c[k];
      out[k + 1] += b * c[k];
    }
    c = std::move(out);
  }
  return *this;
}

namespace {

std::vector<double> unique_knots(const std::vector<double>& interior) {
  std::vector<double> u;
  u.push_back(0.0);
  for (double z : interior) u.push_back(z);
  u.push_back(1.0);
  std::sort(u.begin(), u.end());
  for (std::size_t i = 1; i < u.size(); ++i)
    if (u[i] - u[i - 1] <= 1e-12)
      throw ConfigError("interior knots must be distinct and strictly inside (0,1)");
  return u;
}

int position_of(const std::vector<double>& breaks, double x) {
  const auto it = std::lower_bound(breaks.begin(), breaks.end(), x);
  return static_cast<int>(it - breaks.begin());
}

}  // namespace

MSplineFamily mspline_family(const std::vector<double>& interior_knots, int order) {
  if (order < 1) throw ConfigError("spline order must be at least 1");
  std::vector<double> interior = interior_knots;
  std::sort(interior.begin(), interior.end());
  for (double z : interior)
    if (z <= 0.0 || z >= 1.0) throw ConfigError("interior knots must lie strictly inside (0,1)");
  const std::vector<double> breaks = unique_knots(interior);

  // Extended sequence: `order` copies of each boundary around the interior.
  std::vector<double> ext;
  for (int r = 0; r < order; ++r) ext.push_back(0.0);
  for (double z : interior) ext.push_back(z);
  for (int r = 0; r < order; ++r) ext.push_back(1.0);

  // Order-1: normalized indicators.
  std::vector<PiecewisePoly> current;
  for (std::size_t k = 0; k + 1 < ext.size(); ++k) {
    const double width = ext[k + 1] - ext[k];
    PiecewisePoly f = PiecewisePoly::zero(breaks);
    if (width > 0.0) {
      std::vector<std::vector<double>> coef(breaks.size() - 1, std::vector<double>{0.0});
      const int lo = position_of(breaks, ext[k]);
      const int hi = position_of(breaks, ext[k + 1]);
      for (int i = lo; i < hi; ++i) coef[static_cast<std::size_t>(i)] = {1.0 / width};
      f = PiecewisePoly(breaks, std::move(coef));
    }
    current.push_back(std::move(f));
  }

  for (int r = 2; r <= order; ++r) {
    std::vector<PiecewisePoly> next;
    for (std::size_t k = 0; k + static_cast<std::size_t>(r) < ext.size(); ++k) {
      const double span = ext[k + static_cast<std::size_t>(r)] - ext[k];
      PiecewisePoly f = PiecewisePoly::zero(breaks);
      if (span > 0.0) {
        const double scale = static_cast<double>(r) / ((r - 1) * span);
        PiecewisePoly left = current[k];
        left.mul_linear(-ext[k], 1.0);  // (t - ext[k])
        PiecewisePoly right = current[k + 1];
        right.mul_linear(ext[k + static_cast<std::size_t>(r)], -1.0);  // (ext[k+r] - t)
        left.add_scaled(right, 1.0);
        f = PiecewisePoly::zero(breaks);
        f.add_scaled(left, scale);
      }
      next.push_back(std::move(f));
    }
    current = std::move(next);
  }

  MSplineFamily family;
  family.order = order;
  for (std::size_t k = 0; k < current.size(); ++k) {
    family.funcs.push_back(std::move(current[k]));
    family.supports.push_back({ext[k], ext[k + static_cast<std::size_t>(order)]});
  }
  return family;
}

namespace {

void check_unit_domain(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw ConfigError("evaluation point " + std::to_string(t) + " outside [0,1]");
}

}  // namespace

Eigen::VectorXd mspline_basis(double t, const std::vector<double>& interior_knots, int order) {
  check_unit_domain(t);
  const auto family = mspline_family(interior_knots, order);
  Eigen::VectorXd out(static_cast<int>(family.funcs.size()));
  for (std::size_t k = 0; k < family.funcs.size(); ++k)
    out(static_cast<int>(k)) = family.funcs[k].value(t);
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> ispline_basis(
    double t, const std::vector<double>& interior_knots) {
  check_unit_domain(t);
  const auto family = mspline_family(interior_knots, 2);
  const int d = static_cast<int>(family.funcs.size());
  Eigen::VectorXd values(d), derivs(d);
  for (int k = 0; k < d; ++k) {
    const auto& m = family.funcs[static_cast<std::size_t>(k)];
    values(k) = m.antiderivative().value(t);
    derivs(k) = m.value(t);
  }
  return {values, derivs};
}

std::tuple<Eigen::VectorXd, Eigen::VectorXd, Eigen::VectorXd> cspline_basis(
    double t, const std::vector<double>& interior_knots) {
  check_unit_domain(t);
  const auto family = mspline_family(interior_knots, 2);
  const int d = static_cast<int>(family.funcs.size());
  Eigen::VectorXd values(d), d1(d), d2(d);
  for (int k = 0; k < d; ++k) {
    const auto& m = family.funcs[static_cast<std::size_t>(k)];
    const PiecewisePoly ispline = m.antiderivative();
    values(k) = ispline.antiderivative().value(t);
    d1(k) = ispline.value(t);
    d2(k) = m.value(t);
  }
  return {values, d1, d2};
}

CovariateBasis::CovariateBasis(BasisFamily family, std::vector<double> interior_knots)
    : family_(family), interior_(std::move(interior_knots)) {
  std::sort(interior_.begin(), interior_.end());
  knots_ = unique_knots(interior_);
  const MSplineFamily m = mspline_family(interior_, 2);
  supports_ = m.supports;
  for (const auto& f : m.funcs) {
    const PiecewisePoly ispline = f.antiderivative();
    if (family_ == BasisFamily::ISpline) {
      shape_.push_back(ispline);
      shape_d1_.push_back(f);
      shape_d2_.push_back(f.derivative());
    } else {
      shape_.push_back(ispline.antiderivative());
      shape_d1_.push_back(ispline);
      shape_d2_.push_back(f);
    }
  }
}

Eigen::VectorXd CovariateBasis::eval(double t) const {
  Eigen::VectorXd row(dim());
  int c = 0;
  row(c++) = 1.0;
  if (family_ == BasisFamily::CSpline) row(c++) = t;
  for (const auto& f : shape_) row(c++) = f.value(t);
  return row;
}

Eigen::VectorXd CovariateBasis::eval_d1(double t) const {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(dim());
  int c = 1;
  if (family_ == BasisFamily::CSpline) row(c++) = 1.0;
  for (const auto& f : shape_d1_) row(c++) = f.value(t);
  return row;
}

Eigen::VectorXd CovariateBasis::eval_d2(double t) const {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(dim());
  int c = family_ == BasisFamily::CSpline ? 2 : 1;
  for (const auto& f : shape_d2_) row(c++) = f.value(t);
  return row;
}

namespace {

std::vector<double> covariate_interior_knots(const std::vector<double>& base_interior,
                                             const longdata::ShapeConstraint* constraint) {
  std::vector<double> interior = base_interior;
  if (constraint != nullptr) {
    for (const auto& term : constraint->terms) {
      for (double endpoint : {term.interval.lo, term.interval.hi}) {
        if (endpoint <= 1e-12 || endpoint >= 1.0 - 1e-12) continue;
        bool present = false;
        for (double z : interior)
          if (std::abs(z - endpoint) <= 1e-9) present = true;
        if (!present) interior.push_back(endpoint);
      }
    }
  }
  std::sort(interior.begin(), interior.end());
  return interior;
}

std::vector<CovariateBasis> build_bases(int p, const Hypothesis& hypothesis,
                                        const std::vector<double>& base_interior) {
  std::vector<CovariateBasis> bases;
  bases.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    const longdata::ShapeConstraint* constraint = nullptr;
    for (const auto& c : hypothesis.constraints)
      if (c.covariate == j) constraint = &c;
    BasisFamily family = BasisFamily::ISpline;
    if (constraint != nullptr)
      for (const auto& term : constraint->terms)
        if (longdata::is_curvature(term.family)) family = BasisFamily::CSpline;
    bases.emplace_back(family, covariate_interior_knots(base_interior, constraint));
  }
  return bases;
}

}  // namespace

std::vector<CovariateBasis> make_bases(int p, const Hypothesis& hypothesis,
                                       int equispaced_count) {
  if (equispaced_count < 0) throw ConfigError("knot count must be nonnegative");
  std::vector<double> interior;
  for (int k = 1; k <= equispaced_count; ++k)
    interior.push_back(static_cast<double>(k) / (equispaced_count + 1));
  return build_bases(p, hypothesis, interior);
}

std::vector<CovariateBasis> make_bases(int p, const Hypothesis& hypothesis,
                                       const std::vector<double>& interior_knots) {
  return build_bases(p, hypothesis, interior_knots);
}

double SplineModel::beta(int j, double t) const {
  const auto& basis = bases[static_cast<std::size_t>(j)];
  return basis.eval(t).dot(coefficients.segment(offsets[static_cast<std::size_t>(j)], basis.dim()));
}

double SplineModel::beta_d1(int j, double t) const {
  const auto& basis = bases[static_cast<std::size_t>(j)];
  return basis.eval_d1(t).dot(
      coefficients.segment(offsets[static_cast<std::size_t>(j)], basis.dim()));
}

Eigen::MatrixXd SplineModel::evaluate(const std::vector<double>& grid) const {
  Eigen::MatrixXd out(static_cast<int>(bases.size()), static_cast<int>(grid.size()));
  for (int j = 0; j < out.rows(); ++j)
    for (std::size_t g = 0; g < grid.size(); ++g) out(j, static_cast<int>(g)) = beta(j, grid[g]);
  return out;
}

SplineDesign::SplineDesign(const LongitudinalSample& sample, std::vector<CovariateBasis> bases)
    : bases_(std::move(bases)) {
  const int p = sample.p();
  if (static_cast<int>(bases_.size()) != p)
    throw ConfigError("basis count does not match covariate count");
  if (!sample.normalized())
    throw DataError("spline design expects a normalized sample");

  offsets_.resize(static_cast<std::size_t>(p));
  total_dim_ = 0;
  for (int j = 0; j < p; ++j) {
    offsets_[static_cast<std::size_t>(j)] = total_dim_;
    total_dim_ += bases_[static_cast<std::size_t>(j)].dim();
  }

  const std::size_t total_obs = sample.total_observations();
  if (static_cast<std::size_t>(total_dim_) > total_obs)
    throw FitError("spline coefficient count " + std::to_string(total_dim_) +
                   " exceeds total observation count " + std::to_string(total_obs));

  design_.resize(static_cast<int>(total_obs), total_dim_);
  y_.resize(static_cast<int>(total_obs));
  sqrt_w_.resize(static_cast<int>(total_obs));
  const double n = sample.n();
  int row = 0;
  for (const auto& subject : sample.subjects()) {
    const double w = 1.0 / (n * static_cast<double>(subject.times.size()));
    const double sw = std::sqrt(w);
    for (std::size_t l = 0; l < subject.times.size(); ++l) {
      const double t = subject.times[l];
      for (int j = 0; j < p; ++j) {
        const auto& basis = bases_[static_cast<std::size_t>(j)];
        design_.block(row, offsets_[static_cast<std::size_t>(j)], 1, basis.dim()) =
            (sw * subject.covariates(j)) * basis.eval(t).transpose();
      }
      y_(row) = subject.responses[l];
      sqrt_w_(row) = sw;
      ++row;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design_);
  if (qr.rank() < total_dim_) {
    for (int j = 0; j < p; ++j) {
      const auto& basis = bases_[static_cast<std::size_t>(j)];
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> block_qr(
          design_.middleCols(offsets_[static_cast<std::size_t>(j)], basis.dim()));
      if (block_qr.rank() < basis.dim())
        throw FitError("spline design is rank deficient for covariate index " +
                       std::to_string(j) + "; reduce knots or enlarge the sample");
    }
    throw FitError("spline design is jointly rank deficient across covariates");
  }

  gram_ = design_.transpose() * design_;
  gram_ = 0.5 * (gram_ + gram_.transpose()).eval();
  gram_ldlt_.compute(gram_);
  if (gram_ldlt_.info() != Eigen::Success)
    throw FitError("spline normal equations could not be factorized");
}

Eigen::VectorXd SplineDesign::solve_unconstrained(const Eigen::VectorXd& y_flat) const {
  if (y_flat.size() != y_.size()) throw FitError("response length mismatch in spline fit");
  return gram_ldlt_.solve(design_.transpose() * sqrt_w_.cwiseProduct(y_flat));
}

Eigen::VectorXd SplineDesign::fitted(const Eigen::VectorXd& coefficients) const {
  return (design_ * coefficients).cwiseQuotient(sqrt_w_);
}

double SplineDesign::weighted_rss(const Eigen::VectorXd& coefficients) const {
  return (design_ * coefficients - sqrt_w_.cwiseProduct(y_)).squaredNorm();
}

namespace {

std::vector<double> dense_points(const Interval& iv, int count) {
  std::vector<double> pts(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    pts[static_cast<std::size_t>(i)] = iv.lo + iv.length() * i / (count - 1);
  return pts;
}

}  // namespace

CoefficientConstraintSet coefficient_constraints(const std::vector<CovariateBasis>& bases,
                                                 const std::vector<int>& offsets,
                                                 const Hypothesis& hypothesis, ConstraintMode mode,
                                                 int generic_grid) {
  CoefficientConstraintSet set;
  for (const auto& constraint : hypothesis.constraints) {
    const int j = constraint.covariate;
    const auto& basis = bases[static_cast<std::size_t>(j)];
    const int off = offsets[static_cast<std::size_t>(j)];

    for (const auto& term : constraint.terms) {
      const double sign = longdata::is_flipped(term.family) ? -1.0 : 1.0;
      const Interval& iv = term.interval;
      const std::string label = longdata::family_name(term.family) + " on covariate " +
                                std::to_string(j);

      if (longdata::is_curvature(term.family) && basis.family() != BasisFamily::CSpline)
        throw ConfigError("curvature constraint on covariate " + std::to_string(j) +
                          " requires the C-spline basis");

      auto active_set = [&]() {
        std::vector<int> ks;
        for (int k = 0; k < basis.basis_count(); ++k) {
          const Interval& support = basis.active_support(k);
          if (std::min(support.hi, iv.hi) - std::max(support.lo, iv.lo) > 1e-12) ks.push_back(k);
        }
        return ks;
      };

      if (mode == ConstraintMode::Generic) {
        const auto pts = dense_points(iv, generic_grid);
        for (double t : pts) {
          Eigen::VectorXd coeffs;
          if (longdata::is_monotone(term.family))
            coeffs = basis.eval_d1(t);
          else if (longdata::is_curvature(term.family))
            coeffs = basis.eval_d2(t);
          else
            coeffs = basis.eval(t);
          qpcore::SparseRow row;
          for (int c = 0; c < coeffs.size(); ++c)
            if (coeffs(c) != 0.0) row.add(off + c, sign * coeffs(c));
          set.rows.push_back(std::move(row));
        }
        set.labels.push_back(label + " (generic)");
        continue;
      }

      if (longdata::is_monotone(term.family)) {
        if (basis.family() == BasisFamily::ISpline) {
          for (int k : active_set()) {
            qpcore::SparseRow row;
            row.add(off + basis.free_terms() + k, sign);
            set.rows.push_back(std::move(row));
          }
        } else {
          // C-basis: the linear term carries the first-order behavior.
          qpcore::SparseRow row;
          row.add(off + 1, sign);
          set.rows.push_back(std::move(row));
        }
        set.labels.push_back(label);
      } else if (longdata::is_curvature(term.family)) {
        for (int k : active_set()) {
          qpcore::SparseRow row;
          row.add(off + basis.free_terms() + k, sign);
          set.rows.push_back(std::move(row));
        }
        set.labels.push_back(label);
      } else {
        // Positivity: the fitted value at every knot inside the interval,
        // written on the basis evaluations (the prefix-sum rule with the
        // mid-rise basis weighted by its value at the knot). Knot values
        // alone do not pin a quadratic piece between knots, so each knot
        // span also gets its middle Bernstein coefficient
        // q(tau) + q'(tau)*gap/2 >= 0; together the three Bernstein
        // coefficients keep the piece nonnegative on the whole span.
        std::vector<double> knots_in;
        for (double knot : basis.all_knots()) {
          if (knot < iv.lo - 1e-12 || knot > iv.hi + 1e-12) continue;
          knots_in.push_back(knot);
          const Eigen::VectorXd coeffs = basis.eval(knot);
          qpcore::SparseRow row;
          for (int c = 0; c < coeffs.size(); ++c)
            if (coeffs(c) != 0.0) row.add(off + c, sign * coeffs(c));
          set.rows.push_back(std::move(row));
        }
        const int degree = basis.family() == BasisFamily::ISpline ? 2 : 3;
        for (std::size_t k = 0; k + 1 < knots_in.size(); ++k) {
          const double gap = knots_in[k + 1] - knots_in[k];
          std::vector<Eigen::VectorXd> mids;
          mids.push_back(basis.eval(knots_in[k]) +
                         (gap / degree) * basis.eval_d1(knots_in[k]));
          if (degree == 3)
            mids.push_back(basis.eval(knots_in[k + 1]) -
                           (gap / degree) * basis.eval_d1(knots_in[k + 1]));
          for (const auto& coeffs : mids) {
            qpcore::SparseRow row;
            for (int c = 0; c < coeffs.size(); ++c)
              if (coeffs(c) != 0.0) row.add(off + c, sign * coeffs(c));
            set.rows.push_back(std::move(row));
          }
        }
        set.labels.push_back(label);
      }
    }
  }
  return set;
}

SplineModel unconstrained_fit(const LongitudinalSample& sample,
                              std::vector<CovariateBasis> bases) {
  SplineDesign design(sample, std::move(bases));
  SplineModel model;
  model.coefficients = design.solve_unconstrained(design.responses());
  model.bases = design.bases();
  model.offsets = design.offsets();
  return model;
}

ConstrainedSplineFit constrained_fit(const LongitudinalSample& sample,
                                     std::vector<CovariateBasis> bases,
                                     const Hypothesis& hypothesis, ConstraintMode mode) {
  hypothesis.validate(sample.p());
  SplineDesign design(sample, std::move(bases));
  const Eigen::VectorXd anchor = design.solve_unconstrained(design.responses());
  auto constraints = coefficient_constraints(design.bases(), design.offsets(), hypothesis, mode);

  qpcore::QuadraticProgram qp{design.gram(), anchor, std::move(constraints.rows)};
  ConstrainedSplineFit out;
  out.qp = qpcore::solve(qp);
  out.model.bases = design.bases();
  out.model.offsets = design.offsets();
  out.model.coefficients = out.qp.x;
  return out;
}

KnotSelection select_knots(const LongitudinalSample& sample,
                           const std::vector<int>& candidate_counts,
                           const Hypothesis& hypothesis, int folds, std::uint64_t seed,
                           int threads) {
  if (candidate_counts.empty()) throw ConfigError("no candidate knot counts supplied");
  if (sample.n() < folds)
    throw FitError("cross-validation needs at least " + std::to_string(folds) + " subjects");

  std::vector<int> counts = candidate_counts;
  std::sort(counts.begin(), counts.end());
  const auto fold_of = cv::assign_folds(sample.n(), folds, seed);

  std::vector<double> errors(counts.size(), std::numeric_limits<double>::infinity());
  parallel_for(static_cast<int>(counts.size()), threads, [&](int ci) {
    const int count = counts[static_cast<std::size_t>(ci)];
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
        SplineModel model =
            unconstrained_fit(training, make_bases(sample.p(), hypothesis, count));
        for (const auto& s : held) {
          double subject_err = 0.0;
          for (std::size_t l = 0; l < s.times.size(); ++l) {
            double yhat = 0.0;
            for (int j = 0; j < sample.p(); ++j)
              yhat += s.covariates(j) * model.beta(j, s.times[l]);
            const double r = s.responses[l] - yhat;
            subject_err += r * r;
          }
          total += subject_err / static_cast<double>(s.times.size());
        }
      }
      errors[static_cast<std::size_t>(ci)] = total;
    } catch (const std::exception&) {
      // candidate unusable; keep +inf
    }
  });

  // ties up to numerical noise resolve to the earlier, smaller count
  double response_scale = 0.0;
  for (const auto& s : sample.subjects()) {
    double sq = 0.0;
    for (double y : s.responses) sq += y * y;
    response_scale += sq / static_cast<double>(s.responses.size());
  }
  const double tie_eps = 1e-12 * std::max(response_scale, 1.0);
  int best = -1;
  for (std::size_t ci = 0; ci < counts.size(); ++ci) {
    if (!std::isfinite(errors[ci])) continue;
    if (best < 0 ||
        errors[ci] < errors[static_cast<std::size_t>(best)] * (1.0 - 1e-9) - tie_eps)
      best = static_cast<int>(ci);
  }
  if (best < 0) throw FitError("knot selection failed for every candidate count");

  KnotSelection out;
  out.count = counts[static_cast<std::size_t>(best)];
  out.cv_errors = errors;
  out.bases = make_bases(sample.p(), hypothesis, out.count);
  return out;
}

}  // namespace fosr::splinefit
