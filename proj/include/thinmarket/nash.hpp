#pragma once

#include "best_response.hpp"
#include "competitive.hpp"
#include "elasticity.hpp"
#include "market.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace thinmarket {

enum class NashKind { trivial, extreme, bilateral_closed_form, general_non_extreme, unsupported_regime };

inline const char* to_string(NashKind k) {
  switch (k) {
    case NashKind::trivial: return "trivial";
    case NashKind::extreme: return "extreme";
    case NashKind::bilateral_closed_form: return "bilateral_closed_form";
    case NashKind::general_non_extreme: return "general_non_extreme";
    case NashKind::unsupported_regime: return "unsupported_regime";
  }
  return "?";
}

struct NashSolution {
  NashKind kind = NashKind::trivial;
  ElasticityVector elasticities;   // empty for unsupported_regime
  Elasticity theta_total;
  std::vector<double> k_shares;
  std::optional<EquilibriumOutcome> outcome;
  std::vector<double> residuals;   // coupled first-order system, left minus right
  std::optional<std::size_t> risk_neutral_trader;  // extreme kind only
  double fixed_point_gap = 0.0;    // max relative best-response deviation
  std::string note;
};

struct SolveOptions {
  /// Bisection stops once the bracket is narrower than root_tolerance * x
  /// and |F(x) - 1| < root_tolerance.
  double root_tolerance = 1e-12;
  /// Maximum relative deviation accepted by the coordinatewise best-response check.
  double verify_tolerance = 1e-8;
  bool verify = true;
};

namespace nash_tolerance {
inline constexpr double residual = 1e-9;
inline constexpr double extreme_consistency = 1e-10;  // relative to delta_I
inline constexpr int max_doublings = 60;
inline constexpr int max_bisections = 400;
}  // namespace nash_tolerance

// ---------------------------------------------------------------------------
// Extreme equilibria

/// Index k with beta_k >= 1 + (1/delta_k) sum_{i != k} delta_i (1 + beta_i)_+, if any.
///
/// Cross-checks the aggregate form sum_i delta_i (1+beta_i)_+ <= 2 max_i delta_i beta_i
/// and throws SolverError if the two disagree away from the boundary.
inline std::optional<std::size_t> check_extreme_condition(const ExposureProfile& ex) {
  if (ex.is_trivial) throw PreconditionError("extreme condition is undefined when a_I = 0");
  const std::size_t n = ex.size();

  std::vector<std::size_t> hits;
  for (std::size_t k = 0; k < n; ++k) {
    double rest = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (i != k) rest += ex.delta[i] * std::max(1.0 + ex.beta[i], 0.0);
    if (ex.delta[k] * (ex.beta[k] - 1.0) >= rest) hits.push_back(k);
  }
  if (hits.size() > 1)
    throw SolverError("extreme condition holds for more than one trader");

  double positive_sum = 0.0;
  double max_weighted = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    positive_sum += ex.delta[i] * std::max(1.0 + ex.beta[i], 0.0);
    max_weighted = std::max(max_weighted, ex.delta[i] * ex.beta[i]);
  }
  const double slack = 2.0 * max_weighted - positive_sum;
  const bool aggregate_holds = slack >= 0.0;
  if (aggregate_holds != !hits.empty() &&
      std::abs(slack) > nash_tolerance::extreme_consistency * ex.delta_total)
    throw SolverError("per-trader and aggregate extreme conditions disagree");

  if (hits.empty()) return std::nullopt;
  return hits.front();
}

// ---------------------------------------------------------------------------
// Verification helpers

/// Left-minus-right of (2 + (theta_I - theta_i)/delta_i) theta_i/theta_I = 1 + beta_i
/// for traders with beta_i > -1; zero for the others.
inline std::vector<double> coupled_residuals(const ExposureProfile& ex,
                                             const ElasticityVector& thetas) {
  std::vector<double> r(ex.size(), 0.0);
  const Elasticity sum = total(thetas);
  if (!sum.is_finite()) return r;
  const double theta_total = sum.value();
  for (std::size_t i = 0; i < ex.size(); ++i) {
    if (ex.beta[i] <= -1.0) continue;
    const double t = thetas[i].value();
    r[i] = (2.0 + (theta_total - t) / ex.delta[i]) * t / theta_total - (1.0 + ex.beta[i]);
  }
  return r;
}

/// Largest relative gap between each theta_i and trader i's best response to
/// the others; +inf when a branch differs.
inline double fixed_point_gap(const ExposureProfile& ex, const ElasticityVector& thetas) {
  double gap = 0.0;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const auto br = best_response(ex, i, total_except(thetas, i));
    if (br.theta.tag() != thetas[i].tag()) return std::numeric_limits<double>::infinity();
    if (br.theta.is_finite()) {
      const double a = br.theta.value();
      const double b = thetas[i].value();
      gap = std::max(gap, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
    }
  }
  return gap;
}

namespace detail {

inline NashSolution assemble(const ExposureProfile& ex, NashKind kind, ElasticityVector thetas) {
  NashSolution s;
  s.kind = kind;
  s.theta_total = total(thetas);
  s.k_shares = shares(thetas);
  s.outcome = clearing_outcome(ex, thetas);
  s.residuals = coupled_residuals(ex, thetas);
  s.elasticities = std::move(thetas);
  return s;
}

}  // namespace detail

/// Trader k acts risk neutral; everyone else answers delta_i (1 + beta_i)_+.
inline NashSolution solve_extreme(const ExposureProfile& ex, std::size_t k) {
  ElasticityVector thetas(ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    thetas[i] = i == k ? Elasticity::infinite()
                       : Elasticity::from_value(ex.delta[i] * std::max(1.0 + ex.beta[i], 0.0));
  }
  auto s = detail::assemble(ex, NashKind::extreme, std::move(thetas));
  s.risk_neutral_trader = k;
  return s;
}

// ---------------------------------------------------------------------------
// Two effective traders

/// Indices of traders with beta_i > -1.
inline std::vector<std::size_t> effective_traders(const ExposureProfile& ex) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ex.size(); ++i)
    if (ex.beta[i] > -1.0) idx.push_back(i);
  return idx;
}

/// Closed form when exactly two traders have beta > -1 and
/// |lambda_0 beta_0 - lambda_1 beta_1| < lambda_0 + lambda_1.
inline NashSolution solve_bilateral(const ExposureProfile& ex) {
  if (ex.is_trivial) throw PreconditionError("bilateral solver needs a non-trivial model");
  const auto eff = effective_traders(ex);
  if (eff.size() != 2)
    throw PreconditionError("bilateral solver needs exactly two traders with beta > -1");
  const std::size_t p = eff[0], q = eff[1];
  const double lp = ex.lambda[p], lq = ex.lambda[q];
  const double bp = ex.beta[p], bq = ex.beta[q];
  if (!(std::abs(lp * bp - lq * bq) < lp + lq))
    throw PreconditionError("bilateral non-extreme inequality fails; equilibrium is extreme");

  ElasticityVector thetas(ex.size(), Elasticity::zero());
  thetas[p] = Elasticity::finite(ex.delta[p] * 2.0 * lq * (bp + bq) / ((lp + lq) + (lq * bq - lp * bp)));
  thetas[q] = Elasticity::finite(ex.delta[q] * 2.0 * lp * (bp + bq) / ((lp + lq) + (lp * bp - lq * bq)));
  return detail::assemble(ex, NashKind::bilateral_closed_form, std::move(thetas));
}

// ---------------------------------------------------------------------------
// General non-extreme equilibrium

/// Nonnegative root phi(x) of theta^2/2 - (delta + x/2) theta + delta (1+beta) x/2,
/// i.e. the elasticity of a trader with -1 < beta <= 1 when the aggregate is x.
inline double interior_elasticity(double delta, double beta, double x) {
  if (beta == 1.0) return std::min(x, 2.0 * delta);
  // (delta + x/2)^2 - delta (1+beta) x, regrouped as a sum of nonnegative terms
  const double shifted = x / 2.0 - delta * beta;
  const double disc = std::max(shifted * shifted + delta * delta * (1.0 - beta * beta), 0.0);
  // rationalized form of delta + x/2 - sqrt(disc); no cancellation for large x
  return delta * (1.0 + beta) * x / (delta + x / 2.0 + std::sqrt(disc));
}

/// Aggregate-elasticity equation whose unique crossing of 1 is the equilibrium.
class AggregateEquation {
public:
  AggregateEquation(const ExposureProfile& ex, std::size_t pivot, std::vector<std::size_t> interior)
      : ex_(&ex), pivot_(pivot), interior_(std::move(interior)) {}

  double sigma(double x) const {
    double s = 0.0;
    for (auto i : interior_) s += interior_elasticity(ex_->delta[i], ex_->beta[i], x);
    return s;
  }

  double operator()(double x) const {
    const double s = sigma(x);
    const double d0 = ex_->delta[pivot_];
    return (1.0 + ex_->beta[pivot_]) * d0 / (2.0 * d0 + s) + s / x;
  }

  double pivot_elasticity(double x) const {
    const double d0 = ex_->delta[pivot_];
    return (1.0 + ex_->beta[pivot_]) * d0 * x / (2.0 * d0 + sigma(x));
  }

  std::size_t pivot() const { return pivot_; }
  const std::vector<std::size_t>& interior() const { return interior_; }

private:
  const ExposureProfile* ex_;
  std::size_t pivot_;
  std::vector<std::size_t> interior_;
};

/// Pivot is the lowest-index trader of maximal beta; the interior set is every
/// other trader with -1 < beta <= 1.
inline AggregateEquation make_aggregate_equation(const ExposureProfile& ex) {
  std::size_t pivot = 0;
  for (std::size_t i = 1; i < ex.size(); ++i)
    if (ex.beta[i] > ex.beta[pivot]) pivot = i;
  std::vector<std::size_t> interior;
  for (std::size_t i = 0; i < ex.size(); ++i)
    if (i != pivot && ex.beta[i] > -1.0 && ex.beta[i] <= 1.0) interior.push_back(i);
  return AggregateEquation(ex, pivot, std::move(interior));
}

struct RootBracket {
  double lo = 0.0;
  double hi = 0.0;
};

inline RootBracket bracket_aggregate_root(const ExposureProfile& ex, const AggregateEquation& f) {
  RootBracket b{1e-12 * ex.delta_total, ex.delta_total};
  if (!(f(b.lo) > 1.0)) throw SolverError("aggregate equation does not exceed 1 near zero");
  int doublings = 0;
  while (!(f(b.hi) < 1.0)) {
    if (++doublings > nash_tolerance::max_doublings)
      throw SolverError("aggregate equation never drops below 1; the equilibrium is not interior");
    b.lo = b.hi;
    b.hi *= 2.0;
  }
  return b;
}

inline NashSolution solve_general(const ExposureProfile& ex, const SolveOptions& opts = {}) {
  if (ex.is_trivial) throw PreconditionError("general solver needs a non-trivial model");
  if (check_extreme_condition(ex))
    throw PreconditionError("extreme condition holds; use solve_extreme");

  const auto high = std::count_if(ex.beta.begin(), ex.beta.end(), [](double b) { return b > 1.0; });
  if (high >= 2) {
    NashSolution s;
    s.kind = NashKind::unsupported_regime;
    s.note = std::to_string(high) +
             " traders have beta > 1 and the extreme condition fails; uniqueness is not established";
    return s;
  }

  const auto f = make_aggregate_equation(ex);
  if (f.interior().empty()) throw SolverError("no interior trader besides the pivot");
  auto [lo, hi] = bracket_aggregate_root(ex, f);

  double x = 0.5 * (lo + hi);
  for (int it = 0; it < nash_tolerance::max_bisections; ++it) {
    x = 0.5 * (lo + hi);
    if (x <= lo || x >= hi) break;
    const double fx = f(x);
    if (hi - lo <= opts.root_tolerance * x && std::abs(fx - 1.0) < opts.root_tolerance) break;
    (fx > 1.0 ? lo : hi) = x;
  }

  ElasticityVector thetas(ex.size(), Elasticity::zero());
  for (auto i : f.interior())
    thetas[i] = Elasticity::finite(interior_elasticity(ex.delta[i], ex.beta[i], x));
  thetas[f.pivot()] = Elasticity::finite(f.pivot_elasticity(x));
  return detail::assemble(ex, NashKind::general_non_extreme, std::move(thetas));
}

// ---------------------------------------------------------------------------

/// Classifies the instance and computes its linear Nash equilibrium.
inline NashSolution solve(const ExposureProfile& ex, const SolveOptions& opts = {}) {
  if (ex.is_trivial) {
    ElasticityVector thetas;
    for (double d : ex.delta) thetas.push_back(Elasticity::finite(d));
    auto s = detail::assemble(ex, NashKind::trivial, std::move(thetas));
    s.note = "a_I = 0: every elasticity vector is an equilibrium with zero prices";
    return s;
  }

  NashSolution s;
  if (auto k = check_extreme_condition(ex)) {
    s = solve_extreme(ex, *k);
  } else if (effective_traders(ex).size() == 2) {
    s = solve_bilateral(ex);
  } else {
    s = solve_general(ex, opts);
    if (s.kind == NashKind::unsupported_regime) return s;
  }

  s.fixed_point_gap = fixed_point_gap(ex, s.elasticities);
  if (opts.verify && !(s.fixed_point_gap <= opts.verify_tolerance))
    throw SolverError(std::string("equilibrium failed the best-response check (kind ") +
                      to_string(s.kind) + ", gap " + std::to_string(s.fixed_point_gap) + ")");
  return s;
}

}  // namespace thinmarket
