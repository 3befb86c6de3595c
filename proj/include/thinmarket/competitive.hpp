#pragma once

#include "elasticity.hpp"
#include "market.hpp"

#include <stdexcept>
#include <vector>

namespace thinmarket {

/// Prices and post-trade state of every trader for one clearing of the market.
struct EquilibriumOutcome {
  Vector prices;
  std::vector<Vector> allocations;
  std::vector<double> post_beta;   // zero and undefined when the model is trivial
  bool post_beta_defined = true;
  std::vector<double> utilities;   // certainty equivalents after the transaction
  std::vector<double> premium;     // <q_i, p>
};

/// Mean and variance of E_i + <q, S - p>.
struct PositionMoments {
  double mean = 0.0;
  double variance = 0.0;
};

inline PositionMoments post_trade_moments(const ExposureProfile& ex, std::size_t i,
                                          const Vector& q, const Vector& p) {
  const Vector cq = ex.cov * q;
  PositionMoments m;
  m.mean = ex.endowment_mean[i] - q.dot(p);
  // Cov(E_i, <q,S>) = <q, C a_i>
  m.variance = ex.endowment_var[i] + 2.0 * ex.a[i].dot(cq) + q.dot(cq);
  m.variance = std::max(m.variance, 0.0);
  return m;
}

inline double post_trade_utility(const ExposureProfile& ex, std::size_t i, const Vector& q,
                                 const Vector& p) {
  const auto m = post_trade_moments(ex, i, q, p);
  return certainty_equivalent(m.mean, m.variance, ex.delta[i]);
}

namespace detail {

inline EquilibriumOutcome finish_outcome(const ExposureProfile& ex, Vector prices,
                                         std::vector<Vector> allocations,
                                         std::vector<double> post_beta) {
  EquilibriumOutcome out;
  out.prices = std::move(prices);
  out.allocations = std::move(allocations);
  out.post_beta_defined = !ex.is_trivial;
  // a_i + q_i = k_i a_I, so the post-trade beta is the clearing share itself
  out.post_beta = ex.is_trivial ? std::vector<double>(ex.size(), 0.0) : std::move(post_beta);
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const Vector& q = out.allocations[i];
    out.utilities.push_back(post_trade_utility(ex, i, q, out.prices));
    out.premium.push_back(q.dot(out.prices));
  }
  return out;
}

}  // namespace detail

/// Market clearing for submitted demands -a_i - theta_i C^{-1} p.
///
/// Prices are -C a_I / theta_I and allocations k_i a_I - a_i with
/// k_i = theta_i / theta_I; a single infinite elasticity takes the whole
/// share at zero prices. In the trivial model prices vanish for any vector.
inline EquilibriumOutcome clearing_outcome(const ExposureProfile& ex,
                                           const ElasticityVector& thetas) {
  if (thetas.size() != ex.size())
    throw std::invalid_argument("elasticity vector length does not match trader count");
  const auto k = static_cast<Eigen::Index>(ex.a_total.size());
  std::vector<Vector> q;
  q.reserve(ex.size());

  if (ex.is_trivial) {
    for (std::size_t i = 0; i < ex.size(); ++i) q.push_back(-ex.a[i]);
    return detail::finish_outcome(ex, Vector::Zero(k), std::move(q), {});
  }

  const auto share = shares(thetas);
  const Elasticity theta_total = total(thetas);
  Vector p = theta_total.is_infinite() ? Vector(Vector::Zero(k))
                                       : Vector(-(ex.cov * ex.a_total) / theta_total.value());
  for (std::size_t i = 0; i < ex.size(); ++i) q.push_back(share[i] * ex.a_total - ex.a[i]);
  return detail::finish_outcome(ex, std::move(p), std::move(q), share);
}

/// Price-taking equilibrium: every trader submits its true elasticity delta_i.
inline EquilibriumOutcome competitive_equilibrium(const ExposureProfile& ex) {
  const auto k = static_cast<Eigen::Index>(ex.a_total.size());
  std::vector<Vector> q;
  q.reserve(ex.size());
  if (ex.is_trivial) {
    for (std::size_t i = 0; i < ex.size(); ++i) q.push_back(-ex.a[i]);
    return detail::finish_outcome(ex, Vector::Zero(k), std::move(q), {});
  }
  Vector p = -(ex.cov * ex.a_total) / ex.delta_total;
  for (std::size_t i = 0; i < ex.size(); ++i) q.push_back(ex.lambda[i] * ex.a_total - ex.a[i]);
  return detail::finish_outcome(ex, std::move(p), std::move(q), ex.lambda);
}

/// Sum of submitted demands at `price`; all elasticities must be finite.
inline Vector aggregate_demand(const ExposureProfile& ex, const ElasticityVector& thetas,
                               const Vector& price) {
  if (thetas.size() != ex.size())
    throw std::invalid_argument("elasticity vector length does not match trader count");
  const Vector scaled = ex.cov_llt.solve(price);
  Vector sum = Vector::Zero(price.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    if (thetas[i].is_infinite())
      throw std::domain_error("infinite elasticity has no finite demand function");
    sum -= ex.a[i] + thetas[i].value() * scaled;
  }
  return sum;
}

/// Reporting view of a certainty equivalent: u_i + payoff_gain - premium.
struct UtilityDecomposition {
  double autarky = 0.0;
  double payoff_gain = 0.0;  // profit/loss from the random payoff
  double premium = 0.0;      // signed cash paid, <q_i, p>
  double total() const { return autarky + payoff_gain - premium; }
};

/// Splits trader i's post-trade utility for any clearing allocation q_i = k a_I - a_i.
inline UtilityDecomposition decompose_utility(const ExposureProfile& ex,
                                              const EquilibriumOutcome& out, std::size_t i) {
  const double k = out.post_beta[i];
  return {ex.u[i],
          (ex.self_var[i] - k * k * ex.market_variance) / (2.0 * ex.delta[i]),
          out.premium[i]};
}

}  // namespace thinmarket
