#pragma once

#include "competitive.hpp"
#include "market.hpp"
#include "nash.hpp"

#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace thinmarket {

/// Raised when two independent routes to the same quantity disagree.
class CrossCheckError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ComparisonReport {
  std::vector<double> du;  // Nash utility minus competitive utility
  double inefficiency = 0.0;
  std::vector<double> premium_competitive;
  std::vector<double> premium_nash;
  std::vector<double> payoff_gain_competitive;
  std::vector<double> payoff_gain_nash;
  std::optional<double> L;  // two-trader markets only
};

/// Premium factor of the bilateral equilibrium: (beta_0+lambda_0)(beta_1+lambda_1)/(8 lambda_0 lambda_1).
inline double bilateral_premium_factor(const ExposureProfile& ex) {
  if (ex.size() != 2) throw PreconditionError("premium factor is defined for two traders");
  return (ex.beta[0] + ex.lambda[0]) * (ex.beta[1] + ex.lambda[1]) /
         (8.0 * ex.lambda[0] * ex.lambda[1]);
}

/// Closed-form utility difference of a two-trader non-extreme equilibrium.
inline double bilateral_du_closed_form(const ExposureProfile& ex, std::size_t i) {
  const double m = ex.market_variance;
  const double l = ex.lambda[i], b = ex.beta[i];
  const double mid = 0.5 * (l + b);
  return m / (2.0 * ex.delta[i]) * (l * l - mid * mid) +
         (b - l) / ex.delta_total * m * (1.0 - bilateral_premium_factor(ex));
}

/// Closed-form utility difference at the extreme equilibrium led by trader k.
inline double extreme_du_closed_form(const ExposureProfile& ex, std::size_t i, std::size_t k) {
  const double m = ex.market_variance;
  const double l = ex.lambda[i];
  const double core = l * (2.0 * ex.beta[i] - l);
  return m / (2.0 * ex.delta[i]) * (i == k ? core - 1.0 : core);
}

inline double extreme_inefficiency_closed_form(const ExposureProfile& ex, std::size_t k) {
  return -ex.market_variance / (2.0 * ex.delta_total) * (1.0 - ex.lambda[k]) / ex.lambda[k];
}

inline ComparisonReport compare(const ExposureProfile& ex, const EquilibriumOutcome& competitive,
                                const NashSolution& nash) {
  if (!nash.outcome)
    throw PreconditionError(std::string("no Nash outcome to compare (kind ") + to_string(nash.kind) + ")");
  const auto& nash_out = *nash.outcome;
  if (competitive.utilities.size() != ex.size() || nash_out.utilities.size() != ex.size())
    throw PreconditionError("equilibria were computed for a different trader set");

  ComparisonReport r;
  double scale = ex.market_variance / *std::min_element(ex.delta.begin(), ex.delta.end());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    r.du.push_back(nash_out.utilities[i] - competitive.utilities[i]);
    const auto dc = decompose_utility(ex, competitive, i);
    const auto dn = decompose_utility(ex, nash_out, i);
    r.premium_competitive.push_back(dc.premium);
    r.premium_nash.push_back(dn.premium);
    r.payoff_gain_competitive.push_back(dc.payoff_gain);
    r.payoff_gain_nash.push_back(dn.payoff_gain);
    scale = std::max(scale, std::abs(r.du.back()));
  }
  r.inefficiency = std::accumulate(r.du.begin(), r.du.end(), 0.0);

  const double tol = 1e-8 * (1.0 + scale);
  auto expect = [&](double direct, double closed, const std::string& what) {
    if (std::abs(direct - closed) > tol)
      throw CrossCheckError(what + ": direct " + std::to_string(direct) + " vs closed form " +
                            std::to_string(closed));
  };

  if (ex.size() == 2 && !ex.is_trivial) r.L = bilateral_premium_factor(ex);

  if (nash.kind == NashKind::bilateral_closed_form && ex.size() == 2) {
    for (std::size_t i = 0; i < 2; ++i)
      expect(r.du[i], bilateral_du_closed_form(ex, i), "bilateral DU_" + std::to_string(i));
  } else if (nash.kind == NashKind::extreme && nash.risk_neutral_trader) {
    const std::size_t k = *nash.risk_neutral_trader;
    for (std::size_t i = 0; i < ex.size(); ++i)
      expect(r.du[i], extreme_du_closed_form(ex, i, k), "extreme DU_" + std::to_string(i));
    expect(r.inefficiency, extreme_inefficiency_closed_form(ex, k), "extreme inefficiency");
  }
  return r;
}

/// Limit of DU_0 as delta_0 grows without bound, for a two-trader market.
inline double risk_neutral_limit_du(const ExposureProfile& ex) {
  if (ex.size() != 2) throw PreconditionError("risk-neutral limit is defined for two traders");
  const double b = ex.beta[0];
  if (!(b > -1.0 && b < 1.0)) return 0.0;
  return ex.market_variance * (1.0 + b) * (1.0 - b) * (1.0 - b) / (8.0 * ex.delta[1]);
}

struct IncompletenessReport {
  double hedgeable_variance = 0.0;  // <a_I, C a_I>
  double total_variance = 0.0;      // Var(E_I)
  std::vector<double> du_incomplete;
  std::vector<double> du_complete;
  std::vector<double> du_gap;                 // complete minus incomplete
  std::vector<double> competitive_gain_incomplete;  // |C^{1/2} q_hat_i|^2 / (2 delta_i)
  std::vector<double> competitive_gain_complete;
  std::vector<double> competitive_gain_gap;
  double inefficiency_incomplete = 0.0;
  double inefficiency_complete = 0.0;
};

/// Same market with the hedgeable variance raised to Var(E_I) while betas and
/// relative risk tolerances stay fixed.
inline MarketModel complete_counterpart(const MarketModel& model, const ExposureProfile& ex) {
  if (!model.total_endowment_var) throw PreconditionError("total endowment variance is required");
  const double total_var = *model.total_endowment_var;
  if (ex.is_trivial || !(ex.market_variance > 0.0))
    throw PreconditionError("incompleteness comparison needs a non-trivial model");
  if (ex.market_variance > total_var + tolerance::variance_bound * std::max(1.0, total_var))
    throw PreconditionError("hedgeable variance exceeds the total endowment variance");
  const double scale = std::sqrt(total_var / ex.market_variance);
  MarketModel complete = model;
  for (auto& t : complete.traders) {
    t.cov_endowment_securities *= scale;
    t.endowment_var *= scale * scale;  // keeps Var(E_i) >= <a_i, C a_i>
  }
  complete.total_endowment_var = std::nullopt;
  return complete;
}

inline IncompletenessReport incompleteness_effect(const MarketModel& model,
                                                  const SolveOptions& opts = {}) {
  const auto ex = prepare(model);
  if (ex.is_trivial) throw PreconditionError("incompleteness comparison needs a non-trivial model");
  if (effective_traders(ex).size() != 2)
    throw PreconditionError("incompleteness comparison needs exactly two traders with beta > -1");

  const auto ex_complete = derive_exposures(complete_counterpart(model, ex));

  auto run = [&](const ExposureProfile& e, std::vector<double>& du, std::vector<double>& gain,
                 double& inefficiency) {
    const auto comp = competitive_equilibrium(e);
    const auto nash = solve(e, opts);
    const auto cmp = compare(e, comp, nash);
    du = cmp.du;
    inefficiency = cmp.inefficiency;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const Vector& q = comp.allocations[i];
      gain.push_back(q.dot(e.cov * q) / (2.0 * e.delta[i]));
    }
  };

  IncompletenessReport r;
  r.hedgeable_variance = ex.market_variance;
  r.total_variance = *model.total_endowment_var;
  run(ex, r.du_incomplete, r.competitive_gain_incomplete, r.inefficiency_incomplete);
  run(ex_complete, r.du_complete, r.competitive_gain_complete, r.inefficiency_complete);
  for (std::size_t i = 0; i < ex.size(); ++i) {
    r.du_gap.push_back(r.du_complete[i] - r.du_incomplete[i]);
    r.competitive_gain_gap.push_back(r.competitive_gain_complete[i] - r.competitive_gain_incomplete[i]);
  }
  return r;
}

}  // namespace thinmarket
