#pragma once

#include "competitive.hpp"
#include "elasticity.hpp"
#include "market.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace thinmarket {

enum class ResponseBranch { inelastic_zero, interior, risk_neutral_infinity };

inline const char* to_string(ResponseBranch b) {
  switch (b) {
    case ResponseBranch::inelastic_zero: return "inelastic_zero";
    case ResponseBranch::interior: return "interior";
    case ResponseBranch::risk_neutral_infinity: return "risk_neutral_infinity";
  }
  return "?";
}

struct BestResponseResult {
  Elasticity theta;
  double k = 0.0;      // post-transaction beta share theta / (theta + theta_rest)
  double value = 0.0;  // certainty equivalent at the optimum
  ResponseBranch branch = ResponseBranch::interior;
};

/// Certainty equivalent of trader i when submitting `theta_i` against an
/// aggregate finite elasticity `theta_rest` of everyone else.
///
/// Written in the share k = theta_i / (theta_i + theta_rest):
///   u_i + <a_i,Ca_i>/(2 delta_i) + m [ (1-k)k/theta_rest - k^2/(2 delta_i) - beta_i (1-k)/theta_rest ]
/// with m = <a_I, C a_I>. The constant <a_i,Ca_i>/(2 delta_i) does not move
/// the maximizer but keeps the value equal to the true post-trade utility.
inline double response_value_at_share(const ExposureProfile& ex, std::size_t i, double k,
                                      double theta_rest) {
  if (!(theta_rest > 0.0) || !std::isfinite(theta_rest))
    throw std::domain_error("aggregate elasticity of the other traders must be positive and finite");
  const double d = ex.delta[i];
  const double bracket = (1.0 - k) * k / theta_rest - k * k / (2.0 * d) -
                         ex.beta[i] * (1.0 - k) / theta_rest;
  return ex.u[i] + ex.self_var[i] / (2.0 * d) + ex.market_variance * bracket;
}

inline double response_value(const ExposureProfile& ex, std::size_t i, const Elasticity& theta_i,
                             double theta_rest) {
  double k = 0.0;
  if (theta_i.is_infinite()) k = 1.0;
  else if (theta_i.is_finite()) k = theta_i.value() / (theta_i.value() + theta_rest);
  return response_value_at_share(ex, i, k, theta_rest);
}

/// Unique maximizer of the response function for a given aggregate
/// elasticity of the other traders.
///
/// theta_rest = +inf gives delta_i (1 + beta_i)_+; theta_rest = 0 is only
/// meaningful when beta_i > 1 and gives +inf.
inline BestResponseResult best_response(const ExposureProfile& ex, std::size_t i,
                                        const Elasticity& theta_rest) {
  if (ex.is_trivial)
    throw std::domain_error("response function is flat when a_I = 0; every elasticity is optimal");
  const double d = ex.delta[i];
  const double b = ex.beta[i];
  const double autarky_plus = ex.u[i] + ex.self_var[i] / (2.0 * d);

  BestResponseResult r;
  if (theta_rest.is_infinite()) {
    r.k = 0.0;
    r.value = autarky_plus;
    if (b <= -1.0) {
      r.theta = Elasticity::zero();
      r.branch = ResponseBranch::inelastic_zero;
    } else {
      r.theta = Elasticity::finite(d * (1.0 + b));
      r.branch = ResponseBranch::interior;
    }
    return r;
  }

  if (theta_rest.is_zero()) {
    if (!(b > 1.0))
      throw std::domain_error("zero aggregate elasticity of the others requires beta_i > 1 (trader " +
                              std::to_string(i) + ")");
    r.theta = Elasticity::infinite();
    r.k = 1.0;
    r.value = autarky_plus - ex.market_variance / (2.0 * d);
    r.branch = ResponseBranch::risk_neutral_infinity;
    return r;
  }

  const double rest = theta_rest.value();
  if (b <= -1.0) {
    r.theta = Elasticity::zero();
    r.k = 0.0;
    r.branch = ResponseBranch::inelastic_zero;
  } else if (d * (b - 1.0) >= rest) {
    r.theta = Elasticity::infinite();
    r.k = 1.0;
    r.branch = ResponseBranch::risk_neutral_infinity;
  } else {
    r.theta = Elasticity::finite(d * rest * (1.0 + b) / (rest + d * (1.0 - b)));
    r.k = (1.0 + b) / (2.0 + rest / d);
    r.branch = ResponseBranch::interior;
  }
  r.value = response_value_at_share(ex, i, r.k, rest);
  return r;
}

struct OneSidedResult {
  BestResponseResult response;
  double cash_benefit = 0.0;  // <q^r, p_hat - p^r>
};

/// Trader i responds optimally while everyone else submits true demands
/// (theta_rest = delta_{-i}).
inline OneSidedResult one_sided_equilibrium(const ExposureProfile& ex, std::size_t i) {
  if (ex.is_trivial) throw PreconditionError("one-sided equilibrium needs a non-trivial model");
  const double rest = ex.delta_rest(i);
  if (!(rest > 0.0)) throw std::domain_error("lambda_i = 1: no counterparty elasticity");

  OneSidedResult out;
  out.response = best_response(ex, i, Elasticity::finite(rest));
  const double k = out.response.k;
  const Vector c_total = ex.cov * ex.a_total;
  const Vector q = k * ex.a_total - ex.a[i];
  const Vector p_strategic = -(1.0 - k) * c_total / rest;
  const Vector p_competitive = -c_total / ex.delta_total;
  out.cash_benefit = q.dot(p_competitive - p_strategic);
  return out;
}

}  // namespace thinmarket
