#pragma once

#include "best_response.hpp"
#include "elasticity.hpp"
#include "market.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

// Independent oracles the production solvers are checked against. None of
// these share code paths with the closed forms they verify.

namespace thinmarket::validation {

struct McConfig {
  std::uint64_t sample_count = 1'000'000;
  std::uint64_t seed = 42;
};

struct McEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  bool unreliable = false;  // exp(-X/delta) overflowed a double for some sample
};

/// Standard normal stream with a fixed, portable definition:
///  - engine: std::mt19937_64 seeded with the 64-bit seed (algorithm fixed by the C++ standard);
///  - uniforms: u = ((x >> 11) + 1) * 2^-53, in (0, 1];
///  - normals: Box-Muller, z0 = r cos(2 pi u2), z1 = r sin(2 pi u2), r = sqrt(-2 ln u1),
///    emitted in the order z0, z1.
class GaussianStream {
public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Monte-Carlo estimate of -delta log E[exp(-X/delta)] for X ~ N(mean, variance),
/// with a delta-method standard error.
inline McEstimate mc_certainty_equivalent(double mean, double variance, double delta,
                                          const McConfig& cfg) {
  if (!(delta > 0.0)) throw std::domain_error("risk tolerance must be strictly positive");
  if (!(variance >= 0.0)) throw std::domain_error("variance must be nonnegative");
  if (cfg.sample_count < 1) throw std::invalid_argument("sample_count must be at least 1");
  if (variance == 0.0) return {mean, 0.0, false};

  const double sd = std::sqrt(variance);
  GaussianStream gauss(cfg.seed);
  std::vector<double> exponents(cfg.sample_count);
  double shift = -std::numeric_limits<double>::infinity();
  McEstimate out;
  for (auto& e : exponents) {
    e = -(mean + sd * gauss()) / delta;
    shift = std::max(shift, e);
    if (e > std::log(DBL_MAX)) out.unreliable = true;
  }

  // Moments of Y / exp(shift), Y = exp(-X/delta); the scale cancels below.
  const double n = static_cast<double>(cfg.sample_count);
  double sum = 0.0, sum_sq = 0.0;
  for (double e : exponents) {
    const double y = std::exp(e - shift);
    sum += y;
    sum_sq += y * y;
  }
  const double avg = sum / n;
  const double var_y = cfg.sample_count > 1 ? std::max(sum_sq / n - avg * avg, 0.0) * n / (n - 1.0) : 0.0;

  out.estimate = -delta * (std::log(avg) + shift);
  out.standard_error = delta * std::sqrt(var_y / n) / avg;
  return out;
}

struct GridSearchResult {
  double k = 0.0;
  double value = 0.0;  // utility gain over autarky at the maximizer
};

/// Brute-force maximizer of trader i's post-trade utility over the share
/// k = theta_i / (theta_i + theta_rest) in [0, 1].
///
/// The objective is built from the clearing price p = -(1-k) C a_I / theta_rest
/// and allocation q = k a_I - a_i: mean shift -<q,p>, variance shift
/// 2<q, C a_i> + <q, C q>. A uniform grid is followed by one golden-section pass
/// around the best grid point.
inline GridSearchResult grid_best_response_share(const ExposureProfile& ex, std::size_t i,
                                                 double theta_rest, std::size_t grid_points = 100'000) {
  if (!(theta_rest > 0.0) || !std::isfinite(theta_rest))
    throw std::domain_error("grid oracle needs a positive finite theta_rest");
  if (grid_points < 2) throw std::invalid_argument("grid needs at least two points");

  const Vector c_total = ex.cov * ex.a_total;
  const Vector c_own = ex.cov * ex.a[i];
  const double tt = ex.a_total.dot(c_total);  // <a_I, C a_I>
  const double to = ex.a_total.dot(c_own);    // <a_I, C a_i>
  const double oo = ex.a[i].dot(c_own);       // <a_i, C a_i>
  const double d = ex.delta[i];

  auto gain = [&](double k) {
    // <q, C a_I>, <q, C a_i>, <q, C q> for q = k a_I - a_i
    const double q_total = k * tt - to;
    const double q_own = k * to - oo;
    const double q_q = k * k * tt - 2.0 * k * to + oo;
    const double mean_shift = (1.0 - k) / theta_rest * q_total;  // -<q, p>
    const double var_shift = 2.0 * q_own + q_q;
    return mean_shift - var_shift / (2.0 * d);
  };

  const double step = 1.0 / static_cast<double>(grid_points - 1);
  std::size_t best = 0;
  double best_value = gain(0.0);
  for (std::size_t j = 1; j < grid_points; ++j) {
    const double v = gain(static_cast<double>(j) * step);
    if (v > best_value) {
      best_value = v;
      best = j;
    }
  }

  double lo = std::max(0.0, (static_cast<double>(best) - 1.0) * step);
  double hi = std::min(1.0, (static_cast<double>(best) + 1.0) * step);
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
  double f1 = gain(x1), f2 = gain(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = gain(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = gain(x1);
    }
  }
  GridSearchResult r{0.5 * (lo + hi), 0.0};
  r.value = gain(r.k);
  // endpoints are admissible and may beat the refined interior point
  for (double edge : {0.0, 1.0}) {
    const double v = gain(edge);
    if (v > r.value) r = {edge, v};
  }
  return r;
}

struct IterationTrace {
  std::vector<ElasticityVector> iterates;
  std::vector<double> step_sizes;  // max relative change per iteration (+inf on a branch change)
  bool converged = false;
  double final_residual = std::numeric_limits<double>::infinity();
  bool branch_escalation = false;  // some trader reached the infinite branch
  std::string failure;
};

/// Simultaneous best-response iteration with convex damping of finite
/// coordinates. Branch changes to zero or +inf are taken undamped.
inline IterationTrace iterate_best_responses(const ExposureProfile& ex, ElasticityVector start,
                                             double damping = 0.5, std::size_t max_iter = 10'000) {
  if (ex.is_trivial) throw PreconditionError("iteration oracle needs a non-trivial model");
  if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("damping must lie in (0, 1]");
  if (start.size() != ex.size()) throw std::invalid_argument("start vector has the wrong length");
  for (const auto& t : start)
    if (!t.is_finite()) throw std::invalid_argument("start vector must be strictly positive and finite");

  IterationTrace trace;
  trace.iterates.push_back(start);
  ElasticityVector current = std::move(start);

  for (std::size_t it = 0; it < max_iter; ++it) {
    ElasticityVector next(current.size());
    double step = 0.0;
    bool tags_stable = true;
    try {
      for (std::size_t i = 0; i < current.size(); ++i) {
        const auto br = best_response(ex, i, total_except(current, i)).theta;
        if (br.is_finite() && current[i].is_finite())
          next[i] = Elasticity::finite((1.0 - damping) * current[i].value() + damping * br.value());
        else
          next[i] = br;
        if (next[i].tag() != current[i].tag()) {
          tags_stable = false;
          step = std::numeric_limits<double>::infinity();
        } else if (next[i].is_finite()) {
          const double a = next[i].value(), b = current[i].value();
          step = std::max(step, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
        }
        if (next[i].is_infinite()) trace.branch_escalation = true;
      }
    } catch (const std::domain_error& e) {
      trace.failure = e.what();
      return trace;
    }
    trace.iterates.push_back(next);
    trace.step_sizes.push_back(step);
    trace.final_residual = step;
    current = std::move(next);
    if (tags_stable && step < 1e-10) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

}  // namespace thinmarket::validation
