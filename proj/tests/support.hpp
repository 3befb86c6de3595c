#pragma once

#include "thinmarket/thinmarket.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace thinmarket::testing {

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
  }

private:
  std::mt19937_64 engine_;
};

/// Random symmetric positive definite matrix with a bounded condition number.
inline Matrix random_spd(Rng& rng, std::size_t k) {
  const auto n = static_cast<Eigen::Index>(k);
  Matrix g(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) g(r, c) = rng.normal();
  Matrix c = g * g.transpose() / static_cast<double>(k) + 0.5 * Matrix::Identity(n, n);
  return 0.5 * (c + c.transpose());
}

/// One-security model whose betas are exactly the given values (they must sum to 1).
inline MarketModel model_from_betas(const std::vector<double>& deltas, const std::vector<double>& betas,
                                    double hedgeable_scale = 1.0) {
  MarketModel m;
  m.securities_cov = Matrix::Identity(1, 1);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    TraderProfile t;
    t.delta = deltas[i];
    t.cov_endowment_securities = Vector::Constant(1, betas[i] * hedgeable_scale);
    t.endowment_mean = 0.0;
    t.endowment_var = betas[i] * betas[i] * hedgeable_scale * hedgeable_scale;
    m.traders.push_back(t);
  }
  return m;
}

/// Multi-security model with prescribed betas: a_i = beta_i v + w_i with the
/// w_i C-orthogonal to v and summing to zero, so a_I = v.
inline MarketModel random_model_with_betas(Rng& rng, const std::vector<double>& deltas,
                                           const std::vector<double>& betas, std::size_t securities) {
  const Matrix c = random_spd(rng, securities);
  const auto k = static_cast<Eigen::Index>(securities);
  Vector v(k);
  for (Eigen::Index j = 0; j < k; ++j) v[j] = rng.normal();
  const Vector cv = c * v;
  std::vector<Vector> w;
  Vector mean = Vector::Zero(k);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    Vector x(k);
    for (Eigen::Index j = 0; j < k; ++j) x[j] = rng.normal();
    x -= (x.dot(cv) / v.dot(cv)) * v;
    w.push_back(x);
    mean += x / static_cast<double>(deltas.size());
  }
  MarketModel m;
  m.securities_cov = c;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const Vector a = betas[i] * v + (w[i] - mean);
    TraderProfile t;
    t.delta = deltas[i];
    t.cov_endowment_securities = c * a;
    t.endowment_mean = rng.uniform(-1.0, 1.0);
    t.endowment_var = a.dot(c * a) + rng.uniform(0.0, 1.0);
    m.traders.push_back(t);
  }
  return m;
}

/// Unconstrained random model: random C, random Cov(E_i, S).
inline MarketModel random_model(Rng& rng, std::size_t traders, std::size_t securities) {
  MarketModel m;
  m.securities_cov = random_spd(rng, securities);
  const auto k = static_cast<Eigen::Index>(securities);
  for (std::size_t i = 0; i < traders; ++i) {
    TraderProfile t;
    t.delta = rng.log_uniform(0.1, 10.0);
    Vector a(k);
    for (Eigen::Index j = 0; j < k; ++j) a[j] = rng.normal();
    t.cov_endowment_securities = m.securities_cov * a;
    t.endowment_mean = rng.uniform(-1.0, 1.0);
    t.endowment_var = a.dot(m.securities_cov * a) + rng.uniform(0.0, 1.0);
    m.traders.push_back(t);
  }
  return m;
}

/// Random betas summing to 1 with at most one beta above 1.
inline std::vector<double> random_betas_at_most_one_high(Rng& rng, std::size_t n) {
  for (;;) {
    std::vector<double> b(n);
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      b[i] = rng.uniform(-2.0, 1.5);
      sum += b[i];
    }
    b[n - 1] = 1.0 - sum;
    int high = 0;
    for (double x : b) high += x > 1.0;
    if (high <= 1) return b;
  }
}

inline std::vector<double> random_deltas(Rng& rng, std::size_t n) {
  std::vector<double> d(n);
  for (auto& x : d) x = rng.log_uniform(0.1, 10.0);
  return d;
}

/// Two traders satisfying |lambda_0 beta_0 - lambda_1 beta_1| < lambda_0 + lambda_1.
inline MarketModel random_bilateral(Rng& rng, std::size_t securities) {
  for (;;) {
    const auto d = random_deltas(rng, 2);
    const double b0 = rng.uniform(-0.99, 2.0);
    const std::vector<double> b{b0, 1.0 - b0};
    const double l0 = d[0] / (d[0] + d[1]);
    const double l1 = 1.0 - l0;
    if (std::abs(l0 * b[0] - l1 * b[1]) < 0.999 * (l0 + l1) && b[1] > -0.99)
      return random_model_with_betas(rng, d, b, securities);
  }
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace thinmarket::testing
