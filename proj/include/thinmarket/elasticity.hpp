#pragma once

#include <cmath>
#include <compare>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace thinmarket {

/// Elasticity of a submitted linear demand, on the extended half line [0, +inf].
///
/// Zero (fully inelastic) and infinite (risk-neutral) demands are explicit
/// tags rather than floating-point sentinels, so share conventions at the
/// extremes are branch-exact.
class Elasticity {
public:
  enum class Tag { zero, finite, infinite };

  constexpr Elasticity() = default;

  static constexpr Elasticity zero() { return Elasticity{Tag::zero, 0.0}; }
  static constexpr Elasticity infinite() { return Elasticity{Tag::infinite, 0.0}; }

  /// Strictly positive finite elasticity.
  static Elasticity finite(double value) {
    if (!(value > 0.0) || !std::isfinite(value))
      throw std::domain_error("finite elasticity must be strictly positive, got " +
                              std::to_string(value));
    return Elasticity{Tag::finite, value};
  }

  /// Maps 0 to zero(), +inf to infinite(), anything else positive to finite().
  static Elasticity from_value(double value) {
    if (value == 0.0) return zero();
    if (value == std::numeric_limits<double>::infinity()) return infinite();
    return finite(value);
  }

  constexpr Tag tag() const { return tag_; }
  constexpr bool is_zero() const { return tag_ == Tag::zero; }
  constexpr bool is_finite() const { return tag_ == Tag::finite; }
  constexpr bool is_infinite() const { return tag_ == Tag::infinite; }

  /// Numeric value; +inf for the infinite tag.
  constexpr double value() const {
    switch (tag_) {
      case Tag::zero: return 0.0;
      case Tag::finite: return value_;
      case Tag::infinite: return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  friend constexpr bool operator==(const Elasticity&, const Elasticity&) = default;

private:
  constexpr Elasticity(Tag tag, double value) : tag_(tag), value_(value) {}

  Tag tag_ = Tag::zero;
  double value_ = 0.0;
};

using ElasticityVector = std::vector<Elasticity>;

/// Extended-real sum; zero when every entry is zero.
inline Elasticity total(const ElasticityVector& thetas) {
  double sum = 0.0;
  for (const auto& t : thetas) {
    if (t.is_infinite()) return Elasticity::infinite();
    sum += t.value();
  }
  return Elasticity::from_value(sum);
}

/// Sum over all entries except `skip`.
inline Elasticity total_except(const ElasticityVector& thetas, std::size_t skip) {
  double sum = 0.0;
  for (std::size_t j = 0; j < thetas.size(); ++j) {
    if (j == skip) continue;
    if (thetas[j].is_infinite()) return Elasticity::infinite();
    sum += thetas[j].value();
  }
  return Elasticity::from_value(sum);
}

/// Shares theta_i / theta_I with the convention that a single infinite entry
/// takes the whole share. More than one infinite entry, or an all-zero
/// vector, has no well-defined clearing and is rejected.
inline std::vector<double> shares(const ElasticityVector& thetas) {
  std::vector<double> k(thetas.size(), 0.0);
  std::size_t infinite_count = 0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    if (thetas[i].is_infinite()) {
      k[i] = 1.0;
      ++infinite_count;
    }
  }
  if (infinite_count > 1)
    throw std::domain_error("more than one infinite elasticity: clearing is undefined");
  if (infinite_count == 1) return k;

  const double sum = total(thetas).value();
  if (!(sum > 0.0)) throw std::domain_error("aggregate elasticity must be positive");
  for (std::size_t i = 0; i < thetas.size(); ++i) k[i] = thetas[i].value() / sum;
  return k;
}

inline std::string to_string(const Elasticity& e) {
  if (e.is_infinite()) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", e.value());
  return buf;
}

}  // namespace thinmarket
