#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace thinmarket {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a precondition of an operation does not hold for its input.
class PreconditionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure fails on input that passed validation.
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct TraderProfile {
  double delta = 1.0;               // risk tolerance, > 0
  Vector cov_endowment_securities;  // Cov(E_i, S)
  double endowment_mean = 0.0;      // E[E_i]
  double endowment_var = 0.0;       // Var(E_i)
};

/// One problem instance: securities covariance C (zero-mean payoffs) and the
/// participating traders.
struct MarketModel {
  Matrix securities_cov;
  std::vector<TraderProfile> traders;
  std::optional<double> total_endowment_var;  // Var(E_I), incompleteness analysis only

  std::size_t security_count() const { return static_cast<std::size_t>(securities_cov.rows()); }
  std::size_t trader_count() const { return traders.size(); }
};

namespace tolerance {
inline constexpr double symmetry = 1e-10;          // relative to the largest |C_ij|
inline constexpr double positive_definite = 1e-10;  // relative to the largest diagonal entry
inline constexpr double trivial_relative = 1e-12;
inline constexpr double trivial_absolute = 1e-14;
inline constexpr double variance_bound = 1e-10;    // relative, for <a_I, C a_I> <= Var(E_I)
}  // namespace tolerance

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

inline double quadratic_form(const Matrix& c, const Vector& x, const Vector& y) {
  return x.dot(c * y);
}

/// Aggregate hedgeable variance <a_I, C a_I> computed through the factorization.
inline double aggregate_variance(const Eigen::LLT<Matrix>& llt, const MarketModel& model) {
  Vector cov_total = Vector::Zero(static_cast<Eigen::Index>(model.security_count()));
  for (const auto& t : model.traders) cov_total += t.cov_endowment_securities;
  return cov_total.dot(llt.solve(cov_total));
}

}  // namespace detail

inline ValidationReport validate_model(const MarketModel& model) {
  ValidationReport report;
  auto& v = report.violations;
  const Matrix& c = model.securities_cov;

  if (c.rows() == 0 || c.rows() != c.cols()) {
    v.push_back("securities covariance must be a non-empty square matrix");
    return report;
  }
  if (!c.allFinite()) {
    v.push_back("securities covariance has non-finite entries");
    return report;
  }
  if (model.traders.size() < 2) v.push_back("at least two traders are required");

  const double max_abs = c.cwiseAbs().maxCoeff();
  const double asymmetry = (c - c.transpose()).cwiseAbs().maxCoeff();
  bool symmetric = asymmetry <= tolerance::symmetry * std::max(max_abs, 1e-300);
  if (!symmetric) v.push_back("securities covariance is not symmetric");

  bool positive_definite = false;
  if (symmetric) {
    const Matrix sym = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    const double max_diag = sym.diagonal().maxCoeff();
    positive_definite = eig.info() == Eigen::Success && max_diag > 0.0 &&
                        eig.eigenvalues().minCoeff() > tolerance::positive_definite * max_diag;
    if (!positive_definite) v.push_back("securities covariance is not positive definite");
  }

  for (std::size_t i = 0; i < model.traders.size(); ++i) {
    const auto& t = model.traders[i];
    const std::string who = "trader " + std::to_string(i) + ": ";
    if (!(t.delta > 0.0) || !std::isfinite(t.delta))
      v.push_back(who + "risk tolerance must be strictly positive");
    if (!(t.endowment_var >= 0.0) || !std::isfinite(t.endowment_var))
      v.push_back(who + "endowment variance must be nonnegative");
    if (!std::isfinite(t.endowment_mean)) v.push_back(who + "endowment mean must be finite");
    if (t.cov_endowment_securities.size() != c.rows())
      v.push_back(who + "endowment/securities covariance length does not match security count");
    else if (!t.cov_endowment_securities.allFinite())
      v.push_back(who + "endowment/securities covariance has non-finite entries");
  }

  if (model.total_endowment_var) {
    const double total_var = *model.total_endowment_var;
    if (!(total_var >= 0.0) || !std::isfinite(total_var)) {
      v.push_back("total endowment variance must be nonnegative");
    } else if (report.ok()) {
      const Eigen::LLT<Matrix> llt(0.5 * (c + c.transpose()));
      const double hedgeable = detail::aggregate_variance(llt, model);
      if (hedgeable > total_var + tolerance::variance_bound * std::max(1.0, total_var))
        v.push_back("total endowment variance is smaller than its hedgeable part <a_I, C a_I>");
    }
  }
  return report;
}

/// Quantities derived from a validated model that every equilibrium computation uses.
struct ExposureProfile {
  Matrix cov;                   // C
  Eigen::LLT<Matrix> cov_llt;   // Cholesky factor of C
  std::vector<Vector> a;        // a_i = C^{-1} Cov(E_i, S)
  Vector a_total;               // a_I
  std::vector<double> beta;     // projected betas; all zero when trivial
  std::vector<double> lambda;   // delta_i / delta_I
  std::vector<double> delta;
  double delta_total = 0.0;
  std::vector<double> u;            // autarky certainty equivalents
  std::vector<double> self_var;     // <a_i, C a_i>
  std::vector<double> endowment_mean;
  std::vector<double> endowment_var;
  double market_variance = 0.0;     // <a_I, C a_I>
  bool is_trivial = false;          // a_I = 0 up to tolerance; beta undefined

  std::size_t size() const { return delta.size(); }
  double delta_rest(std::size_t i) const { return delta_total - delta[i]; }
};

/// Certainty equivalent of a Gaussian payoff under CARA preferences with risk tolerance delta.
inline double certainty_equivalent(double mean, double variance, double delta) {
  if (!(delta > 0.0)) throw std::domain_error("risk tolerance must be strictly positive");
  if (!(variance >= 0.0)) throw std::domain_error("variance must be nonnegative");
  return mean - variance / (2.0 * delta);
}

inline ExposureProfile derive_exposures(const MarketModel& model) {
  ExposureProfile ex;
  const std::size_t n = model.trader_count();
  const auto k = static_cast<Eigen::Index>(model.security_count());

  ex.cov = 0.5 * (model.securities_cov + model.securities_cov.transpose());
  ex.cov_llt.compute(ex.cov);
  if (ex.cov_llt.info() != Eigen::Success)
    throw SolverError("Cholesky factorization of the securities covariance failed");
  const Matrix& l = ex.cov_llt.matrixL();
  const double min_pivot = l.diagonal().cwiseAbs2().minCoeff();
  if (!(min_pivot > tolerance::positive_definite * ex.cov.diagonal().maxCoeff()))
    throw SolverError("securities covariance is numerically singular");

  ex.a.reserve(n);
  ex.a_total = Vector::Zero(k);
  for (const auto& t : model.traders) {
    ex.delta.push_back(t.delta);
    ex.delta_total += t.delta;
    ex.endowment_mean.push_back(t.endowment_mean);
    ex.endowment_var.push_back(t.endowment_var);
    ex.u.push_back(certainty_equivalent(t.endowment_mean, t.endowment_var, t.delta));
    ex.a.push_back(ex.cov_llt.solve(t.cov_endowment_securities));
    ex.a_total += ex.a.back();
  }

  double self_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ex.lambda.push_back(ex.delta[i] / ex.delta_total);
    ex.self_var.push_back(detail::quadratic_form(ex.cov, ex.a[i], ex.a[i]));
    self_sum += ex.self_var.back();
  }

  ex.market_variance = std::max(0.0, detail::quadratic_form(ex.cov, ex.a_total, ex.a_total));
  ex.is_trivial = self_sum > 0.0
                      ? ex.market_variance < tolerance::trivial_relative * self_sum
                      : ex.market_variance < tolerance::trivial_absolute;

  ex.beta.assign(n, 0.0);
  if (!ex.is_trivial) {
    const Vector c_total = ex.cov * ex.a_total;
    for (std::size_t i = 0; i < n; ++i) ex.beta[i] = ex.a[i].dot(c_total) / ex.market_variance;
  }
  return ex;
}

/// Validates, then derives; throws PreconditionError listing every violation.
inline ExposureProfile prepare(const MarketModel& model) {
  const auto report = validate_model(model);
  if (!report.ok()) {
    std::string msg = "invalid market model:";
    for (const auto& v : report.violations) msg += "\n  - " + v;
    throw PreconditionError(msg);
  }
  return derive_exposures(model);
}

}  // namespace thinmarket
