#include "catch2/catch_amalgamated.hpp"
#include "support.hpp"

using namespace thinmarket;
using thinmarket::testing::Rng;
using Catch::Approx;

namespace {

// Two-trader, one-security model where trader 0 has the given beta and delta;
// the counterparty takes the rest.
ExposureProfile single(double delta, double beta) {
  return prepare(testing::model_from_betas({delta, 1.0}, {beta, 1.0 - beta}));
}

}  // namespace

TEST_CASE("best_response branch examples") {
  SECTION("interior") {
    const auto r = best_response(single(1.0, 0.5), 0, Elasticity::finite(1.0));
    REQUIRE(r.branch == ResponseBranch::interior);
    CHECK(r.theta.value() == Approx(1.0));
    CHECK(r.k == Approx(0.5));
  }
  SECTION("short exposure submits zero") {
    for (double rest : {0.01, 1.0, 250.0}) {
      const auto r = best_response(single(1.0, -1.5), 0, Elasticity::finite(rest));
      CHECK(r.theta.is_zero());
      CHECK(r.k == 0.0);
      CHECK(r.branch == ResponseBranch::inelastic_zero);
    }
    CHECK(best_response(single(1.0, -1.0), 0, Elasticity::finite(1.0)).theta.is_zero());
  }
  SECTION("risk neutral") {
    const auto r = best_response(single(1.0, 2.5), 0, Elasticity::finite(1.0));
    CHECK(r.theta.is_infinite());
    CHECK(r.k == 1.0);
    CHECK(r.branch == ResponseBranch::risk_neutral_infinity);
    // exactly at 1 + theta_rest / delta
    CHECK(best_response(single(1.0, 2.0), 0, Elasticity::finite(1.0)).theta.is_infinite());
    CHECK(best_response(single(1.0, 1.999), 0, Elasticity::finite(1.0)).theta.is_finite());
  }
  SECTION("infinite rest") {
    const auto r = best_response(single(2.0, 0.25), 0, Elasticity::infinite());
    CHECK(r.theta.value() == Approx(2.5));
    CHECK(r.k == 0.0);
    CHECK(best_response(single(2.0, -1.25), 0, Elasticity::infinite()).theta.is_zero());
    CHECK(best_response(single(2.0, 3.0), 0, Elasticity::infinite()).theta.value() == Approx(8.0));
  }
  SECTION("zero rest") {
    CHECK(best_response(single(1.0, 1.5), 0, Elasticity::zero()).theta.is_infinite());
    CHECK_THROWS_AS(best_response(single(1.0, 1.0), 0, Elasticity::zero()), std::domain_error);
    CHECK_THROWS_AS(best_response(single(1.0, 0.2), 0, Elasticity::zero()), std::domain_error);
  }
}

TEST_CASE("response_value closed forms") {
  SECTION("zero submission") {
    Rng rng(5);
    const auto ex = prepare(testing::random_model(rng, 3, 2));
    for (std::size_t i = 0; i < 3; ++i) {
      const double rest = 1.7;
      const double expected = ex.u[i] + ex.self_var[i] / (2.0 * ex.delta[i]) -
                              ex.a[i].dot(ex.cov * ex.a_total) / rest;
      CHECK(response_value(ex, i, Elasticity::zero(), rest) ==
            Approx(expected).margin(1e-12 * (1.0 + std::abs(expected))));
    }
  }
  SECTION("flat when a_I = 0") {
    MarketModel m = testing::model_from_betas({1.0, 1.0}, {0.0, 0.0});
    m.traders[0].cov_endowment_securities[0] = 0.7;
    m.traders[1].cov_endowment_securities[0] = -0.7;
    m.traders[0].endowment_var = m.traders[1].endowment_var = 1.0;
    const auto ex = prepare(m);
    const double flat = ex.u[0] + ex.self_var[0] / 2.0;
    for (auto t : {Elasticity::zero(), Elasticity::finite(0.1), Elasticity::finite(40.0), Elasticity::infinite()})
      CHECK(response_value(ex, 0, t, 2.0) == Approx(flat));
    CHECK_THROWS_AS(best_response(ex, 0, Elasticity::finite(1.0)), std::domain_error);
  }
  SECTION("rejects nonpositive rest") {
    const auto ex = single(1.0, 0.5);
    CHECK_THROWS_AS(response_value(ex, 0, Elasticity::finite(1.0), 0.0), std::domain_error);
    CHECK_THROWS_AS(response_value(ex, 0, Elasticity::finite(1.0), -1.0), std::domain_error);
  }
  SECTION("value equals the post-trade certainty equivalent") {
    Rng rng(17);
    for (int rep = 0; rep < 200; ++rep) {
      const auto ex = prepare(testing::random_model(rng, rng.index(2, 5), rng.index(1, 3)));
      const std::size_t i = rng.index(0, ex.size() - 1);
      const double rest = rng.log_uniform(0.01, 100.0);
      const double theta = rng.log_uniform(0.01, 100.0);
      const double k = theta / (theta + rest);
      const Vector p = -(1.0 - k) * (ex.cov * ex.a_total) / rest;
      const Vector q = k * ex.a_total - ex.a[i];
      const double direct = post_trade_utility(ex, i, q, p);
      CHECK(response_value(ex, i, Elasticity::finite(theta), rest) ==
            Approx(direct).margin(1e-10 * (1.0 + std::abs(direct))));
    }
  }
}

TEST_CASE("one-security grid maximum sits at k = 1/2") {
  const auto ex = single(1.0, 0.5);
  double best_k = 0.0, best_v = -std::numeric_limits<double>::infinity();
  const int n = 1'000'000;
  for (int j = 0; j <= n; ++j) {
    const double k = static_cast<double>(j) / n;
    const double v = response_value_at_share(ex, 0, k, 1.0);
    if (v > best_v) {
      best_v = v;
      best_k = k;
    }
  }
  CHECK(best_k == Approx(0.5).margin(2.0 / n));
}

TEST_CASE("best response maximizes the response function") {
  Rng rng(23);
  for (int rep = 0; rep < 300; ++rep) {
    const double d = rng.log_uniform(0.1, 10.0);
    const double b = rng.uniform(-2.0, 4.0);
    const auto ex = single(d, b);
    const double rest = rng.log_uniform(0.01, 100.0);
    const auto r = best_response(ex, 0, Elasticity::finite(rest));

    // branch condition exactly as stated
    const bool interior = b > -1.0 && b < 1.0 + rest / d;
    CHECK((r.branch == ResponseBranch::interior) == interior);
    if (r.theta.is_finite() && !r.theta.is_zero())
      CHECK(r.k == Approx(r.theta.value() / (r.theta.value() + rest)).epsilon(1e-12));

    for (int j = 0; j <= 200; ++j) {
      const double k = j / 200.0;
      CHECK(response_value_at_share(ex, 0, k, rest) <= r.value + 1e-12 * (1.0 + std::abs(r.value)));
    }

    if (interior) {
      // higher elasticity than true demand iff the trader sheds market exposure
      CHECK((r.theta.value() > d) == (b > r.k));
    }
  }
}

TEST_CASE("one-sided equilibrium") {
  SECTION("beta = lambda does not trade") {
    const auto ex = prepare(testing::model_from_betas({1.0, 3.0}, {0.25, 0.75}));
    const auto r = one_sided_equilibrium(ex, 0);
    CHECK(r.response.k == Approx(0.25));
    CHECK(r.response.theta.value() == Approx(1.0));
    CHECK(r.cash_benefit == Approx(0.0).margin(1e-14));
  }
  SECTION("short exposure") {
    const auto ex = prepare(testing::model_from_betas({1.0, 1.0, 1.0}, {-1.2, 1.1, 1.1}));
    CHECK(one_sided_equilibrium(ex, 0).response.k == 0.0);
  }
  SECTION("hand example") {
    const auto ex = prepare(testing::model_from_betas({1.0, 1.0}, {1.0, 0.0}));
    CHECK(one_sided_equilibrium(ex, 0).response.k == Approx(2.0 / 3.0));
  }
  SECTION("extreme side") {
    const auto ex = prepare(testing::model_from_betas({1.0, 1.0}, {2.5, -1.5}));
    const auto r = one_sided_equilibrium(ex, 0);
    CHECK(r.response.k == 1.0);
    CHECK(r.response.theta.is_infinite());
  }
  SECTION("share and cash benefit on random models") {
    Rng rng(8);
    for (int rep = 0; rep < 300; ++rep) {
      const std::size_t n = rng.index(2, 5);
      const auto d = testing::random_deltas(rng, n);
      const auto b = testing::random_betas_at_most_one_high(rng, n);
      const auto ex = prepare(testing::random_model_with_betas(rng, d, b, rng.index(1, 3)));
      for (std::size_t i = 0; i < n; ++i) {
        const double l = ex.lambda[i], beta = ex.beta[i];
        const auto r = one_sided_equilibrium(ex, i);
        if (beta <= -1.0) {
          CHECK(r.response.k == 0.0);
        } else if (beta >= 1.0 / l) {
          CHECK(r.response.k == 1.0);
        } else {
          CHECK(r.response.k == Approx(l * (1.0 + beta) / (1.0 + l)).epsilon(1e-12));
          const double expected = ex.market_variance * l * (beta - l) * (beta - l) /
                                  (ex.delta_total * (1.0 + l) * (1.0 + l) * (1.0 - l));
          CHECK(r.cash_benefit == Approx(expected).margin(1e-10 * (1.0 + expected)));
          CHECK(r.cash_benefit >= -1e-12);
          // lambda < beta iff lambda < k^r < beta
          const bool above = l < beta;
          const bool between = l < r.response.k && r.response.k < beta;
          if (std::abs(beta - l) > 1e-9) CHECK(above == between);
        }
      }
    }
  }
}
