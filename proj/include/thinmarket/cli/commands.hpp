#pragma once

#include "../analysis.hpp"
#include "../competitive.hpp"
#include "../market.hpp"
#include "../nash.hpp"
#include "../validation.hpp"
#include "scenario.hpp"

#include <cmath>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace thinmarket::cli {

/// Process exit codes; stable contract of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kInvalidModel = 2,
  kUnsupportedRegime = 3,
  kValidationFailed = 4,
};

namespace detail {

inline json elasticity_json(const Elasticity& e) {
  if (e.is_infinite()) return "inf";
  return e.value();
}

inline json vectors_json(const std::vector<Vector>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(to_array(v));
  return a;
}

inline json outcome_json(const EquilibriumOutcome& out) {
  json j;
  j["prices"] = to_array(out.prices);
  j["allocations"] = vectors_json(out.allocations);
  j["post_beta"] = out.post_beta_defined ? json(out.post_beta) : json(nullptr);
  j["utilities"] = out.utilities;
  j["premium"] = out.premium;
  return j;
}

inline json nash_json(const NashSolution& s) {
  json j;
  j["kind"] = to_string(s.kind);
  if (!s.note.empty()) j["note"] = s.note;
  if (s.kind == NashKind::unsupported_regime) return j;
  json thetas = json::array();
  for (const auto& t : s.elasticities) thetas.push_back(elasticity_json(t));
  j["elasticities"] = thetas;
  j["theta_total"] = elasticity_json(s.theta_total);
  j["k_shares"] = s.k_shares;
  j["residuals"] = s.residuals;
  j["fixed_point_gap"] = s.fixed_point_gap;
  if (s.risk_neutral_trader) j["risk_neutral_trader"] = *s.risk_neutral_trader;
  if (s.outcome) j.update(outcome_json(*s.outcome));
  return j;
}

}  // namespace detail

struct AnalyzeResult {
  json report;
  int exit_code = kOk;
};

/// Full equilibrium report for one model. Never throws for model-level
/// problems: invalid models and unsupported regimes are reported in the document.
inline AnalyzeResult analyze_model(const MarketModel& model, const SolveOptions& opts = {}) {
  AnalyzeResult r;
  json& doc = r.report;
  doc["schema_version"] = kSchemaVersion;
  doc["scenario"] = scenario_to_json(model);

  const auto verdict = validate_model(model);
  if (!verdict.ok()) {
    doc["status"] = "invalid_model";
    doc["violations"] = verdict.violations;
    r.exit_code = kInvalidModel;
    return r;
  }

  const auto ex = derive_exposures(model);
  json& e = doc["exposures"];
  e["a"] = detail::vectors_json(ex.a);
  e["a_total"] = detail::to_array(ex.a_total);
  e["beta"] = ex.is_trivial ? json(nullptr) : json(ex.beta);
  e["lambda"] = ex.lambda;
  e["delta_total"] = ex.delta_total;
  e["autarky_utility"] = ex.u;
  e["market_variance"] = ex.market_variance;
  e["trivial"] = ex.is_trivial;

  const auto comp = competitive_equilibrium(ex);
  doc["competitive"] = detail::outcome_json(comp);

  const auto nash = solve(ex, opts);
  doc["nash"] = detail::nash_json(nash);
  if (nash.kind == NashKind::unsupported_regime) {
    doc["status"] = "unsupported_regime";
    r.exit_code = kUnsupportedRegime;
    return r;
  }

  const auto cmp = compare(ex, comp, nash);
  json& c = doc["comparison"];
  c["du"] = cmp.du;
  c["inefficiency"] = cmp.inefficiency;
  c["premium_competitive"] = cmp.premium_competitive;
  c["premium_nash"] = cmp.premium_nash;
  c["payoff_gain_competitive"] = cmp.payoff_gain_competitive;
  c["payoff_gain_nash"] = cmp.payoff_gain_nash;
  if (cmp.L) c["L"] = *cmp.L;
  if (ex.size() == 2 && !ex.is_trivial) c["risk_neutral_limit_du0"] = risk_neutral_limit_du(ex);

  if (model.total_endowment_var && !ex.is_trivial && effective_traders(ex).size() == 2) {
    const auto inc = incompleteness_effect(model, opts);
    json& i = doc["incompleteness"];
    i["hedgeable_variance"] = inc.hedgeable_variance;
    i["total_variance"] = inc.total_variance;
    i["du_incomplete"] = inc.du_incomplete;
    i["du_complete"] = inc.du_complete;
    i["du_gap"] = inc.du_gap;
    i["competitive_gain_incomplete"] = inc.competitive_gain_incomplete;
    i["competitive_gain_complete"] = inc.competitive_gain_complete;
    i["competitive_gain_gap"] = inc.competitive_gain_gap;
    i["inefficiency_incomplete"] = inc.inefficiency_incomplete;
    i["inefficiency_complete"] = inc.inefficiency_complete;
  }
  doc["status"] = "ok";
  return r;
}

inline int cmd_analyze(const std::string& scenario_path, const std::string& out_path,
                       std::ostream& err = std::cerr, const SolveOptions& opts = {}) {
  try {
    const auto model = load_scenario(scenario_path);
    const auto result = analyze_model(model, opts);
    write_text(out_path, result.report.dump(2) + "\n");
    if (result.exit_code == kInvalidModel) {
      err << "invalid model:\n";
      for (const auto& v : result.report["violations"]) err << "  - " << v.get<std::string>() << "\n";
    } else if (result.exit_code == kUnsupportedRegime) {
      err << "unsupported regime: " << result.report["nash"]["note"].get<std::string>() << "\n";
    }
    return result.exit_code;
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

// ---------------------------------------------------------------------------
// sweep

/// Which scalar of the scenario a sweep varies: a trader's delta or one
/// component of its cov_es vector. Text forms "2:delta" and "1:cov_es:0".
struct SweepParameter {
  std::size_t trader = 0;
  std::optional<std::size_t> cov_component;  // empty: delta

  static SweepParameter parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    auto index = [&](const std::string& s) -> std::size_t {
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw ScenarioError("--param: '" + s + "' is not a nonnegative index");
      return std::stoul(s);
    };
    SweepParameter p;
    if (parts.size() == 2 && parts[1] == "delta") {
      p.trader = index(parts[0]);
    } else if (parts.size() == 3 && parts[1] == "cov_es") {
      p.trader = index(parts[0]);
      p.cov_component = index(parts[2]);
    } else {
      throw ScenarioError("--param must look like '<trader>:delta' or '<trader>:cov_es:<k>', got '" +
                          text + "'");
    }
    return p;
  }

  MarketModel apply(MarketModel model, double value) const {
    if (trader >= model.traders.size())
      throw ScenarioError("--param: trader index " + std::to_string(trader) + " out of range");
    auto& t = model.traders[trader];
    if (!cov_component) {
      t.delta = value;
    } else {
      if (*cov_component >= static_cast<std::size_t>(t.cov_endowment_securities.size()))
        throw ScenarioError("--param: cov_es component out of range");
      t.cov_endowment_securities[static_cast<Eigen::Index>(*cov_component)] = value;
    }
    return model;
  }
};

/// Grid forms: "v1,v2,...", "lin:a:b:n", "log:a:b:n" (n points, inclusive ends).
inline std::vector<double> parse_grid(const std::string& text) {
  auto number = [](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ScenarioError("--grid: '" + s + "' is not a number");
    return v;
  };
  std::vector<std::string> parts;
  const bool ranged = text.rfind("lin:", 0) == 0 || text.rfind("log:", 0) == 0;
  std::stringstream ss(ranged ? text.substr(4) : text);
  for (std::string part; std::getline(ss, part, ranged ? ':' : ',');) parts.push_back(part);

  std::vector<double> grid;
  if (!ranged) {
    for (const auto& p : parts) grid.push_back(number(p));
  } else {
    if (parts.size() != 3) throw ScenarioError("--grid: range form is '<lin|log>:start:stop:count'");
    const double a = number(parts[0]), b = number(parts[1]);
    const double count = number(parts[2]);
    if (count < 1 || count != std::floor(count)) throw ScenarioError("--grid: count must be a positive integer");
    const bool log_scale = text[1] == 'o';
    if (log_scale && !(a > 0.0 && b > 0.0)) throw ScenarioError("--grid: log range needs positive ends");
    const auto n = static_cast<std::size_t>(count);
    for (std::size_t j = 0; j < n; ++j) {
      const double t = n == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(n - 1);
      grid.push_back(log_scale ? std::exp(std::log(a) + t * (std::log(b) - std::log(a))) : a + t * (b - a));
    }
  }
  if (grid.empty()) throw ScenarioError("--grid is empty");
  return grid;
}

/// One CSV row per grid point: value, kind, theta_i, k_i, p_k, DU_i, inefficiency.
inline std::string sweep_csv(const MarketModel& base, const SweepParameter& param,
                             const std::vector<double>& grid, const SolveOptions& opts = {}) {
  const std::size_t n = base.trader_count();
  const std::size_t k = base.security_count();
  std::ostringstream csv;
  csv << "value,kind";
  for (std::size_t i = 0; i < n; ++i) csv << ",theta_" << i;
  for (std::size_t i = 0; i < n; ++i) csv << ",k_" << i;
  for (std::size_t j = 0; j < k; ++j) csv << ",p_" << j;
  for (std::size_t i = 0; i < n; ++i) csv << ",du_" << i;
  csv << ",inefficiency\n";
  const std::size_t data_columns = 3 * n + k + 1;

  for (double value : grid) {
    csv << format_number(value);
    const auto model = param.apply(base, value);
    std::string kind;
    std::ostringstream cells;
    try {
      if (!validate_model(model).ok()) {
        kind = "invalid_model";
      } else {
        const auto ex = derive_exposures(model);
        const auto nash = solve(ex, opts);
        kind = to_string(nash.kind);
        if (nash.kind != NashKind::unsupported_regime) {
          const auto cmp = compare(ex, competitive_equilibrium(ex), nash);
          for (const auto& t : nash.elasticities) cells << ',' << (t.is_infinite() ? "inf" : format_number(t.value()));
          for (double s : nash.k_shares) cells << ',' << format_number(s);
          for (Eigen::Index j = 0; j < nash.outcome->prices.size(); ++j)
            cells << ',' << format_number(nash.outcome->prices[j]);
          for (double d : cmp.du) cells << ',' << format_number(d);
          cells << ',' << format_number(cmp.inefficiency);
        }
      }
    } catch (const std::exception&) {
      kind = "error";
      cells.str("");
    }
    csv << ',' << kind;
    if (cells.str().empty())
      csv << std::string(data_columns, ',');
    else
      csv << cells.str();
    csv << '\n';
  }
  return csv.str();
}

inline int cmd_sweep(const std::string& scenario_path, const std::string& param_text,
                     const std::string& grid_text, const std::string& out_path,
                     std::ostream& err = std::cerr) {
  try {
    const auto model = load_scenario(scenario_path);
    const auto param = SweepParameter::parse(param_text);
    const auto grid = parse_grid(grid_text);
    param.apply(model, grid.front());  // range-check the parameter up front
    write_text(out_path, sweep_csv(model, param, grid));
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

// ---------------------------------------------------------------------------
// validate

namespace validate_tolerance {
inline constexpr double fixed_point = 1e-8;   // relative
inline constexpr double grid_share = 1e-6;    // absolute, on k
inline constexpr double iteration = 1e-7;     // relative
inline constexpr double mc_standard_errors = 4.0;
}  // namespace validate_tolerance

struct CheckRow {
  std::string name;
  std::string status;  // pass, fail, skip
  std::string detail;
};

struct ValidationRun {
  std::vector<CheckRow> rows;
  int exit_code = kOk;
};

/// Runs every oracle against one model. `tol_override`, when set, replaces
/// the solver's root tolerance and disables its internal self-check.
inline ValidationRun run_validation(const MarketModel& model, std::uint64_t samples,
                                    std::uint64_t seed, std::optional<double> tol_override = {}) {
  ValidationRun run;
  auto add = [&](std::string name, bool pass, std::string detail) {
    run.rows.push_back({std::move(name), pass ? "pass" : "fail", std::move(detail)});
  };
  auto skip = [&](std::string name, std::string detail) {
    run.rows.push_back({std::move(name), "skip", std::move(detail)});
  };

  const auto verdict = validate_model(model);
  if (!verdict.ok()) {
    for (const auto& v : verdict.violations) run.rows.push_back({"model", "fail", v});
    run.exit_code = kInvalidModel;
    return run;
  }
  const auto ex = derive_exposures(model);
  SolveOptions opts;
  if (tol_override) {
    opts.root_tolerance = *tol_override;
    opts.verify = false;
  }
  const auto nash = solve(ex, opts);
  if (nash.kind == NashKind::unsupported_regime) {
    skip("solve", nash.note);
    run.exit_code = kUnsupportedRegime;
    return run;
  }
  const auto comp = competitive_equilibrium(ex);

  if (ex.is_trivial) {
    skip("best_response_oracles", "flat response: a_I = 0, every elasticity is optimal");
  } else {
    const double gap = fixed_point_gap(ex, nash.elasticities);
    add("fixed_point", gap <= validate_tolerance::fixed_point, "max relative gap " + format_number(gap));

    for (std::size_t i = 0; i < ex.size(); ++i) {
      const std::string name = "grid_best_response[" + std::to_string(i) + "]";
      const auto rest = total_except(nash.elasticities, i);
      if (!rest.is_finite()) {
        skip(name, "aggregate elasticity of the others is " + to_string(rest));
        continue;
      }
      const auto grid = validation::grid_best_response_share(ex, i, rest.value());
      const double k = nash.elasticities[i].is_infinite()
                           ? 1.0
                           : nash.elasticities[i].value() / (nash.elasticities[i].value() + rest.value());
      const double diff = std::abs(grid.k - k);
      add(name, diff <= validate_tolerance::grid_share, "|k_grid - k| = " + format_number(diff));
    }

    ElasticityVector start;
    for (double d : ex.delta) start.push_back(Elasticity::finite(d));
    const auto trace = validation::iterate_best_responses(ex, start);
    if (!trace.converged) {
      skip("iteration_oracle", trace.failure.empty() ? "damped iteration did not converge" : trace.failure);
    } else {
      const auto& limit = trace.iterates.back();
      double worst = 0.0;
      for (std::size_t i = 0; i < ex.size(); ++i) {
        if (limit[i].tag() != nash.elasticities[i].tag()) {
          worst = std::numeric_limits<double>::infinity();
        } else if (limit[i].is_finite()) {
          const double a = limit[i].value(), b = nash.elasticities[i].value();
          worst = std::max(worst, std::abs(a - b) / std::max(a, b));
        }
      }
      add("iteration_oracle", worst <= validate_tolerance::iteration,
          "max relative deviation " + format_number(worst) + " after " +
              std::to_string(trace.iterates.size() - 1) + " iterations");
    }
  }

  const validation::McConfig base{samples, seed};
  auto mc_check = [&](const std::string& label, const EquilibriumOutcome& out, std::size_t i,
                      std::uint64_t stream) {
    const auto m = post_trade_moments(ex, i, out.allocations[i], out.prices);
    const double exact = certainty_equivalent(m.mean, m.variance, ex.delta[i]);
    const auto est = validation::mc_certainty_equivalent(m.mean, m.variance, ex.delta[i],
                                                         {base.sample_count, base.seed + stream});
    const double err = std::abs(est.estimate - exact);
    const bool pass = !est.unreliable && err <= validate_tolerance::mc_standard_errors * est.standard_error +
                                                    1e-12 * (1.0 + std::abs(exact));
    add(label + "[" + std::to_string(i) + "]", pass,
        "|mc - exact| = " + format_number(err) + ", se = " + format_number(est.standard_error));
  };
  for (std::size_t i = 0; i < ex.size(); ++i) {
    mc_check("mc_ce_competitive", comp, i, 2 * i);
    mc_check("mc_ce_nash", *nash.outcome, i, 2 * i + 1);
  }

  for (const auto& row : run.rows)
    if (row.status == "fail") run.exit_code = kValidationFailed;
  return run;
}

inline void print_table(const ValidationRun& run, std::ostream& out) {
  std::size_t width = 5;
  for (const auto& r : run.rows) width = std::max(width, r.name.size());
  for (const auto& r : run.rows) {
    out << r.name << std::string(width - r.name.size() + 2, ' ') << r.status
        << std::string(6 - r.status.size(), ' ') << r.detail << "\n";
  }
}

inline int cmd_validate(const std::string& scenario_path, std::uint64_t samples, std::uint64_t seed,
                        std::optional<double> tol_override = {}, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  try {
    const auto model = load_scenario(scenario_path);
    const auto run = run_validation(model, samples, seed, tol_override);
    print_table(run, out);
    if (run.exit_code == kValidationFailed) {
      for (const auto& r : run.rows)
        if (r.status == "fail") err << "failed check: " << r.name << "\n";
    }
    return run.exit_code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace thinmarket::cli
