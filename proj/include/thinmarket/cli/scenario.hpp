#pragma once

#include "../market.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace thinmarket::cli {

using nlohmann::json;

inline constexpr const char* kSchemaVersion = "1.0";

/// Malformed or unreadable scenario; the message names the offending field.
class ScenarioError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double number_at(const json& j, const std::string& field) {
  if (!j.is_number()) throw ScenarioError("field '" + field + "' must be a number");
  return j.get<double>();
}

inline const json& member(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ScenarioError("missing field '" + path + key + "'");
  return *it;
}

inline Vector number_array(const json& j, const std::string& field) {
  if (!j.is_array()) throw ScenarioError("field '" + field + "' must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = number_at(j[i], field + "[" + std::to_string(i) + "]");
  return v;
}

inline json to_array(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace detail

inline MarketModel parse_scenario(const json& root) {
  using detail::member;
  if (!root.is_object()) throw ScenarioError("scenario root must be an object");

  const json& version = member(root, "schema_version", "");
  if (!version.is_string() || version.get<std::string>() != kSchemaVersion)
    throw ScenarioError(std::string("field 'schema_version' must be \"") + kSchemaVersion + "\"");

  MarketModel model;
  const json& cov = member(root, "securities_cov", "");
  if (!cov.is_array() || cov.empty())
    throw ScenarioError("field 'securities_cov' must be a non-empty array of rows");
  const std::size_t k = cov.size();
  model.securities_cov.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < k; ++r) {
    const std::string field = "securities_cov[" + std::to_string(r) + "]";
    if (!cov[r].is_array() || cov[r].size() != k)
      throw ScenarioError("field '" + field + "' must be a row of " + std::to_string(k) + " numbers");
    model.securities_cov.row(static_cast<Eigen::Index>(r)) = detail::number_array(cov[r], field).transpose();
  }

  const json& traders = member(root, "traders", "");
  if (!traders.is_array()) throw ScenarioError("field 'traders' must be an array");
  for (std::size_t i = 0; i < traders.size(); ++i) {
    const std::string path = "traders[" + std::to_string(i) + "].";
    const json& t = traders[i];
    if (!t.is_object()) throw ScenarioError("field 'traders[" + std::to_string(i) + "]' must be an object");
    TraderProfile p;
    p.delta = detail::number_at(member(t, "delta", path), path + "delta");
    p.cov_endowment_securities = detail::number_array(member(t, "cov_es", path), path + "cov_es");
    if (static_cast<std::size_t>(p.cov_endowment_securities.size()) != k)
      throw ScenarioError("field '" + path + "cov_es' must have " + std::to_string(k) + " entries");
    p.endowment_mean = detail::number_at(member(t, "endowment_mean", path), path + "endowment_mean");
    p.endowment_var = detail::number_at(member(t, "endowment_var", path), path + "endowment_var");
    model.traders.push_back(std::move(p));
  }

  if (auto it = root.find("total_endowment_var"); it != root.end() && !it->is_null())
    model.total_endowment_var = detail::number_at(*it, "total_endowment_var");
  return model;
}

inline MarketModel parse_scenario_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return parse_scenario(root);
}

inline MarketModel load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot read scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

/// Canonical form: keys sorted, doubles printed with round-trip precision.
inline json scenario_to_json(const MarketModel& model) {
  json root;
  root["schema_version"] = kSchemaVersion;
  json cov = json::array();
  for (Eigen::Index r = 0; r < model.securities_cov.rows(); ++r)
    cov.push_back(detail::to_array(model.securities_cov.row(r).transpose()));
  root["securities_cov"] = cov;
  json traders = json::array();
  for (const auto& t : model.traders) {
    traders.push_back({{"delta", t.delta},
                       {"cov_es", detail::to_array(t.cov_endowment_securities)},
                       {"endowment_mean", t.endowment_mean},
                       {"endowment_var", t.endowment_var}});
  }
  root["traders"] = traders;
  if (model.total_endowment_var) root["total_endowment_var"] = *model.total_endowment_var;
  return root;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ScenarioError("cannot write output file '" + path + "'");
  out << text;
  if (!out) throw ScenarioError("failed writing output file '" + path + "'");
}

/// 17 significant digits, which reads back as the identical double.
inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace thinmarket::cli
