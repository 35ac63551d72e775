#pragma once

/**
 * @file registry.hpp
 * @brief Check registry: criteria, their weighted verification checks, and
 *        structural validation.
 */

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "soc/errors.hpp"

namespace soc {

inline constexpr double kWeightSumTolerance = 1e-9;

enum class CheckCategory {
  anatomical_visibility,
  spatial_configuration,
  ambiguity_exclusion,
  occlusion_control,
};

inline const char* to_string(CheckCategory c) {
  switch (c) {
    case CheckCategory::anatomical_visibility: return "anatomical-visibility";
    case CheckCategory::spatial_configuration: return "spatial-configuration";
    case CheckCategory::ambiguity_exclusion: return "ambiguity-exclusion";
    case CheckCategory::occlusion_control: return "occlusion-control";
  }
  return "?";
}

inline bool category_from_string(const std::string& s, CheckCategory& out) {
  if (s == "anatomical-visibility") out = CheckCategory::anatomical_visibility;
  else if (s == "spatial-configuration") out = CheckCategory::spatial_configuration;
  else if (s == "ambiguity-exclusion") out = CheckCategory::ambiguity_exclusion;
  else if (s == "occlusion-control") out = CheckCategory::occlusion_control;
  else return false;
  return true;
}

struct Check {
  std::string check_id;
  std::string question;
  CheckCategory category = CheckCategory::anatomical_visibility;
  double weight = 0.0;

  bool operator==(const Check&) const = default;
};

struct Criterion {
  int criterion_id = 0;
  std::string title;
  std::string statement;
  std::vector<Check> checks;
  double decision_threshold = 0.5;

  bool operator==(const Criterion&) const = default;
};

struct CheckRegistry {
  std::string version;
  std::vector<Criterion> criteria;

  bool operator==(const CheckRegistry&) const = default;

  const Criterion* find(int criterion_id) const {
    for (const auto& c : criteria)
      if (c.criterion_id == criterion_id) return &c;
    return nullptr;
  }
};

namespace detail {

inline Check check_from_json(const nlohmann::json& j, const std::string& where) {
  Check c;
  try {
    c.check_id = j.at("check_id").get<std::string>();
    c.question = j.at("question").get<std::string>();
    c.weight = j.at("weight").get<double>();
    const auto cat = j.at("category").get<std::string>();
    if (!category_from_string(cat, c.category))
      throw MalformedDocumentError(where + ": unknown category '" + cat + "'");
  } catch (const nlohmann::json::exception& e) {
    throw MalformedDocumentError(where + ": " + e.what());
  }
  return c;
}

}  // namespace detail

inline nlohmann::json to_json(const Check& c) {
  return {{"check_id", c.check_id},
          {"question", c.question},
          {"category", to_string(c.category)},
          {"weight", c.weight}};
}

inline nlohmann::json to_json(const Criterion& c) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& ch : c.checks) checks.push_back(to_json(ch));
  return {{"criterion_id", c.criterion_id},
          {"title", c.title},
          {"statement", c.statement},
          {"decision_threshold", c.decision_threshold},
          {"checks", std::move(checks)}};
}

inline nlohmann::json to_json(const CheckRegistry& r) {
  nlohmann::json criteria = nlohmann::json::array();
  for (const auto& c : r.criteria) criteria.push_back(to_json(c));
  return {{"version", r.version}, {"criteria", std::move(criteria)}};
}

inline CheckRegistry registry_from_json(const nlohmann::json& j) {
  CheckRegistry reg;
  try {
    reg.version = j.at("version").get<std::string>();
    int ci = 0;
    for (const auto& cj : j.at("criteria")) {
      const std::string where = "criteria[" + std::to_string(ci) + "]";
      Criterion c;
      c.criterion_id = cj.at("criterion_id").get<int>();
      c.title = cj.at("title").get<std::string>();
      c.statement = cj.at("statement").get<std::string>();
      c.decision_threshold = cj.value("decision_threshold", 0.5);
      int ki = 0;
      for (const auto& kj : cj.at("checks")) {
        c.checks.push_back(detail::check_from_json(
            kj, where + ".checks[" + std::to_string(ki) + "]"));
        ++ki;
      }
      reg.criteria.push_back(std::move(c));
      ++ci;
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedDocumentError(std::string("registry: ") + e.what());
  }
  return reg;
}

/// Parses a registry file. Structural parse only; semantic invariants are
/// checked by validate_registry.
inline CheckRegistry load_registry(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileMissingError(path.string());
  std::ifstream in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocumentError(path.string() + ": " + e.what());
  }
  return registry_from_json(j);
}

inline void save_registry(const CheckRegistry& reg,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  out << to_json(reg).dump(2) << "\n";
}

/// Every violated invariant, one message each. Empty report = valid.
inline std::vector<std::string> validate_registry(const CheckRegistry& reg) {
  std::vector<std::string> report;
  std::set<int> ids;
  for (const auto& c : reg.criteria) {
    const std::string tag = "criterion " + std::to_string(c.criterion_id);
    if (!ids.insert(c.criterion_id).second)
      report.push_back("duplicate criterion_id " + std::to_string(c.criterion_id));
    if (c.checks.empty()) report.push_back(tag + ": no checks");
    if (!(c.decision_threshold > 0.0 && c.decision_threshold < 1.0))
      report.push_back(tag + ": decision_threshold " +
                       std::to_string(c.decision_threshold) + " outside (0,1)");
    double sum = 0.0;
    std::set<std::string> check_ids;
    for (const auto& ch : c.checks) {
      if (ch.question.empty())
        report.push_back(tag + ": check " + ch.check_id + " has empty question");
      if (ch.weight < 0.0)
        report.push_back(tag + ": check " + ch.check_id + " has negative weight " +
                         std::to_string(ch.weight));
      if (!check_ids.insert(ch.check_id).second)
        report.push_back(tag + ": duplicate check_id " + ch.check_id);
      sum += ch.weight;
    }
    if (!c.checks.empty() && std::abs(sum - 1.0) > kWeightSumTolerance) {
      std::ostringstream os;
      os << tag << ": weights sum to " << sum << " != 1";
      report.push_back(os.str());
    }
  }
  return report;
}

}  // namespace soc
