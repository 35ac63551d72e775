#include <doctest.h>

#include <fstream>
#include <random>

#include "soc/registry.hpp"
#include "soc/registry_data.hpp"
#include "support.hpp"

using namespace soc;

TEST_CASE("default registry validates and has the expected shape") {
  const auto reg = default_cvs_registry();
  CHECK(validate_registry(reg).empty());
  REQUIRE(reg.criteria.size() == 3);
  for (const auto& c : reg.criteria) {
    CHECK(c.checks.size() == 5);
    CHECK(c.decision_threshold == 0.5);
    bool has_obstruction = false;
    std::set<CheckCategory> cats;
    for (const auto& ch : c.checks) {
      cats.insert(ch.category);
      if (ch.question.find("instrument obstruction") != std::string::npos)
        has_obstruction = true;
    }
    CHECK(has_obstruction);
    CHECK(cats.size() == 4);
  }
}

TEST_CASE("default registry C2 covers liver parenchyma and exposure") {
  const auto reg = default_cvs_registry();
  const Criterion* c2 = reg.find(2);
  REQUIRE(c2 != nullptr);
  bool parenchyma = false, exposure = false;
  for (const auto& ch : c2->checks) {
    if (ch.question.find("liver parenchyma") != std::string::npos)
      parenchyma = true;
    if (ch.question.find("exposure") != std::string::npos &&
        ch.question.find("ufficient") != std::string::npos)
      exposure = true;
  }
  CHECK(parenchyma);
  CHECK(exposure);
}

TEST_CASE("load_registry round-trips the shipped asset") {
  const auto shipped =
      load_registry(std::filesystem::path(SOC_SOURCE_DIR) / "data" /
                    "cvs_registry.json");
  CHECK(shipped == default_cvs_registry());

  const auto dir = soctest::make_temp_dir("soc_reg");
  save_registry(shipped, dir / "copy.json");
  CHECK(load_registry(dir / "copy.json") == shipped);
}

TEST_CASE("load_registry error paths") {
  CHECK_THROWS_AS(load_registry("/nonexistent/registry.json"),
                  FileMissingError);
  const auto dir = soctest::make_temp_dir("soc_reg");
  std::ofstream(dir / "empty.json").close();
  CHECK_THROWS_AS(load_registry(dir / "empty.json"), MalformedDocumentError);
  std::ofstream(dir / "nofields.json") << "{\"version\": \"x\"}";
  CHECK_THROWS_AS(load_registry(dir / "nofields.json"),
                  MalformedDocumentError);
}

TEST_CASE("uniform five-check criterion loads with weights 0.2") {
  auto reg = default_cvs_registry();
  const auto dir = soctest::make_temp_dir("soc_reg");
  save_registry(reg, dir / "reg.json");
  const auto loaded = load_registry(dir / "reg.json");
  for (const auto& ch : loaded.find(2)->checks) CHECK(ch.weight == 0.2);
}

TEST_CASE("validate_registry reports violations as data") {
  auto reg = default_cvs_registry();
  SUBCASE("bad weight sum") {
    reg.criteria[0].checks.resize(2);
    reg.criteria[0].checks[0].weight = 0.5;
    reg.criteria[0].checks[1].weight = 0.4;
    const auto report = validate_registry(reg);
    REQUIRE(report.size() == 1);
    CHECK(report[0].find("weights sum to 0.9") != std::string::npos);
  }
  SUBCASE("negative weight") {
    reg.criteria[1].checks[0].weight = -0.1;
    reg.criteria[1].checks[1].weight = 0.5;
    const auto report = validate_registry(reg);
    CHECK(!report.empty());
    bool negative = false;
    for (const auto& r : report)
      if (r.find("negative weight") != std::string::npos) negative = true;
    CHECK(negative);
  }
  SUBCASE("duplicate ids and empty question") {
    reg.criteria[0].checks[1].check_id = reg.criteria[0].checks[0].check_id;
    reg.criteria[2].checks[0].question = "";
    reg.criteria[1].criterion_id = 1;
    const auto report = validate_registry(reg);
    CHECK(report.size() >= 3);
  }
}

TEST_CASE("fuzzed registries: the simplex invariant decides validity") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> m_dist(1, 8);
  std::uniform_real_distribution<double> w_dist(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Criterion c;
    c.criterion_id = 1;
    c.title = "t";
    c.statement = "s";
    const int m = m_dist(rng);
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
      Check ch{"c" + std::to_string(j), "q" + std::to_string(j),
               CheckCategory::anatomical_visibility, w_dist(rng)};
      sum += ch.weight;
      c.checks.push_back(std::move(ch));
    }
    const bool normalize = trial % 2 == 0;
    if (normalize)
      for (auto& ch : c.checks) ch.weight /= sum;
    CheckRegistry reg{"fuzz", {c}};
    const auto report = validate_registry(reg);
    double total = 0.0;
    for (const auto& ch : c.checks) total += ch.weight;
    if (std::abs(total - 1.0) <= kWeightSumTolerance)
      CHECK(report.empty());
    else
      CHECK(!report.empty());
    // Purity: same input, same report.
    CHECK(validate_registry(reg) == report);
  }
}
