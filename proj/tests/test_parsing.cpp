#include <doctest.h>

#include <random>

#include "soc/parsing.hpp"
#include "soc/registry_data.hpp"

using namespace soc;

namespace {

std::vector<Check> c2_checks() {
  return default_cvs_registry().find(2)->checks;
}

}  // namespace

TEST_CASE("binarization rule is exhaustive over the verdict domain") {
  CHECK(binarize(Verdict::yes) == 1);
  CHECK(binarize(Verdict::no) == 0);
  CHECK(binarize(Verdict::uncertain) == 0);
  CHECK(binarize(Verdict::unparseable) == 0);
}

TEST_CASE("parse_check_verdicts on well-formed lines") {
  const auto checks = c2_checks();
  const std::string text =
      "c2_1: yes - liver parenchyma clearly visible\n"
      "c2_2: yes - borders defined\n"
      "c2_3: uncertain - tissue plane ambiguous\n"
      "c2_4: no - view partly off target\n"
      "c2_5: yes - no instruments in view\n";
  const auto verdicts = parse_check_verdicts(text, checks);
  REQUIRE(verdicts.size() == 5);
  CHECK(verdicts[0].verdict == Verdict::yes);
  CHECK(verdicts[0].binary == 1);
  CHECK(verdicts[0].justification == "liver parenchyma clearly visible");
  CHECK(verdicts[2].verdict == Verdict::uncertain);
  CHECK(verdicts[2].binary == 0);
  CHECK(verdicts[3].binary == 0);
}

TEST_CASE("missing lines yield unparseable with binary 0") {
  const auto checks = c2_checks();
  ParseFailureLog log;
  const auto verdicts = parse_check_verdicts(
      "c2_1: yes - visible\nc2_2: no - not dissected\n", checks,
      default_synonyms(), &log, "ctx");
  REQUIRE(verdicts.size() == 5);
  CHECK(verdicts[4].check_id == "c2_5");
  CHECK(verdicts[4].verdict == Verdict::unparseable);
  CHECK(verdicts[4].binary == 0);
  CHECK(verdicts[4].justification.empty());
  CHECK(log.entries().size() == 3);
}

TEST_CASE("tolerant grammar: bullets, numbering, case, synonyms, em dash") {
  const auto checks = c2_checks();
  const std::string text =
      "Here is my assessment:\n"
      "1. C2_1: Satisfied \xE2\x80\x94 parenchyma visible\n"
      "- c2_2: TRUE, borders are clean\n"
      "* c2_3: cannot determine: too much glare\n"
      "2) c2_4: Absent - scope is off target\n"
      "c2_5 : not satisfied ; grasper crosses the triangle\n";
  const auto verdicts = parse_check_verdicts(text, checks);
  CHECK(verdicts[0].verdict == Verdict::yes);
  CHECK(verdicts[1].verdict == Verdict::yes);
  CHECK(verdicts[2].verdict == Verdict::uncertain);
  CHECK(verdicts[3].verdict == Verdict::no);
  CHECK(verdicts[4].verdict == Verdict::no);
  CHECK(verdicts[0].justification == "parenchyma visible");
}

TEST_CASE("parse_check_verdicts is total over arbitrary text") {
  const auto checks = c2_checks();
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> len(0, 400);
  std::uniform_int_distribution<int> chr(0, 96);
  for (int trial = 0; trial < 100; ++trial) {
    std::string garbage;
    const int n = len(rng);
    for (int i = 0; i < n; ++i)
      garbage.push_back(static_cast<char>(' ' + chr(rng)));
    const auto verdicts = parse_check_verdicts(garbage, checks);
    CHECK(verdicts.size() == checks.size());
    for (const auto& v : verdicts) CHECK((v.binary == 0 || v.binary == 1));
  }
}

TEST_CASE("parse_scalar_judgment") {
  SUBCASE("verdict plus confidence") {
    const auto s = parse_scalar_judgment("verdict: yes, confidence: 0.8");
    CHECK(s.verdict == Verdict::yes);
    CHECK(s.confidence == doctest::Approx(0.8));
  }
  SUBCASE("bare no defaults to 0.0") {
    const auto s = parse_scalar_judgment("No.");
    CHECK(s.verdict == Verdict::no);
    CHECK(s.confidence == 0.0);
  }
  SUBCASE("bare yes defaults to 1.0") {
    const auto s = parse_scalar_judgment("Yes, it is satisfied.");
    CHECK(s.verdict == Verdict::yes);
    CHECK(s.confidence == 1.0);
  }
  SUBCASE("confidence above 1 clamps") {
    const auto s = parse_scalar_judgment("verdict: yes, confidence: 1.7");
    CHECK(s.confidence == 1.0);
  }
  SUBCASE("nothing parseable") {
    ParseFailureLog log;
    const auto s = parse_scalar_judgment("???", default_synonyms(), &log, "x");
    CHECK(s.verdict == Verdict::unparseable);
    CHECK(s.confidence == 0.0);
    CHECK(log.entries().size() == 1);
  }
  SUBCASE("reasoning before the final line") {
    const auto s = parse_scalar_judgment(
        "The triangle shows 2 structures. Overall the evidence is weak.\n"
        "verdict: no, confidence: 0.2\n");
    CHECK(s.verdict == Verdict::no);
    CHECK(s.confidence == doctest::Approx(0.2));
  }
}

TEST_CASE("parse_agg_score") {
  CHECK(parse_agg_score("final score: 0.6") == doctest::Approx(0.6));
  CHECK(parse_agg_score("0.45 because two checks failed") ==
        doctest::Approx(0.45));
  SUBCASE("unparseable logs and returns 0") {
    ParseFailureLog log;
    CHECK(parse_agg_score("cannot determine", &log, "ctx") == 0.0);
    CHECK(log.entries().size() == 1);
  }
  SUBCASE("clamping") {
    CHECK(parse_agg_score("score: 3.5") == 1.0);
  }
}
