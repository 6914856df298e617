#include <doctest.h>

#include <map>
#include <set>

#include "na/errors.hpp"
#include "na/pipeline.hpp"

using namespace na;

namespace {

DynamicalModel bench(const std::string& name) { return load_model(std::string(NA_MODELS_DIR) + "/" + name + ".model"); }

std::set<std::string> keys(const nlohmann::json& j) {
  std::set<std::string> k;
  for (auto it = j.begin(); it != j.end(); ++it) k.insert(it.key());
  return k;
}

}  // namespace

TEST_CASE("water end to end") {
  PipelineConfig cfg;
  cfg.hidden = {12};
  cfg.eps = 0.1;
  const PipelineResult r = run_pipeline(bench("water"), cfg);
  CHECK(r.verdict == PipelineVerdict::Safe);
  REQUIRE(r.automaton);
  CHECK(r.report["modes"] == r.automaton->modes.size());
  CHECK(r.report["verdict"] == "safe");
  CHECK(keys(r.timing) == std::set<std::string>{"learner_s", "certifier_s", "safety_s", "total_s"});

  // identical seeds, identical reports
  const PipelineResult again = run_pipeline(bench("water"), cfg);
  CHECK(again.report.dump() == r.report.dump());
  CHECK(automaton_json(*again.automaton).dump() == automaton_json(*r.automaton).dump());
}

TEST_CASE("report keys do not depend on the verdict") {
  PipelineConfig ok;
  ok.hidden = {12};
  const PipelineResult safe = run_pipeline(bench("water"), ok);

  PipelineConfig fail = ok;
  fail.hidden = {1};
  fail.eps = 0.002;
  fail.refine_rounds = 0;
  fail.cegis.max_iterations = 2;
  const PipelineResult bad = run_pipeline(bench("water"), fail);
  CHECK(bad.verdict == PipelineVerdict::Failure);
  CHECK(keys(bad.report) == keys(safe.report));
  CHECK(bad.report["achieved_eps"].is_null());
  CHECK(bad.report["rounds"].size() == 1);
  CHECK(keys(bad.report["rounds"][0]) == keys(safe.report["rounds"][0]));
}

TEST_CASE("seed retries advance the seed") {
  PipelineConfig cfg;
  cfg.hidden = {1};
  cfg.eps = 0.002;
  cfg.refine_rounds = 0;
  cfg.seed_retries = 2;
  cfg.cegis.max_iterations = 1;
  const PipelineResult r = run_pipeline(bench("water"), cfg);
  CHECK(r.seed == 2);
  CHECK(r.report["rounds"].size() == 3);
}

TEST_CASE("table1 shapes") {
  std::map<std::string, std::vector<int>> want{{"water", {12}},   {"nl1", {10}},  {"nl2", {12, 10}},
                                               {"jet", {10, 16}}, {"steam", {12}}, {"exp", {14, 14}}};
  REQUIRE(table1().size() == 6);
  for (const auto& b : table1()) CHECK(want.at(b.name) == b.hidden);
}
