#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "na/cegis.hpp"
#include "na/hybrid.hpp"
#include "na/reach.hpp"

namespace na {

struct PipelineConfig {
  std::vector<int> hidden;
  double eps = 0.1;
  std::uint64_t seed = 0;
  /// Extra seeds tried (seed + 1, ...) when a seed ends without a Safe verdict.
  int seed_retries = 0;
  /// On Unknown, shrink the target to shrink * min(target, achieved) and resume.
  int refine_rounds = 8;
  double shrink = 0.75;
  /// Wall-clock budget for the whole run (all seeds and rounds).
  double time_budget = 600.0;
  CegisConfig cegis;
  ReachConfig reach;
  EnumConfig enumeration;
};

enum class PipelineVerdict { Safe, Unknown, Failure };
std::string to_string(PipelineVerdict v);

struct PipelineResult {
  PipelineVerdict verdict = PipelineVerdict::Failure;
  std::uint64_t seed = 0;  // seed of the final attempt
  std::optional<NeuralAbstraction> abstraction;
  std::optional<HybridAutomaton> automaton;
  std::optional<Flowpipe> flowpipe;
  /// Same key set for every verdict; no wall-clock values.
  nlohmann::json report;
  /// learner_s, certifier_s, safety_s (translation, reachability and the safety check).
  nlohmann::json timing;
};

PipelineResult run_pipeline(const DynamicalModel& model, const PipelineConfig& cfg);

struct Benchmark {
  std::string name;
  std::vector<int> hidden;
  double eps;  // initial target
};
/// The six benchmarks with their network shapes.
const std::vector<Benchmark>& table1();

}  // namespace na
