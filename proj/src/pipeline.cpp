#include "na/pipeline.hpp"

#include <chrono>

#include "na/errors.hpp"

namespace na {

namespace {

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

std::string to_string(PipelineVerdict v) {
  switch (v) {
    case PipelineVerdict::Safe: return "safe";
    case PipelineVerdict::Unknown: return "unknown";
    case PipelineVerdict::Failure: return "failure";
  }
  return "?";
}

const std::vector<Benchmark>& table1() {
  static const std::vector<Benchmark> b{{"water", {12}, 0.1},      {"nl1", {10}, 0.1},
                                        {"nl2", {12, 10}, 0.1},    {"jet", {10, 16}, 0.1},
                                        {"steam", {12}, 0.2},      {"exp", {14, 14}, 0.1}};
  return b;
}

PipelineResult run_pipeline(const DynamicalModel& model, const PipelineConfig& cfg) {
  const auto t0 = Clock::now();
  PipelineResult out;
  double learner_s = 0.0, certifier_s = 0.0, safety_s = 0.0;
  nlohmann::json rounds = nlohmann::json::array();

  for (int attempt = 0; attempt <= cfg.seed_retries; ++attempt) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(attempt);
    out.seed = seed;
    out.verdict = PipelineVerdict::Failure;
    out.abstraction.reset();
    out.automaton.reset();
    out.flowpipe.reset();
    CegisConfig cc = cfg.cegis;
    cc.seed = seed;
    double eps = cfg.eps;
    std::optional<SynthesisResult> prev;

    for (int round = 0; round <= cfg.refine_rounds; ++round) {
      const double left = cfg.time_budget - since(t0);
      if (left <= 0) break;
      cc.time_budget = std::min(cfg.cegis.time_budget, left);
      const ErrorBound target = ErrorBound::from_eps(eps, model.dim(), model.delta);
      bool valid = true;
      for (int i = 0; i < target.e.size(); ++i) valid &= target.e[i] > target.delta;
      if (!valid) break;

      SynthesisResult sr = prev ? synthesize(model, cfg.hidden, target, cc, &prev->abstraction->net, &prev->data)
                                : synthesize(model, cfg.hidden, target, cc);
      learner_s += sr.learner_s;
      certifier_s += sr.certifier_s;
      nlohmann::json r{{"seed", seed},
                       {"round", round},
                       {"target_eps", eps},
                       {"success", sr.success()},
                       {"failure", to_string(sr.failure)},
                       {"iterations", sr.trace.size()},
                       {"achieved_eps", nullptr},
                       {"modes", nullptr},
                       {"transitions", nullptr},
                       {"verdict", nullptr}};
      if (!sr.success()) {
        rounds.push_back(r);
        break;
      }
      const NeuralAbstraction& abs = *sr.abstraction;
      r["achieved_eps"] = abs.bound.reported_eps();

      const auto ts = Clock::now();
      HybridAutomaton ha = build_automaton(abs, model, cfg.enumeration);
      Flowpipe fp = reach(ha, cfg.reach);
      safety_s += since(ts);
      r["modes"] = ha.modes.size();
      r["transitions"] = ha.transitions.size();
      r["verdict"] = to_string(fp.verdict);
      rounds.push_back(r);

      out.abstraction = abs;
      out.automaton = std::move(ha);
      out.verdict = fp.verdict == SafetyVerdict::Safe ? PipelineVerdict::Safe : PipelineVerdict::Unknown;
      out.flowpipe = std::move(fp);
      if (out.verdict == PipelineVerdict::Safe) break;
      eps = cfg.shrink * std::min(eps, abs.bound.reported_eps());
      prev = std::move(sr);
    }
    if (out.verdict == PipelineVerdict::Safe || since(t0) >= cfg.time_budget) break;
  }

  auto& j = out.report;
  j["model"] = model.name;
  j["arch"] = cfg.hidden;
  j["horizon"] = model.horizon;
  j["seed"] = out.seed;
  j["target_eps"] = cfg.eps;
  j["verdict"] = to_string(out.verdict);
  j["achieved_eps"] = out.abstraction ? nlohmann::json(out.abstraction->bound.reported_eps()) : nlohmann::json(nullptr);
  j["modes"] = out.automaton ? nlohmann::json(out.automaton->modes.size()) : nlohmann::json(nullptr);
  j["transitions"] = out.automaton ? nlohmann::json(out.automaton->transitions.size()) : nlohmann::json(nullptr);
  j["segments"] = out.flowpipe ? nlohmann::json(out.flowpipe->segments.size()) : nlohmann::json(nullptr);
  j["rounds"] = rounds;
  out.timing = {{"learner_s", learner_s},
                {"certifier_s", certifier_s},
                {"safety_s", safety_s},
                {"total_s", since(t0)}};
  return out;
}

}  // namespace na
