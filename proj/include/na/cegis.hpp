#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "na/certifier.hpp"
#include "na/train.hpp"

namespace na {

struct CegisConfig {
  int initial_samples = 1000;
  int n_aug = 50;
  /// Gaussian spread around a counterexample, as a fraction of each axis width.
  double sigma_rel = 0.05;
  int max_iterations = 20;
  double time_budget = 300.0;  // seconds per synthesis run
  /// The learner aims at learn_factor * (e - delta) over the data.
  double learn_factor = 0.9;
  bool warm_start = true;
  std::uint64_t seed = 0;
  TrainConfig train;
  CertBudget cert;
};

/// Certified network with its error bound.
struct NeuralAbstraction {
  NeuralNet net;
  ErrorBound bound;
  Box domain;
  std::uint64_t seed = 0;
  int iterations = 0;
};

enum class FailureKind { None, IterationLimitExceeded, TimeBudgetExceeded };

struct IterationRecord {
  int iteration = 0;
  int dataset_size = 0;
  int epochs = 0;
  double loss = 0.0;
  Eigen::VectorXd train_max_error;
  Verdict verdict = Verdict::Inconclusive;
  std::optional<Eigen::VectorXd> cex;  // counterexample or pseudo-counterexample
  long long boxes = 0;
  double learner_s = 0.0;
  double certifier_s = 0.0;
};

struct SynthesisResult {
  std::optional<NeuralAbstraction> abstraction;
  FailureKind failure = FailureKind::None;
  /// Smallest (uncertified) max error over the data seen during the run.
  Eigen::VectorXd best_error;
  std::vector<IterationRecord> trace;
  Dataset data;
  NeuralNet last_net;
  double learner_s = 0.0;
  double certifier_s = 0.0;

  bool success() const { return abstraction.has_value(); }
};

/// Appends cex and n_aug Gaussian neighbours (resampled until inside the
/// domain) to the data.
void augment(Dataset& data, const DynamicalModel& model, const Eigen::VectorXd& cex, int n_aug,
             double sigma_rel, std::mt19937_64& rng);

/// Learner/certifier loop. `hidden` lists the hidden layer widths.
/// `start` and `data` allow warm starts; pass nullptr for a fresh run.
SynthesisResult synthesize(const DynamicalModel& model, const std::vector<int>& hidden,
                           const ErrorBound& target, const CegisConfig& cfg,
                           const NeuralNet* start = nullptr, const Dataset* data = nullptr);

struct TighteningResult {
  std::vector<SynthesisResult> rounds;
  /// Last certified abstraction (smallest bound), if any.
  std::optional<NeuralAbstraction> best;
};

/// After each success the target shrinks to shrink * min(target, achieved)
/// and synthesis resumes from the previous net and data; stops at the first
/// failure or after max_rounds.
TighteningResult tighten(const DynamicalModel& model, const std::vector<int>& hidden, double eps0,
                         const CegisConfig& cfg, double shrink = 0.75, int max_rounds = 50);

std::string to_string(Verdict v);
std::string to_string(FailureKind f);

/// Deterministic run report (no timings).
nlohmann::json run_report(const DynamicalModel& model, const std::vector<int>& hidden,
                          const ErrorBound& target, const CegisConfig& cfg,
                          const SynthesisResult& res);
/// Per-phase wall-clock seconds, kept apart so the report stays reproducible.
nlohmann::json timing_report(const SynthesisResult& res);

nlohmann::json abstraction_json(const NeuralAbstraction& a);
NeuralAbstraction abstraction_from_json(const nlohmann::json& j);

}  // namespace na
