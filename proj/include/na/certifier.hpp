#pragma once

#include <Eigen/Dense>
#include <functional>
#include <json.hpp>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "na/model.hpp"
#include "na/network.hpp"
#include "na/polyhedron.hpp"

namespace na {

/// Per-component error bound e with the concrete disturbance radius.
struct ErrorBound {
  Eigen::VectorXd e;
  double delta = 0.0;

  /// ||e||_2
  double reported_eps() const { return e.norm(); }
  /// e_i - delta: what |f_i - N_i| must stay under.
  Eigen::VectorXd threshold() const { return (e.array() - delta).matrix(); }
  /// Splits a 2-norm eps evenly over n components.
  static ErrorBound from_eps(double eps, int n, double delta = 0.0);
};

struct CertBudget {
  long long max_boxes = 2'000'000;
  /// Boxes narrower than this fraction of the domain on every axis are not split.
  double min_width_rel = 1e-4;
  int threads = 1;
  bool keep_proof = false;
  double time_limit = std::numeric_limits<double>::infinity();  // seconds
  /// Boxes evaluated together between scheduling decisions.
  int batch = 256;
};

enum class Verdict { Certified, Counterexample, Inconclusive };

struct ProofLeaf {
  Box box;
  IntervalVector residual;
};

struct CertResult {
  Verdict verdict = Verdict::Inconclusive;
  Eigen::VectorXd cex;          // Counterexample
  std::vector<int> violated;    // Counterexample: components over the bound
  Box worst_box;                // Inconclusive
  bool timed_out = false;       // Inconclusive because of time_limit
  long long boxes_processed = 0;
  /// Over the certified leaves: max |residual_i| enclosure. Meaningful for Certified.
  Eigen::VectorXd max_residual_upper_bound;
  std::vector<ProofLeaf> proof;

  nlohmann::json proof_json() const;
};

/// Residual r(x) = f(x) - g(x) for some approximator g. One instance per worker.
class ResidualEvaluator {
 public:
  virtual ~ResidualEvaluator() = default;
  /// Plain floating evaluation; used to confirm violations.
  virtual Eigen::VectorXd point(const Eigen::VectorXd& x) = 0;
  /// Sound enclosure of r over the box. sens[j] bounds sum_i |dr_i/dx_j|
  /// (infinite when some derivative is unbounded on the box).
  virtual void enclose(const Box& box, IntervalVector& r, std::vector<double>& sens) = 0;
};

using EvaluatorFactory = std::function<std::unique_ptr<ResidualEvaluator>()>;

struct ResidualProblem {
  Box domain;
  /// Points outside this set are ignored (used for simplices).
  std::optional<Polyhedron> region;
  EvaluatorFactory make;
  /// Extra points tried first by bound_residual.
  std::vector<Eigen::VectorXd> seeds;
};

/// f - N with the natural interval extension intersected with the
/// mean-value form.
std::unique_ptr<ResidualEvaluator> make_net_residual(const DynamicalModel& model,
                                                     const NeuralNet& net);
/// f - (A x + b)
std::unique_ptr<ResidualEvaluator> make_affine_residual(const DynamicalModel& model,
                                                        const Eigen::MatrixXd& A,
                                                        const Eigen::VectorXd& b);

/// Decides |r_i(x)| <= threshold_i for all x in the domain (and region).
CertResult certify_residual(const ResidualProblem& prob, const Eigen::VectorXd& threshold,
                            const CertBudget& budget);

CertResult certify(const DynamicalModel& model, const NeuralNet& net, const ErrorBound& target,
                   const CertBudget& budget);

struct BoundResult {
  Eigen::VectorXd upper;   // certified: |r_i| <= upper_i everywhere
  Eigen::VectorXd lower;   // attained at some evaluated point
  long long boxes_processed = 0;
  bool complete = true;    // false when the box budget ran out
};

/// Branch-and-bound maximization of |r_i| until upper <= lower (1 + rel_gap) + abs_gap.
BoundResult bound_residual(const ResidualProblem& prob, double rel_gap, double abs_gap,
                           const CertBudget& budget);

/// Axis with the largest width * sensitivity among axes wider than
/// min_width; ties go to the lowest index; all-zero scores pick the widest
/// splittable axis. Throws DegenerateBox if no axis is splittable.
int pick_split(const Box& box, std::span<const double> sensitivity,
               std::span<const double> min_width);

}  // namespace na
