#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "na/hybrid.hpp"

namespace na {

/// {c + G λ : |λ|_inf <= 1}
struct Zonotope {
  Eigen::VectorXd c;
  Eigen::MatrixXd G;

  Zonotope() = default;
  Zonotope(Eigen::VectorXd center, Eigen::MatrixXd gens) : c(std::move(center)), G(std::move(gens)) {}
  static Zonotope from_box(const Box& b);

  int dim() const { return static_cast<int>(c.size()); }
  int generators() const { return static_cast<int>(G.cols()); }
  double order() const { return dim() ? static_cast<double>(G.cols()) / dim() : 0.0; }

  Box bounding_box() const;
  /// max over the set of d·x
  double support(const Eigen::VectorXd& d) const;
  Zonotope linear(const Eigen::MatrixXd& M) const;
  Zonotope translate(const Eigen::VectorXd& v) const;
  Zonotope minkowski(const Zonotope& o) const;
  /// Adds the box [-r, r] as axis generators (zero entries skipped).
  Zonotope add_box(const Eigen::VectorXd& r) const;
  /// Keeps at most order_cap * dim generators; the smallest ones are boxed.
  Zonotope reduce(int order_cap) const;
  /// Exact membership by LP.
  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
  /// Bounding box of the intersection with p (LP); nullopt when disjoint.
  std::optional<Box> bbox_within(const Polyhedron& p) const;
  /// Exact intersection test with a polyhedron by LP.
  bool meets(const Polyhedron& p) const;
};

/// Enclosure of the convex hull of a and b (same generator count).
Zonotope hull_enclosure(const Zonotope& a, const Zonotope& b);

/// Scaling and squaring with a truncated Taylor series.
Eigen::MatrixXd expm(const Eigen::MatrixXd& A);

/// Stepped: one set per time step; modes met during the step are folded
/// into the disturbance of a reference mode. Branching: one flowpipe per
/// mode entry, merged per (mode, time bucket).
enum class ReachMethod { Stepped, Branching };

struct ReachConfig {
  ReachMethod method = ReachMethod::Stepped;
  double step = 0.01;
  int order_cap = 20;
  int bucket_steps = 10;
  /// Relative growth applied when a processed (mode, bucket) receives new states.
  double reopen_inflation = 0.05;
  int branch_cap = 10000;
  /// Absolute bloating of the first segment.
  double safety_inflation = 1e-9;
  /// Zonotope order used when boxing a guard intersection.
  int guard_order = 4;
  /// <= 0: use the automaton horizon.
  double horizon = 0.0;
};

struct ReachSegment {
  int mode = 0;
  double t_lo = 0.0, t_hi = 0.0;
  Zonotope set;
  Box box;  // bounding box of set, clipped to the domain
  std::shared_ptr<const Polyhedron> invariant;
};

enum class SafetyVerdict { Safe, Unknown };

struct ReachStats {
  long long segments = 0;
  long long branches = 0;
  long long merges = 0;
  double max_order = 0.0;
};

struct Flowpipe {
  std::vector<ReachSegment> segments;
  Box domain;
  SafetyVerdict verdict = SafetyVerdict::Unknown;
  bool complete = true;  // false when the branch cap stopped the search
  ReachStats stats;
  std::string diagnostics;

  /// Segments whose time interval contains t and whose set contains x.
  bool covers(double t, const Eigen::VectorXd& x, double tol = 1e-9) const;
};

struct ModeSegments {
  std::vector<ReachSegment> segments;
  /// (segment index, destination mode) for segments meeting a neighbour invariant
  std::vector<std::pair<int, int>> exits;
};

/// Propagates one mode from init (states at times [t0_lo, t0_hi]) until
/// t_end or until the set leaves the invariant. `neighbours` are candidate
/// destination modes for exit events.
ModeSegments mode_flowpipe(const Mode& mode, const Zonotope& init, double t0_lo, double t0_hi,
                           double t_end, const ReachConfig& cfg, const Box& domain,
                           const std::vector<std::pair<int, const Polyhedron*>>& neighbours = {});

Flowpipe reach(const HybridAutomaton& ha, const ReachConfig& cfg = {});

/// Safe iff no segment (restricted to its invariant and the domain) meets bad.
SafetyVerdict check_safety(const Flowpipe& fp, const Polyhedron& bad);
SafetyVerdict check_safety(const Flowpipe& fp, const Box& bad);

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  bool exited = false;        // left the domain
  bool domain_error = false;  // f undefined
  double exit_time = 0.0;
};

/// Classical RK4 on the concrete model (no disturbance).
Trajectory simulate_concrete(const DynamicalModel& model, const Eigen::VectorXd& x0, double T, double h);

/// t_lo,t_hi,mode,lo_1..lo_n,hi_1..hi_n per line, with a header.
std::string flowpipe_csv(const Flowpipe& fp);

std::string to_string(SafetyVerdict v);

}  // namespace na
