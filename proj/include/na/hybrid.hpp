#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "na/cegis.hpp"
#include "na/polyhedron.hpp"

namespace na {

/// One bit vector per hidden layer; 1 = active (pre-activation >= 0).
using Configuration = std::vector<std::vector<std::uint8_t>>;

/// Layers joined by '.', e.g. "101.01".
std::string to_bitstring(const Configuration& c);
Configuration from_bitstring(const std::string& s);

struct Mode {
  Configuration config;
  Polyhedron invariant;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  /// Half-widths of the box disturbance.
  Eigen::VectorXd dist;
};

struct Transition {
  int src = 0;
  int dst = 0;
  Polyhedron guard;  // the destination invariant
};

struct HybridAutomaton {
  std::vector<Mode> modes;
  std::vector<Transition> transitions;
  Box domain, init, bad;
  double horizon = 0.0;

  int dim() const { return static_cast<int>(domain.size()); }
  /// Indices of modes whose invariant contains x (within tol).
  std::vector<int> modes_at(const Eigen::VectorXd& x, double tol = 1e-9) const;
};

Configuration config_at(const NeuralNet& net, const Eigen::VectorXd& x);

struct AffineMap {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};
AffineMap affine_restriction(const NeuralNet& net, const Configuration& c);

/// One halfspace per hidden neuron, then the domain box.
Polyhedron invariant_polyhedron(const NeuralNet& net, const Configuration& c, const Box& domain);

struct EnumConfig {
  /// Modes whose inscribed ball is not larger than this fraction of the
  /// smallest domain width are dropped.
  double min_radius_rel = 1e-7;
  int max_modes = 4096;
};

struct EnumeratedMode {
  Configuration config;
  Polyhedron invariant;
};

/// DFS over neurons; a neuron whose hyperplane misses the current region is
/// fixed instead of branched. Sorted by bitstring.
std::vector<EnumeratedMode> enumerate_modes(const NeuralNet& net, const Box& domain,
                                            const EnumConfig& cfg = {});
/// Checks all 2^H configurations. Test oracle; H must be small.
std::vector<EnumeratedMode> enumerate_modes_brute(const NeuralNet& net, const Box& domain,
                                                  const EnumConfig& cfg = {});

/// i -> j whenever the closed invariants intersect. With lie_prune, an edge
/// between modes that differ in one neuron is dropped when the flow on the
/// shared facet points strictly back into the source.
std::vector<Transition> build_transitions(const std::vector<Mode>& modes, bool lie_prune = false);

HybridAutomaton build_automaton(const NeuralAbstraction& abs, const DynamicalModel& model,
                                const EnumConfig& cfg = {}, bool lie_prune = false);

nlohmann::json automaton_json(const HybridAutomaton& h);
HybridAutomaton automaton_from_json(const nlohmann::json& j);

}  // namespace na
