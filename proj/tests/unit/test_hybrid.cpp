#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "na/errors.hpp"
#include "na/hybrid.hpp"

using namespace na;

namespace {

Eigen::VectorXd sample(std::mt19937_64& rng, const Box& b) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) x[i] = b[i].lo + b[i].width() * u(rng);
  return x;
}

const Box kSquare{{-1.0, 1.0}, {-1.0, 1.0}};

std::vector<std::string> names(const std::vector<EnumeratedMode>& v) {
  std::vector<std::string> s;
  for (const auto& m : v) s.push_back(to_bitstring(m.config));
  return s;
}

// flat list of pre-activations at x
std::vector<double> preacts(const NeuralNet& net, const Eigen::VectorXd& x) {
  std::vector<double> out;
  Eigen::VectorXd y = x;
  for (int i = 0; i + 1 < net.layers(); ++i) {
    Eigen::VectorXd z = net.weight(i) * y + net.bias(i);
    for (Eigen::Index j = 0; j < z.size(); ++j) out.push_back(z[j]);
    y = z.cwiseMax(0.0);
  }
  return out;
}

}  // namespace

TEST_CASE("config_at") {
  NeuralNet net({1, 1, 1});
  net.weight(0) << 1.0;
  CHECK(to_bitstring(config_at(net, Eigen::VectorXd::Constant(1, 1.0))) == "1");
  CHECK(to_bitstring(config_at(net, Eigen::VectorXd::Constant(1, -1.0))) == "0");
  CHECK(to_bitstring(config_at(net, Eigen::VectorXd::Constant(1, 0.0))) == "1");
  CHECK(from_bitstring("101.01") == Configuration{{1, 0, 1}, {0, 1}});
  CHECK(to_bitstring(from_bitstring("101.01")) == "101.01");
}

TEST_CASE("affine_restriction closed forms") {
  const NeuralNet net = NeuralNet::random({2, 5, 2}, 3);
  Configuration off{{0, 0, 0, 0, 0}};
  AffineMap z = affine_restriction(net, off);
  CHECK(z.A.isZero());
  CHECK(z.b == net.bias(1));
  Configuration on{{1, 1, 1, 1, 1}};
  AffineMap o = affine_restriction(net, on);
  CHECK((o.A - net.weight(1) * net.weight(0)).norm() <= 1e-14);
  CHECK((o.b - (net.weight(1) * net.bias(0) + net.bias(1))).norm() <= 1e-14);
  CHECK_THROWS_AS(affine_restriction(net, Configuration{{1, 1}}), DimensionMismatch);
}

TEST_CASE("restriction matches the forward pass") {
  std::mt19937_64 rng(7);
  const std::vector<std::vector<int>> shapes{{2, 6, 2}, {2, 16, 16, 2}, {3, 8, 5, 3}, {3, 16, 16, 3}};
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto& dims = shapes[k % shapes.size()];
    const NeuralNet net = NeuralNet::random(dims, 100 + k);
    const Box dom(dims[0], Interval(-1.0, 1.0));
    const Eigen::VectorXd x = sample(rng, dom);
    const AffineMap f = affine_restriction(net, config_at(net, x));
    worst = std::max(worst, (net.forward(x) - (f.A * x + f.b)).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("invariant polyhedra") {
  NeuralNet one({2, 1, 2});
  one.weight(0) << 1.0, 0.0;
  const Polyhedron p = invariant_polyhedron(one, {{1}}, kSquare);
  CHECK(p.size() == 5);
  CHECK(p.contains(Eigen::Vector2d(0.5, -0.9)));
  CHECK(p.contains(Eigen::Vector2d(0.0, 0.3)));
  CHECK_FALSE(p.contains(Eigen::Vector2d(-0.01, 0.3)));

  // constant pre-activation b > 0
  NeuralNet flat({2, 1, 2});
  flat.bias(0) << 0.5;
  CHECK(lp_feasible(invariant_polyhedron(flat, {{1}}, kSquare)).feasible);
  CHECK(chebyshev(invariant_polyhedron(flat, {{1}}, kSquare)).radius == doctest::Approx(1.0));
  CHECK_FALSE(lp_feasible(invariant_polyhedron(flat, {{0}}, kSquare)).feasible);

  // membership oracle on a depth-2 net
  const NeuralNet net = NeuralNet::random({2, 6, 5, 2}, 21);
  std::mt19937_64 rng(3);
  const auto modes = enumerate_modes(net, kSquare);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::VectorXd x = sample(rng, kSquare);
    const Configuration c = config_at(net, x);
    REQUIRE(invariant_polyhedron(net, c, kSquare).contains(x));
    double closest = INFINITY;
    for (double z : preacts(net, x)) closest = std::min(closest, std::fabs(z));
    for (const auto& m : modes) {
      if (m.config == c) continue;
      if (m.invariant.contains(x)) CHECK(closest <= 1e-9);
    }
  }
}

TEST_CASE("enumeration: single neuron") {
  NeuralNet net({2, 1, 2});
  net.weight(0) << 1.0, 1.0;
  CHECK(enumerate_modes(net, kSquare).size() == 2);
  net.bias(0) << 3.0;  // x + y + 3 > 0 on the square
  const auto m = enumerate_modes(net, kSquare);
  REQUIRE(m.size() == 1);
  CHECK(to_bitstring(m[0].config) == "1");
}

TEST_CASE("enumeration equals brute force") {
  std::mt19937_64 rng(11);
  int total = 0;
  for (int k = 0; k < 50; ++k) {
    std::vector<int> dims{2};
    const int depth = 1 + k % 2;
    int H = 0;
    for (int d = 0; d < depth; ++d) {
      const int h = 2 + static_cast<int>(rng() % (depth == 1 ? 11 : 5));
      dims.push_back(h);
      H += h;
    }
    dims.push_back(2);
    REQUIRE(H <= 12);
    const NeuralNet net = NeuralNet::random(dims, 500 + k);
    const auto a = enumerate_modes(net, kSquare);
    const auto b = enumerate_modes_brute(net, kSquare);
    CHECK(names(a) == names(b));
    total += static_cast<int>(a.size());
  }
  CHECK(total > 50);
}

TEST_CASE("mode cap") {
  const NeuralNet net = NeuralNet::random({2, 12, 2}, 5);
  EnumConfig cfg;
  cfg.max_modes = 2;
  CHECK_THROWS_AS(enumerate_modes(net, kSquare, cfg), ModeExplosion);
}

namespace {

std::vector<Mode> as_modes(const NeuralNet& net, const Box& dom, const Eigen::VectorXd& dist) {
  std::vector<Mode> out;
  for (auto& em : enumerate_modes(net, dom)) {
    AffineMap f = affine_restriction(net, em.config);
    out.push_back({em.config, em.invariant, f.A, f.b, dist});
  }
  return out;
}

std::set<std::pair<std::string, std::string>> edge_set(const std::vector<Mode>& m,
                                                       const std::vector<Transition>& t) {
  std::set<std::pair<std::string, std::string>> s;
  for (const auto& e : t) s.insert({to_bitstring(m[e.src].config), to_bitstring(m[e.dst].config)});
  return s;
}

}  // namespace

TEST_CASE("transitions between half planes") {
  NeuralNet net({2, 1, 2});
  net.weight(0) << 1.0, 0.0;
  const auto modes = as_modes(net, kSquare, Eigen::Vector2d::Zero());
  const auto t = build_transitions(modes);
  CHECK(edge_set(modes, t) == std::set<std::pair<std::string, std::string>>{{"0", "1"}, {"1", "0"}});
  for (const auto& e : t) CHECK(e.guard == modes[e.dst].invariant);
}

TEST_CASE("three regions: the middle one touches both others") {
  // hyperplanes x = 0 and x = 0.5 split the square into three strips
  NeuralNet net({2, 2, 2});
  net.weight(0) << 1.0, 0.0, 1.0, 0.0;
  net.bias(0) << 0.0, -0.5;
  net.weight(1) << 1.0, 1.0, 0.0, 0.0;
  net.bias(1) << 0.2, -1.0;
  const auto modes = as_modes(net, kSquare, Eigen::Vector2d::Zero());
  REQUIRE(modes.size() == 3);
  const auto t = build_transitions(modes);
  using E = std::set<std::pair<std::string, std::string>>;
  CHECK(edge_set(modes, t) == E{{"00", "10"}, {"10", "00"}, {"10", "11"}, {"11", "10"}});

  // flow x' = 0.2 + relu(x) + relu(x - 0.5) > 0: nothing moves left
  const auto pruned = build_transitions(modes, true);
  CHECK(edge_set(modes, pruned) == E{{"00", "10"}, {"10", "11"}});
}

TEST_CASE("automaton from a water abstraction") {
  const DynamicalModel water = load_model(NA_MODELS_DIR "/water.model");
  CegisConfig cfg;
  cfg.seed = 1;
  const SynthesisResult r = synthesize(water, {12}, ErrorBound::from_eps(0.15, 1), cfg);
  REQUIRE(r.success());
  const HybridAutomaton h = build_automaton(*r.abstraction, water);
  CHECK(h.modes.size() >= 2);
  CHECK(h.modes.size() <= 13);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10000; ++k) {
    const Eigen::VectorXd x = sample(rng, water.domain);
    REQUIRE_FALSE(h.modes_at(x).empty());
  }
  for (const auto& m : h.modes) {
    const auto ball = chebyshev(m.invariant);
    for (int k = 0; k < 50; ++k) {
      Eigen::VectorXd x = sample(rng, water.domain);
      if (!m.invariant.contains(x)) x = ball.center;
      CHECK((r.abstraction->net.forward(x) - (m.A * x + m.b)).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
  const HybridAutomaton back = automaton_from_json(automaton_json(h));
  CHECK(automaton_json(back).dump() == automaton_json(h).dump());
}

TEST_CASE("zero hidden layers give one mode") {
  NeuralAbstraction a;
  a.net = NeuralNet::random({2, 2}, 1);
  a.bound.e = Eigen::Vector2d(0.1, 0.1);
  const DynamicalModel jet = load_model(NA_MODELS_DIR "/jet.model");
  a.domain = jet.domain;
  const HybridAutomaton h = build_automaton(a, jet);
  CHECK(h.modes.size() == 1);
  CHECK(h.transitions.empty());
  CHECK(h.modes[0].A == a.net.weight(0));
}
