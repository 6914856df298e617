#include <doctest.h>

#include <cmath>
#include <random>

#include "na/errors.hpp"
#include "na/reach.hpp"

using namespace na;

namespace {

Mode scalar_mode(double a, double b, double dist) {
  Mode m;
  m.config = {};
  m.A = Eigen::MatrixXd::Constant(1, 1, a);
  m.b = Eigen::VectorXd::Constant(1, b);
  m.dist = Eigen::VectorXd::Constant(1, dist);
  m.invariant = Polyhedron::from_box(Box{{-10.0, 10.0}});
  return m;
}

HybridAutomaton single(const Mode& m, Box init, Box bad, double T) {
  HybridAutomaton h;
  h.modes = {m};
  h.domain = {{-10.0, 10.0}};
  h.init = std::move(init);
  h.bad = std::move(bad);
  h.horizon = T;
  return h;
}

DynamicalModel scalar_model(const std::string& flow, const std::string& dom) {
  return parse_model("vars = [\"x\"]\nflow = [\"" + flow + "\"]\ndomain = [" + dom +
                     "]\ninit = [[0, 0.1]]\nbad = [[0.9, 1]]\nhorizon = 1\n");
}

}  // namespace

TEST_CASE("expm against closed forms") {
  Eigen::MatrixXd A(2, 2);
  A << 0.0, 1.0, -1.0, 0.0;  // rotation
  for (double t : {0.01, 1.0, 7.5}) {
    const Eigen::MatrixXd E = expm(A * t);
    CHECK(E(0, 0) == doctest::Approx(std::cos(t)).epsilon(1e-12));
    CHECK(E(0, 1) == doctest::Approx(std::sin(t)).epsilon(1e-12));
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2, 2);
  D(0, 0) = -3.0;
  D(1, 1) = 2.0;
  const Eigen::MatrixXd E = expm(D);
  CHECK(E(0, 0) == doctest::Approx(std::exp(-3.0)).epsilon(1e-13));
  CHECK(E(1, 1) == doctest::Approx(std::exp(2.0)).epsilon(1e-13));
  CHECK(expm(Eigen::MatrixXd::Zero(3, 3)) == Eigen::MatrixXd::Identity(3, 3));
}

TEST_CASE("zonotope basics") {
  const Zonotope z = Zonotope::from_box(Box{{-1.0, 1.0}, {2.0, 4.0}});
  CHECK(z.bounding_box() == Box{{-1.0, 1.0}, {2.0, 4.0}});
  CHECK(z.support(Eigen::Vector2d(1.0, 1.0)) == doctest::Approx(5.0));
  CHECK(z.contains(Eigen::Vector2d(0.5, 3.9)));
  CHECK_FALSE(z.contains(Eigen::Vector2d(1.1, 3.0)));

  // random zonotope: reduction only grows the set
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd G(2, 30);
  for (int i = 0; i < G.size(); ++i) G.data()[i] = g(rng);
  const Zonotope big(Eigen::Vector2d(0.3, -0.2), G);
  const Zonotope red = big.reduce(4);
  CHECK(red.generators() <= 8);
  for (int k = 0; k < 26; ++k) {
    const double th = 2 * M_PI * k / 26;
    const Eigen::Vector2d d(std::cos(th), std::sin(th));
    CHECK(red.support(d) >= big.support(d) - 1e-12);
  }
}

TEST_CASE("stationary flow keeps the initial set") {
  const Mode m = scalar_mode(0.0, 0.0, 0.0);
  const Box dom{{-10.0, 10.0}};
  const ModeSegments ms = mode_flowpipe(m, Zonotope::from_box(Box{{0.2, 0.5}}), 0.0, 0.0, 1.0, ReachConfig{}, dom);
  CHECK(ms.segments.size() == 100);
  for (const auto& s : ms.segments) {
    CHECK(s.box[0].lo == doctest::Approx(0.2).epsilon(1e-8));
    CHECK(s.box[0].hi == doctest::Approx(0.5).epsilon(1e-8));
  }
}

TEST_CASE("exponential decay against the analytic solution") {
  const Mode m = scalar_mode(-1.0, 0.0, 0.0);
  ReachConfig cfg;
  cfg.step = 0.001;
  const ModeSegments ms = mode_flowpipe(m, Zonotope::from_box(Box{{0.9, 1.0}}), 0.0, 0.0, 1.0, cfg, Box{{-10.0, 10.0}});
  const ReachSegment& last = ms.segments.back();
  CHECK(last.t_hi == doctest::Approx(1.0));
  const double lo = 0.9 * std::exp(-1.0), hi = std::exp(-1.0);
  CHECK(last.box[0].lo <= lo);
  CHECK(last.box[0].hi >= hi);
  CHECK(last.box[0].lo >= lo - 5e-3);
  CHECK(last.box[0].hi <= hi + 5e-3);
  // every segment holds the analytic tube over its time span
  for (const auto& s : ms.segments) {
    for (double t : {s.t_lo, 0.5 * (s.t_lo + s.t_hi), s.t_hi}) {
      CHECK(s.box[0].lo <= 0.9 * std::exp(-t));
      CHECK(s.box[0].hi >= std::exp(-t));
    }
  }
}

TEST_CASE("disturbed drift") {
  const Mode m = scalar_mode(0.0, 1.0, 0.1);
  const ModeSegments ms = mode_flowpipe(m, Zonotope::from_box(Box{{0.0, 0.0}}), 0.0, 0.0, 1.0, ReachConfig{}, Box{{-10.0, 10.0}});
  const ReachSegment& last = ms.segments.back();
  CHECK(last.t_hi == doctest::Approx(1.0));
  CHECK(last.set.contains(Eigen::VectorXd::Constant(1, 0.9)));
  CHECK(last.set.contains(Eigen::VectorXd::Constant(1, 1.1)));

  // a larger disturbance gives larger sets
  const Mode wide = scalar_mode(0.0, 1.0, 0.2);
  const ModeSegments mw = mode_flowpipe(wide, Zonotope::from_box(Box{{0.0, 0.0}}), 0.0, 0.0, 1.0, ReachConfig{}, Box{{-10.0, 10.0}});
  REQUIRE(mw.segments.size() == ms.segments.size());
  for (std::size_t k = 0; k < ms.segments.size(); ++k)
    for (double d : {-1.0, 1.0})
      CHECK(mw.segments[k].set.support(Eigen::VectorXd::Constant(1, d)) >=
            ms.segments[k].set.support(Eigen::VectorXd::Constant(1, d)));
}

TEST_CASE("verdicts for a single decaying mode") {
  const Mode m = scalar_mode(-1.0, 0.0, 0.0);
  for (ReachMethod method : {ReachMethod::Stepped, ReachMethod::Branching}) {
    ReachConfig cfg;
    cfg.method = method;
    CHECK(reach(single(m, {{0.9, 1.0}}, {{2.0, 3.0}}, 1.0), cfg).verdict == SafetyVerdict::Safe);
    CHECK(reach(single(m, {{0.9, 1.0}}, {{0.2, 0.4}}, 2.0), cfg).verdict == SafetyVerdict::Unknown);
    CHECK_THROWS_AS(reach(single(m, {{20.0, 21.0}}, {{2.0, 3.0}}, 1.0), cfg), PreconditionError);
  }
}

TEST_CASE("check_safety") {
  Flowpipe empty;
  empty.domain = {{-1.0, 1.0}, {-1.0, 1.0}};
  CHECK(check_safety(empty, Box{{0.5, 1.0}, {0.5, 1.0}}) == SafetyVerdict::Safe);

  // thin diagonal zonotope: its box overlaps the bad triangle but the set does not
  Flowpipe fp;
  fp.domain = {{-1.0, 1.0}, {-1.0, 1.0}};
  ReachSegment s;
  s.set = Zonotope(Eigen::Vector2d(0.0, 0.0), (Eigen::MatrixXd(2, 2) << 0.5, 0.01, 0.5, -0.01).finished());
  s.box = s.set.bounding_box();
  fp.segments.push_back(s);
  // bad: x - y >= 0.3
  Polyhedron bad(2);
  bad.add({Eigen::Vector2d(-1.0, 1.0), -0.3});
  CHECK(boxes_overlap(s.box, Box{{0.3, 0.51}, {-0.51, 0.2}}));
  CHECK(-s.set.support(Eigen::Vector2d(-1.0, 1.0)) <= 0.3 + 1e-12);  // not separated along x = y
  CHECK(check_safety(fp, bad) == SafetyVerdict::Safe);
  CHECK(check_safety(fp, Box{{0.0, 0.1}, {0.0, 0.1}}) == SafetyVerdict::Unknown);
}

TEST_CASE("RK4 oracles") {
  const DynamicalModel decay = scalar_model("-x", "[-2, 2]");
  const Trajectory tr = simulate_concrete(decay, Eigen::VectorXd::Constant(1, 1.0), 1.0, 1e-4);
  CHECK(tr.t.back() == 1.0);
  CHECK(std::fabs(tr.x.back()[0] - std::exp(-1.0)) <= 1e-8);

  const DynamicalModel still = scalar_model("0", "[-2, 2]");
  const Trajectory c = simulate_concrete(still, Eigen::VectorXd::Constant(1, 0.3), 1.0, 0.01);
  for (const auto& x : c.x) CHECK(x[0] == 0.3);

  const DynamicalModel grow = scalar_model("1", "[-2, 2]");
  const Trajectory out = simulate_concrete(grow, Eigen::VectorXd::Constant(1, 1.505), 1.0, 0.01);
  CHECK(out.exited);
  CHECK(out.exit_time == doctest::Approx(0.5).epsilon(1e-9));
  for (const auto& x : out.x) CHECK(x[0] <= 2.0);

  // water tank: -2u - 3 ln((1.5 - u)/1.5) = t with u = sqrt(x)
  const DynamicalModel water = load_model(NA_MODELS_DIR "/water.model");
  const Trajectory w = simulate_concrete(water, Eigen::VectorXd::Constant(1, 0.005), 2.0, 1e-4);
  REQUIRE_FALSE(w.exited);
  double lo = std::sqrt(0.005), hi = 1.4999999;
  auto g = [](double u) { return -2 * u - 3 * std::log((1.5 - u) / 1.5); };
  const double target = 2.0 + g(std::sqrt(0.005));
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < target ? lo : hi) = mid;
  }
  const double x2 = lo * lo;
  CHECK(x2 == doctest::Approx(1.30).epsilon(0.02 / 1.30));
  CHECK(std::fabs(w.x.back()[0] - x2) <= 1e-6);
}

TEST_CASE("two-mode automaton contains simulated trajectories") {
  // x' = 1 - x for x >= 0.5, x' = 0.5 otherwise (continuous at 0.5)
  HybridAutomaton h;
  h.domain = {{0.0, 2.0}};
  h.init = {{0.0, 0.2}};
  h.bad = {{1.5, 2.0}};
  h.horizon = 3.0;
  Mode lo = scalar_mode(0.0, 0.5, 0.01), hi = scalar_mode(-1.0, 1.0, 0.01);
  lo.invariant = Polyhedron::from_box(Box{{0.0, 0.5}});
  hi.invariant = Polyhedron::from_box(Box{{0.5, 2.0}});
  h.modes = {lo, hi};
  h.transitions = build_transitions(h.modes);
  CHECK(h.transitions.size() == 2);
  for (ReachMethod method : {ReachMethod::Stepped, ReachMethod::Branching}) {
  ReachConfig cfg;
  cfg.method = method;
  const Flowpipe fp = reach(h, cfg);
  CHECK(fp.complete);
  CHECK(fp.verdict == SafetyVerdict::Safe);
  if (method == ReachMethod::Branching) CHECK(fp.stats.branches >= 2);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 0.2), du(-0.01, 0.01);
  for (int k = 0; k < 20; ++k) {
    double x = u(rng), t = 0.0;
    const double dt = 1e-3;
    const double d = du(rng);
    for (int s = 0; s <= 3000; ++s, t = s * dt) {
      if (s % 50 == 0) REQUIRE(fp.covers(t, Eigen::VectorXd::Constant(1, x)));
      x += dt * ((x < 0.5 ? 0.5 : 1.0 - x) + d);
    }
  }
  const std::string csv = flowpipe_csv(fp);
  CHECK(csv.rfind("t_lo,t_hi,mode,lo0,hi0\n", 0) == 0);
  }
}
