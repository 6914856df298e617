#include <doctest.h>

#include <cmath>
#include <random>

#include "na/errors.hpp"
#include "na/expr.hpp"
#include "random_expr.hpp"

using namespace na;

namespace {
const std::vector<std::string> kX{"x"};
const std::vector<std::string> kXY{"x", "y"};
const std::vector<std::string> kY{"y"};
}  // namespace

TEST_CASE("parse builds the expected trees") {
  CHECK(parse("1.5 - sqrt(x)", kX).structure() == "Sub(Const 1.5, Sqrt(Var 0))");
  CHECK(parse("x", kX).structure() == "Var 0");
  CHECK(parse("-x^2", kX).structure() == "Neg(Pow(Var 0, 2))");
  CHECK(parse("2*-y + x", kXY).structure() == "Add(Mul(Const 2, Neg(Var 1)), Var 0)");
  CHECK(parse("a - b - c", std::vector<std::string>{"a", "b", "c"}).structure() ==
        "Sub(Sub(Var 0, Var 1), Var 2)");
  CHECK(parse("1e-3 * x", kX).structure() == "Mul(Const 0.001, Var 0)");
}

TEST_CASE("cbrt of an integer power folds into a rational exponent") {
  CHECK(parse("cbrt(x^2) - x", kX).structure() == "Sub(Pow(Var 0, 2/3), Var 0)");
  CHECK(parse("cbrt(x)", kX).structure() == "Cbrt(Var 0)");
}

TEST_CASE("parse errors") {
  try {
    parse("y +", kY);
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.offset() == 3);
  }
  CHECK_THROWS_AS(parse("z + 1", kXY), UnknownVariable);
  CHECK_THROWS_AS(parse("tan(x)", kX), UnsupportedFunction);
  CHECK_THROWS_AS(parse("(x + 1", kX), SyntaxError);
  CHECK_THROWS_AS(parse("x ^ y", kXY), SyntaxError);
  CHECK_THROWS_AS(parse("--x", kX), SyntaxError);
  CHECK_THROWS_AS(parse("", kX), SyntaxError);
}

TEST_CASE("eval_point") {
  const auto jet = parse("-y - 1.5*x^2 - 0.5*x^3 - 0.1", kXY);
  const std::vector<double> origin{0.0, 0.0};
  CHECK(eval_point(jet, origin) == doctest::Approx(-0.1));

  const std::vector<double> zero{0.0};
  CHECK(eval_point(parse("sqrt(x)", kX), zero) == 0.0);

  // |-1|^(2/3) - (-1) = 2
  const std::vector<double> m1{-1.0};
  CHECK(eval_point(parse("cbrt(x^2) - x", kX), m1) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(eval_point(parse("cbrt(x)", kX), m1) == doctest::Approx(-1.0));

  CHECK_THROWS_AS(eval_point(parse("sqrt(x)", kX), m1), DomainError);
  CHECK_THROWS_AS(eval_point(parse("1/x", kX), zero), DomainError);
}

TEST_CASE("eval_interval basic enclosures") {
  const std::vector<Interval> unit{{-1.0, 1.0}};
  const Interval sq = eval_interval(parse("x^2", kX), unit);
  CHECK(sq.lo == 0.0);
  CHECK(sq.hi == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(sq.hi >= 1.0);

  const std::vector<Interval> zero4{{0.0, 4.0}};
  const Interval rt = eval_interval(parse("sqrt(x)", kX), zero4);
  CHECK(rt.lo == 0.0);
  CHECK(rt.hi == doctest::Approx(2.0).epsilon(1e-13));

  // sin on [0, 3.2]: pi/2 inside, so hi is exactly 1.
  const std::vector<Interval> box{{0.0, 3.2}};
  const Interval s = eval_interval(parse("sin(x)", kX), box);
  CHECK(s.hi == 1.0);
  CHECK(s.lo <= std::sin(3.2));
  double lo = 1.0, hi = -1.0;
  for (int i = 0; i <= 1000000; ++i) {
    const double v = std::sin(3.2 * i / 1e6);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(s.lo <= lo);
  CHECK(s.hi >= hi);
  CHECK(s.lo >= lo - 1e-12);  // tight, not just sound
}

TEST_CASE("sqrt interval clamping policy") {
  const auto e = parse("sqrt(x)", kX);
  const std::vector<Interval> noisy{{-1e-13, 1.0}};
  CHECK(eval_interval(e, noisy).lo == 0.0);
  const std::vector<Interval> bad{{-1e-6, 1.0}};
  CHECK_THROWS_AS(eval_interval(e, bad), DomainError);
  const std::vector<Interval> straddle{{-1.0, 1.0}};
  CHECK_THROWS_AS(eval_interval(parse("1/x", kX), straddle), DomainError);
}

TEST_CASE("cos and exp enclosures") {
  const std::vector<Interval> b{{-0.5, 4.0}};
  const Interval c = eval_interval(parse("cos(x)", kX), b);
  CHECK(c.hi == 1.0);
  CHECK(c.lo == -1.0);
  const Interval e = eval_interval(parse("exp(x)", kX), b);
  CHECK(e.lo <= std::exp(-0.5));
  CHECK(e.hi >= std::exp(4.0));
  // exp(y^3 + 1) spans several periods of sin
  const std::vector<Interval> y{{-1.0, 1.0}};
  const Interval w = eval_interval(parse("sin(exp(x^3 + 1))", kX), y);
  CHECK(w.lo == -1.0);
  CHECK(w.hi == 1.0);
}

TEST_CASE("cbrt(x^2) enclosure is |x|^(2/3) over the box") {
  const auto e = parse("cbrt(x^2)", kX);
  struct Case {
    double a, b, m, M;
  };
  for (const Case& c : {Case{-0.5, 0.25, 0.0, 0.5}, Case{0.1, 0.8, 0.1, 0.8},
                        Case{-0.9, -0.2, 0.2, 0.9}, Case{-1.0, 1.0, 0.0, 1.0}}) {
    const std::vector<Interval> box{{c.a, c.b}};
    const Interval r = eval_interval(e, box);
    CHECK(r.lo == doctest::Approx(std::pow(c.m, 2.0 / 3.0)).epsilon(1e-13));
    CHECK(r.hi == doctest::Approx(std::pow(c.M, 2.0 / 3.0)).epsilon(1e-13));
    CHECK(r.lo <= std::pow(c.m, 2.0 / 3.0));
    CHECK(r.hi >= std::pow(c.M, 2.0 / 3.0));
  }
}

TEST_CASE("pretty-print round trip on generated expressions") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const Expr e = testing::random_expr(rng, 2, 4);
    const std::string s = e.to_string(kXY);
    const Expr back = parse(s, kXY);
    REQUIRE_MESSAGE(back == e, s);
  }
}

TEST_CASE("interval inclusion over random expressions and boxes") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Expr e = testing::random_expr(rng, 2, 4);
    std::vector<Interval> box(2);
    for (auto& iv : box) {
      const double a = -2.0 + 4.0 * u(rng);
      const double w = 2.0 * u(rng) * u(rng);
      iv = {a, a + w};
    }
    const Interval enc = eval_interval(e, box);
    for (int k = 0; k < 1000; ++k) {
      const std::vector<double> p{box[0].lo + box[0].width() * u(rng),
                                  box[1].lo + box[1].width() * u(rng)};
      const double v = eval_point(e, p);
      if (!(enc.lo <= v && v <= enc.hi)) {
        FAIL_CHECK(e.to_string(kXY) << " at (" << p[0] << "," << p[1] << ") = " << v
                                    << " not in [" << enc.lo << "," << enc.hi << "]");
        return;
      }
      ++checked;
    }
  }
  CHECK(checked == 10000 * 1000);
}

TEST_CASE("splitting never widens the enclosure") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const Expr e = testing::random_expr(rng, 2, 4);
    std::vector<Interval> box{{-1.0 + u(rng), 1.0 + u(rng)}, {-1.5 * u(rng), 1.0}};
    const Interval whole = eval_interval(e, box);
    const int axis = trial % 2;
    auto left = box, right = box;
    left[axis].hi = box[axis].mid();
    right[axis].lo = box[axis].mid();
    const Interval h = hull(eval_interval(e, left), eval_interval(e, right));
    // allow one widening step of floating noise
    const double tol = 1e-12 * (1.0 + whole.mag());
    CHECK(h.lo >= whole.lo - tol);
    CHECK(h.hi <= whole.hi + tol);
  }
}

TEST_CASE("gradient enclosures contain central differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const Expr e = testing::random_expr(rng, 2, 3);
    std::vector<Interval> box{{-1.0, -1.0 + 0.5 * u(rng) + 0.01},
                              {0.2, 0.2 + 0.5 * u(rng) + 0.01}};
    IntervalEvaluator ev(e, 2);
    std::vector<Interval> g(2);
    bool ok = false;
    const Interval v = ev.value_and_gradient(box, g, ok);
    const Interval plain = eval_interval(e, box);
    CHECK(v.lo == plain.lo);
    CHECK(v.hi == plain.hi);
    if (!ok) continue;
    for (int k = 0; k < 20; ++k) {
      std::vector<double> p{box[0].lo + box[0].width() * (0.1 + 0.8 * u(rng)),
                            box[1].lo + box[1].width() * (0.1 + 0.8 * u(rng))};
      for (int axis = 0; axis < 2; ++axis) {
        const double h = 1e-6;
        auto pp = p, pm = p;
        pp[axis] += h;
        pm[axis] -= h;
        const double fd = (eval_point(e, pp) - eval_point(e, pm)) / (2 * h);
        const double tol = 1e-5 * (1.0 + std::fabs(fd));
        CHECK(fd >= g[axis].lo - tol);
        CHECK(fd <= g[axis].hi + tol);
      }
    }
  }
}

TEST_CASE("unbounded partials are flagged per variable") {
  const auto e = parse("sqrt(x) + y^2", kXY);
  IntervalEvaluator ev(e, 2);
  const std::vector<Interval> box{{0.0, 1.0}, {1.0, 2.0}};
  std::vector<Interval> g(2);
  std::vector<char> ok(2);
  ev.value_and_gradient(box, g, std::span<char>(ok));
  CHECK(ok[0] == 0);
  CHECK(ok[1] == 1);
  CHECK(g[1].lo <= 2.0);
  CHECK(g[1].hi >= 4.0);
  // away from 0 both are bounded
  const std::vector<Interval> inner{{0.25, 1.0}, {1.0, 2.0}};
  ev.value_and_gradient(inner, g, std::span<char>(ok));
  CHECK(ok[0] == 1);
  CHECK(g[0].hi >= 1.0);
}
