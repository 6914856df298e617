#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "na/interval.hpp"

namespace na {

enum class Op : std::uint8_t { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Sqrt, Cbrt };

struct Node {
  Op op = Op::Const;
  int lhs = -1;
  int rhs = -1;
  double value = 0.0;  // Const
  int var = 0;         // Var
  int num = 1;         // Pow exponent numerator
  int den = 1;         // Pow exponent denominator (odd)
};

/// Immutable expression tree over state variables, stored as a tape in
/// which every node's children precede it. The root is the last node.
class Expr {
 public:
  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double v);
  static Expr variable(int index);
  static Expr unary(Op op, const Expr& arg);
  static Expr binary(Op op, const Expr& lhs, const Expr& rhs);
  /// base^(num/den); den must be odd, num >= 0.
  static Expr power(const Expr& base, int num, int den = 1);

  std::span<const Node> nodes() const { return nodes_; }
  int root() const { return static_cast<int>(nodes_.size()) - 1; }
  /// The sub-tree rooted at node `index`, compacted into its own tape.
  Expr subexpr(int index) const;
  /// One more than the largest variable index referenced (0 for constants).
  int min_dimension() const;

  /// Constructor-style dump, e.g. "Sub(Const 1.5, Sqrt(Var 0))".
  std::string structure() const;
  /// Infix rendering in the parser grammar; parse(to_string(e)) rebuilds e.
  std::string to_string(std::span<const std::string> vars) const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}
  std::vector<Node> nodes_;
};

Expr parse(std::string_view text, std::span<const std::string> variables);

double eval_point(const Expr& e, std::span<const double> x);
Interval eval_interval(const Expr& e, std::span<const Interval> x);

/// Reusable scratch space for interval evaluation with forward-mode
/// gradient enclosures. Not thread-safe; use one per worker.
class IntervalEvaluator {
 public:
  IntervalEvaluator(const Expr& e, int dim);

  Interval value(std::span<const Interval> x);
  /// Returns the value enclosure and writes the gradient enclosure into
  /// `grad` (size dim). Returns false in `grad_ok` when some partial
  /// derivative is unbounded on the box (e.g. sqrt at 0).
  Interval value_and_gradient(std::span<const Interval> x, std::span<Interval> grad, bool& grad_ok);
  /// Per-variable flags: grad_ok[k] is 0 when the k-th partial is unbounded.
  Interval value_and_gradient(std::span<const Interval> x, std::span<Interval> grad,
                              std::span<char> grad_ok);

 private:
  Expr expr_;
  int dim_;
  std::vector<Interval> vals_;
  std::vector<Interval> grads_;
  std::vector<char> ok_;
};

}  // namespace na
