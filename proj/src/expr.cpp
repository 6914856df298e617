#include "na/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "na/errors.hpp"

namespace na {

namespace {

void append_shifted(std::vector<Node>& out, std::span<const Node> src) {
  const int offset = static_cast<int>(out.size());
  for (Node n : src) {
    if (n.lhs >= 0) n.lhs += offset;
    if (n.rhs >= 0) n.rhs += offset;
    out.push_back(n);
  }
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Const: return "Const";
    case Op::Var: return "Var";
    case Op::Neg: return "Neg";
    case Op::Add: return "Add";
    case Op::Sub: return "Sub";
    case Op::Mul: return "Mul";
    case Op::Div: return "Div";
    case Op::Pow: return "Pow";
    case Op::Sin: return "Sin";
    case Op::Cos: return "Cos";
    case Op::Exp: return "Exp";
    case Op::Sqrt: return "Sqrt";
    case Op::Cbrt: return "Cbrt";
  }
  return "?";
}

const char* func_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Sqrt: return "sqrt";
    case Op::Cbrt: return "cbrt";
    default: return nullptr;
  }
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Printing precedence: a node printed where a higher level is required
// gets parenthesized.
enum Level { kExpr = 0, kTerm = 1, kFactor = 2, kPowered = 3, kAtom = 4 };

Level level_of(const Node& n) {
  switch (n.op) {
    case Op::Add:
    case Op::Sub: return kExpr;
    case Op::Mul:
    case Op::Div: return kTerm;
    case Op::Neg: return kFactor;
    case Op::Pow: return n.den == 1 ? kPowered : kAtom;
    case Op::Const: return n.value < 0.0 || std::signbit(n.value) ? kFactor : kAtom;
    default: return kAtom;
  }
}

class Printer {
 public:
  Printer(std::span<const Node> nodes, std::span<const std::string> vars)
      : nodes_(nodes), vars_(vars) {}

  void print(int i, Level need) {
    const Node& n = nodes_[i];
    const bool paren = level_of(n) < need;
    if (paren) out_ += '(';
    switch (n.op) {
      case Op::Const: out_ += format_number(n.value); break;
      case Op::Var:
        out_ += n.var < static_cast<int>(vars_.size()) ? vars_[n.var]
                                                       : "x" + std::to_string(n.var);
        break;
      case Op::Neg:
        out_ += '-';
        print(n.lhs, kPowered);
        break;
      case Op::Add:
      case Op::Sub:
        print(n.lhs, kExpr);
        out_ += n.op == Op::Add ? " + " : " - ";
        print(n.rhs, kTerm);
        break;
      case Op::Mul:
      case Op::Div:
        print(n.lhs, kTerm);
        out_ += n.op == Op::Mul ? "*" : "/";
        print(n.rhs, kFactor);
        break;
      case Op::Pow:
        if (n.den == 1) {
          print(n.lhs, kAtom);
          out_ += "^" + std::to_string(n.num);
        } else if (n.den == 3) {
          out_ += "cbrt(";
          print(n.lhs, kAtom);
          out_ += "^" + std::to_string(n.num) + ")";
        } else {
          throw UnsupportedFunction("exponent denominator " + std::to_string(n.den) +
                                    " has no textual form");
        }
        break;
      default:
        out_ += func_name(n.op);
        out_ += '(';
        print(n.lhs, kExpr);
        out_ += ')';
        break;
    }
    if (paren) out_ += ')';
  }

  std::string take() { return std::move(out_); }

 private:
  std::span<const Node> nodes_;
  std::span<const std::string> vars_;
  std::string out_;
};

// Recursive-descent parser over the grammar
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ('-')? atom ('^' integer)?
//   atom   := number | ident | func '(' expr ')' | '(' expr ')'
class Parser {
 public:
  Parser(std::string_view text, std::span<const std::string> vars) : s_(text), vars_(vars) {}

  Expr run() {
    Expr e = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(msg, pos_); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::binary(Op::Add, lhs, term());
      } else if (accept('-')) {
        lhs = Expr::binary(Op::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = factor();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(Op::Mul, lhs, factor());
      } else if (accept('/')) {
        lhs = Expr::binary(Op::Div, lhs, factor());
      } else {
        return lhs;
      }
    }
  }

  Expr factor() {
    const bool neg = accept('-');
    Expr base = atom();
    if (accept('^')) {
      skip_ws();
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) fail("expected integer exponent");
      int k = 0;
      auto res = std::from_chars(s_.data() + start, s_.data() + pos_, k);
      if (res.ec != std::errc()) {
        pos_ = start;
        fail("exponent out of range");
      }
      base = Expr::power(base, k);
    }
    return neg ? Expr::unary(Op::Neg, base) : base;
  }

  Expr atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    if (accept('(')) {
      Expr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Expr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      const std::size_t save = pos_++;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      const std::size_t exp_start = pos_;
      digits();
      if (exp_start == pos_) pos_ = save;
    }
    double v = 0.0;
    auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return Expr::constant(v);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(s_.substr(start, pos_ - start));
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == '(') {
      Op op;
      if (name == "sin") op = Op::Sin;
      else if (name == "cos") op = Op::Cos;
      else if (name == "exp") op = Op::Exp;
      else if (name == "sqrt") op = Op::Sqrt;
      else if (name == "cbrt") op = Op::Cbrt;
      else throw UnsupportedFunction("unsupported function '" + name + "'");
      ++pos_;
      Expr arg = expr();
      if (!accept(')')) fail("expected ')'");
      // cbrt(u^k) becomes the composite |u|^(k/3).
      const Node& r = arg.nodes().back();
      if (op == Op::Cbrt && r.op == Op::Pow && r.den == 1) {
        return Expr::power(arg.subexpr(r.lhs), r.num, 3);
      }
      return Expr::unary(op, arg);
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == name) return Expr::variable(static_cast<int>(i));
    }
    throw UnknownVariable("unknown variable '" + name + "'");
  }

  std::string_view s_;
  std::span<const std::string> vars_;
  std::size_t pos_ = 0;
};

double checked_sqrt(double v) {
  if (v < 0.0) throw DomainError("sqrt of negative argument");
  return std::sqrt(v);
}

}  // namespace

// ---------------------------------------------------------------------------

Expr Expr::constant(double v) {
  Node n;
  n.op = Op::Const;
  n.value = v;
  return Expr({n});
}

Expr Expr::variable(int index) {
  if (index < 0) throw UnknownVariable("negative variable index");
  Node n;
  n.op = Op::Var;
  n.var = index;
  return Expr({n});
}

Expr Expr::unary(Op op, const Expr& arg) {
  if (op != Op::Neg && op != Op::Sin && op != Op::Cos && op != Op::Exp && op != Op::Sqrt &&
      op != Op::Cbrt) {
    throw UnsupportedFunction(std::string("not a unary operator: ") + op_name(op));
  }
  std::vector<Node> nodes(arg.nodes_);
  Node n;
  n.op = op;
  n.lhs = static_cast<int>(nodes.size()) - 1;
  nodes.push_back(n);
  return Expr(std::move(nodes));
}

Expr Expr::binary(Op op, const Expr& lhs, const Expr& rhs) {
  if (op != Op::Add && op != Op::Sub && op != Op::Mul && op != Op::Div) {
    throw UnsupportedFunction(std::string("not a binary operator: ") + op_name(op));
  }
  std::vector<Node> nodes(lhs.nodes_);
  const int l = static_cast<int>(nodes.size()) - 1;
  append_shifted(nodes, rhs.nodes_);
  Node n;
  n.op = op;
  n.lhs = l;
  n.rhs = static_cast<int>(nodes.size()) - 1;
  nodes.push_back(n);
  return Expr(std::move(nodes));
}

Expr Expr::power(const Expr& base, int num, int den) {
  if (num < 0) throw DomainError("negative exponent");
  if (den <= 0 || den % 2 == 0) throw DomainError("exponent denominator must be odd");
  std::vector<Node> nodes(base.nodes_);
  Node n;
  n.op = Op::Pow;
  n.lhs = static_cast<int>(nodes.size()) - 1;
  n.num = num;
  n.den = den;
  nodes.push_back(n);
  return Expr(std::move(nodes));
}

Expr Expr::subexpr(int index) const {
  std::vector<char> live(index + 1, 0);
  live[index] = 1;
  for (int i = index; i >= 0; --i) {
    if (!live[i]) continue;
    if (nodes_[i].lhs >= 0) live[nodes_[i].lhs] = 1;
    if (nodes_[i].rhs >= 0) live[nodes_[i].rhs] = 1;
  }
  std::vector<int> remap(index + 1, -1);
  std::vector<Node> out;
  for (int i = 0; i <= index; ++i) {
    if (!live[i]) continue;
    Node n = nodes_[i];
    if (n.lhs >= 0) n.lhs = remap[n.lhs];
    if (n.rhs >= 0) n.rhs = remap[n.rhs];
    remap[i] = static_cast<int>(out.size());
    out.push_back(n);
  }
  return Expr(std::move(out));
}

int Expr::min_dimension() const {
  int d = 0;
  for (const auto& n : nodes_) {
    if (n.op == Op::Var) d = std::max(d, n.var + 1);
  }
  return d;
}

std::string Expr::structure() const {
  std::vector<std::string> s(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::Const: s[i] = "Const " + format_number(n.value); break;
      case Op::Var: s[i] = "Var " + std::to_string(n.var); break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
        s[i] = std::string(op_name(n.op)) + "(" + s[n.lhs] + ", " + s[n.rhs] + ")";
        break;
      case Op::Pow:
        s[i] = "Pow(" + s[n.lhs] + ", " + std::to_string(n.num) +
               (n.den == 1 ? "" : "/" + std::to_string(n.den)) + ")";
        break;
      default: s[i] = std::string(op_name(n.op)) + "(" + s[n.lhs] + ")"; break;
    }
  }
  return s.back();
}

std::string Expr::to_string(std::span<const std::string> vars) const {
  Printer p(nodes_, vars);
  p.print(root(), kExpr);
  return p.take();
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.nodes_.size() != b.nodes_.size()) return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const Node& x = a.nodes_[i];
    const Node& y = b.nodes_[i];
    if (x.op != y.op || x.lhs != y.lhs || x.rhs != y.rhs) return false;
    if (x.op == Op::Const && !(x.value == y.value)) return false;
    if (x.op == Op::Var && x.var != y.var) return false;
    if (x.op == Op::Pow && (x.num != y.num || x.den != y.den)) return false;
  }
  return true;
}

Expr parse(std::string_view text, std::span<const std::string> variables) {
  return Parser(text, variables).run();
}

double eval_point(const Expr& e, std::span<const double> x) {
  const auto nodes = e.nodes();
  std::vector<double> v(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    switch (n.op) {
      case Op::Const: v[i] = n.value; break;
      case Op::Var:
        if (n.var >= static_cast<int>(x.size())) throw DimensionMismatch("variable out of range");
        v[i] = x[n.var];
        break;
      case Op::Neg: v[i] = -v[n.lhs]; break;
      case Op::Add: v[i] = v[n.lhs] + v[n.rhs]; break;
      case Op::Sub: v[i] = v[n.lhs] - v[n.rhs]; break;
      case Op::Mul: v[i] = v[n.lhs] * v[n.rhs]; break;
      case Op::Div:
        if (v[n.rhs] == 0.0) throw DomainError("division by zero");
        v[i] = v[n.lhs] / v[n.rhs];
        break;
      case Op::Pow: v[i] = pow_rational(v[n.lhs], n.num, n.den); break;
      case Op::Sin: v[i] = std::sin(v[n.lhs]); break;
      case Op::Cos: v[i] = std::cos(v[n.lhs]); break;
      case Op::Exp: v[i] = std::exp(v[n.lhs]); break;
      case Op::Sqrt: v[i] = checked_sqrt(v[n.lhs]); break;
      case Op::Cbrt: v[i] = std::cbrt(v[n.lhs]); break;
    }
  }
  return v.back();
}

Interval eval_interval(const Expr& e, std::span<const Interval> x) {
  IntervalEvaluator ev(e, static_cast<int>(x.size()));
  return ev.value(x);
}

// ---------------------------------------------------------------------------

IntervalEvaluator::IntervalEvaluator(const Expr& e, int dim)
    : expr_(e), dim_(dim), vals_(e.nodes().size()), grads_(e.nodes().size() * dim),
      ok_(e.nodes().size() * static_cast<std::size_t>(dim)) {
  if (e.min_dimension() > dim) throw DimensionMismatch("expression uses more variables than dim");
}

Interval IntervalEvaluator::value(std::span<const Interval> x) {
  const auto nodes = expr_.nodes();
  if (static_cast<int>(x.size()) < dim_) throw DimensionMismatch("box dimension too small");
  auto& v = vals_;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    switch (n.op) {
      case Op::Const: v[i] = Interval(n.value); break;
      case Op::Var: v[i] = x[n.var]; break;
      case Op::Neg: v[i] = -v[n.lhs]; break;
      case Op::Add: v[i] = v[n.lhs] + v[n.rhs]; break;
      case Op::Sub: v[i] = v[n.lhs] - v[n.rhs]; break;
      case Op::Mul:
        v[i] = n.lhs == n.rhs ? pow_int(v[n.lhs], 2) : v[n.lhs] * v[n.rhs];
        break;
      case Op::Div: v[i] = v[n.lhs] / v[n.rhs]; break;
      case Op::Pow: v[i] = pow_rational(v[n.lhs], n.num, n.den); break;
      case Op::Sin: v[i] = sin(v[n.lhs]); break;
      case Op::Cos: v[i] = cos(v[n.lhs]); break;
      case Op::Exp: v[i] = exp(v[n.lhs]); break;
      case Op::Sqrt: v[i] = sqrt(v[n.lhs]); break;
      case Op::Cbrt: v[i] = cbrt(v[n.lhs]); break;
    }
  }
  return v.back();
}

Interval IntervalEvaluator::value_and_gradient(std::span<const Interval> x,
                                               std::span<Interval> grad, bool& grad_ok) {
  std::vector<char> ok(dim_);
  const Interval v = value_and_gradient(x, grad, std::span<char>(ok));
  grad_ok = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
  return v;
}

Interval IntervalEvaluator::value_and_gradient(std::span<const Interval> x,
                                               std::span<Interval> grad,
                                               std::span<char> grad_ok) {
  const auto nodes = expr_.nodes();
  if (static_cast<int>(x.size()) < dim_) throw DimensionMismatch("box dimension too small");
  const int d = dim_;
  auto& v = vals_;
  auto g = [&](std::size_t node, int k) -> Interval& { return grads_[node * d + k]; };
  auto ok = [&](std::size_t node, int k) -> char& { return ok_[node * d + k]; };
  auto both = [&](const Node& n, int k) -> char { return ok(n.lhs, k) && ok(n.rhs, k); };
  // An unbounded outer derivative only hurts along variables the argument
  // actually depends on.
  auto chain_unbounded = [&](std::size_t i, const Node& n) {
    for (int k = 0; k < d; ++k) {
      const Interval& gl = g(n.lhs, k);
      ok(i, k) = ok(n.lhs, k) && gl.lo == 0.0 && gl.hi == 0.0;
      g(i, k) = Interval(0.0);
    }
  };

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    switch (n.op) {
      case Op::Const:
        v[i] = Interval(n.value);
        for (int k = 0; k < d; ++k) {
          g(i, k) = Interval(0.0);
          ok(i, k) = 1;
        }
        break;
      case Op::Var:
        v[i] = x[n.var];
        for (int k = 0; k < d; ++k) {
          g(i, k) = Interval(k == n.var ? 1.0 : 0.0);
          ok(i, k) = 1;
        }
        break;
      case Op::Neg:
        v[i] = -v[n.lhs];
        for (int k = 0; k < d; ++k) {
          g(i, k) = -g(n.lhs, k);
          ok(i, k) = ok(n.lhs, k);
        }
        break;
      case Op::Add:
      case Op::Sub: {
        v[i] = n.op == Op::Add ? v[n.lhs] + v[n.rhs] : v[n.lhs] - v[n.rhs];
        for (int k = 0; k < d; ++k) {
          g(i, k) = n.op == Op::Add ? g(n.lhs, k) + g(n.rhs, k) : g(n.lhs, k) - g(n.rhs, k);
          ok(i, k) = both(n, k);
        }
        break;
      }
      case Op::Mul: {
        const Interval a = v[n.lhs], b = v[n.rhs];
        v[i] = n.lhs == n.rhs ? pow_int(a, 2) : a * b;
        for (int k = 0; k < d; ++k) {
          g(i, k) = g(n.lhs, k) * b + a * g(n.rhs, k);
          ok(i, k) = both(n, k);
        }
        break;
      }
      case Op::Div: {
        const Interval a = v[n.lhs], b = v[n.rhs];
        v[i] = a / b;
        const Interval q = v[i];
        for (int k = 0; k < d; ++k) {
          g(i, k) = (g(n.lhs, k) - q * g(n.rhs, k)) / b;
          ok(i, k) = both(n, k);
        }
        break;
      }
      case Op::Pow: {
        const Interval a = v[n.lhs];
        v[i] = pow_rational(a, n.num, n.den);
        Interval dv(0.0);
        bool bounded = true;
        if (n.num != 0) {
          // d/du u^(p/q) = (p/q) u^((p-q)/q)
          const int p1 = n.num - n.den;
          if (p1 >= 0) {
            dv = scale(static_cast<double>(n.num) / n.den, pow_rational(a, p1, n.den));
          } else if (a.straddles_zero()) {
            bounded = false;
          } else {
            // negative exponent on a zero-free interval: 1 / u^((q-p)/q), sign-aware
            const Interval inv = pow_rational(a, -p1, n.den);
            dv = Interval(static_cast<double>(n.num) / n.den) / inv;
          }
        }
        if (!bounded) {
          chain_unbounded(i, n);
          break;
        }
        for (int k = 0; k < d; ++k) {
          g(i, k) = dv * g(n.lhs, k);
          ok(i, k) = ok(n.lhs, k);
        }
        break;
      }
      case Op::Sin:
      case Op::Cos:
      case Op::Exp: {
        const Interval a = v[n.lhs];
        Interval dv;
        if (n.op == Op::Sin) {
          v[i] = sin(a);
          dv = cos(a);
        } else if (n.op == Op::Cos) {
          v[i] = cos(a);
          dv = -sin(a);
        } else {
          v[i] = exp(a);
          dv = v[i];
        }
        for (int k = 0; k < d; ++k) {
          g(i, k) = dv * g(n.lhs, k);
          ok(i, k) = ok(n.lhs, k);
        }
        break;
      }
      case Op::Sqrt:
      case Op::Cbrt: {
        const Interval a = v[n.lhs];
        v[i] = n.op == Op::Sqrt ? sqrt(a) : cbrt(a);
        const Interval denom = n.op == Op::Sqrt ? scale(2.0, v[i]) : scale(3.0, pow_int(v[i], 2));
        if (denom.straddles_zero()) {
          chain_unbounded(i, n);
          break;
        }
        const Interval dv = Interval(1.0) / denom;
        for (int k = 0; k < d; ++k) {
          g(i, k) = dv * g(n.lhs, k);
          ok(i, k) = ok(n.lhs, k);
        }
        break;
      }
    }
    for (int k = 0; k < d; ++k) {
      if (!g(i, k).is_finite()) {
        ok(i, k) = 0;
        g(i, k) = Interval(0.0);
      }
    }
  }
  const std::size_t r = nodes.size() - 1;
  for (int k = 0; k < d; ++k) {
    grad[k] = g(r, k);
    grad_ok[k] = ok(r, k);
  }
  return v[r];
}

}  // namespace na
