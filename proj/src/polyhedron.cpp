#include "na/polyhedron.hpp"

#include <limits>

#include "na/errors.hpp"

namespace na {

namespace {

void to_matrix(const std::vector<Halfspace>& hs, int dim, Eigen::MatrixXd& A, Eigen::VectorXd& b) {
  A.resize(static_cast<Eigen::Index>(hs.size()), dim);
  b.resize(static_cast<Eigen::Index>(hs.size()));
  for (std::size_t i = 0; i < hs.size(); ++i) {
    A.row(static_cast<Eigen::Index>(i)) = hs[i].a.transpose();
    b[static_cast<Eigen::Index>(i)] = hs[i].c;
  }
}

}  // namespace

Polyhedron::Polyhedron(int dim, std::vector<Halfspace> hs) : dim_(dim), hs_(std::move(hs)) {
  for (const auto& h : hs_) {
    if (h.a.size() != dim_) throw DimensionMismatch("halfspace dimension");
  }
}

Polyhedron Polyhedron::from_box(const Box& b) {
  const int n = static_cast<int>(b.size());
  Polyhedron p(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[i] = 1.0;
    p.add({e, b[i].hi});
    p.add({-e, -b[i].lo});
  }
  return p;
}

void Polyhedron::add(Halfspace h) {
  if (h.a.size() != dim_) throw DimensionMismatch("halfspace dimension");
  hs_.push_back(std::move(h));
}

Polyhedron Polyhedron::intersect(const Halfspace& h) const {
  Polyhedron p(*this);
  p.add(h);
  return p;
}

Polyhedron Polyhedron::intersect(const Polyhedron& other) const {
  if (other.dim_ != dim_) throw DimensionMismatch("polyhedron dimension");
  Polyhedron p(*this);
  for (const auto& h : other.hs_) p.add(h);
  return p;
}

bool Polyhedron::contains(const Eigen::VectorXd& y, double tol) const {
  for (const auto& h : hs_) {
    if (!h.contains(y, tol)) return false;
  }
  return true;
}

double Polyhedron::max_violation(const Eigen::VectorXd& y) const {
  double v = -std::numeric_limits<double>::infinity();
  for (const auto& h : hs_) v = std::max(v, h.a.dot(y) - h.c);
  return v;
}

Feasibility lp_feasible(const Polyhedron& p) {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  to_matrix(p.halfspaces(), p.dim(), A, b);
  const LpResult r = solve_lp(A, b, Eigen::VectorXd::Zero(p.dim()));
  if (r.status == LpStatus::Infeasible) return {false, {}};
  return {true, r.x};
}

ChebyshevBall chebyshev(const Polyhedron& p) {
  const int n = p.dim();
  const auto& hs = p.halfspaces();
  Eigen::MatrixXd A(static_cast<Eigen::Index>(hs.size()) + 1, n + 1);
  Eigen::VectorXd b(static_cast<Eigen::Index>(hs.size()) + 1);
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    A.row(r).head(n) = hs[i].a.transpose();
    A(r, n) = hs[i].a.norm();
    b[r] = hs[i].c;
  }
  const auto last = static_cast<Eigen::Index>(hs.size());
  A.row(last).setZero();
  A(last, n) = -1.0;
  b[last] = 0.0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
  c[n] = 1.0;
  const LpResult r = solve_lp(A, b, c);
  if (r.status == LpStatus::Infeasible) return {Eigen::VectorXd::Zero(n), -1.0};
  if (r.status == LpStatus::Unbounded) {
    return {Eigen::VectorXd::Zero(n), std::numeric_limits<double>::infinity()};
  }
  return {r.x.head(n), r.x[n]};
}

std::optional<Interval> support_range(const Polyhedron& p, const Eigen::VectorXd& d) {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  to_matrix(p.halfspaces(), p.dim(), A, b);
  const LpResult hi = solve_lp(A, b, d);
  if (hi.status == LpStatus::Infeasible) return std::nullopt;
  const LpResult lo = solve_lp(A, b, -d);
  const double inf = std::numeric_limits<double>::infinity();
  return Interval(lo.status == LpStatus::Unbounded ? -inf : -lo.value,
                  hi.status == LpStatus::Unbounded ? inf : hi.value);
}

std::optional<Box> bbox(const Polyhedron& p) {
  const int n = p.dim();
  Box out(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[i] = 1.0;
    auto r = support_range(p, e);
    if (!r) return std::nullopt;
    out[i] = *r;
  }
  return out;
}

Polyhedron remove_redundant(const Polyhedron& p) {
  std::vector<Halfspace> hs = p.halfspaces();
  std::size_t i = 0;
  while (i < hs.size()) {
    std::vector<Halfspace> others;
    others.reserve(hs.size() - 1);
    for (std::size_t j = 0; j < hs.size(); ++j) {
      if (j != i) others.push_back(hs[j]);
    }
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    to_matrix(others, p.dim(), A, b);
    const LpResult r = solve_lp(A, b, hs[i].a);
    const double scale = std::max(1.0, hs[i].a.norm());
    if (r.status == LpStatus::Optimal && r.value <= hs[i].c + 1e-12 * scale) {
      hs.erase(hs.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  return Polyhedron(p.dim(), std::move(hs));
}

}  // namespace na
