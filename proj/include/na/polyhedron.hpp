#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "na/box.hpp"

namespace na {

/// {y : a·y <= c}
struct Halfspace {
  Eigen::VectorXd a;
  double c = 0.0;

  bool contains(const Eigen::VectorXd& y, double tol = 0.0) const { return a.dot(y) <= c + tol; }
  friend bool operator==(const Halfspace& x, const Halfspace& y) {
    return x.c == y.c && x.a.size() == y.a.size() && x.a == y.a;
  }
};

/// Intersection of finitely many closed halfspaces.
class Polyhedron {
 public:
  Polyhedron() = default;
  explicit Polyhedron(int dim) : dim_(dim) {}
  Polyhedron(int dim, std::vector<Halfspace> hs);

  static Polyhedron from_box(const Box& b);

  int dim() const { return dim_; }
  const std::vector<Halfspace>& halfspaces() const { return hs_; }
  std::size_t size() const { return hs_.size(); }

  void add(Halfspace h);
  Polyhedron intersect(const Halfspace& h) const;
  Polyhedron intersect(const Polyhedron& other) const;
  bool contains(const Eigen::VectorXd& y, double tol = 0.0) const;
  /// Largest violation a·y - c over the halfspaces (<= 0 inside).
  double max_violation(const Eigen::VectorXd& y) const;

  friend bool operator==(const Polyhedron& x, const Polyhedron& y) {
    return x.dim_ == y.dim_ && x.hs_ == y.hs_;
  }

 private:
  int dim_ = 0;
  std::vector<Halfspace> hs_;
};

// ---------------------------------------------------------------------------
// Linear programming

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x;
  double value = 0.0;
};

/// maximize c·x subject to A x <= b with x free. Dense two-phase simplex
/// with Bland's rule. Throws NumericalInstability past the iteration cap.
LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

/// Constraint tolerance for feasibility witnesses.
inline constexpr double kLpTol = 1e-9;

struct Feasibility {
  bool feasible = false;
  Eigen::VectorXd witness;
};

Feasibility lp_feasible(const Polyhedron& p);

struct ChebyshevBall {
  Eigen::VectorXd center;
  double radius = 0.0;
};

/// Largest inscribed Euclidean ball. Infeasible input yields radius -1.
ChebyshevBall chebyshev(const Polyhedron& p);

/// Tight bounding box via 2n LPs. Returns nullopt for infeasible input.
std::optional<Box> bbox(const Polyhedron& p);

/// min and max of d·x over p; nullopt when infeasible.
std::optional<Interval> support_range(const Polyhedron& p, const Eigen::VectorXd& d);

/// Drops halfspaces implied by the others (one LP each).
Polyhedron remove_redundant(const Polyhedron& p);

}  // namespace na
