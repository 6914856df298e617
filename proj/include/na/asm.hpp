#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "na/certifier.hpp"

namespace na {

struct Simplex {
  std::vector<int> vertices;  // n + 1 ids into SimplicialMesh::points
  Eigen::MatrixXd A;          // interpolant of f on the simplex
  Eigen::VectorXd b;
  Polyhedron region;          // n + 1 facet halfspaces
};

struct SimplicialMesh {
  int g = 0;
  Box domain;
  std::vector<Eigen::VectorXd> points;
  std::vector<Simplex> simplices;

  int partitions() const { return static_cast<int>(simplices.size()); }
  Box simplex_box(const Simplex& s) const;
  double simplex_volume(const Simplex& s) const;
  /// Piecewise affine interpolant at x (first simplex containing x).
  Eigen::VectorXd interpolate(const Eigen::VectorXd& x) const;
};

/// Kuhn triangulation of a g^n grid: n! simplices per cell, f interpolated at the vertices.
SimplicialMesh build_mesh(const DynamicalModel& model, int g);

struct SimplexCert {
  BoundResult bound;
  Verdict verdict = Verdict::Inconclusive;  // against the target, when one is given
};

struct AsmResult {
  std::vector<SimplexCert> simplices;
  /// Componentwise max of the per-simplex certified bounds.
  Eigen::VectorXd global;
  double eps() const { return global.norm(); }
  bool certified = false;  // every simplex certified against the target
};

/// With target == nullptr only the bounds are computed.
AsmResult certify_asm(const DynamicalModel& model, const SimplicialMesh& mesh, const ErrorBound* target,
                      const CertBudget& budget, double rel_gap = 1e-3);

struct AsmRow {
  int g = 0;
  int partitions = 0;
  double eps = 0.0;
  double seconds = 0.0;
};
/// g,N_p,eps,seconds
std::string asm_csv(const std::vector<AsmRow>& rows);

}  // namespace na
