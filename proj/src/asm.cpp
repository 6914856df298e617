#include "na/asm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "na/errors.hpp"

namespace na {

Box SimplicialMesh::simplex_box(const Simplex& s) const {
  Box b;
  for (std::size_t k = 0; k < s.vertices.size(); ++k) {
    const Eigen::VectorXd& p = points[s.vertices[k]];
    Box pt;
    for (Eigen::Index i = 0; i < p.size(); ++i) pt.emplace_back(p[i], p[i]);
    b = k ? box_hull(b, pt) : pt;
  }
  return b;
}

double SimplicialMesh::simplex_volume(const Simplex& s) const {
  const int n = static_cast<int>(domain.size());
  Eigen::MatrixXd E(n, n);
  for (int k = 1; k <= n; ++k) E.col(k - 1) = points[s.vertices[k]] - points[s.vertices[0]];
  double fact = 1.0;
  for (int k = 2; k <= n; ++k) fact *= k;
  return std::fabs(E.determinant()) / fact;
}

Eigen::VectorXd SimplicialMesh::interpolate(const Eigen::VectorXd& x) const {
  for (const auto& s : simplices)
    if (s.region.contains(x, 1e-12)) return s.A * x + s.b;
  throw PreconditionError("point outside the mesh");
}

SimplicialMesh build_mesh(const DynamicalModel& model, int g) {
  if (g < 1) throw PreconditionError("mesh resolution must be >= 1");
  const int n = model.dim();
  SimplicialMesh mesh;
  mesh.g = g;
  mesh.domain = model.domain;

  // vertex id = mixed radix index over (g + 1)^n
  std::vector<long long> stride(n, 1);
  for (int i = 1; i < n; ++i) stride[i] = stride[i - 1] * (g + 1);
  const long long nv = stride[n - 1] * (g + 1);
  std::vector<Eigen::VectorXd> fvals;
  for (long long id = 0; id < nv; ++id) {
    Eigen::VectorXd p(n);
    long long r = id;
    for (int i = 0; i < n; ++i) {
      const long long k = r % (g + 1);
      r /= g + 1;
      const Interval& d = model.domain[i];
      p[i] = k == g ? d.hi : d.lo + d.width() * static_cast<double>(k) / g;
    }
    try {
      fvals.push_back(model.eval(p));
    } catch (const DomainError& e) {
      throw ModelDomainError(std::string("flow undefined at a mesh vertex: ") + e.what());
    }
    mesh.points.push_back(std::move(p));
  }

  std::vector<int> perm(n);
  std::vector<int> cell(n, 0);
  long long cells = 1;
  for (int i = 0; i < n; ++i) cells *= g;
  for (long long c = 0; c < cells; ++c) {
    long long r = c;
    long long base = 0;
    for (int i = 0; i < n; ++i) {
      cell[i] = static_cast<int>(r % g);
      r /= g;
      base += cell[i] * stride[i];
    }
    std::iota(perm.begin(), perm.end(), 0);
    do {
      Simplex s;
      long long v = base;
      s.vertices.push_back(static_cast<int>(v));
      for (int k = 0; k < n; ++k) {
        v += stride[perm[k]];
        s.vertices.push_back(static_cast<int>(v));
      }
      // [p^T 1] rows; interpolation and barycentric coordinates share this matrix
      Eigen::MatrixXd P(n + 1, n + 1), F(n + 1, n);
      for (int k = 0; k <= n; ++k) {
        P.row(k) << mesh.points[s.vertices[k]].transpose(), 1.0;
        F.row(k) = fvals[s.vertices[k]].transpose();
      }
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(P);
      if (!lu.isInvertible()) throw SingularSimplex("degenerate simplex in the mesh");
      const Eigen::MatrixXd coef = lu.solve(F);  // [A^T; b^T]
      s.A = coef.topRows(n).transpose();
      s.b = coef.row(n).transpose();
      // lambda^T = [x^T 1] P^{-1} >= 0
      const Eigen::MatrixXd Pinv = lu.inverse();
      s.region = Polyhedron(n);
      for (int k = 0; k <= n; ++k) s.region.add({-Pinv.col(k).head(n), Pinv(n, k)});
      mesh.simplices.push_back(std::move(s));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return mesh;
}

AsmResult certify_asm(const DynamicalModel& model, const SimplicialMesh& mesh, const ErrorBound* target,
                      const CertBudget& budget, double rel_gap) {
  const int n = model.dim();
  AsmResult out;
  out.global = Eigen::VectorXd::Zero(n);
  out.certified = target != nullptr;
  for (const auto& s : mesh.simplices) {
    ResidualProblem p;
    p.domain = mesh.simplex_box(s);
    p.region = s.region;
    p.make = [&model, &s] { return make_affine_residual(model, s.A, s.b); };
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int v : s.vertices) centroid += mesh.points[v];
    p.seeds.push_back(centroid / static_cast<double>(s.vertices.size()));
    for (std::size_t a = 0; a < s.vertices.size(); ++a)
      for (std::size_t b = a + 1; b < s.vertices.size(); ++b)
        p.seeds.push_back(0.5 * (mesh.points[s.vertices[a]] + mesh.points[s.vertices[b]]));

    SimplexCert sc;
    sc.bound = bound_residual(p, rel_gap, 1e-12, budget);
    if (target) {
      sc.verdict = certify_residual(p, target->threshold(), budget).verdict;
      out.certified &= sc.verdict == Verdict::Certified;
    }
    out.global = out.global.cwiseMax(sc.bound.upper);
    out.simplices.push_back(std::move(sc));
  }
  return out;
}

std::string asm_csv(const std::vector<AsmRow>& rows) {
  std::string s = "g,N_p,eps,seconds\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.6g,%.3f\n", r.g, r.partitions, r.eps, r.seconds);
    s += buf;
  }
  return s;
}

}  // namespace na
