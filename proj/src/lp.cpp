#include <cmath>
#include <limits>

#include "na/errors.hpp"
#include "na/polyhedron.hpp"

namespace na {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kPhase1Tol = 1e-9;

// Dense simplex tableau in canonical form; the last row is the objective
// row holding negated reduced costs for a maximization, the last column
// the right-hand side.
class Tableau {
 public:
  Tableau(int rows, int cols) : T_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)), basis_(rows, -1) {}

  double& at(int r, int c) { return T_(r, c); }
  double& rhs(int r) { return T_(r, T_.cols() - 1); }
  double& obj(int c) { return T_(T_.rows() - 1, c); }
  int rows() const { return static_cast<int>(T_.rows()) - 1; }
  int cols() const { return static_cast<int>(T_.cols()) - 1; }
  std::vector<int>& basis() { return basis_; }

  void pivot(int r, int c) {
    T_.row(r) /= T_(r, c);
    for (int i = 0; i < T_.rows(); ++i) {
      if (i == r) continue;
      const double f = T_(i, c);
      if (f != 0.0) T_.row(i) -= f * T_.row(r);
    }
    basis_[r] = c;
  }

  // Runs Bland's-rule iterations on the objective row; columns with
  // allowed[c] == false never enter. Returns false if unbounded.
  bool optimize(const std::vector<char>& allowed, int max_iter) {
    for (int it = 0; it < max_iter; ++it) {
      int enter = -1;
      for (int c = 0; c < cols(); ++c) {
        if (allowed[c] && obj(c) < -kPivotTol) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < rows(); ++r) {
        const double a = at(r, enter);
        if (a > kPivotTol) {
          const double ratio = rhs(r) / a;
          if (ratio < best - 1e-14 ||
              (std::fabs(ratio - best) <= 1e-14 && leave >= 0 && basis_[r] < basis_[leave])) {
            best = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw NumericalInstability("simplex iteration cap exceeded");
  }

 private:
  Eigen::MatrixXd T_;
  std::vector<int> basis_;
};

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in,
                  const Eigen::VectorXd& c) {
  const int n = static_cast<int>(A_in.cols());
  if (c.size() != n || b_in.size() != A_in.rows()) throw DimensionMismatch("lp shapes");

  // Normalize rows so tolerances are scale-free; drop trivial rows.
  Eigen::MatrixXd A(A_in.rows(), n);
  Eigen::VectorXd b(A_in.rows());
  int m = 0;
  for (int i = 0; i < A_in.rows(); ++i) {
    const double nrm = A_in.row(i).norm();
    if (nrm < 1e-14) {
      if (b_in[i] < -kLpTol) return {LpStatus::Infeasible, {}, 0.0};
      continue;
    }
    A.row(m) = A_in.row(i) / nrm;
    b[m] = b_in[i] / nrm;
    ++m;
  }

  // Columns: u (n), v (n), slack (m), artificial (one per negative rhs row).
  std::vector<int> art_row;
  for (int i = 0; i < m; ++i) {
    if (b[i] < 0.0) art_row.push_back(i);
  }
  const int na = static_cast<int>(art_row.size());
  const int ncols = 2 * n + m + na;
  const int art0 = 2 * n + m;
  Tableau t(m, ncols);
  for (int i = 0; i < m; ++i) {
    const double s = b[i] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) {
      t.at(i, j) = s * A(i, j);
      t.at(i, n + j) = -s * A(i, j);
    }
    t.at(i, 2 * n + i) = s;
    t.rhs(i) = s * b[i];
    t.basis()[i] = 2 * n + i;
  }
  for (int k = 0; k < na; ++k) {
    const int r = art_row[k];
    t.at(r, art0 + k) = 1.0;
    t.basis()[r] = art0 + k;
  }
  const int max_iter = 50 * (m + ncols) + 1000;
  std::vector<char> allowed(ncols, 1);

  if (na > 0) {
    // Phase 1: maximize -sum(artificials).
    for (int k = 0; k < na; ++k) t.obj(art0 + k) = 1.0;
    for (int k = 0; k < na; ++k) {
      const int r = art_row[k];
      for (int cidx = 0; cidx < ncols; ++cidx) t.obj(cidx) -= t.at(r, cidx);
      t.obj(ncols) -= t.rhs(r);
    }
    t.optimize(allowed, max_iter);
    double art_sum = 0.0;
    for (int r = 0; r < m; ++r) {
      if (t.basis()[r] >= art0) art_sum += t.rhs(r);
    }
    if (art_sum > kPhase1Tol) return {LpStatus::Infeasible, {}, 0.0};
    // Drive remaining zero-level artificials out of the basis.
    for (int r = 0; r < m; ++r) {
      if (t.basis()[r] < art0) continue;
      for (int cidx = 0; cidx < art0; ++cidx) {
        if (std::fabs(t.at(r, cidx)) > 1e-9) {
          t.pivot(r, cidx);
          break;
        }
      }
    }
    for (int k = 0; k < na; ++k) allowed[art0 + k] = 0;
  }

  // Phase 2 objective row: -c on u, +c on v, then canonicalize.
  for (int cidx = 0; cidx <= ncols; ++cidx) t.obj(cidx) = 0.0;
  for (int j = 0; j < n; ++j) {
    t.obj(j) = -c[j];
    t.obj(n + j) = c[j];
  }
  for (int r = 0; r < m; ++r) {
    const int bc = t.basis()[r];
    const double f = t.obj(bc);
    if (f != 0.0) {
      for (int cidx = 0; cidx < ncols; ++cidx) t.obj(cidx) -= f * t.at(r, cidx);
      t.obj(ncols) -= f * t.rhs(r);
    }
  }
  if (!t.optimize(allowed, max_iter)) return {LpStatus::Unbounded, {}, 0.0};

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < m; ++r) {
    const int bc = t.basis()[r];
    if (bc < n) {
      x[bc] += t.rhs(r);
    } else if (bc < 2 * n) {
      x[bc - n] -= t.rhs(r);
    }
  }
  return {LpStatus::Optimal, x, c.dot(x)};
}

}  // namespace na
