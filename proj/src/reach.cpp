#include "na/reach.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "na/errors.hpp"

namespace na {

namespace {

double inf_norm(const Eigen::MatrixXd& A) {
  return A.size() ? A.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
}

Eigen::MatrixXd drop_zero_columns(const Eigen::MatrixXd& G) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < G.cols(); ++j)
    if (G.col(j).cwiseAbs().maxCoeff() > 0.0) keep.push_back(j);
  Eigen::MatrixXd out(G.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = G.col(keep[k]);
  return out;
}

// quick test: some halfspace of p has the zonotope strictly outside
bool separated(const Zonotope& z, const Polyhedron& p) {
  for (const auto& h : p.halfspaces())
    if (-z.support(-h.a) > h.c + 1e-12 * (1.0 + std::fabs(h.c))) return true;
  return false;
}

bool inside(const Zonotope& z, const Polyhedron& p) {
  for (const auto& h : p.halfspaces())
    if (z.support(h.a) > h.c) return false;
  return true;
}

bool boxes_meet(const Box& a, const Box& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].hi < b[i].lo || b[i].hi < a[i].lo) return false;
  return true;
}

Box inflate_rel(const Box& b, double rel, const Box& clip) {
  Box out = b;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double r = rel * b[i].width() / 2.0;
    out[i] = Interval(std::max(b[i].lo - r, clip[i].lo), std::min(b[i].hi + r, clip[i].hi));
  }
  return out;
}

bool segment_meets(const ReachSegment& s, const Polyhedron& bad, const Box& domain) {
  if (separated(s.set, bad)) return false;
  for (const auto& h : bad.halfspaces()) {
    // the clipped box is outside this halfspace
    double lo = 0.0;
    for (Eigen::Index i = 0; i < h.a.size(); ++i) lo += h.a[i] * (h.a[i] > 0 ? s.box[i].lo : s.box[i].hi);
    if (lo > h.c + 1e-12 * (1.0 + std::fabs(h.c))) return false;
  }
  Polyhedron region = bad.intersect(Polyhedron::from_box(box_intersect(s.box, domain)));
  if (s.invariant) region = region.intersect(*s.invariant);
  return s.set.meets(region);
}

}  // namespace

Zonotope Zonotope::from_box(const Box& b) {
  const int n = static_cast<int>(b.size());
  Eigen::VectorXd c(n), r(n);
  for (int i = 0; i < n; ++i) {
    c[i] = b[i].mid();
    r[i] = std::max(b[i].hi - c[i], c[i] - b[i].lo);
  }
  return Zonotope(c, Eigen::MatrixXd(n, 0)).add_box(r);
}

Box Zonotope::bounding_box() const {
  const Eigen::VectorXd r = G.cwiseAbs().rowwise().sum();
  Box b(static_cast<std::size_t>(dim()));
  for (int i = 0; i < dim(); ++i) b[i] = Interval(c[i] - r[i], c[i] + r[i]);
  return b;
}

double Zonotope::support(const Eigen::VectorXd& d) const {
  return d.dot(c) + (G.transpose() * d).cwiseAbs().sum();
}

Zonotope Zonotope::linear(const Eigen::MatrixXd& M) const { return Zonotope(M * c, M * G); }

Zonotope Zonotope::translate(const Eigen::VectorXd& v) const { return Zonotope(c + v, G); }

Zonotope Zonotope::minkowski(const Zonotope& o) const {
  Eigen::MatrixXd g(dim(), G.cols() + o.G.cols());
  g << G, o.G;
  return Zonotope(c + o.c, g);
}

Zonotope Zonotope::add_box(const Eigen::VectorXd& r) const {
  int extra = 0;
  for (Eigen::Index i = 0; i < r.size(); ++i) extra += r[i] > 0.0;
  Eigen::MatrixXd g(dim(), G.cols() + extra);
  g.leftCols(G.cols()) = G;
  Eigen::Index col = G.cols();
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (r[i] <= 0.0) continue;
    g.col(col).setZero();
    g(i, col++) = r[i];
  }
  return Zonotope(c, g);
}

Zonotope Zonotope::reduce(int order_cap) const {
  const int n = dim();
  const int cap = order_cap * n;
  if (G.cols() <= cap) return *this;
  const int keep = std::max(0, cap - n);
  std::vector<int> idx(static_cast<std::size_t>(G.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> score(idx.size());
  for (int j : idx) score[j] = G.col(j).lpNorm<1>() - G.col(j).lpNorm<Eigen::Infinity>();
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return score[a] > score[b]; });
  std::vector<int> kept(idx.begin(), idx.begin() + keep);
  std::sort(kept.begin(), kept.end());
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  for (std::size_t k = keep; k < idx.size(); ++k) r += G.col(idx[k]).cwiseAbs();
  Eigen::MatrixXd g(n, keep);
  for (int k = 0; k < keep; ++k) g.col(k) = G.col(kept[k]);
  Zonotope out = Zonotope(c, g).add_box(r);
  if (out.G.cols() > cap) throw OrderOverflow("zonotope order above the cap after reduction");
  return out;
}

bool Zonotope::contains(const Eigen::VectorXd& x, double tol) const {
  const int n = dim();
  const Eigen::Index m = G.cols();
  const Eigen::VectorXd d = x - c;
  if (m == 0) return d.cwiseAbs().maxCoeff() <= tol;
  Eigen::MatrixXd A(2 * n + 2 * m, m);
  Eigen::VectorXd b(2 * n + 2 * m);
  A << G, -G, Eigen::MatrixXd::Identity(m, m), -Eigen::MatrixXd::Identity(m, m);
  b << d.array() + tol, -d.array() + tol, Eigen::VectorXd::Ones(2 * m);
  return solve_lp(A, b, Eigen::VectorXd::Zero(m)).status != LpStatus::Infeasible;
}

bool Zonotope::meets(const Polyhedron& p) const {
  const Eigen::Index m = G.cols();
  if (m == 0) return p.contains(c, kLpTol);
  const Eigen::Index k = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd A(k + 2 * m, m);
  Eigen::VectorXd b(k + 2 * m);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Halfspace& h = p.halfspaces()[i];
    A.row(i) = (G.transpose() * h.a).transpose();
    b[i] = h.c - h.a.dot(c) + kLpTol * (1.0 + std::fabs(h.c));
  }
  A.bottomRows(2 * m) << Eigen::MatrixXd::Identity(m, m), -Eigen::MatrixXd::Identity(m, m);
  b.tail(2 * m).setOnes();
  return solve_lp(A, b, Eigen::VectorXd::Zero(m)).status != LpStatus::Infeasible;
}

std::optional<Box> Zonotope::bbox_within(const Polyhedron& p) const {
  const int n = dim();
  const Eigen::Index m = G.cols();
  if (m == 0) {
    if (!p.contains(c, kLpTol)) return std::nullopt;
    Box pt;
    for (int i = 0; i < n; ++i) pt.emplace_back(c[i], c[i]);
    return pt;
  }
  const Eigen::Index k = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd A(k + 2 * m, m);
  Eigen::VectorXd b(k + 2 * m);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Halfspace& h = p.halfspaces()[i];
    A.row(i) = (G.transpose() * h.a).transpose();
    b[i] = h.c - h.a.dot(c) + kLpTol * (1.0 + std::fabs(h.c));
  }
  A.bottomRows(2 * m) << Eigen::MatrixXd::Identity(m, m), -Eigen::MatrixXd::Identity(m, m);
  b.tail(2 * m).setOnes();
  Box out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd row = G.row(i).transpose();
    const LpResult hi = solve_lp(A, b, row);
    if (hi.status == LpStatus::Infeasible) return std::nullopt;
    const LpResult lo = solve_lp(A, b, -row);
    // row·λ is bounded by |row|_1 on the cube; round outward a little
    const double slack = 1e-12 * (std::fabs(c[i]) + row.lpNorm<1>());
    out[i] = Interval(c[i] - lo.value - slack, c[i] + hi.value + slack);
  }
  return out;
}

Zonotope hull_enclosure(const Zonotope& a, const Zonotope& b) {
  if (a.G.cols() != b.G.cols()) throw DimensionMismatch("hull_enclosure: generator counts");
  const Eigen::Index m = a.G.cols();
  Eigen::MatrixXd g(a.dim(), 2 * m + 1);
  g << (a.G + b.G) / 2.0, (a.c - b.c) / 2.0, (a.G - b.G) / 2.0;
  return Zonotope((a.c + b.c) / 2.0, drop_zero_columns(g));
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
  const Eigen::Index n = A.rows();
  const double norm = inf_norm(A);
  int s = 0;
  if (norm > 0.5) s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd B = A / std::ldexp(1.0, s);
  Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = E;
  for (int k = 1; k < 40; ++k) {
    term = term * B / k;
    E += term;
    if (inf_norm(term) <= 1e-17 * inf_norm(E)) break;
  }
  for (int i = 0; i < s; ++i) E = E * E;
  return E;
}

namespace {

// One step of x' = A x + b + d, |d_i| <= mu_i, over [0, h].
struct AffineStep {
  Eigen::MatrixXd Phibar, Phi, A2;
  Eigen::VectorXd drift;
  double na = 0.0, nA = 0.0, h = 0.0;
};

AffineStep make_step(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double h) {
  const Eigen::Index n = A.rows();
  // augmented system z = (x, 1)
  Eigen::MatrixXd Abar = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Abar.topLeftCorner(n, n) = A;
  Abar.topRightCorner(n, 1) = b;
  AffineStep s;
  s.h = h;
  s.Phibar = expm(Abar * h);
  s.Phi = s.Phibar.topLeftCorner(n, n);
  s.drift = s.Phibar.topRightCorner(n, 1);
  s.A2 = (Abar * Abar).topRows(n);
  s.na = inf_norm(Abar) * h;
  s.nA = inf_norm(A) * h;
  return s;
}

// box radius of the disturbance contribution over one step
Eigen::VectorXd step_disturbance(const AffineStep& s, const Eigen::VectorXd& mu) {
  const double m = mu.size() ? mu.cwiseAbs().maxCoeff() : 0.0;
  return (s.h * mu.cwiseAbs()).array() + s.h * (s.nA / 2.0) * std::exp(s.nA) * m;
}

// Encloses every state over [0, h] from init.
Zonotope first_segment(const AffineStep& s, const Zonotope& init, const Eigen::VectorXd& V,
                       double inflation, int order_cap) {
  const int n = init.dim();
  Zonotope z0(Eigen::VectorXd(n + 1), Eigen::MatrixXd::Zero(n + 1, init.G.cols()));
  z0.c << init.c, 1.0;
  z0.G.topRows(n) = init.G;
  const Zonotope hull = hull_enclosure(z0, z0.linear(s.Phibar));

  // interpolation error: sum_k>=2 h^k |Abar^k z0| / k!, k = 2 exactly (with the 1/4 factor), tail bounded by norms
  const Eigen::VectorXd curv = (s.A2 * z0.c).cwiseAbs() + (s.A2 * z0.G).cwiseAbs().rowwise().sum();
  double R = 1.0;
  for (const auto& iv : init.bounding_box()) R = std::max(R, iv.mag());
  const double tail = s.na * s.na * s.na / 6.0 * std::exp(s.na) * R;

  Eigen::VectorXd bloat = (s.h * s.h / 8.0) * curv + V;
  bloat.array() += tail + inflation;
  return Zonotope(hull.c.head(n), drop_zero_columns(hull.G.topRows(n))).add_box(bloat).reduce(order_cap);
}

Zonotope next_state(const AffineStep& s, const Zonotope& z, const Eigen::VectorXd& V, int order_cap) {
  return z.linear(s.Phi).translate(s.drift).add_box(V).reduce(order_cap);
}

}  // namespace

ModeSegments mode_flowpipe(const Mode& mode, const Zonotope& init, double t0_lo, double t0_hi,
                           double t_end, const ReachConfig& cfg, const Box& domain,
                           const std::vector<std::pair<int, const Polyhedron*>>& neighbours) {
  const int n = init.dim();
  const double h = cfg.step;
  if (!(h > 0.0)) throw PreconditionError("reach step must be positive");
  if (mode.A.rows() != n || mode.b.size() != n) throw DimensionMismatch("mode_flowpipe: dims");

  const AffineStep step = make_step(mode.A, mode.b, h);
  const Eigen::VectorXd V = step_disturbance(step, mode.dist);
  Zonotope omega = first_segment(step, init, V, cfg.safety_inflation, cfg.order_cap);

  Polyhedron inv = mode.invariant.intersect(Polyhedron::from_box(domain));
  ModeSegments out;
  for (long long k = 0;; ++k) {
    const double lo = t0_lo + static_cast<double>(k) * h;
    if (lo >= t_end) break;
    if (k > 0) omega = next_state(step, omega, V, cfg.order_cap);
    if (separated(omega, inv) || (!inside(omega, inv) && !omega.meets(inv))) break;
    ReachSegment seg;
    seg.mode = -1;
    seg.t_lo = lo;
    seg.t_hi = std::min(t0_hi + static_cast<double>(k + 1) * h, t_end);
    seg.set = omega;
    seg.box = box_intersect(omega.bounding_box(), domain);
    const int idx = static_cast<int>(out.segments.size());
    for (const auto& [j, P] : neighbours)
      if (!separated(omega, *P)) out.exits.emplace_back(idx, j);
    out.segments.push_back(std::move(seg));
  }
  return out;
}

namespace {

Flowpipe reach_stepped(const HybridAutomaton& ha, const ReachConfig& cfg, double T) {
  const int n = ha.dim();
  const int M = static_cast<int>(ha.modes.size());
  const double h = cfg.step;
  Flowpipe fp;
  fp.domain = ha.domain;

  std::vector<std::optional<Box>> mbox(M);
  for (int i = 0; i < M; ++i) mbox[i] = bbox(ha.modes[i].invariant);
  auto meeting = [&](const Box& S) {
    std::vector<int> L;
    const Polyhedron P = Polyhedron::from_box(S);
    for (int i = 0; i < M; ++i)
      if (mbox[i] && boxes_meet(*mbox[i], S) && lp_feasible(ha.modes[i].invariant.intersect(P)).feasible)
        L.push_back(i);
    return L;
  };

  const Box init = box_intersect(ha.init, ha.domain);
  if (box_is_empty(init) || meeting(init).empty()) throw PreconditionError("initial set meets no mode invariant");
  Zonotope R = Zonotope::from_box(init);

  // a priori box for all states over [0, hk] from B, restricted to the domain
  auto enclosure = [&](const Box& B, double hk, std::vector<int>& L) -> std::optional<Box> {
    Box S = B;
    for (int it = 0; it < 40; ++it) {
      const Box Sd = box_intersect(S, ha.domain);
      L = meeting(Sd);
      if (L.empty()) return std::nullopt;
      IntervalVector F(static_cast<std::size_t>(n), Interval(0.0, 0.0));
      for (std::size_t q = 0; q < L.size(); ++q) {
        const Mode& m = ha.modes[L[q]];
        for (int i = 0; i < n; ++i) {
          Interval v(m.b[i] - m.dist[i], m.b[i] + m.dist[i]);
          for (int j = 0; j < n; ++j) v = v + scale(m.A(i, j), Sd[j]);
          F[i] = q ? hull(F[i], v) : v;
        }
      }
      Box cand(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        cand[i] = Interval(B[i].lo + hk * std::min(F[i].lo, 0.0), B[i].hi + hk * std::max(F[i].hi, 0.0));
      if (box_contains(S, cand, 0.0)) return cand;
      S = box_hull(S, cand);
      for (auto& iv : S) {
        const double w = 0.1 * iv.width() + 1e-12 * (1.0 + iv.mag());
        iv = Interval(iv.lo - w, iv.hi + w);
      }
    }
    return std::nullopt;
  };

  std::map<int, AffineStep> cache;
  double t = 0.0;
  for (long long k = 0; t < T; ++k) {
    double hk = std::min(h, T - t);
    if (hk <= 1e-12 * std::max(1.0, T)) break;
    const Box B = box_intersect(R.bounding_box(), ha.domain);
    if (box_is_empty(B)) {
      fp.diagnostics = "reachable set left the domain";
      break;
    }
    std::vector<int> L;
    std::optional<Box> S;
    for (int tries = 0; tries < 8 && !(S = enclosure(B, hk, L)); ++tries) hk /= 2;
    if (!S) {
      fp.complete = false;
      fp.diagnostics = "no a priori enclosure at t = " + std::to_string(t);
      break;
    }
    const Box Sd = box_intersect(*S, ha.domain);
    const Eigen::VectorXd mid = box_center(B);
    int ref = L.front();
    for (int l : L)
      if (ha.modes[l].invariant.contains(mid, 1e-12)) {
        ref = l;
        break;
      }
    const Mode& mr = ha.modes[ref];
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
    const Polyhedron PS = Polyhedron::from_box(Sd);
    for (int l : L) {
      const Mode& ml = ha.modes[l];
      mu = mu.cwiseMax(ml.dist.cwiseAbs());
      if (l == ref) continue;
      // gap between mode l and the reference flow on S ∩ inv_l
      const Eigen::MatrixXd D = ml.A - mr.A;
      const Eigen::VectorXd c = ml.b - mr.b;
      const Polyhedron region = ml.invariant.intersect(PS);
      Eigen::VectorXd gap(n);
      for (int i = 0; i < n; ++i) {
        const auto r = support_range(region, D.row(i).transpose());
        gap[i] = r ? std::max(std::fabs(r->lo + c[i]), std::fabs(r->hi + c[i])) : 0.0;
      }
      mu = mu.cwiseMax(ml.dist.cwiseAbs() + gap);
    }
    fp.stats.merges += static_cast<long long>(L.size()) - 1;

    const AffineStep* step;
    AffineStep tmp;
    if (hk == h) {
      auto it = cache.find(ref);
      if (it == cache.end()) it = cache.emplace(ref, make_step(mr.A, mr.b, h)).first;
      step = &it->second;
    } else {
      tmp = make_step(mr.A, mr.b, hk);
      step = &tmp;
    }
    const Eigen::VectorXd V = step_disturbance(*step, mu);
    ReachSegment seg;
    seg.mode = ref;
    seg.t_lo = t;
    seg.t_hi = std::min(T, t + hk);
    seg.set = first_segment(*step, R, V, cfg.safety_inflation, cfg.order_cap);
    seg.box = box_intersect(box_intersect(seg.set.bounding_box(), Sd), ha.domain);
    fp.stats.max_order = std::max(fp.stats.max_order, seg.set.order());
    fp.segments.push_back(std::move(seg));
    R = next_state(*step, R, V, cfg.order_cap);
    t = hk == h ? static_cast<double>(k + 1) * h : t + hk;
  }
  fp.stats.branches = 1;
  fp.stats.segments = static_cast<long long>(fp.segments.size());
  fp.verdict = fp.complete ? check_safety(fp, ha.bad) : SafetyVerdict::Unknown;
  if (fp.complete && fp.verdict == SafetyVerdict::Unknown) fp.diagnostics = "flowpipe meets the bad set";
  return fp;
}

}  // namespace

bool Flowpipe::covers(double t, const Eigen::VectorXd& x, double tol) const {
  for (const auto& s : segments) {
    if (t < s.t_lo - 1e-12 || t > s.t_hi + 1e-12) continue;
    if (!box_contains(s.box, x, tol)) continue;
    if (s.set.contains(x, tol)) return true;
  }
  return false;
}

namespace {

Flowpipe reach_branching(const HybridAutomaton& ha, const ReachConfig& cfg, double T) {
  const double bucket_len = cfg.bucket_steps * cfg.step;
  const int M = static_cast<int>(ha.modes.size());
  Flowpipe fp;
  fp.domain = ha.domain;

  std::vector<std::vector<std::pair<int, const Polyhedron*>>> out(M);
  for (const auto& t : ha.transitions) out[t.src].emplace_back(t.dst, &t.guard);
  std::vector<std::shared_ptr<const Polyhedron>> invs;
  for (const auto& m : ha.modes) invs.push_back(std::make_shared<const Polyhedron>(m.invariant));

  struct Start {
    Box box;
    double lo, hi;
    // (parent branch, extra lag on top of the parent's)
    std::vector<std::pair<int, double>> parents;
  };
  struct Branch {
    int mode;
    Start st;
    std::size_t seg_begin, seg_end;
  };
  using Key = std::pair<long long, int>;
  std::map<Key, Start> pending;
  std::map<Key, int> processed;
  std::vector<Branch> branches;
  std::vector<std::vector<int>> by_mode(M);

  const Polyhedron X0 = Polyhedron::from_box(ha.init);
  for (int i = 0; i < M; ++i) {
    const auto bb = bbox(ha.modes[i].invariant.intersect(X0));
    if (bb) pending[{0, i}] = {box_intersect(*bb, ha.domain), 0.0, 0.0, {}};
  }
  if (pending.empty()) throw PreconditionError("initial set meets no mode invariant");

  while (!pending.empty()) {
    if (fp.stats.branches >= cfg.branch_cap) {
      fp.complete = false;
      fp.diagnostics = "branch cap of " + std::to_string(cfg.branch_cap) + " reached";
      break;
    }
    const Key key = pending.begin()->first;
    const int mi = key.second;
    const int id = static_cast<int>(branches.size());
    branches.push_back({mi, std::move(pending.begin()->second), fp.segments.size(), 0});
    pending.erase(pending.begin());
    processed[key] = id;
    by_mode[mi].push_back(id);
    ++fp.stats.branches;
    const Start st = branches[id].st;

    ModeSegments ms = mode_flowpipe(ha.modes[mi], Zonotope::from_box(st.box), st.lo, st.hi, T, cfg,
                                    ha.domain, out[mi]);
    const std::size_t base = fp.segments.size();
    for (auto& s : ms.segments) {
      s.mode = mi;
      s.invariant = invs[mi];
      fp.stats.max_order = std::max(fp.stats.max_order, s.set.order());
      fp.segments.push_back(std::move(s));
    }
    branches[id].seg_end = fp.segments.size();

    for (const auto& [k, j] : ms.exits) {
      const ReachSegment& seg = fp.segments[base + k];
      const Polyhedron P = ha.modes[j].invariant.intersect(ha.modes[mi].invariant)
                               .intersect(Polyhedron::from_box(ha.domain));
      const auto bb = seg.set.reduce(cfg.guard_order).bbox_within(P);
      if (!bb) continue;
      Start succ{box_intersect(*bb, ha.domain), seg.t_lo, seg.t_hi, {{id, 0.0}}};
      if (box_is_empty(succ.box)) continue;

      // Already covered by an earlier start of the same mode: later entry
      // times only stretch that branch's time labels.
      bool absorbed = false;
      for (int q : by_mode[j]) {
        Branch& bq = branches[q];
        if (bq.st.lo <= succ.lo && box_contains(bq.st.box, succ.box, 0.0)) {
          bq.st.parents.emplace_back(id, std::max(0.0, succ.hi - bq.st.hi));
          absorbed = true;
          break;
        }
      }
      if (absorbed) {
        ++fp.stats.merges;
        continue;
      }
      const Key sk{static_cast<long long>(std::floor(seg.t_lo / bucket_len)), j};
      if (auto it = pending.find(sk); it != pending.end()) {
        Start& p = it->second;
        p.box = box_hull(p.box, succ.box);
        p.lo = std::min(p.lo, succ.lo);
        p.hi = std::max(p.hi, succ.hi);
        p.parents.emplace_back(id, 0.0);
        ++fp.stats.merges;
      } else if (auto pt = processed.find(sk); pt != processed.end()) {
        const Start& old = branches[pt->second].st;
        pending[sk] = {inflate_rel(box_hull(old.box, succ.box), cfg.reopen_inflation, ha.domain),
                       std::min(old.lo, succ.lo), std::max(old.hi, succ.hi), {{id, 0.0}}};
        ++fp.stats.merges;
      } else {
        pending[sk] = std::move(succ);
      }
    }
  }

  // Time-label stretch: lag(b) = max over parents (lag(p) + extra), capped at T.
  std::vector<double> lag(branches.size(), 0.0);
  for (std::size_t pass = 0, changed = 1; changed && pass <= branches.size(); ++pass) {
    changed = 0;
    for (std::size_t b = 0; b < branches.size(); ++b) {
      for (const auto& [p, extra] : branches[b].st.parents) {
        const double v = std::min(T, lag[p] + extra);
        if (v > lag[b]) lag[b] = v, changed = 1;
      }
    }
    if (changed && pass == branches.size())
      for (std::size_t b = 0; b < branches.size(); ++b)
        if (lag[b] > 0.0) lag[b] = T;
  }
  for (std::size_t b = 0; b < branches.size(); ++b)
    for (std::size_t s = branches[b].seg_begin; s < branches[b].seg_end; ++s)
      fp.segments[s].t_hi = std::min(T, fp.segments[s].t_hi + lag[b]);

  fp.stats.segments = static_cast<long long>(fp.segments.size());
  fp.verdict = fp.complete ? check_safety(fp, ha.bad) : SafetyVerdict::Unknown;
  if (fp.complete && fp.verdict == SafetyVerdict::Unknown) fp.diagnostics = "flowpipe meets the bad set";
  return fp;
}

}  // namespace

Flowpipe reach(const HybridAutomaton& ha, const ReachConfig& cfg) {
  const double T = cfg.horizon > 0.0 ? cfg.horizon : ha.horizon;
  if (!(cfg.step > 0.0)) throw PreconditionError("reach step must be positive");
  return cfg.method == ReachMethod::Stepped ? reach_stepped(ha, cfg, T) : reach_branching(ha, cfg, T);
}

SafetyVerdict check_safety(const Flowpipe& fp, const Polyhedron& bad) {
  for (const auto& s : fp.segments)
    if (segment_meets(s, bad, fp.domain)) return SafetyVerdict::Unknown;
  return SafetyVerdict::Safe;
}

SafetyVerdict check_safety(const Flowpipe& fp, const Box& bad) {
  const Polyhedron P = Polyhedron::from_box(bad);
  for (const auto& s : fp.segments) {
    if (!boxes_meet(s.box, bad)) continue;
    if (segment_meets(s, P, fp.domain)) return SafetyVerdict::Unknown;
  }
  return SafetyVerdict::Safe;
}

Trajectory simulate_concrete(const DynamicalModel& model, const Eigen::VectorXd& x0, double T, double h) {
  if (!(h > 0.0)) throw PreconditionError("step must be positive");
  if (!box_contains(model.domain, x0)) throw PreconditionError("initial state outside the domain");
  Trajectory tr;
  tr.t.push_back(0.0);
  tr.x.push_back(x0);
  Eigen::VectorXd x = x0;
  const long long steps = static_cast<long long>(std::ceil(T / h - 1e-9));
  for (long long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const double hk = std::min(h, T - t);
    Eigen::VectorXd next;
    try {
      const Eigen::VectorXd k1 = model.eval(x);
      const Eigen::VectorXd k2 = model.eval(x + hk / 2 * k1);
      const Eigen::VectorXd k3 = model.eval(x + hk / 2 * k2);
      const Eigen::VectorXd k4 = model.eval(x + hk * k3);
      next = x + hk / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    } catch (const DomainError&) {
      tr.domain_error = true;
      tr.exit_time = t;
      return tr;
    }
    const double tn = k + 1 == steps ? T : static_cast<double>(k + 1) * h;
    if (!next.allFinite() || !box_contains(model.domain, next)) {
      tr.exited = true;
      tr.exit_time = tn;
      return tr;
    }
    x = next;
    tr.t.push_back(tn);
    tr.x.push_back(x);
  }
  return tr;
}

std::string flowpipe_csv(const Flowpipe& fp) {
  const int n = static_cast<int>(fp.domain.size());
  std::string s = "t_lo,t_hi,mode";
  for (int i = 0; i < n; ++i) s += ",lo" + std::to_string(i);
  for (int i = 0; i < n; ++i) s += ",hi" + std::to_string(i);
  s += '\n';
  char buf[64];
  for (const auto& seg : fp.segments) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d", seg.t_lo, seg.t_hi, seg.mode);
    s += buf;
    for (int i = 0; i < n; ++i) std::snprintf(buf, sizeof buf, ",%.17g", seg.box[i].lo), s += buf;
    for (int i = 0; i < n; ++i) std::snprintf(buf, sizeof buf, ",%.17g", seg.box[i].hi), s += buf;
    s += '\n';
  }
  return s;
}

std::string to_string(SafetyVerdict v) { return v == SafetyVerdict::Safe ? "safe" : "unknown"; }

}  // namespace na
