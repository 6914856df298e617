#include "na/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "na/errors.hpp"

namespace na {

namespace {

void check_shape(const NeuralNet& net, const Configuration& c) {
  const auto h = net.hidden();
  if (c.size() != h.size()) throw DimensionMismatch("configuration depth differs from the network");
  for (std::size_t i = 0; i < h.size(); ++i)
    if (static_cast<int>(c[i].size()) != h[i]) throw DimensionMismatch("configuration layer width");
}

// x -> M x + m for the post-activation of the current layer
struct Restriction {
  Eigen::MatrixXd M;
  Eigen::VectorXd m;
};

Restriction identity(int n) { return {Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n)}; }

void apply_layer(const NeuralNet& net, int i, const std::vector<std::uint8_t>& bits, Restriction& r) {
  Eigen::MatrixXd M = net.weight(i) * r.M;
  Eigen::VectorXd m = net.weight(i) * r.m + net.bias(i);
  for (Eigen::Index j = 0; j < M.rows(); ++j) {
    if (!bits[j]) {
      M.row(j).setZero();
      m[j] = 0.0;
    }
  }
  r = {std::move(M), std::move(m)};
}

// pre-activation row j of layer i as a·x + c (a = W_i,j M)
Halfspace neuron_halfspace(const Eigen::RowVectorXd& row, double cst, bool active) {
  // active: row·x + cst >= 0  <=>  -row·x <= cst
  const double s = active ? 1.0 : -1.0;
  return {-s * row.transpose(), s * cst};
}

double min_radius(const Box& domain, const EnumConfig& cfg) {
  double w = std::numeric_limits<double>::infinity();
  for (const auto& iv : domain) w = std::min(w, iv.width());
  return cfg.min_radius_rel * w;
}

bool keeps(const Polyhedron& p, double thr) { return chebyshev(p).radius > thr; }

void sort_modes(std::vector<EnumeratedMode>& v) {
  std::sort(v.begin(), v.end(), [](const EnumeratedMode& a, const EnumeratedMode& b) {
    return to_bitstring(a.config) < to_bitstring(b.config);
  });
}

nlohmann::json box_json(const Box& b) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& iv : b) j.push_back({iv.lo, iv.hi});
  return j;
}

Box json_box(const nlohmann::json& j) {
  Box b;
  for (const auto& p : j) b.emplace_back(p[0].get<double>(), p[1].get<double>());
  return b;
}

}  // namespace

std::string to_bitstring(const Configuration& c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) s += '.';
    for (auto bit : c[i]) s += bit ? '1' : '0';
  }
  return s;
}

Configuration from_bitstring(const std::string& s) {
  Configuration c(1);
  for (char ch : s) {
    if (ch == '.') c.emplace_back();
    else if (ch == '0' || ch == '1') c.back().push_back(ch == '1');
    else throw SyntaxError("bad configuration character", 0);
  }
  if (s.empty()) c.clear();
  return c;
}

std::vector<int> HybridAutomaton::modes_at(const Eigen::VectorXd& x, double tol) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < modes.size(); ++i)
    if (modes[i].invariant.contains(x, tol)) out.push_back(static_cast<int>(i));
  return out;
}

Configuration config_at(const NeuralNet& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_dim()) throw DimensionMismatch("config_at: input size");
  Configuration c;
  Eigen::VectorXd y = x;
  for (int i = 0; i + 1 < net.layers(); ++i) {
    Eigen::VectorXd z = net.weight(i) * y + net.bias(i);
    std::vector<std::uint8_t> bits(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      bits[j] = z[j] >= 0.0;
      if (!bits[j]) z[j] = 0.0;
    }
    c.push_back(std::move(bits));
    y = std::move(z);
  }
  return c;
}

AffineMap affine_restriction(const NeuralNet& net, const Configuration& c) {
  check_shape(net, c);
  Restriction r = identity(net.input_dim());
  for (int i = 0; i + 1 < net.layers(); ++i) apply_layer(net, i, c[i], r);
  const int k = net.layers() - 1;
  return {net.weight(k) * r.M, net.weight(k) * r.m + net.bias(k)};
}

Polyhedron invariant_polyhedron(const NeuralNet& net, const Configuration& c, const Box& domain) {
  check_shape(net, c);
  const int n = net.input_dim();
  Polyhedron p(n);
  Restriction r = identity(n);
  for (int i = 0; i + 1 < net.layers(); ++i) {
    const Eigen::MatrixXd rows = net.weight(i) * r.M;
    const Eigen::VectorXd cst = net.weight(i) * r.m + net.bias(i);
    for (Eigen::Index j = 0; j < rows.rows(); ++j) p.add(neuron_halfspace(rows.row(j), cst[j], c[i][j]));
    apply_layer(net, i, c[i], r);
  }
  return p.intersect(Polyhedron::from_box(domain));
}

std::vector<EnumeratedMode> enumerate_modes(const NeuralNet& net, const Box& domain,
                                            const EnumConfig& cfg) {
  const int n = net.input_dim();
  if (static_cast<int>(domain.size()) != n) throw DimensionMismatch("enumerate_modes: domain");
  for (const auto& iv : domain)
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi)) throw PreconditionError("domain must be bounded");
  const double thr = min_radius(domain, cfg);
  double scale = 1.0;
  for (const auto& iv : domain) scale = std::max(scale, iv.mag());
  const std::vector<int> hidden = net.hidden();

  std::vector<EnumeratedMode> out;
  Configuration cur;
  for (int h : hidden) cur.emplace_back(h, 0);

  std::function<void(int, int, const Restriction&, const Polyhedron&)> dfs =
      [&](int i, int j, const Restriction& r, const Polyhedron& P) {
        if (i == static_cast<int>(hidden.size())) {
          Polyhedron inv = invariant_polyhedron(net, cur, domain);
          if (!keeps(inv, thr)) return;
          out.push_back({cur, std::move(inv)});
          if (static_cast<int>(out.size()) > cfg.max_modes)
            throw ModeExplosion("more than " + std::to_string(cfg.max_modes) + " modes");
          return;
        }
        if (j == hidden[i]) {
          Restriction next = r;
          apply_layer(net, i, cur[i], next);
          dfs(i + 1, 0, next, P);
          return;
        }
        const Eigen::RowVectorXd row = net.weight(i).row(j) * r.M;
        const double cst = net.weight(i).row(j).dot(r.m) + net.bias(i)[j];
        const auto range = support_range(P, row.transpose());
        if (!range) return;
        const double tol = 1e-9 * (1.0 + std::fabs(cst) + row.lpNorm<1>() * scale);
        const bool can_on = range->hi + cst >= -tol;
        const bool can_off = range->lo + cst <= tol;
        const bool fixed = !(range->lo + cst <= tol && range->hi + cst >= -tol);
        // visit inactive first so children come out in bitstring order
        for (std::uint8_t bit : {std::uint8_t{0}, std::uint8_t{1}}) {
          if (bit ? !can_on : !can_off) continue;
          cur[i][j] = bit;
          if (fixed) {
            dfs(i, j + 1, r, P);
          } else {
            const Polyhedron child = P.intersect(neuron_halfspace(row, cst, bit));
            if (keeps(child, thr)) dfs(i, j + 1, r, child);
          }
        }
        cur[i][j] = 0;
      };
  dfs(0, 0, identity(n), Polyhedron::from_box(domain));
  sort_modes(out);
  return out;
}

std::vector<EnumeratedMode> enumerate_modes_brute(const NeuralNet& net, const Box& domain,
                                                  const EnumConfig& cfg) {
  const std::vector<int> hidden = net.hidden();
  const int H = net.neurons();
  if (H > 24) throw PreconditionError("brute-force enumeration needs H <= 24");
  const double thr = min_radius(domain, cfg);
  std::vector<EnumeratedMode> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << H); ++mask) {
    Configuration c;
    int bit = 0;
    for (int h : hidden) {
      c.emplace_back(h, 0);
      for (int j = 0; j < h; ++j, ++bit) c.back()[j] = (mask >> bit) & 1;
    }
    Polyhedron inv = invariant_polyhedron(net, c, domain);
    if (keeps(inv, thr)) out.push_back({std::move(c), std::move(inv)});
  }
  sort_modes(out);
  return out;
}

std::vector<Transition> build_transitions(const std::vector<Mode>& modes, bool lie_prune) {
  const std::size_t M = modes.size();
  std::vector<std::optional<Box>> boxes(M);
  for (std::size_t i = 0; i < M; ++i) boxes[i] = bbox(modes[i].invariant);

  auto flat = [](const Configuration& c) {
    std::vector<std::uint8_t> v;
    for (const auto& l : c) v.insert(v.end(), l.begin(), l.end());
    return v;
  };

  // true when the flow of `src` crosses into `dst` somewhere on their facet
  auto may_cross = [&](std::size_t src, std::size_t dst, const Polyhedron& facet) {
    const auto a = flat(modes[src].config), b = flat(modes[dst].config);
    int diff = -1, count = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k] != b[k]) diff = static_cast<int>(k), ++count;
    if (count != 1) return true;
    const Halfspace& h = modes[src].invariant.halfspaces()[diff];
    const Mode& s = modes[src];
    const auto range = support_range(facet, s.A.transpose() * h.a);
    if (!range) return true;
    const double sup = range->hi + h.a.dot(s.b) + h.a.cwiseAbs().dot(s.dist);
    return sup >= 0.0;
  };

  std::vector<Transition> out;
  std::vector<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = i + 1; j < M; ++j) {
      if (boxes[i] && boxes[j]) {
        bool apart = false;
        for (std::size_t d = 0; d < boxes[i]->size(); ++d) {
          const double tol = 1e-9 * (1.0 + (*boxes[i])[d].mag());
          apart |= (*boxes[i])[d].hi < (*boxes[j])[d].lo - tol || (*boxes[j])[d].hi < (*boxes[i])[d].lo - tol;
        }
        if (apart) continue;
      }
      const Polyhedron both = modes[i].invariant.intersect(modes[j].invariant);
      if (!lp_feasible(both).feasible) continue;
      if (!lie_prune || may_cross(i, j, both)) edges.emplace_back(i, j);
      if (!lie_prune || may_cross(j, i, both)) edges.emplace_back(j, i);
    }
  }
  std::sort(edges.begin(), edges.end());
  for (auto [s, d] : edges) out.push_back({s, d, modes[d].invariant});
  return out;
}

HybridAutomaton build_automaton(const NeuralAbstraction& abs, const DynamicalModel& model,
                                const EnumConfig& cfg, bool lie_prune) {
  if (abs.net.input_dim() != model.dim()) throw DimensionMismatch("abstraction and model dims");
  HybridAutomaton h;
  h.domain = model.domain;
  h.init = model.init;
  h.bad = model.bad;
  h.horizon = model.horizon;
  for (auto& em : enumerate_modes(abs.net, model.domain, cfg)) {
    AffineMap f = affine_restriction(abs.net, em.config);
    h.modes.push_back({std::move(em.config), std::move(em.invariant), std::move(f.A), std::move(f.b), abs.bound.e});
  }
  h.transitions = build_transitions(h.modes, lie_prune);
  return h;
}

nlohmann::json automaton_json(const HybridAutomaton& h) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : h.modes) {
    nlohmann::json A = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.A.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.A.cols(); ++c) row.push_back(m.A(r, c));
      A.push_back(row);
    }
    nlohmann::json inv = nlohmann::json::array();
    for (const auto& hs : m.invariant.halfspaces())
      inv.push_back({{"a", std::vector<double>(hs.a.data(), hs.a.data() + hs.a.size())}, {"c", hs.c}});
    modes.push_back({{"config", to_bitstring(m.config)},
                     {"A", A},
                     {"b", std::vector<double>(m.b.data(), m.b.data() + m.b.size())},
                     {"inv", inv},
                     {"dist", std::vector<double>(m.dist.data(), m.dist.data() + m.dist.size())}});
  }
  nlohmann::json tr = nlohmann::json::array();
  for (const auto& t : h.transitions) tr.push_back({{"src", t.src}, {"dst", t.dst}});
  return {{"modes", modes},
          {"transitions", tr},
          {"domain", box_json(h.domain)},
          {"init", box_json(h.init)},
          {"bad", box_json(h.bad)},
          {"horizon", h.horizon}};
}

HybridAutomaton automaton_from_json(const nlohmann::json& j) {
  HybridAutomaton h;
  h.domain = json_box(j.at("domain"));
  h.init = json_box(j.at("init"));
  h.bad = json_box(j.at("bad"));
  h.horizon = j.at("horizon").get<double>();
  const int n = h.dim();
  auto vec = [](const nlohmann::json& v) {
    const auto s = v.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size())));
  };
  for (const auto& jm : j.at("modes")) {
    Mode m;
    m.config = from_bitstring(jm.at("config").get<std::string>());
    m.A.resize(n, n);
    const auto& A = jm.at("A");
    if (static_cast<int>(A.size()) != n) throw DimensionMismatch("automaton json: A rows");
    for (int r = 0; r < n; ++r) m.A.row(r) = vec(A[r]).transpose();
    m.b = vec(jm.at("b"));
    m.dist = vec(jm.at("dist"));
    m.invariant = Polyhedron(n);
    for (const auto& hs : jm.at("inv")) m.invariant.add({vec(hs.at("a")), hs.at("c").get<double>()});
    if (m.b.size() != n || m.dist.size() != n) throw DimensionMismatch("automaton json: mode vectors");
    h.modes.push_back(std::move(m));
  }
  for (const auto& jt : j.at("transitions")) {
    const int s = jt.at("src").get<int>(), d = jt.at("dst").get<int>();
    if (s < 0 || d < 0 || s >= static_cast<int>(h.modes.size()) || d >= static_cast<int>(h.modes.size()))
      throw ValidationError("automaton json: transition index");
    h.transitions.push_back({s, d, h.modes[d].invariant});
  }
  return h;
}

}  // namespace na
