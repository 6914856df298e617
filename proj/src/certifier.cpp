#include "na/certifier.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <queue>
#include <thread>

#include "na/errors.hpp"

namespace na {

ErrorBound ErrorBound::from_eps(double eps, int n, double delta) {
  ErrorBound b;
  b.e = Eigen::VectorXd::Constant(n, eps / std::sqrt(static_cast<double>(n)));
  b.delta = delta;
  return b;
}

nlohmann::json CertResult::proof_json() const {
  nlohmann::json leaves = nlohmann::json::array();
  for (const auto& leaf : proof) {
    nlohmann::json b = nlohmann::json::array(), r = nlohmann::json::array();
    for (const auto& iv : leaf.box) b.push_back({iv.lo, iv.hi});
    for (const auto& iv : leaf.residual) r.push_back({iv.lo, iv.hi});
    leaves.push_back({{"box", b}, {"residual", r}});
  }
  return leaves;
}

int pick_split(const Box& box, std::span<const double> sensitivity,
               std::span<const double> min_width) {
  int best = -1, widest = -1;
  double best_score = 0.0, widest_w = 0.0;
  for (std::size_t j = 0; j < box.size(); ++j) {
    const double w = box[j].width();
    if (!(w > min_width[j])) continue;
    const double score = w * sensitivity[j];
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(j);
    }
    if (w > widest_w) {
      widest_w = w;
      widest = static_cast<int>(j);
    }
  }
  if (widest < 0) throw DegenerateBox("box is below the minimum width on every axis");
  return best >= 0 ? best : widest;
}

// ---------------------------------------------------------------------------
// Residual evaluators

namespace {

// f - g for an approximator g given through value and Jacobian enclosures.
class FlowResidual : public ResidualEvaluator {
 public:
  explicit FlowResidual(const DynamicalModel& model) : model_(model) {
    const int n = model.dim();
    for (const auto& e : model.flow) evs_.emplace_back(e, n);
    grad_.resize(n);
    ok_.resize(n);
  }

  Eigen::VectorXd point(const Eigen::VectorXd& x) override { return model_.eval(x) - g_point(x); }

  void enclose(const Box& box, IntervalVector& r, std::vector<double>& sens) override {
    const int n = model_.dim();
    r.resize(n);
    sens.assign(n, 0.0);
    Box M(n), D(n);
    for (int j = 0; j < n; ++j) {
      const double m = box[j].mid();
      M[j] = Interval(m);
      D[j] = box[j] - Interval(m);
    }
    IntervalMatrix J;
    const Box G = g_enclose(box, J);
    const Box Gm = g_enclose(M, Jm_);
    for (int i = 0; i < n; ++i) {
      const Interval fx = evs_[i].value_and_gradient(box, grad_, std::span<char>(ok_));
      const Interval nat = fx - G[i];
      bool all_ok = true;
      Interval mv = evs_[i].value(M) - Gm[i];
      for (int j = 0; j < n; ++j) {
        if (!ok_[j]) {
          all_ok = false;
          sens[j] = std::numeric_limits<double>::infinity();
          continue;
        }
        const Interval dj = grad_[j] - J.at(i, j);
        sens[j] += dj.mag();
        mv = mv + dj * D[j];
      }
      r[i] = nat;
      if (all_ok) {
        const Interval both = intersect(nat, mv);
        if (!is_empty(both)) r[i] = both;
      }
    }
  }

 protected:
  virtual Eigen::VectorXd g_point(const Eigen::VectorXd& x) = 0;
  virtual Box g_enclose(const Box& box, IntervalMatrix& jac) = 0;

 private:
  const DynamicalModel& model_;
  std::vector<IntervalEvaluator> evs_;
  std::vector<Interval> grad_;
  std::vector<char> ok_;
  IntervalMatrix Jm_;
};

class NetResidual final : public FlowResidual {
 public:
  NetResidual(const DynamicalModel& model, const NeuralNet& net) : FlowResidual(model), net_(net) {}

 protected:
  Eigen::VectorXd g_point(const Eigen::VectorXd& x) override { return net_.forward(x); }
  Box g_enclose(const Box& box, IntervalMatrix& jac) override {
    return net_.interval_forward_jacobian(box, jac);
  }

 private:
  NeuralNet net_;
};

class AffineResidual final : public FlowResidual {
 public:
  AffineResidual(const DynamicalModel& model, const Eigen::MatrixXd& A, const Eigen::VectorXd& b)
      : FlowResidual(model), A_(A), b_(b) {}

 protected:
  Eigen::VectorXd g_point(const Eigen::VectorXd& x) override { return A_ * x + b_; }
  Box g_enclose(const Box& box, IntervalMatrix& jac) override {
    jac.mid = A_;
    jac.rad = Eigen::MatrixXd::Zero(A_.rows(), A_.cols());
    Box out(A_.rows());
    for (int i = 0; i < A_.rows(); ++i) {
      Interval s(b_[i]);
      for (int j = 0; j < A_.cols(); ++j) s = s + scale(A_(i, j), box[j]);
      out[i] = s;
    }
    return out;
  }

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
};

}  // namespace

std::unique_ptr<ResidualEvaluator> make_net_residual(const DynamicalModel& model,
                                                     const NeuralNet& net) {
  if (net.input_dim() != model.dim()) throw DimensionMismatch("network and model dims differ");
  return std::make_unique<NetResidual>(model, net);
}

std::unique_ptr<ResidualEvaluator> make_affine_residual(const DynamicalModel& model,
                                                        const Eigen::MatrixXd& A,
                                                        const Eigen::VectorXd& b) {
  return std::make_unique<AffineResidual>(model, A, b);
}

// ---------------------------------------------------------------------------
// Branch and bound

namespace {

using Clock = std::chrono::steady_clock;

struct Item {
  double key;
  long long seq;
  Box box;
  IntervalVector parent;  // enclosure of the parent box, sound for this one
};

struct ItemOrder {
  bool operator()(const Item& a, const Item& b) const {
    if (a.key != b.key) return a.key < b.key;
    return a.seq > b.seq;
  }
};

using Queue = std::priority_queue<Item, std::vector<Item>, ItemOrder>;

struct Evaluated {
  IntervalVector r;
  std::vector<double> sens;
};

class BatchEvaluator {
 public:
  BatchEvaluator(const EvaluatorFactory& make, int threads) {
    threads_ = std::max(1, threads);
    for (int t = 0; t < threads_; ++t) evs_.push_back(make());
  }

  ResidualEvaluator& main() { return *evs_[0]; }

  void run(const std::vector<Item>& batch, std::vector<Evaluated>& out) {
    out.resize(batch.size());
    const int workers = std::min<int>(threads_, static_cast<int>(batch.size()));
    if (workers <= 1) {
      for (std::size_t k = 0; k < batch.size(); ++k) evs_[0]->enclose(batch[k].box, out[k].r, out[k].sens);
      return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
          try {
            for (std::size_t k = t; k < batch.size(); k += workers)
              evs_[t]->enclose(batch[k].box, out[k].r, out[k].sens);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

 private:
  int threads_;
  std::vector<std::unique_ptr<ResidualEvaluator>> evs_;
};

bool box_misses(const Polyhedron& region, const Box& box) {
  bool straddles = false;
  for (const auto& h : region.halfspaces()) {
    Interval s(0.0);
    for (int j = 0; j < h.a.size(); ++j) s = s + scale(h.a[j], box[j]);
    const double tol = 1e-12 * (1.0 + std::fabs(h.c));
    if (s.lo > h.c + tol) return true;
    straddles |= s.hi > h.c + tol;
  }
  // a box can clear every facet separately and still miss the region
  return straddles && !lp_feasible(region.intersect(Polyhedron::from_box(box))).feasible;
}

// Midpoint first, then corners in binary order.
std::vector<Eigen::VectorXd> candidates(const Box& box) {
  const int n = static_cast<int>(box.size());
  std::vector<Eigen::VectorXd> out;
  out.push_back(box_center(box));
  for (int mask = 0; mask < (1 << n); ++mask) {
    Eigen::VectorXd c(n);
    for (int j = 0; j < n; ++j) c[j] = (mask >> j) & 1 ? box[j].hi : box[j].lo;
    out.push_back(c);
  }
  return out;
}

std::vector<double> min_widths(const Box& domain, double rel) {
  std::vector<double> w(domain.size());
  for (std::size_t j = 0; j < domain.size(); ++j) w[j] = rel * domain[j].width();
  return w;
}

std::pair<Box, Box> split(const Box& box, int axis) {
  Box a = box, b = box;
  const double m = box[axis].mid();
  a[axis].hi = m;
  b[axis].lo = m;
  return {a, b};
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

CertResult certify_residual(const ResidualProblem& prob, const Eigen::VectorXd& threshold,
                            const CertBudget& budget) {
  const int n = static_cast<int>(prob.domain.size());
  if (threshold.size() != n) throw DimensionMismatch("threshold needs one entry per component");
  for (int i = 0; i < n; ++i)
    if (!(threshold[i] > 0.0)) throw PreconditionError("certify: every e_i must exceed delta");

  const auto t0 = Clock::now();
  const std::vector<double> minw = min_widths(prob.domain, budget.min_width_rel);
  BatchEvaluator evals(prob.make, budget.threads);

  CertResult res;
  res.max_residual_upper_bound = Eigen::VectorXd::Zero(n);
  Queue queue;
  long long seq = 0;
  queue.push({std::numeric_limits<double>::infinity(), seq++, prob.domain, {}});

  std::vector<Item> batch;
  std::vector<Evaluated> out;
  while (!queue.empty()) {
    if (seconds_since(t0) > budget.time_limit) {
      res.verdict = Verdict::Inconclusive;
      res.timed_out = true;
      res.worst_box = queue.top().box;
      return res;
    }
    if (res.boxes_processed >= budget.max_boxes) {
      res.verdict = Verdict::Inconclusive;
      res.worst_box = queue.top().box;
      return res;
    }
    batch.clear();
    const long long room = budget.max_boxes - res.boxes_processed;
    while (!queue.empty() && static_cast<long long>(batch.size()) < std::min<long long>(budget.batch, room)) {
      batch.push_back(std::move(const_cast<Item&>(queue.top())));
      queue.pop();
    }
    evals.run(batch, out);

    std::vector<Item> children;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      ++res.boxes_processed;
      const Box& box = batch[k].box;
      if (prob.region && box_misses(*prob.region, box)) continue;
      const IntervalVector& R = out[k].r;
      double excess = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) excess = std::max(excess, (R[i].mag() - threshold[i]) / threshold[i]);
      if (excess <= 0.0) {
        for (int i = 0; i < n; ++i)
          res.max_residual_upper_bound[i] = std::max(res.max_residual_upper_bound[i], R[i].mag());
        if (budget.keep_proof) res.proof.push_back({box, R});
        continue;
      }
      for (const auto& c : candidates(box)) {
        if (prob.region && !prob.region->contains(c, 1e-12)) continue;
        Eigen::VectorXd r;
        try {
          r = evals.main().point(c);
        } catch (const DomainError&) {
          continue;
        }
        std::vector<int> violated;
        for (int i = 0; i < n; ++i)
          if (std::fabs(r[i]) > threshold[i]) violated.push_back(i);
        if (!violated.empty()) {
          res.verdict = Verdict::Counterexample;
          res.cex = c;
          res.violated = std::move(violated);
          return res;
        }
      }
      int axis;
      try {
        axis = pick_split(box, out[k].sens, minw);
      } catch (const DegenerateBox&) {
        res.verdict = Verdict::Inconclusive;
        res.worst_box = box;
        return res;
      }
      auto [a, b] = split(box, axis);
      children.push_back({excess, 0, std::move(a), R});
      children.push_back({excess, 0, std::move(b), R});
    }
    for (auto& c : children) {
      c.seq = seq++;
      queue.push(std::move(c));
    }
  }
  res.verdict = Verdict::Certified;
  return res;
}

CertResult certify(const DynamicalModel& model, const NeuralNet& net, const ErrorBound& target,
                   const CertBudget& budget) {
  if (target.e.size() != model.dim()) throw DimensionMismatch("error bound has wrong size");
  ResidualProblem prob;
  prob.domain = model.domain;
  prob.make = [&model, &net] { return make_net_residual(model, net); };
  return certify_residual(prob, target.threshold(), budget);
}

BoundResult bound_residual(const ResidualProblem& prob, double rel_gap, double abs_gap,
                           const CertBudget& budget) {
  const int n = static_cast<int>(prob.domain.size());
  const std::vector<double> minw = min_widths(prob.domain, budget.min_width_rel);
  BatchEvaluator evals(prob.make, budget.threads);

  BoundResult res;
  res.upper = Eigen::VectorXd::Zero(n);
  res.lower = Eigen::VectorXd::Zero(n);
  auto observe = [&](const Eigen::VectorXd& x) {
    if (prob.region && !prob.region->contains(x, 1e-12)) return;
    Eigen::VectorXd r;
    try {
      r = evals.main().point(x);
    } catch (const DomainError&) {
      return;
    }
    res.lower = res.lower.cwiseMax(r.cwiseAbs());
  };
  for (const auto& s : prob.seeds) observe(s);
  observe(box_center(prob.domain));

  auto resolved = [&](const IntervalVector& R) {
    for (int i = 0; i < n; ++i)
      if (R[i].mag() > std::max(res.lower[i] * (1.0 + rel_gap), res.lower[i] + abs_gap)) return false;
    return true;
  };
  auto absorb = [&](const IntervalVector& R) {
    for (int i = 0; i < n; ++i) res.upper[i] = std::max(res.upper[i], R[i].mag());
  };

  Queue queue;
  long long seq = 0;
  queue.push({std::numeric_limits<double>::infinity(), seq++, prob.domain, {}});
  std::vector<Item> batch;
  std::vector<Evaluated> out;
  while (!queue.empty()) {
    if (res.boxes_processed >= budget.max_boxes) {
      // parents' enclosures still bound the unexplored boxes
      res.complete = false;
      while (!queue.empty()) {
        absorb(queue.top().parent);
        queue.pop();
      }
      break;
    }
    batch.clear();
    const long long room = budget.max_boxes - res.boxes_processed;
    while (!queue.empty() && static_cast<long long>(batch.size()) < std::min<long long>(budget.batch, room)) {
      batch.push_back(std::move(const_cast<Item&>(queue.top())));
      queue.pop();
    }
    evals.run(batch, out);
    std::vector<Item> children;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      ++res.boxes_processed;
      const Box& box = batch[k].box;
      if (prob.region && box_misses(*prob.region, box)) continue;
      const IntervalVector& R = out[k].r;
      if (resolved(R)) {
        absorb(R);
        continue;
      }
      for (const auto& c : candidates(box)) observe(c);
      if (resolved(R)) {
        absorb(R);
        continue;
      }
      int axis;
      try {
        axis = pick_split(box, out[k].sens, minw);
      } catch (const DegenerateBox&) {
        absorb(R);
        continue;
      }
      double key = 0.0;
      for (int i = 0; i < n; ++i) key = std::max(key, R[i].mag() / (res.lower[i] + abs_gap + 1e-300));
      auto [a, b] = split(box, axis);
      children.push_back({key, 0, std::move(a), R});
      children.push_back({key, 0, std::move(b), R});
    }
    for (auto& c : children) {
      c.seq = seq++;
      queue.push(std::move(c));
    }
  }
  res.upper = res.upper.cwiseMax(res.lower);
  return res;
}

}  // namespace na
