#include "na/cegis.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>

#include "na/errors.hpp"

namespace na {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<int> full_dims(const DynamicalModel& model, const std::vector<int>& hidden) {
  std::vector<int> dims{model.dim()};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(model.dim());
  return dims;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Certified: return "certified";
    case Verdict::Counterexample: return "counterexample";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

std::string to_string(FailureKind f) {
  switch (f) {
    case FailureKind::None: return "none";
    case FailureKind::IterationLimitExceeded: return "iteration_limit_exceeded";
    case FailureKind::TimeBudgetExceeded: return "time_budget_exceeded";
  }
  return "?";
}

void augment(Dataset& data, const DynamicalModel& model, const Eigen::VectorXd& cex, int n_aug,
             double sigma_rel, std::mt19937_64& rng) {
  const int n = model.dim();
  auto add = [&](const Eigen::VectorXd& x) {
    try {
      data.append(x, model.eval(x));
    } catch (const DomainError& e) {
      throw ModelDomainError(std::string("flow undefined at an augmented point: ") + e.what());
    }
  };
  add(cex);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd x(n);
  for (int k = 0; k < n_aug; ++k) {
    for (int i = 0; i < n; ++i) {
      const Interval& d = model.domain[i];
      double v = cex[i] + sigma_rel * d.width() * g(rng);
      // truncate by resampling; the final clamp only guards pathological draws
      for (int tries = 0; tries < 64 && !d.contains(v); ++tries) v = cex[i] + sigma_rel * d.width() * g(rng);
      x[i] = std::clamp(v, d.lo, d.hi);
    }
    add(x);
  }
}

SynthesisResult synthesize(const DynamicalModel& model, const std::vector<int>& hidden,
                           const ErrorBound& target, const CegisConfig& cfg, const NeuralNet* start,
                           const Dataset* data) {
  const int n = model.dim();
  if (target.e.size() != n) throw DimensionMismatch("target needs one entry per component");
  for (int i = 0; i < n; ++i)
    if (!(target.e[i] > target.delta))
      throw PreconditionError("target error must exceed the disturbance radius in every component");

  const auto t0 = Clock::now();
  const std::vector<int> dims = full_dims(model, hidden);
  SynthesisResult res;
  res.data = data ? *data : sample_domain(model, cfg.initial_samples, cfg.seed);
  NeuralNet net = start ? *start : NeuralNet::random(dims, cfg.seed);
  if (net.dims() != dims) throw DimensionMismatch("warm-start network has a different architecture");
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(res.data.size()));

  TrainConfig tc = cfg.train;
  tc.stop = StopMode::TargetError;
  tc.target = cfg.learn_factor * target.threshold();
  res.best_error = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    IterationRecord rec;
    rec.iteration = it;
    rec.dataset_size = res.data.size();
    if (since(t0) > cfg.time_budget) {
      res.failure = FailureKind::TimeBudgetExceeded;
      break;
    }

    auto tl = Clock::now();
    if (!cfg.warm_start && it > 1) net = NeuralNet::random(dims, cfg.seed + it);
    tc.time_limit = cfg.time_budget - since(t0);
    TrainReport tr;
    net = train(std::move(net), res.data, tc, &tr);
    rec.learner_s = since(tl);
    rec.epochs = tr.epochs;
    rec.loss = tr.final_loss;
    rec.train_max_error = tr.max_error;
    if (tr.max_error.norm() < res.best_error.norm()) res.best_error = tr.max_error;
    res.learner_s += rec.learner_s;

    auto tcert = Clock::now();
    CertBudget cb = cfg.cert;
    cb.time_limit = std::min(cb.time_limit, cfg.time_budget - since(t0));
    const CertResult cr = certify(model, net, target, cb);
    rec.certifier_s = since(tcert);
    rec.verdict = cr.verdict;
    rec.boxes = cr.boxes_processed;
    res.certifier_s += rec.certifier_s;

    if (cr.verdict == Verdict::Certified) {
      // Report the bound the proof actually established when it is tighter.
      ErrorBound achieved = target;
      const Eigen::VectorXd tight =
          ((cr.max_residual_upper_bound.array() + target.delta) * (1.0 + 1e-6) + 1e-12).matrix();
      achieved.e = target.e.cwiseMin(tight);
      if (achieved.e != target.e) {
        const auto t2 = Clock::now();
        if (certify(model, net, achieved, cfg.cert).verdict != Verdict::Certified) achieved = target;
        res.certifier_s += since(t2);
        rec.certifier_s += since(t2);
      }
      res.trace.push_back(rec);
      res.abstraction = NeuralAbstraction{net, achieved, model.domain, cfg.seed, it};
      res.last_net = net;
      return res;
    }
    if (cr.verdict == Verdict::Inconclusive && cr.timed_out) {
      res.trace.push_back(rec);
      res.failure = FailureKind::TimeBudgetExceeded;
      break;
    }
    const Eigen::VectorXd cex =
        cr.verdict == Verdict::Counterexample ? cr.cex : box_center(cr.worst_box);
    rec.cex = cex;
    res.trace.push_back(rec);
    augment(res.data, model, cex, cfg.n_aug, cfg.sigma_rel, rng);
    if (it == cfg.max_iterations) res.failure = FailureKind::IterationLimitExceeded;
  }
  if (res.failure == FailureKind::None) res.failure = FailureKind::IterationLimitExceeded;
  res.last_net = net;
  return res;
}

TighteningResult tighten(const DynamicalModel& model, const std::vector<int>& hidden, double eps0,
                         const CegisConfig& cfg, double shrink, int max_rounds) {
  TighteningResult out;
  double eps = eps0;
  const NeuralNet* start = nullptr;
  const Dataset* data = nullptr;
  for (int round = 0; round < max_rounds; ++round) {
    const ErrorBound target = ErrorBound::from_eps(eps, model.dim(), model.delta);
    bool valid = true;
    for (int i = 0; i < target.e.size(); ++i) valid &= target.e[i] > target.delta;
    if (!valid) break;
    out.rounds.push_back(synthesize(model, hidden, target, cfg, start, data));
    const SynthesisResult& r = out.rounds.back();
    if (!r.success()) break;
    out.best = r.abstraction;
    eps = shrink * std::min(eps, r.abstraction->bound.reported_eps());
    if (cfg.warm_start) {
      start = &r.abstraction->net;
      data = &r.data;
    }
  }
  return out;
}

nlohmann::json run_report(const DynamicalModel& model, const std::vector<int>& hidden,
                          const ErrorBound& target, const CegisConfig& cfg,
                          const SynthesisResult& res) {
  nlohmann::json j;
  j["model"] = model.name;
  j["arch"] = hidden;
  j["seed"] = cfg.seed;
  j["target_e"] = vec_json(target.e);
  j["target_eps"] = target.reported_eps();
  j["delta"] = target.delta;
  j["success"] = res.success();
  j["failure"] = to_string(res.failure);
  j["dataset_size"] = res.data.size();
  nlohmann::json its = nlohmann::json::array();
  for (const auto& r : res.trace) {
    nlohmann::json it;
    it["iteration"] = r.iteration;
    it["dataset_size"] = r.dataset_size;
    it["epochs"] = r.epochs;
    it["loss"] = r.loss;
    it["train_max_error"] = vec_json(r.train_max_error);
    it["verdict"] = to_string(r.verdict);
    it["boxes"] = r.boxes;
    it["cex"] = r.cex ? vec_json(*r.cex) : nlohmann::json(nullptr);
    its.push_back(it);
  }
  j["iterations"] = its;
  if (res.success()) {
    j["achieved_e"] = vec_json(res.abstraction->bound.e);
    j["reported_eps"] = res.abstraction->bound.reported_eps();
  } else {
    j["achieved_e"] = nullptr;
    j["reported_eps"] = nullptr;
  }
  j["best_uncertified_error"] =
      res.best_error.allFinite() ? vec_json(res.best_error) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json timing_report(const SynthesisResult& res) {
  nlohmann::json j;
  j["learner_s"] = res.learner_s;
  j["certifier_s"] = res.certifier_s;
  nlohmann::json its = nlohmann::json::array();
  for (const auto& r : res.trace) its.push_back({{"learner_s", r.learner_s}, {"certifier_s", r.certifier_s}});
  j["iterations"] = its;
  return j;
}

nlohmann::json abstraction_json(const NeuralAbstraction& a) {
  nlohmann::json dom = nlohmann::json::array();
  for (const auto& iv : a.domain) dom.push_back({iv.lo, iv.hi});
  return {{"net", a.net.to_json()},
          {"e", vec_json(a.bound.e)},
          {"delta", a.bound.delta},
          {"eps", a.bound.reported_eps()},
          {"domain", dom},
          {"seed", a.seed},
          {"iterations", a.iterations}};
}

NeuralAbstraction abstraction_from_json(const nlohmann::json& j) {
  NeuralAbstraction a;
  a.net = NeuralNet::from_json(j.at("net"));
  a.bound.e = json_vec(j.at("e"));
  a.bound.delta = j.value("delta", 0.0);
  for (const auto& p : j.at("domain")) a.domain.emplace_back(p[0].get<double>(), p[1].get<double>());
  a.seed = j.value("seed", std::uint64_t{0});
  a.iterations = j.value("iterations", 0);
  if (a.bound.e.size() != a.net.input_dim() || static_cast<int>(a.domain.size()) != a.net.input_dim())
    throw DimensionMismatch("abstraction json: dims disagree");
  return a;
}

}  // namespace na
