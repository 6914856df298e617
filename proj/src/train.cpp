#include "na/train.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "na/errors.hpp"

namespace na {

void Dataset::append(const Eigen::VectorXd& x, const Eigen::VectorXd& fx) {
  if (X.cols() == 0) {
    X.resize(x.size(), 0);
    F.resize(fx.size(), 0);
  }
  X.conservativeResize(Eigen::NoChange, X.cols() + 1);
  F.conservativeResize(Eigen::NoChange, F.cols() + 1);
  X.col(X.cols() - 1) = x;
  F.col(F.cols() - 1) = fx;
}

Dataset sample_domain(const DynamicalModel& model, int count, std::uint64_t seed) {
  if (count < 1) throw PreconditionError("sample_domain: count must be >= 1");
  const int n = model.dim();
  Dataset d;
  d.seed = seed;
  d.X.resize(n, count);
  d.F.resize(n, count);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(n);
  for (int k = 0; k < count; ++k) {
    for (int i = 0; i < n; ++i) x[i] = model.domain[i].lo + model.domain[i].width() * u(rng);
    try {
      d.F.col(k) = model.eval(x);
    } catch (const DomainError& e) {
      throw ModelDomainError(std::string("flow undefined at a sampled domain point: ") + e.what());
    }
    d.X.col(k) = x;
  }
  return d;
}

namespace {

struct Activations {
  std::vector<Eigen::MatrixXd> Z;  // pre-activations per layer
  std::vector<Eigen::MatrixXd> A;  // A[0] = input, A[l+1] = relu(Z[l]) (output unclipped)
};

void forward_cache(const NeuralNet& net, const Eigen::MatrixXd& X, Activations& c) {
  const int L = net.layers();
  c.Z.resize(L);
  c.A.resize(L + 1);
  c.A[0] = X;
  for (int l = 0; l < L; ++l) {
    c.Z[l] = (net.weight(l) * c.A[l]).colwise() + net.bias(l);
    c.A[l + 1] = (l + 1 < L) ? c.Z[l].cwiseMax(0.0) : c.Z[l];
  }
}

void backward(const NeuralNet& net, const Activations& c, const Eigen::MatrixXd& dY,
              std::vector<Eigen::MatrixXd>& dW, std::vector<Eigen::VectorXd>& db) {
  const int L = net.layers();
  dW.resize(L);
  db.resize(L);
  Eigen::MatrixXd dZ = dY;
  for (int l = L - 1; l >= 0; --l) {
    dW[l].noalias() = dZ * c.A[l].transpose();
    db[l] = dZ.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd dA = net.weight(l).transpose() * dZ;
    dZ = dA.cwiseProduct((c.Z[l - 1].array() > 0.0).cast<double>().matrix());
  }
}

}  // namespace

double mse_loss(const NeuralNet& net, const Dataset& data) {
  const Eigen::MatrixXd R = net.forward_batch(data.X) - data.F;
  return R.colwise().squaredNorm().sum() / data.size();
}

void mse_gradient(const NeuralNet& net, const Dataset& data, std::vector<Eigen::MatrixXd>& dW,
                  std::vector<Eigen::VectorXd>& db) {
  Activations c;
  forward_cache(net, data.X, c);
  const Eigen::MatrixXd dY = (2.0 / data.size()) * (c.A.back() - data.F);
  backward(net, c, dY, dW, db);
}

NeuralNet train(NeuralNet net, const Dataset& data, const TrainConfig& cfg, TrainReport* report) {
  if (data.size() == 0) throw PreconditionError("train: empty dataset");
  if (data.X.rows() != net.input_dim()) throw DimensionMismatch("train: data dim != network dim");
  const int L = net.layers();
  const int n = net.output_dim();
  if (cfg.stop == StopMode::TargetError && cfg.target.size() != n)
    throw DimensionMismatch("train: target needs one entry per component");

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<Eigen::MatrixXd> mW(L), vW(L), dW;
  std::vector<Eigen::VectorXd> mb(L), vb(L), db;
  for (int l = 0; l < L; ++l) {
    mW[l] = Eigen::MatrixXd::Zero(net.weight(l).rows(), net.weight(l).cols());
    vW[l] = mW[l];
    mb[l] = Eigen::VectorXd::Zero(net.bias(l).size());
    vb[l] = mb[l];
  }

  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  TrainReport rep;
  Activations c;
  double b1t = 1.0, b2t = 1.0;
  const double inv_n = 1.0 / data.size();
  int epoch = 0;
  for (;; ++epoch) {
    forward_cache(net, data.X, c);
    const Eigen::MatrixXd R = c.A.back() - data.F;
    const double loss = R.colwise().squaredNorm().sum() * inv_n;
    if (!std::isfinite(loss)) throw NonFiniteLoss("training loss became non-finite at epoch " +
                                                  std::to_string(epoch));
    rep.final_loss = loss;
    rep.max_error = R.cwiseAbs().rowwise().maxCoeff();
    if (cfg.log_every > 0 && epoch % cfg.log_every == 0) rep.checkpoints.push_back(loss);

    bool done = false;
    if (cfg.stop == StopMode::TargetError) {
      done = (rep.max_error.array() <= cfg.target.array()).all();
    } else {
      done = loss <= cfg.loss_threshold;
    }
    if (done) {
      rep.reached_stop = true;
      break;
    }
    if (epoch >= cfg.max_epochs) break;
    if (epoch % 50 == 49 &&
        std::chrono::duration<double>(Clock::now() - t0).count() > cfg.time_limit) {
      rep.timed_out = true;
      break;
    }

    backward(net, c, 2.0 * inv_n * R, dW, db);
    b1t *= beta1;
    b2t *= beta2;
    const double step = cfg.lr * std::sqrt(1.0 - b2t) / (1.0 - b1t);
    for (int l = 0; l < L; ++l) {
      mW[l] = beta1 * mW[l] + (1.0 - beta1) * dW[l];
      vW[l] = beta2 * vW[l] + (1.0 - beta2) * dW[l].cwiseAbs2();
      net.weight(l).array() -= step * mW[l].array() / (vW[l].array().sqrt() + eps);
      mb[l] = beta1 * mb[l] + (1.0 - beta1) * db[l];
      vb[l] = beta2 * vb[l] + (1.0 - beta2) * db[l].cwiseAbs2();
      net.bias(l).array() -= step * mb[l].array() / (vb[l].array().sqrt() + eps);
    }
  }
  rep.epochs = epoch;
  rep.estimated_bound = cfg.conservative_factor * rep.max_error;
  if (report) *report = std::move(rep);
  return net;
}

}  // namespace na
