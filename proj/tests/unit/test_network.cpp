#include <doctest.h>

#include <cmath>
#include <random>

#include "na/errors.hpp"
#include "na/train.hpp"

using namespace na;

namespace {

NeuralNet tiny(double w1, double b1, double w2, double b2) {
  NeuralNet net({1, 1, 1});
  net.weight(0)(0, 0) = w1;
  net.bias(0)[0] = b1;
  net.weight(1)(0, 0) = w2;
  net.bias(1)[0] = b2;
  return net;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

DynamicalModel affine_model() {
  return parse_model(
      "vars = [\"x\"]\nflow = [\"2*x + 1\"]\ndomain = [[-1, 1]]\n"
      "init = [[0, 0.1]]\nbad = [[0.9, 1]]\nhorizon = 1\n");
}

Eigen::VectorXd uniform_in(std::mt19937_64& rng, const Box& b) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) x[i] = b[i].lo + b[i].width() * u(rng);
  return x;
}

}  // namespace

TEST_CASE("forward on hand-built nets") {
  const NeuralNet id = tiny(1, 0, 1, 0);
  CHECK(id.forward(vec({-2.0}))[0] == 0.0);
  CHECK(id.forward(vec({3.0}))[0] == 3.0);
  const NeuralNet c = tiny(0, 0, 0, 0.7);
  CHECK(c.forward(vec({-5.0}))[0] == 0.7);
  CHECK(c.forward(vec({12.0}))[0] == 0.7);
  CHECK_THROWS_AS(id.forward(vec({1.0, 2.0})), DimensionMismatch);
}

TEST_CASE("interval_forward on hand-built nets") {
  const Box r = tiny(1, 0, 1, 0).interval_forward(Box{{-1.0, 2.0}});
  CHECK(r[0].lo <= 0.0);
  CHECK(r[0].lo >= -1e-12);
  CHECK(r[0].hi >= 2.0);
  CHECK(r[0].hi <= 2.0 + 1e-12);
  const Box c = tiny(0, 0, 0, 0.7).interval_forward(Box{{-3.0, 5.0}});
  CHECK(c[0].lo == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(c[0].hi == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(c[0].contains(0.7));
}

TEST_CASE("interval_forward and interval_jacobian contain sampled values") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const NeuralNet net = NeuralNet::random({2, 8, 2}, 100 + trial);
    Box box{{-1.0, 1.0}, {-1.0, 1.0}};
    if (trial % 2) {
      const double a = u(rng), b = u(rng);
      box = {{a, a + 0.2}, {b, b + 0.1}};
    }
    IntervalMatrix J;
    const Box enc = net.interval_forward_jacobian(box, J);
    for (int k = 0; k < 1000; ++k) {
      const Eigen::VectorXd x = uniform_in(rng, box);
      const Eigen::VectorXd y = net.forward(x);
      for (int i = 0; i < 2; ++i) REQUIRE(enc[i].contains(y[i]));
      if (k % 50 == 0) {
        for (int j = 0; j < 2; ++j) {
          const double h = 1e-7;
          Eigen::VectorXd xp = x, xm = x;
          xp[j] += h;
          xm[j] -= h;
          const Eigen::VectorXd fd = (net.forward(xp) - net.forward(xm)) / (2 * h);
          for (int i = 0; i < 2; ++i) {
            // one-sided kinks can average two slopes; both lie in the hull
            CHECK(fd[i] >= J.at(i, j).lo - 1e-6);
            CHECK(fd[i] <= J.at(i, j).hi + 1e-6);
          }
        }
      }
    }
  }
}

TEST_CASE("forward is affine inside an activation region") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const NeuralNet net = NeuralNet::random({2, 10, 10, 2}, trial);
    const Eigen::VectorXd x = uniform_in(rng, Box{{-1.0, 1.0}, {-1.0, 1.0}});
    Eigen::VectorXd d(2);
    d << g(rng), g(rng);
    d.normalize();
    const double h = 1e-6;
    const Eigen::VectorXd second =
        net.forward(x + h * d) - 2.0 * net.forward(x) + net.forward(x - h * d);
    // kinks within h of x are rare; allow them by checking three collinear
    // points on each side too
    const Eigen::VectorXd second2 =
        net.forward(x + 2 * h * d) - 2.0 * net.forward(x + h * d) + net.forward(x);
    CHECK((second.cwiseAbs().maxCoeff() <= 1e-9 || second2.cwiseAbs().maxCoeff() <= 1e-9));
  }
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int compared = 0;
  for (int trial = 0; trial < 20; ++trial) {
    NeuralNet net = NeuralNet::random({2, 4, 2}, 40 + trial);
    Dataset data;
    for (int k = 0; k < 30; ++k) {
      const Eigen::VectorXd x = vec({u(rng), u(rng)});
      data.append(x, vec({std::sin(x[0]), x[0] * x[1]}));
    }
    // skip nets with a pre-activation near 0 on some sample
    const Eigen::MatrixXd Z = (net.weight(0) * data.X).colwise() + net.bias(0);
    if (Z.cwiseAbs().minCoeff() < 1e-3) continue;

    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
    mse_gradient(net, data, dW, db);
    const double h = 1e-5;
    for (int l = 0; l < net.layers(); ++l) {
      for (int i = 0; i < net.weight(l).rows(); ++i) {
        for (int j = 0; j < net.weight(l).cols(); ++j) {
          const double keep = net.weight(l)(i, j);
          net.weight(l)(i, j) = keep + h;
          const double lp = mse_loss(net, data);
          net.weight(l)(i, j) = keep - h;
          const double lm = mse_loss(net, data);
          net.weight(l)(i, j) = keep;
          const double fd = (lp - lm) / (2 * h);
          CHECK(dW[l](i, j) == doctest::Approx(fd).epsilon(1e-4).scale(1e-6));
          ++compared;
        }
        const double keep = net.bias(l)[i];
        net.bias(l)[i] = keep + h;
        const double lp = mse_loss(net, data);
        net.bias(l)[i] = keep - h;
        const double lm = mse_loss(net, data);
        net.bias(l)[i] = keep;
        CHECK(db[l][i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4).scale(1e-6));
      }
    }
  }
  CHECK(compared > 0);
}

TEST_CASE("sample_domain") {
  const DynamicalModel jet = load_model(NA_MODELS_DIR "/jet.model");
  const Dataset a = sample_domain(jet, 1000, 42);
  const Dataset b = sample_domain(jet, 1000, 42);
  CHECK(a.size() == 1000);
  CHECK(a.X == b.X);
  CHECK(a.F == b.F);
  for (int k = 0; k < a.size(); ++k) CHECK(box_contains(jet.domain, Eigen::VectorXd(a.X.col(k))));

  const DynamicalModel water = load_model(NA_MODELS_DIR "/water.model");
  const Dataset w = sample_domain(water, 500, 1);
  CHECK(w.X.minCoeff() >= 0.0);

  const Dataset big = sample_domain(jet, 10000, 7);
  const Eigen::VectorXd mean = big.X.rowwise().mean();
  CHECK(std::fabs(mean[0]) <= 0.05);
  CHECK(std::fabs(mean[1]) <= 0.05);
}

TEST_CASE("training fits an affine target") {
  const DynamicalModel m = affine_model();
  const Dataset data = sample_domain(m, 1000, 3);
  TrainConfig cfg;
  cfg.target = vec({0.9e-3});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainReport rep;
    const NeuralNet net = train(NeuralNet::random({1, 8, 1}, seed), data, cfg, &rep);
    CHECK(rep.reached_stop);
    // independent recomputation of the max error over S
    double worst = 0.0;
    for (int k = 0; k < data.size(); ++k) {
      const double x = data.X(0, k);
      worst = std::max(worst, std::fabs(net.forward(vec({x}))[0] - (2 * x + 1)));
    }
    CHECK(worst < 1e-3);
    CHECK(worst == doctest::Approx(rep.max_error[0]).epsilon(1e-9));
  }
}

TEST_CASE("zero epochs leaves the net unchanged") {
  const DynamicalModel m = affine_model();
  const Dataset data = sample_domain(m, 100, 3);
  TrainConfig cfg;
  cfg.max_epochs = 0;
  cfg.target = vec({0.0});
  const NeuralNet start = NeuralNet::random({1, 8, 1}, 9);
  CHECK(train(start, data, cfg) == start);
}

TEST_CASE("divergent learning rate is reported") {
  const DynamicalModel m = affine_model();
  const Dataset data = sample_domain(m, 100, 3);
  TrainConfig cfg;
  cfg.lr = 1e300;
  cfg.max_epochs = 50;
  cfg.target = vec({0.0});
  CHECK_THROWS_AS(train(NeuralNet::random({1, 8, 1}, 9), data, cfg), NonFiniteLoss);
}

TEST_CASE("jet training loss decreases across checkpoints") {
  const DynamicalModel jet = load_model(NA_MODELS_DIR "/jet.model");
  int good = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const Dataset data = sample_domain(jet, 1000, seed);
    TrainConfig cfg;
    cfg.max_epochs = 900;
    cfg.target = vec({0.0, 0.0});
    TrainReport rep;
    train(NeuralNet::random({2, 10, 16, 2}, seed), data, cfg, &rep);
    REQUIRE(rep.checkpoints.size() >= 10);
    bool decreasing = true;
    for (int k = 1; k < 10; ++k) decreasing &= rep.checkpoints[k] < rep.checkpoints[k - 1];
    good += decreasing;
  }
  CHECK(good >= 9);
}

TEST_CASE("network json round trip is exact") {
  const NeuralNet net = NeuralNet::random({3, 5, 4, 3}, 77);
  const auto j = net.to_json();
  CHECK(NeuralNet::from_json(nlohmann::json::parse(j.dump())) == net);
  CHECK(j["weights"][0].size() == 15);
}
