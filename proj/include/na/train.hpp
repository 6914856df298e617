#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

#include "na/model.hpp"
#include "na/network.hpp"

namespace na {

/// Samples stored column-wise: X and F are n x N with F(:,k) = f(X(:,k)).
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::MatrixXd F;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(X.cols()); }
  void append(const Eigen::VectorXd& x, const Eigen::VectorXd& fx);
};

/// Uniform i.i.d. samples of the model domain. A point where f is
/// undefined raises ModelDomainError; there is no silent resampling.
Dataset sample_domain(const DynamicalModel& model, int count, std::uint64_t seed);

enum class StopMode { TargetError, LossThreshold };

struct TrainConfig {
  double lr = 1e-2;
  int max_epochs = 10000;
  StopMode stop = StopMode::TargetError;
  /// Per-component target on max |f_i - N_i| over the data (TargetError).
  Eigen::VectorXd target;
  /// Loss threshold (LossThreshold).
  double loss_threshold = 0.0;
  /// Estimated bound = factor * max error over the data (LossThreshold).
  double conservative_factor = 1.5;
  /// Wall-clock cap in seconds, checked every 50 epochs.
  double time_limit = std::numeric_limits<double>::infinity();
  /// Epochs between loss checkpoints in the report.
  int log_every = 100;
};

struct TrainReport {
  int epochs = 0;
  double final_loss = 0.0;
  /// max over the data of |f_i - N_i| per component, for the returned net.
  Eigen::VectorXd max_error;
  /// conservative_factor * max_error
  Eigen::VectorXd estimated_bound;
  bool reached_stop = false;
  bool timed_out = false;
  std::vector<double> checkpoints;
};

/// Mean squared 2-norm error over the data.
double mse_loss(const NeuralNet& net, const Dataset& data);
/// Parameter gradients of mse_loss, laid out like the network.
void mse_gradient(const NeuralNet& net, const Dataset& data, std::vector<Eigen::MatrixXd>& dW,
                  std::vector<Eigen::VectorXd>& db);

/// Full-batch Adam on the MSE. Deterministic. Throws NonFiniteLoss.
NeuralNet train(NeuralNet net, const Dataset& data, const TrainConfig& cfg,
                TrainReport* report = nullptr);

}  // namespace na
