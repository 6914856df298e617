#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <vector>

#include "na/box.hpp"

namespace na {

/// Interval matrix kept as midpoint and radius.
struct IntervalMatrix {
  Eigen::MatrixXd mid;
  Eigen::MatrixXd rad;
  Interval at(int i, int j) const { return {mid(i, j) - rad(i, j), mid(i, j) + rad(i, j)}; }
};

/// Feed-forward ReLU network; the output layer is affine.
class NeuralNet {
 public:
  NeuralNet() = default;
  /// dims = [n, h1, ..., hk, n]; all parameters zero.
  explicit NeuralNet(std::vector<int> dims);
  /// Uniform initialization in +-1/sqrt(fan_in) for weights and biases.
  static NeuralNet random(std::vector<int> dims, std::uint64_t seed);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  /// Number of affine layers (hidden layers + 1).
  int layers() const { return static_cast<int>(W_.size()); }
  std::vector<int> hidden() const { return {dims_.begin() + 1, dims_.end() - 1}; }
  /// Total hidden neurons.
  int neurons() const;

  Eigen::MatrixXd& weight(int i) { return W_[i]; }
  const Eigen::MatrixXd& weight(int i) const { return W_[i]; }
  Eigen::VectorXd& bias(int i) { return b_[i]; }
  const Eigen::VectorXd& bias(int i) const { return b_[i]; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  /// Column-wise forward over a batch (n x N).
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& X) const;
  Box interval_forward(const Box& x) const;
  /// Enclosure of the Jacobian over the box. The ReLU derivative is [0,1]
  /// where the pre-activation straddles 0.
  IntervalMatrix interval_jacobian(const Box& x) const;
  /// Both at once, sharing the pre-activation enclosures.
  Box interval_forward_jacobian(const Box& x, IntervalMatrix& jac) const;

  bool all_finite() const;

  nlohmann::json to_json() const;
  static NeuralNet from_json(const nlohmann::json& j);

  friend bool operator==(const NeuralNet& a, const NeuralNet& b);

 private:
  void check_shapes() const;
  std::vector<int> dims_;
  std::vector<Eigen::MatrixXd> W_;
  std::vector<Eigen::VectorXd> b_;
};

}  // namespace na
