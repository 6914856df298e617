#include "na/network.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "na/errors.hpp"

namespace na {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

constexpr double kUnit = 0.5 * kEps;

// Sum of products with error-free transformations. Returns an interval
// that contains the exact real value; it is a point when every product
// and partial sum was exact.
class ExactSum {
 public:
  void add_product(double a, double b) {
    const double p = a * b;
    add_error(std::fma(a, b, -p));
    add(p);
  }
  void add(double x) {
    const double t = s_ + x;
    const double bp = t - s_;
    add_error((s_ - (t - bp)) + (x - bp));
    s_ = t;
    ++terms_;
  }
  Interval result() const {
    if (err_abs_ == 0.0) return Interval(s_);
    const double v = s_ + err_;
    const double bound = 2.0 * (terms_ + 2) * kUnit * err_abs_ + 2.0 * kUnit * std::fabs(v) +
                         std::numeric_limits<double>::denorm_min();
    return {v - bound, v + bound};
  }

 private:
  void add_error(double e) {
    err_ += e;
    err_abs_ += std::fabs(e);
  }
  double s_ = 0.0, err_ = 0.0, err_abs_ = 0.0;
  int terms_ = 0;
};

// Enclosure of W y + b for y in [lo, hi].
void affine_box(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, const Eigen::VectorXd& lo,
                const Eigen::VectorXd& hi, Eigen::VectorXd& out_lo, Eigen::VectorXd& out_hi) {
  out_lo.resize(W.rows());
  out_hi.resize(W.rows());
  for (int i = 0; i < W.rows(); ++i) {
    ExactSum sl, sh;
    for (int j = 0; j < W.cols(); ++j) {
      const double w = W(i, j);
      if (w == 0.0) continue;
      sl.add_product(w, w > 0.0 ? lo[j] : hi[j]);
      sh.add_product(w, w > 0.0 ? hi[j] : lo[j]);
    }
    sl.add(b[i]);
    sh.add(b[i]);
    out_lo[i] = sl.result().lo;
    out_hi[i] = sh.result().hi;
  }
}

}  // namespace

NeuralNet::NeuralNet(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw DimensionMismatch("network needs at least input and output dims");
  if (dims_.front() != dims_.back()) throw DimensionMismatch("input and output dims differ");
  for (int d : dims_)
    if (d <= 0) throw DimensionMismatch("layer dims must be positive");
  for (std::size_t i = 1; i < dims_.size(); ++i) {
    W_.push_back(Eigen::MatrixXd::Zero(dims_[i], dims_[i - 1]));
    b_.push_back(Eigen::VectorXd::Zero(dims_[i]));
  }
}

NeuralNet NeuralNet::random(std::vector<int> dims, std::uint64_t seed) {
  NeuralNet net(std::move(dims));
  std::mt19937_64 rng(seed);
  for (int l = 0; l < net.layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.W_[l].cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (int i = 0; i < net.W_[l].rows(); ++i)
      for (int j = 0; j < net.W_[l].cols(); ++j) net.W_[l](i, j) = u(rng);
    for (int i = 0; i < net.b_[l].size(); ++i) net.b_[l][i] = u(rng);
  }
  return net;
}

int NeuralNet::neurons() const {
  int h = 0;
  for (std::size_t i = 1; i + 1 < dims_.size(); ++i) h += dims_[i];
  return h;
}

Eigen::VectorXd NeuralNet::forward(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) throw DimensionMismatch("forward: input has wrong size");
  Eigen::VectorXd y = x;
  for (int l = 0; l < layers(); ++l) {
    y = W_[l] * y + b_[l];
    if (l + 1 < layers()) y = y.cwiseMax(0.0);
  }
  return y;
}

Eigen::MatrixXd NeuralNet::forward_batch(const Eigen::MatrixXd& X) const {
  if (X.rows() != input_dim()) throw DimensionMismatch("forward: input has wrong size");
  Eigen::MatrixXd Y = X;
  for (int l = 0; l < layers(); ++l) {
    Y = (W_[l] * Y).colwise() + b_[l];
    if (l + 1 < layers()) Y = Y.cwiseMax(0.0);
  }
  return Y;
}

Box NeuralNet::interval_forward(const Box& x) const {
  IntervalMatrix unused;
  return interval_forward_jacobian(x, unused);
}

IntervalMatrix NeuralNet::interval_jacobian(const Box& x) const {
  IntervalMatrix jac;
  interval_forward_jacobian(x, jac);
  return jac;
}

Box NeuralNet::interval_forward_jacobian(const Box& x, IntervalMatrix& jac) const {
  if (static_cast<int>(x.size()) != input_dim())
    throw DimensionMismatch("interval_forward: box has wrong size");
  Eigen::VectorXd lo = box_lo(x), hi = box_hi(x);

  const int n = input_dim();
  jac.mid = Eigen::MatrixXd::Identity(n, n);
  jac.rad = Eigen::MatrixXd::Zero(n, n);

  Eigen::VectorXd zl, zh;
  for (int l = 0; l < layers(); ++l) {
    affine_box(W_[l], b_[l], lo, hi, zl, zh);
    // J <- W * J
    const Eigen::MatrixXd A = W_[l].cwiseAbs();
    Eigen::MatrixXd jm = W_[l] * jac.mid;
    Eigen::MatrixXd jr = A * jac.rad;
    jr += (W_[l].cols() + 2) * kEps * (A * (jac.mid.cwiseAbs() + jac.rad) + jr);
    jac.mid = std::move(jm);
    jac.rad = std::move(jr);
    lo = std::move(zl);
    hi = std::move(zh);
    if (l + 1 == layers()) break;
    // ReLU on values and on the Jacobian rows
    for (int i = 0; i < lo.size(); ++i) {
      if (lo[i] >= 0.0) continue;
      if (hi[i] <= 0.0) {
        lo[i] = hi[i] = 0.0;
        jac.mid.row(i).setZero();
        jac.rad.row(i).setZero();
        continue;
      }
      lo[i] = 0.0;
      // hull of 0 and the row interval
      for (int j = 0; j < n; ++j) {
        const double a = std::min(0.0, jac.mid(i, j) - jac.rad(i, j));
        const double b = std::max(0.0, jac.mid(i, j) + jac.rad(i, j));
        jac.mid(i, j) = 0.5 * (a + b);
        jac.rad(i, j) = 0.5 * (b - a) * (1.0 + 2 * kEps);
      }
    }
  }
  Box out(lo.size());
  for (int i = 0; i < lo.size(); ++i) out[i] = Interval(lo[i], hi[i]);
  return out;
}

bool NeuralNet::all_finite() const {
  for (int l = 0; l < layers(); ++l)
    if (!W_[l].allFinite() || !b_[l].allFinite()) return false;
  return true;
}

nlohmann::json NeuralNet::to_json() const {
  nlohmann::json j;
  j["dims"] = dims_;
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (int l = 0; l < layers(); ++l) {
    std::vector<double> w;
    w.reserve(W_[l].size());
    for (int i = 0; i < W_[l].rows(); ++i)
      for (int k = 0; k < W_[l].cols(); ++k) w.push_back(W_[l](i, k));
    j["weights"].push_back(w);
    j["biases"].push_back(std::vector<double>(b_[l].data(), b_[l].data() + b_[l].size()));
  }
  return j;
}

NeuralNet NeuralNet::from_json(const nlohmann::json& j) {
  NeuralNet net(j.at("dims").get<std::vector<int>>());
  const auto& ws = j.at("weights");
  const auto& bs = j.at("biases");
  if (static_cast<int>(ws.size()) != net.layers() || static_cast<int>(bs.size()) != net.layers())
    throw DimensionMismatch("network json: layer count does not match dims");
  for (int l = 0; l < net.layers(); ++l) {
    const auto w = ws[l].get<std::vector<double>>();
    const auto b = bs[l].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != net.W_[l].size() ||
        static_cast<Eigen::Index>(b.size()) != net.b_[l].size())
      throw DimensionMismatch("network json: layer " + std::to_string(l) + " has wrong size");
    for (int i = 0; i < net.W_[l].rows(); ++i)
      for (int k = 0; k < net.W_[l].cols(); ++k) net.W_[l](i, k) = w[i * net.W_[l].cols() + k];
    for (int i = 0; i < net.b_[l].size(); ++i) net.b_[l][i] = b[i];
  }
  net.check_shapes();
  return net;
}

void NeuralNet::check_shapes() const {
  if (!all_finite()) throw ValidationError("network has non-finite parameters");
}

bool operator==(const NeuralNet& a, const NeuralNet& b) {
  if (a.dims_ != b.dims_) return false;
  for (int l = 0; l < a.layers(); ++l)
    if (a.W_[l] != b.W_[l] || a.b_[l] != b.b_[l]) return false;
  return true;
}

}  // namespace na
