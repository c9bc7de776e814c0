#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace mcbnav::nn {

/// Column-per-sample batches.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct Dense {
  Matrix weight;  // out x in
  Vector bias;
};

/// Fully connected network with ReLU hidden layers and a linear output.
class Mlp {
 public:
  struct Cache {
    /// activations[0] is the input; activations[k] the post-ReLU output of
    /// hidden layer k.
    std::vector<Matrix> activations;
  };

  Mlp() = default;
  /// Uniform fan-in initialization; the final layer is scaled by final_scale.
  Mlp(const std::vector<int>& sizes, std::mt19937_64& rng, double final_scale = 1.0);

  /// Same shapes, all zeros.
  static Mlp zeros_like(const Mlp& other);

  int input_dim() const;
  int output_dim() const;
  std::vector<int> sizes() const;
  std::size_t parameter_count() const;

  Matrix forward(const Matrix& input) const;
  Matrix forward(const Matrix& input, Cache& cache) const;

  /// Backpropagates dL/d(output). Adds parameter gradients into `grad` when
  /// non-null and returns dL/d(input).
  Matrix backward(const Cache& cache, const Matrix& grad_output, Mlp* grad) const;

  void set_zero();
  bool all_finite() const;
  double max_abs_diff(const Mlp& other) const;

  /// this <- rho * this + (1 - rho) * source, written as an increment so that
  /// equal networks stay bit-identical.
  void soft_update_from(const Mlp& source, double rho);

  /// Flat parameter views in layer order (weights column-major, then bias).
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& values);

  std::vector<Dense> layers;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& shape, AdamConfig cfg);

  void step(Mlp& params, const Mlp& grad);
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  Mlp m_;
  Mlp v_;
  std::int64_t t_ = 0;
};

class ScalarAdam {
 public:
  ScalarAdam() = default;
  explicit ScalarAdam(AdamConfig cfg) : cfg_(cfg) {}

  void step(double& param, double grad);

 private:
  AdamConfig cfg_;
  double m_ = 0.0;
  double v_ = 0.0;
  std::int64_t t_ = 0;
};

}  // namespace mcbnav::nn
