#include "mcbnav/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace mcbnav::nn {

Mlp::Mlp(const std::vector<int>& sizes, std::mt19937_64& rng, double final_scale) {
  if (sizes.size() < 2) throw std::invalid_argument("an MLP needs at least two layer sizes");
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const int in = sizes[k];
    const int out = sizes[k + 1];
    if (in <= 0 || out <= 0) throw std::invalid_argument("layer sizes must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Dense layer{Matrix(out, in), Vector(out)};
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = u(rng);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = u(rng);
    if (k + 2 == sizes.size()) {
      layer.weight *= final_scale;
      layer.bias *= final_scale;
    }
    layers.push_back(std::move(layer));
  }
}

Mlp Mlp::zeros_like(const Mlp& other) {
  Mlp z = other;
  z.set_zero();
  return z;
}

int Mlp::input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
int Mlp::output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

std::vector<int> Mlp::sizes() const {
  std::vector<int> s;
  if (layers.empty()) return s;
  s.push_back(input_dim());
  for (const Dense& l : layers) s.push_back(static_cast<int>(l.weight.rows()));
  return s;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Dense& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Matrix Mlp::forward(const Matrix& input) const {
  Matrix x = input;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Matrix z = layers[k].weight * x;
    z.colwise() += layers[k].bias;
    if (k + 1 < layers.size()) z = z.cwiseMax(0.0);
    x = std::move(z);
  }
  return x;
}

Matrix Mlp::forward(const Matrix& input, Cache& cache) const {
  cache.activations.clear();
  cache.activations.push_back(input);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Matrix z = layers[k].weight * cache.activations.back();
    z.colwise() += layers[k].bias;
    if (k + 1 == layers.size()) return z;
    cache.activations.push_back(z.cwiseMax(0.0));
  }
  return input;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& grad_output, Mlp* grad) const {
  Matrix delta = grad_output;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const Matrix& a_in = cache.activations[k];
    if (grad != nullptr) {
      grad->layers[k].weight.noalias() += delta * a_in.transpose();
      grad->layers[k].bias += delta.rowwise().sum();
    }
    Matrix upstream = layers[k].weight.transpose() * delta;
    if (k > 0) {
      // ReLU derivative: active iff the post-activation is positive.
      upstream = (a_in.array() > 0.0).select(upstream, 0.0);
    }
    delta = std::move(upstream);
  }
  return delta;
}

void Mlp::set_zero() {
  for (Dense& l : layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

bool Mlp::all_finite() const {
  for (const Dense& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

double Mlp::max_abs_diff(const Mlp& other) const {
  double d = 0.0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    d = std::max(d, (layers[k].weight - other.layers[k].weight).cwiseAbs().maxCoeff());
    d = std::max(d, (layers[k].bias - other.layers[k].bias).cwiseAbs().maxCoeff());
  }
  return d;
}

void Mlp::soft_update_from(const Mlp& source, double rho) {
  const double step = 1.0 - rho;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weight += step * (source.layers[k].weight - layers[k].weight);
    layers[k].bias += step * (source.layers[k].bias - layers[k].bias);
  }
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const Dense& l : layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

void Mlp::unflatten(const std::vector<double>& values) {
  if (values.size() != parameter_count()) {
    throw std::invalid_argument("parameter vector size does not match the network");
  }
  std::size_t pos = 0;
  for (Dense& l : layers) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), l.weight.size(), l.weight.data());
    pos += static_cast<std::size_t>(l.weight.size());
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), l.bias.size(), l.bias.data());
    pos += static_cast<std::size_t>(l.bias.size());
  }
}

Adam::Adam(const Mlp& shape, AdamConfig cfg)
    : cfg_(cfg), m_(Mlp::zeros_like(shape)), v_(Mlp::zeros_like(shape)) {}

void Adam::step(Mlp& params, const Mlp& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double step = cfg_.lr * std::sqrt(c2) / c1;
  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m.array() = cfg_.beta1 * m.array() + (1.0 - cfg_.beta1) * g.array();
    v.array() = cfg_.beta2 * v.array() + (1.0 - cfg_.beta2) * g.array().square();
    p.array() -= step * m.array() / (v.array().sqrt() + cfg_.eps * std::sqrt(c2));
  };
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    update(params.layers[k].weight, m_.layers[k].weight, v_.layers[k].weight, grad.layers[k].weight);
    update(params.layers[k].bias, m_.layers[k].bias, v_.layers[k].bias, grad.layers[k].bias);
  }
}

void ScalarAdam::step(double& param, double grad) {
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad * grad;
  const double m_hat = m_ / (1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
  const double v_hat = v_ / (1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
  param -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
}

}  // namespace mcbnav::nn
