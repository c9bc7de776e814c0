#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "mcbnav/mlp.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("mcbnav_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path_.string() : (path_ / child).string();
  }

 private:
  std::filesystem::path path_;
};

/// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero gradients from
/// turning finite-difference roundoff into large ratios.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Smallest |pre-activation| over every hidden unit for the given input.
inline double min_hidden_margin(const mcbnav::nn::Mlp& net, const mcbnav::nn::Matrix& x) {
  double margin = 1e300;
  mcbnav::nn::Matrix a = x;
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    mcbnav::nn::Matrix z = net.layers[k].weight * a;
    z.colwise() += net.layers[k].bias;
    margin = std::min(margin, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return margin;
}

}  // namespace testing
