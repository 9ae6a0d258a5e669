#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "xnav/saliency/frame.hpp"

namespace xnav {

inline constexpr int kNumClasses = 4;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames{
    "clear_path", "person_ahead", "group_conversing", "obstacle"};

std::string_view class_name(int c);

/// K stacked feature maps of equal size, row-major per map.
struct FeatureMaps {
  int channels{0};
  int height{0};
  int width{0};
  std::vector<double> data;

  FeatureMaps() = default;
  FeatureMaps(int k, int h, int w) : channels(k), height(h), width(w), data(static_cast<std::size_t>(k) * h * w, 0.0) {}

  double& at(int k, int i, int j) { return data[(static_cast<std::size_t>(k) * height + i) * width + j]; }
  double at(int k, int i, int j) const { return data[(static_cast<std::size_t>(k) * height + i) * width + j]; }
  /// Global average of map k.
  double gap(int k) const;
};

struct ConvLayer {
  int in_channels{0};
  int out_channels{0};
  std::vector<double> weights;  // [out][in][3][3]
  std::vector<double> biases;   // [out]

  double& w(int o, int i, int ky, int kx) {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * 3 + ky) * 3 + kx];
  }
  double w(int o, int i, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * 3 + ky) * 3 + kx];
  }
};

struct ForwardResult {
  FeatureMaps maps;
  std::array<double, kNumClasses> scores{};
};

/// Two 3x3 stride-2 conv layers with ReLU (3->8->8 channels), global
/// average pooling and a linear classifier. 64x64 input gives 16x16 maps.
///
/// Weights are a fixed colour-detector layout plus seeded noise, frozen at
/// construction. Conv biases are zero.
class TinyCnn {
 public:
  static constexpr int kInput = 64;
  static constexpr int kMaps = 8;

  explicit TinyCnn(std::uint64_t seed = 0);

  ForwardResult forward(const Frame& frame) const;
  /// score_c = sum_k w[k][c] * GAP(A_k) + b_c
  std::array<double, kNumClasses> classify(const FeatureMaps& maps) const;

  double weight(int k, int c) const { return fc_w_[static_cast<std::size_t>(k) * kNumClasses + c]; }
  double bias(int c) const { return fc_b_[c]; }
  const ConvLayer& conv1() const { return conv1_; }
  const ConvLayer& conv2() const { return conv2_; }

 private:
  ConvLayer conv1_;
  ConvLayer conv2_;
  std::vector<double> fc_w_;  // [k][c]
  std::array<double, kNumClasses> fc_b_{};
};

}  // namespace xnav
