#include "xnav/saliency/cnn.hpp"

#include <algorithm>
#include <numeric>

#include "xnav/core/error.hpp"
#include "xnav/core/rng.hpp"

namespace xnav {

std::string_view class_name(int c) {
  if (c < 0 || c >= kNumClasses) throw ValidationError({"target_class"}, "class index out of range");
  return kClassNames[static_cast<std::size_t>(c)];
}

double FeatureMaps::gap(int k) const {
  const auto begin = data.begin() + static_cast<std::ptrdiff_t>(k) * height * width;
  return std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(height) * width, 0.0) / (height * width);
}

namespace {

FeatureMaps conv3x3_s2_relu(const FeatureMaps& in, const ConvLayer& layer) {
  const int oh = (in.height + 1) / 2;
  const int ow = (in.width + 1) / 2;
  FeatureMaps out(layer.out_channels, oh, ow);
  for (int o = 0; o < layer.out_channels; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = layer.biases[static_cast<std::size_t>(o)];
        for (int i = 0; i < layer.in_channels; ++i)
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = 2 * y + ky - 1;
            if (iy < 0 || iy >= in.height) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = 2 * x + kx - 1;
              if (ix < 0 || ix >= in.width) continue;
              acc += layer.w(o, i, ky, kx) * in.at(i, iy, ix);
            }
          }
        out.at(o, y, x) = std::max(acc, 0.0);
      }
  return out;
}

ConvLayer make_layer(int in, int out) {
  ConvLayer l;
  l.in_channels = in;
  l.out_channels = out;
  l.weights.assign(static_cast<std::size_t>(out) * in * 9, 0.0);
  l.biases.assign(static_cast<std::size_t>(out), 0.0);
  return l;
}

}  // namespace

TinyCnn::TinyCnn(std::uint64_t seed) : conv1_(make_layer(3, kMaps)), conv2_(make_layer(kMaps, kMaps)) {
  Rng rng(derive_seed(seed, "saliency.tiny_cnn"));

  // conv1: red, green, blue and warm detectors, then four random channels.
  // Detector taps sum to -1 across RGB so grey pixels are cut by the ReLU;
  // the noise is zero-sum.
  const double colour[4][3]{{1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}, {0.5, 0.5, -2}};
  for (int o = 0; o < kMaps; ++o)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        double n[3];
        const double scale = o < 4 ? 0.01 : 0.15;
        for (double& v : n) v = scale * rng.normal();
        const double mean = (n[0] + n[1] + n[2]) / 3.0;
        for (int i = 0; i < 3; ++i) {
          const double base = o < 4 ? colour[o][i] / 9.0 : 0.0;
          conv1_.w(o, i, ky, kx) = base + n[i] - mean;
        }
      }

  // conv2: conversing, walking, idle, obstacle (warm minus red and green),
  // then four random mixtures. Detectors ignore the random channels.
  const double mix[4][4]{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {-1, -1, 0, 1}};
  for (int o = 0; o < kMaps; ++o)
    for (int i = 0; i < kMaps; ++i)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const double n = rng.normal();
          if (o >= 4)
            conv2_.w(o, i, ky, kx) = 0.1 * n;
          else if (i < 4)
            conv2_.w(o, i, ky, kx) = mix[o][i] / 9.0 + 0.002 * n;
        }

  const double fc[4][kNumClasses]{{-300, 80, 400, 0}, {-300, 400, 0, 0}, {-300, 400, 0, 0}, {-300, 0, 0, 400}};
  fc_w_.assign(static_cast<std::size_t>(kMaps) * kNumClasses, 0.0);
  for (int k = 0; k < kMaps; ++k)
    for (int c = 0; c < kNumClasses; ++c)
      fc_w_[static_cast<std::size_t>(k) * kNumClasses + c] = (k < 4 ? fc[k][c] : 0.0) + 2.0 * rng.normal();
  fc_b_ = {0.05, 0.0, 0.0, 0.0};
}

std::array<double, kNumClasses> TinyCnn::classify(const FeatureMaps& maps) const {
  if (maps.channels != kMaps) throw ValidationError({"maps"}, "feature map count mismatch");
  std::array<double, kNumClasses> s = fc_b_;
  for (int k = 0; k < kMaps; ++k) {
    const double g = maps.gap(k);
    for (int c = 0; c < kNumClasses; ++c) s[static_cast<std::size_t>(c)] += weight(k, c) * g;
  }
  return s;
}

ForwardResult TinyCnn::forward(const Frame& frame) const {
  if (frame.width != kInput || frame.height != kInput)
    throw ValidationError({"frame.width", "frame.height"}, "frame resolution does not match model input 64x64");
  FeatureMaps x(3, frame.height, frame.width);
  for (int r = 0; r < frame.height; ++r)
    for (int c = 0; c < frame.width; ++c)
      for (int ch = 0; ch < 3; ++ch) x.at(ch, r, c) = frame.at(r, c, ch);
  ForwardResult out;
  out.maps = conv3x3_s2_relu(conv3x3_s2_relu(x, conv1_), conv2_);
  out.scores = classify(out.maps);
  return out;
}

}  // namespace xnav
