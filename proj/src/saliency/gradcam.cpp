#include "xnav/saliency/gradcam.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "xnav/core/error.hpp"

namespace xnav {

std::string_view to_string(Region r) {
  switch (r) {
    case Region::NW: return "NW";
    case Region::NE: return "NE";
    case Region::SW: return "SW";
    case Region::SE: return "SE";
    case Region::center: break;
  }
  return "center";
}

HeatmapResult heatmap_from_maps(const FeatureMaps& maps, std::span<const double> alpha) {
  if (static_cast<int>(alpha.size()) != maps.channels)
    throw ValidationError({"alpha"}, "alpha size does not match feature map count");
  HeatmapResult h;
  h.width = maps.width;
  h.height = maps.height;
  h.alpha.assign(alpha.begin(), alpha.end());
  const std::size_t cells = static_cast<std::size_t>(maps.width) * maps.height;
  h.raw.assign(cells, 0.0);
  for (int k = 0; k < maps.channels; ++k)
    for (std::size_t i = 0; i < cells; ++i) h.raw[i] += alpha[static_cast<std::size_t>(k)] * maps.data[k * cells + i];
  double peak = 0.0;
  for (double& v : h.raw) {
    v = std::max(v, 0.0);
    peak = std::max(peak, v);
  }
  h.grid.assign(cells, 0.0);
  if (peak > 0.0)
    for (std::size_t i = 0; i < cells; ++i) h.grid[i] = h.raw[i] / peak;
  return h;
}

HeatmapResult grad_cam(const TinyCnn& model, const Frame& frame, std::optional<int> target_class, double tau) {
  const ForwardResult fw = model.forward(frame);
  int c = 0;
  if (target_class) {
    class_name(*target_class);  // range check
    c = *target_class;
  } else {
    c = static_cast<int>(std::max_element(fw.scores.begin(), fw.scores.end()) - fw.scores.begin());
  }
  std::vector<double> alpha(TinyCnn::kMaps);
  for (int k = 0; k < TinyCnn::kMaps; ++k) alpha[static_cast<std::size_t>(k)] = model.weight(k, c);
  HeatmapResult h = heatmap_from_maps(fw.maps, alpha);
  h.target_class = c;
  h.stamp = frame.stamp;
  h.source_seq = frame.seq;
  h.summary = summarize(h, tau);
  return h;
}

std::string format_percent(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", p);
  std::string s(buf);
  if (s.size() > 2 && s.compare(s.size() - 2, 2, ".0") == 0) s.resize(s.size() - 2);
  return s;
}

HeatmapSummary summarize(const HeatmapResult& heatmap, double tau) {
  HeatmapSummary s;
  const int h = heatmap.height, w = heatmap.width;
  std::array<double, 5> mass{};  // indexed by Region
  int hits = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double v = heatmap.cell(i, j);
      if (v < tau) continue;
      ++hits;
      const bool mid = 4 * i >= h && 4 * i < 3 * h && 4 * j >= w && 4 * j < 3 * w;
      Region r = Region::center;
      if (!mid) {
        const bool north = 2 * i < h;
        const bool west = 2 * j < w;
        r = north ? (west ? Region::NW : Region::NE) : (west ? Region::SW : Region::SE);
      }
      mass[static_cast<std::size_t>(r)] += v;
    }
  const std::size_t cells = static_cast<std::size_t>(h) * w;
  s.focus_percentage = cells ? 100.0 * hits / static_cast<double>(cells) : 0.0;
  std::size_t best = 0;
  for (std::size_t r = 1; r < mass.size(); ++r)
    if (mass[r] > mass[best]) best = r;
  s.region = static_cast<Region>(best);
  s.class_name = std::string(class_name(heatmap.target_class));
  s.text = "focus: " + format_percent(s.focus_percentage) + "% of view, concentrated " +
           std::string(to_string(s.region)) + ", class: " + s.class_name;
  return s;
}

namespace {

// Piecewise-linear blue-cyan-yellow-red ramp.
std::array<double, 3> colormap(double v) {
  v = std::clamp(v, 0.0, 1.0);
  constexpr std::array<std::array<double, 3>, 4> stops{{{0, 0, 1}, {0, 1, 1}, {1, 1, 0}, {1, 0, 0}}};
  const double x = v * 3.0;
  const int k = std::min(static_cast<int>(x), 2);
  const double u = x - k;
  std::array<double, 3> out{};
  for (int ch = 0; ch < 3; ++ch) out[ch] = stops[k][ch] * (1 - u) + stops[k + 1][ch] * u;
  return out;
}

double bilinear(const HeatmapResult& hm, double y, double x) {
  y = std::clamp(y, 0.0, hm.height - 1.0);
  x = std::clamp(x, 0.0, hm.width - 1.0);
  const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
  const int y1 = std::min(y0 + 1, hm.height - 1), x1 = std::min(x0 + 1, hm.width - 1);
  const double fy = y - y0, fx = x - x0;
  return (hm.cell(y0, x0) * (1 - fx) + hm.cell(y0, x1) * fx) * (1 - fy) +
         (hm.cell(y1, x0) * (1 - fx) + hm.cell(y1, x1) * fx) * fy;
}

}  // namespace

std::vector<std::uint8_t> overlay_rgb8(const Frame& frame, const HeatmapResult& heatmap, double opacity) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(frame.width) * frame.height * 3);
  const double sy = static_cast<double>(heatmap.height) / frame.height;
  const double sx = static_cast<double>(heatmap.width) / frame.width;
  for (int r = 0; r < frame.height; ++r)
    for (int c = 0; c < frame.width; ++c) {
      const double v = bilinear(heatmap, (r + 0.5) * sy - 0.5, (c + 0.5) * sx - 0.5);
      const auto col = colormap(v);
      const double a = opacity * v;
      for (int ch = 0; ch < 3; ++ch) {
        const double base = frame.at(r, c, ch);
        const double mixed = base * (1 - a) + col[static_cast<std::size_t>(ch)] * a;
        out[(static_cast<std::size_t>(r) * frame.width + c) * 3 + ch] =
            static_cast<std::uint8_t>(std::lround(std::clamp(mixed, 0.0, 1.0) * 255.0));
      }
    }
  return out;
}

}  // namespace xnav
