#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xnav/saliency/cnn.hpp"

namespace xnav {

enum class Region { center, NW, NE, SW, SE };

std::string_view to_string(Region r);

struct HeatmapSummary {
  double focus_percentage{0.0};
  Region region{Region::center};
  std::string class_name;
  std::string text;  // "focus: P% of view, concentrated REGION, class: NAME"

  friend bool operator==(const HeatmapSummary&, const HeatmapSummary&) = default;
};

struct HeatmapResult {
  int width{0};
  int height{0};
  std::vector<double> grid;  // normalized, row-major
  std::vector<double> raw;   // ReLU(sum_k alpha_k A_k)
  std::vector<double> alpha;
  int target_class{0};
  HeatmapSummary summary;
  double stamp{0.0};
  std::uint64_t source_seq{0};

  double cell(int i, int j) const { return grid[static_cast<std::size_t>(i) * width + j]; }
};

/// raw = ReLU(sum_k alpha_k A_k); grid = raw / max(raw), or zeros.
HeatmapResult heatmap_from_maps(const FeatureMaps& maps, std::span<const double> alpha);

/// Grad-CAM for the GAP classifier: alpha_k = d score_c / d GAP(A_k) =
/// w[k][c]. Defaults to the argmax class. Fills the summary at tau.
HeatmapResult grad_cam(const TinyCnn& model, const Frame& frame, std::optional<int> target_class = std::nullopt,
                       double tau = 0.5);

/// Counts cells with grid >= tau and picks the region holding the largest
/// superlevel mass. The centre region is the middle half in each axis; other
/// cells belong to their quadrant. Ties go center, NW, NE, SW, SE.
HeatmapSummary summarize(const HeatmapResult& heatmap, double tau = 0.5);

/// "25", "12.5", "0": one decimal, trailing ".0" dropped.
std::string format_percent(double p);

/// Frame blended with a bilinearly upsampled colormap of the grid (RGB8).
std::vector<std::uint8_t> overlay_rgb8(const Frame& frame, const HeatmapResult& heatmap, double opacity = 0.5);

}  // namespace xnav
