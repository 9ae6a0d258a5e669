#pragma once

#include <string_view>

namespace xnav::topics {

// Canonical topic names. "camera/image" (used by some node descriptions) is
// an alias of camera/image_raw and is not advertised separately.
inline constexpr std::string_view kCameraImage = "camera/image_raw";
inline constexpr std::string_view kCaption = "blip/caption";
inline constexpr std::string_view kHeatmapSummary = "heatmap/summary";
inline constexpr std::string_view kExplanation = "llm/explanation";
inline constexpr std::string_view kConflict = "nav/conflict";
inline constexpr std::string_view kCommand = "nav/cmd";
inline constexpr std::string_view kState = "nav/state";
inline constexpr std::string_view kMetrics = "nav/metrics";
inline constexpr std::string_view kEpsilon = "nav/epsilon";

/// Names match ^[a-z0-9_/]+$.
bool valid_topic_name(std::string_view name);

}  // namespace xnav::topics
