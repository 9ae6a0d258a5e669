#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xnav/core/types.hpp"
#include "xnav/sim/world.hpp"

namespace xnav {

/// Ground-truth entity visible in a frame.
struct Annotation {
  enum class Kind { human, obstacle };

  Kind kind{Kind::human};
  int id{0};  // human id or obstacle index
  Activity activity{Activity::idle};
  std::optional<int> group_id;
  Vec2 local;  // x forward, y left, metres
  double distance{0.0};
  int pixels{0};

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Row-major RGB image with channel values in [0, 1].
struct Frame {
  int width{0};
  int height{0};
  std::vector<float> pixels;  // (row * width + col) * 3 + channel
  double stamp{0.0};
  std::uint64_t seq{0};
  std::string setting;
  std::vector<Annotation> annotations;

  float at(int row, int col, int ch) const {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  /// 8-bit RGB, rounding to nearest.
  std::vector<std::uint8_t> to_rgb8() const;

  std::size_t human_count() const;

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct RenderConfig {
  double view_depth{6.4};  // metres ahead
  double view_width{6.4};  // metres across
  double human_radius{0.25};
};

namespace palette {
inline constexpr float free_space[3]{0.85f, 0.85f, 0.85f};
inline constexpr float outside[3]{0.15f, 0.15f, 0.15f};
inline constexpr float obstacle[3]{0.9f, 0.8f, 0.1f};
inline constexpr float conversing[3]{0.9f, 0.1f, 0.1f};
inline constexpr float walking[3]{0.1f, 0.8f, 0.1f};
inline constexpr float idle[3]{0.1f, 0.2f, 0.9f};
}  // namespace palette

/// Egocentric top-down view: row 0 is the far edge, column 0 the left edge.
/// Humans are drawn as discs over obstacles. Annotations list the entities
/// with at least one visible pixel, humans by distance then obstacles.
Frame render_view(const sim::WorldState& world, const Pose& robot_pose, int width = 64,
                  int height = 64, const RenderConfig& cfg = {});

}  // namespace xnav
