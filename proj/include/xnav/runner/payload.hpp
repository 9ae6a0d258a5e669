#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "xnav/bus/topic_bus.hpp"
#include "xnav/captioner/captioner.hpp"
#include "xnav/explainer/explainer.hpp"
#include "xnav/saliency/frame.hpp"
#include "xnav/saliency/gradcam.hpp"
#include "xnav/sim/metrics.hpp"
#include "xnav/sim/zones.hpp"

namespace xnav {

struct HeatmapMsg {
  HeatmapResult heatmap;
  std::uint64_t frame_seq{0};
  std::shared_ptr<const Frame> frame;  // source frame, for overlays
};

struct ConflictMsg {
  double margin{0.0};
  int plan_id{0};
  std::vector<sim::SocialZone> zones;  // zones the active plan intersects
};

struct StateMsg {
  RobotState robot;
  std::vector<HumanConfig> humans;
  std::vector<Vec2> plan_path;
  int plan_id{0};
  bool explain{false};
};

struct EpsilonMsg {
  double value{0.0};
  bool enabled{false};
};

using Payload = std::variant<Frame, Caption, HeatmapMsg, Explanation, ConflictMsg, VelocityCommand, StateMsg,
                             sim::RunMetrics, EpsilonMsg>;

using Bus = bus::TopicBus<Payload>;

}  // namespace xnav
