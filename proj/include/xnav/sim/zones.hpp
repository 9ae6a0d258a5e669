#pragma once

#include <span>
#include <vector>

#include "xnav/core/geometry.hpp"
#include "xnav/core/types.hpp"

namespace xnav::sim {

enum class ZoneKind { personal_disc, group_interaction };

/// A disc (a == b) or a capsule around segment a-b.
struct SocialZone {
  ZoneKind kind{ZoneKind::personal_disc};
  Vec2 a;
  Vec2 b;
  double radius{0.0};
  std::vector<int> member_ids;

  /// Signed clearance to the zone boundary; negative inside.
  double signed_distance(Vec2 p) const { return distance_point_segment(p, a, b) - radius; }
  bool contains(Vec2 p) const { return signed_distance(p) < 0.0; }

  friend bool operator==(const SocialZone&, const SocialZone&) = default;
};

/// One personal disc per human plus one interaction capsule per conversing
/// pair sharing a group_id. Output order: discs in input order, then
/// capsules ordered by (group_id, member ids).
std::vector<SocialZone> build_social_zones(std::span<const HumanConfig> humans,
                                           double personal_radius, double group_radius);

/// Minimum signed clearance of p over all zones; +inf for no zones.
double zone_clearance(Vec2 p, std::span<const SocialZone> zones);

}  // namespace xnav::sim
