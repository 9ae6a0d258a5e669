#include "xnav/sim/zones.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace xnav::sim {

std::vector<SocialZone> build_social_zones(std::span<const HumanConfig> humans,
                                           double personal_radius, double group_radius) {
  std::vector<SocialZone> zones;
  zones.reserve(humans.size());
  for (const HumanConfig& h : humans)
    zones.push_back({ZoneKind::personal_disc, h.pose.position(), h.pose.position(), personal_radius, {h.id}});

  std::map<int, std::vector<const HumanConfig*>> groups;
  for (const HumanConfig& h : humans)
    if (h.activity == Activity::conversing && h.group_id) groups[*h.group_id].push_back(&h);
  for (auto& [gid, members] : groups) {
    std::sort(members.begin(), members.end(), [](auto* l, auto* r) { return l->id < r->id; });
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j)
        zones.push_back({ZoneKind::group_interaction, members[i]->pose.position(),
                         members[j]->pose.position(), group_radius, {members[i]->id, members[j]->id}});
  }
  return zones;
}

double zone_clearance(Vec2 p, std::span<const SocialZone> zones) {
  double best = std::numeric_limits<double>::infinity();
  for (const SocialZone& z : zones) best = std::min(best, z.signed_distance(p));
  return best;
}

}  // namespace xnav::sim
