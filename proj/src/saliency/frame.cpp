#include "xnav/saliency/frame.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "xnav/core/error.hpp"

namespace xnav {

std::vector<std::uint8_t> Frame::to_rgb8() const {
  std::vector<std::uint8_t> out(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(pixels[i], 0.0f, 1.0f) * 255.0f));
  return out;
}

std::size_t Frame::human_count() const {
  return static_cast<std::size_t>(std::count_if(annotations.begin(), annotations.end(), [](const Annotation& a) {
    return a.kind == Annotation::Kind::human;
  }));
}

namespace {

const float* activity_color(Activity a) {
  switch (a) {
    case Activity::conversing: return palette::conversing;
    case Activity::walking: return palette::walking;
    case Activity::idle: break;
  }
  return palette::idle;
}

}  // namespace

Frame render_view(const sim::WorldState& world, const Pose& robot_pose, int width, int height,
                  const RenderConfig& cfg) {
  if (width <= 0 || height <= 0) throw ValidationError({"resolution"}, "render_view: resolution must be positive");
  const Scenario& sc = *world.scenario;
  Frame f;
  f.width = width;
  f.height = height;
  f.stamp = world.t();
  f.setting = sc.setting;
  f.pixels.assign(static_cast<std::size_t>(width) * height * 3, 0.0f);

  // owner: -1 none, 0..H-1 human index, H.. obstacle index + H
  const int n_humans = static_cast<int>(world.humans.size());
  std::vector<int> owner(static_cast<std::size_t>(width) * height, -1);
  const Vec2 origin = robot_pose.position();

  for (int r = 0; r < height; ++r) {
    const double fwd = cfg.view_depth * (1.0 - (r + 0.5) / height);
    for (int c = 0; c < width; ++c) {
      const double left = cfg.view_width * (0.5 - (c + 0.5) / width);
      const Vec2 p = origin + rotate({fwd, left}, robot_pose.psi);
      const std::size_t idx = static_cast<std::size_t>(r) * width + c;
      const float* color = sc.bounds.contains(p) ? palette::free_space : palette::outside;
      for (std::size_t k = 0; k < sc.obstacles.size(); ++k)
        if (sc.obstacles[k].contains(p)) {
          color = palette::obstacle;
          owner[idx] = n_humans + static_cast<int>(k);
        }
      double best = cfg.human_radius;
      for (int h = 0; h < n_humans; ++h) {
        const double d = distance(p, world.humans[h].pose.position());
        if (d < best) {
          best = d;
          color = activity_color(world.humans[h].activity);
          owner[idx] = h;
        }
      }
      std::copy(color, color + 3, f.pixels.begin() + static_cast<std::ptrdiff_t>(idx * 3));
    }
  }

  std::map<int, int> counts;
  for (int o : owner)
    if (o >= 0) ++counts[o];

  std::vector<Annotation> humans, obstacles;
  for (auto [o, n] : counts) {
    Annotation a;
    a.pixels = n;
    if (o < n_humans) {
      const HumanConfig& h = world.humans[o];
      a.kind = Annotation::Kind::human;
      a.id = h.id;
      a.activity = h.activity;
      a.group_id = h.group_id;
      a.local = rotate(h.pose.position() - origin, -robot_pose.psi);
      a.distance = a.local.norm();
      humans.push_back(a);
    } else {
      const Rect& r = sc.obstacles[o - n_humans];
      a.kind = Annotation::Kind::obstacle;
      a.id = o - n_humans;
      const Vec2 centre{0.5 * (r.xmin + r.xmax), 0.5 * (r.ymin + r.ymax)};
      a.local = rotate(centre - origin, -robot_pose.psi);
      a.distance = a.local.norm();
      obstacles.push_back(a);
    }
  }
  std::stable_sort(humans.begin(), humans.end(), [](const Annotation& l, const Annotation& r) {
    return l.distance != r.distance ? l.distance < r.distance : l.id < r.id;
  });
  f.annotations = std::move(humans);
  f.annotations.insert(f.annotations.end(), obstacles.begin(), obstacles.end());
  return f;
}

}  // namespace xnav
