#include "xnav/core/types.hpp"

#include "xnav/core/error.hpp"

namespace xnav {

ValidationError::ValidationError(std::vector<std::string> fields, const std::string& what)
    : Error(what), fields_(std::move(fields)) {}

std::string_view to_string(Activity a) {
  switch (a) {
    case Activity::idle: return "idle";
    case Activity::walking: return "walking";
    case Activity::conversing: return "conversing";
  }
  return "idle";
}

Activity activity_from_string(std::string_view s) {
  if (s == "idle") return Activity::idle;
  if (s == "walking") return Activity::walking;
  if (s == "conversing") return Activity::conversing;
  throw ParseError("unknown activity '" + std::string(s) + "'");
}

}  // namespace xnav
