#include "xnav/bus/topics.hpp"

#include <algorithm>

namespace xnav::topics {

bool valid_topic_name(std::string_view name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '/';
  });
}

}  // namespace xnav::topics
