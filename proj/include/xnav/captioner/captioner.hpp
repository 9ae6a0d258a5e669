#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "xnav/captioner/backend.hpp"
#include "xnav/saliency/frame.hpp"

namespace xnav {

struct Caption {
  std::string text;
  std::string backend_id;
  double stamp{0.0};
  std::uint64_t source_seq{0};
  double latency_s{0.0};

  friend bool operator==(const Caption&, const Caption&) = default;
};

/// Trims, lowercases the first word, keeps the first sentence and ends it
/// with a period. Throws ValidationError for blank input.
std::string sanitize(std::string_view text);

/// Template caption from ground-truth annotations. Humans are grouped by
/// activity in alphabetical order (conversing, idle, walking), then
/// obstacles, then the setting: "two people having a conversation in a
/// hallway." An empty view reads "an empty corridor."
std::string mock_caption_text(std::span<const Annotation> annotations, std::string_view setting);

/// Captions a frame with the configured backend. Throws BackendUnavailable
/// or ProtocolError for remote failures.
Caption caption(const Frame& frame, const BackendConfig& config);

}  // namespace xnav
