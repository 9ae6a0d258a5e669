#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace xnav {

struct RgbImage {
  int width{0};
  int height{0};
  std::vector<std::uint8_t> rgb;
  std::map<std::string, std::string> text;  // tEXt chunks
};

/// Writes an 8-bit RGB PNG. No time chunk, so identical input gives
/// identical bytes.
void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png(const std::filesystem::path& path);
/// In-memory PNG encoding (same bytes write_png produces).
std::vector<std::uint8_t> encode_png(const RgbImage& image);

}  // namespace xnav
