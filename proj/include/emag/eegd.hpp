#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "emag/common.hpp"

namespace emag {

/// One channels x time recording plus the bookkeeping the harness needs.
struct EegRecording {
  Mat data;  // channels x timesteps
  double rate_hz = 0.0;
  std::vector<std::string> labels;
  std::string subject;
  int trial = 0;
  std::string split;  // "", "train", "val" or "test"

  int channels() const { return static_cast<int>(data.rows()); }
  int timesteps() const { return static_cast<int>(data.cols()); }
};

inline constexpr const char* kEegdMagic = "EEGD1";
inline constexpr int kEegdVersion = 1;

/// Single-file layout: u64 little-endian header length, JSON header, f32le row-major payload.
std::string encode_eegd(const EegRecording& rec);
EegRecording decode_eegd(std::string_view bytes, const std::string& origin = "<memory>");

void write_eegd(const EegRecording& rec, const std::string& path);
/// Header-plus-sibling variant: `<stem>.json` and `<stem>.bin`.
void write_eegd_pair(const EegRecording& rec, const std::string& json_path);
/// Reads either layout; a path ending in ".json" selects the sibling variant.
EegRecording read_eegd(const std::string& path);

nlohmann::json eegd_header(const EegRecording& rec);

}  // namespace emag
