#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "emag/diffengine.hpp"
#include "emag/model.hpp"

namespace emag {

inline constexpr const char* kCheckpointMagic = "EMAGCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ModelCheckpoint {
  ModelConfig config;
  Vec params;
  std::optional<AdamState> optimizer;
  nlohmann::json provenance = nlohmann::json::object();  // seed, epochs, best val loss, train config

  static ModelCheckpoint from_model(const Model& model, nlohmann::json provenance = nlohmann::json::object(),
                                    const AdamState* optimizer = nullptr);
  /// Rebuilds the model and loads the parameters.
  Model to_model() const;
};

/// Layout: 8-byte magic, u32 version, u64 header length, JSON header, fp64 parameters,
/// then fp64 Adam moments when present. All integers and floats little-endian.
std::string encode_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint decode_checkpoint(std::string_view bytes, bool force = false, const std::string& origin = "<memory>");

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path);
/// Refuses (FormatError) on a bad magic, version or size, and on hash mismatches unless `force`.
ModelCheckpoint load_checkpoint(const std::string& path, bool force = false);

}  // namespace emag
