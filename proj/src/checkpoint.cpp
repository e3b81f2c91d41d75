#include "emag/checkpoint.hpp"

#include <cstring>

namespace emag {

using nlohmann::json;

ModelCheckpoint ModelCheckpoint::from_model(const Model& model, json provenance, const AdamState* optimizer) {
  ModelCheckpoint c;
  c.config = model.config();
  c.params = model.params();
  if (optimizer && optimizer->m.size() == model.params().size()) c.optimizer = *optimizer;
  c.provenance = std::move(provenance);
  return c;
}

Model ModelCheckpoint::to_model() const {
  Model m(config);
  if (m.params().size() != params.size())
    throw FormatError("checkpoint: " + std::to_string(params.size()) + " parameters stored, config implies " +
                      std::to_string(m.params().size()));
  m.params() = params;
  return m;
}

namespace {

void put_doubles(std::string& out, const Vec& v) {
  const std::size_t n = static_cast<std::size_t>(v.size()) * 8;
  const std::size_t at = out.size();
  out.resize(at + n);
  if (n) std::memcpy(out.data() + at, v.data(), n);
}

Vec get_doubles(std::string_view bytes, std::size_t& pos, std::size_t count, const std::string& origin,
                const char* what) {
  if (bytes.size() - pos < count * 8)
    throw FormatError(origin + ": truncated " + what + " (" + std::to_string(bytes.size() - pos) + " of " +
                      std::to_string(count * 8) + " bytes)");
  Vec v(static_cast<Eigen::Index>(count));
  if (count) std::memcpy(v.data(), bytes.data() + pos, count * 8);
  pos += count * 8;
  return v;
}

std::string param_digest(const Vec& p) {
  std::string raw;
  put_doubles(raw, p);
  return sha256_hex(raw);
}

}  // namespace

std::string encode_checkpoint(const ModelCheckpoint& ckpt) {
  const Model probe(ckpt.config);
  require(static_cast<std::size_t>(ckpt.params.size()) == probe.layout().total(),
          "checkpoint: parameter vector does not match the model layout");
  json h = {{"format_version", kCheckpointVersion},
            {"model", ckpt.config.to_json()},
            {"config_hash", ckpt.config.hash()},
            {"montage_hash", ckpt.config.hd_montage.hash()},
            {"layout", probe.layout().to_json()},
            {"param_total", ckpt.params.size()},
            {"param_count", probe.parameter_count()},
            {"param_sha256", param_digest(ckpt.params)},
            {"has_optimizer", ckpt.optimizer.has_value()},
            {"optimizer_step", ckpt.optimizer ? ckpt.optimizer->step : 0},
            {"provenance", ckpt.provenance}};
  const std::string header = h.dump();
  std::string out(kCheckpointMagic, 8);
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t hlen = header.size();
  out.append(reinterpret_cast<const char*>(&version), 4);
  out.append(reinterpret_cast<const char*>(&hlen), 8);
  out += header;
  put_doubles(out, ckpt.params);
  if (ckpt.optimizer) {
    put_doubles(out, ckpt.optimizer->m);
    put_doubles(out, ckpt.optimizer->v);
  }
  return out;
}

ModelCheckpoint decode_checkpoint(std::string_view bytes, bool force, const std::string& origin) {
  if (bytes.size() < 20) throw FormatError(origin + ": truncated checkpoint header");
  if (bytes.substr(0, 8) != std::string_view(kCheckpointMagic, 8)) throw FormatError(origin + ": not an EMAG checkpoint");
  std::uint32_t version;
  std::uint64_t hlen;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&hlen, bytes.data() + 12, 8);
  if (version != kCheckpointVersion)
    throw FormatError(origin + ": checkpoint format version " + std::to_string(version) + " (supported: " +
                      std::to_string(kCheckpointVersion) + ")");
  if (hlen > bytes.size() - 20) throw FormatError(origin + ": truncated checkpoint header");
  json h;
  try {
    h = json::parse(bytes.substr(20, hlen));
  } catch (const json::exception& e) {
    throw FormatError(origin + ": corrupt checkpoint header: " + e.what());
  }
  ModelCheckpoint c;
  std::size_t pos = 20 + hlen;
  try {
    c.config = ModelConfig::from_json(h.at("model"));
    c.provenance = h.value("provenance", json::object());
    const auto total = h.at("param_total").get<std::size_t>();
    c.params = get_doubles(bytes, pos, total, origin, "parameter payload");
    if (h.at("has_optimizer").get<bool>()) {
      AdamState s;
      s.m = get_doubles(bytes, pos, total, origin, "optimizer state");
      s.v = get_doubles(bytes, pos, total, origin, "optimizer state");
      s.step = h.at("optimizer_step").get<long>();
      c.optimizer = std::move(s);
    }
    if (pos != bytes.size()) throw FormatError(origin + ": " + std::to_string(bytes.size() - pos) + " trailing bytes");
    if (!force) {
      if (h.at("config_hash").get<std::string>() != c.config.hash())
        throw FormatError(origin + ": config hash mismatch (use force to load anyway)");
      if (h.at("montage_hash").get<std::string>() != c.config.hd_montage.hash())
        throw FormatError(origin + ": montage hash mismatch (use force to load anyway)");
      if (h.at("param_sha256").get<std::string>() != param_digest(c.params))
        throw FormatError(origin + ": parameter payload checksum mismatch");
    }
  } catch (const json::exception& e) {
    throw FormatError(origin + ": corrupt checkpoint header: " + e.what());
  }
  return c;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

ModelCheckpoint load_checkpoint(const std::string& path, bool force) {
  return decode_checkpoint(read_file(path), force, path);
}

}  // namespace emag
