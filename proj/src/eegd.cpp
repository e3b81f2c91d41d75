#include "emag/eegd.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace emag {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "EEGD I/O assumes a little-endian host");

json eegd_header(const EegRecording& rec) {
  return {{"magic", kEegdMagic},
          {"version", kEegdVersion},
          {"channels", rec.channels()},
          {"timesteps", rec.timesteps()},
          {"dtype", "f32le"},
          {"rate_hz", rec.rate_hz},
          {"labels", rec.labels},
          {"subject", rec.subject},
          {"trial", rec.trial},
          {"split", rec.split}};
}

namespace {

void check_record(const EegRecording& rec) {
  require(rec.data.rows() >= 1 && rec.data.cols() >= 1, "eegd: recording is empty");
  require(rec.labels.size() == static_cast<std::size_t>(rec.data.rows()),
          "eegd: " + std::to_string(rec.labels.size()) + " labels for " + std::to_string(rec.data.rows()) +
              " channels");
  require(rec.data.allFinite(), "eegd: recording contains non-finite samples");
}

std::string encode_payload(const Mat& data) {
  std::string out(static_cast<std::size_t>(data.size()) * 4, '\0');
  std::size_t k = 0;
  for (Eigen::Index j = 0; j < data.rows(); ++j)
    for (Eigen::Index t = 0; t < data.cols(); ++t, k += 4) {
      const float f = static_cast<float>(data(j, t));
      std::memcpy(out.data() + k, &f, 4);
    }
  return out;
}

EegRecording from_header(const json& h, std::string_view payload, const std::string& origin) {
  EegRecording rec;
  try {
    if (h.at("magic") != kEegdMagic) throw FormatError(origin + ": bad magic " + h.at("magic").dump());
    if (h.at("dtype") != "f32le")
      throw FormatError(origin + ": unsupported dtype " + h.at("dtype").dump() + " (expected \"f32le\")");
    const long M = h.at("channels").get<long>();
    const long T = h.at("timesteps").get<long>();
    if (M < 1 || T < 1) throw FormatError(origin + ": channels and timesteps must be positive");
    const std::size_t need = static_cast<std::size_t>(M) * static_cast<std::size_t>(T) * 4;
    if (payload.size() != need)
      throw FormatError(origin + ": payload has " + std::to_string(payload.size()) + " bytes, header implies " +
                        std::to_string(need));
    rec.rate_hz = h.at("rate_hz").get<double>();
    rec.labels = h.at("labels").get<std::vector<std::string>>();
    if (rec.labels.size() != static_cast<std::size_t>(M))
      throw FormatError(origin + ": label count does not match channels");
    rec.subject = h.value("subject", std::string());
    rec.trial = h.value("trial", 0);
    rec.split = h.value("split", std::string());
    rec.data.resize(M, T);
    std::size_t k = 0;
    for (long j = 0; j < M; ++j)
      for (long t = 0; t < T; ++t, k += 4) {
        float f;
        std::memcpy(&f, payload.data() + k, 4);
        rec.data(j, t) = f;
      }
  } catch (const json::exception& e) {
    throw FormatError(origin + ": malformed header: " + e.what());
  }
  if (!rec.data.allFinite()) throw FormatError(origin + ": payload contains non-finite samples");
  return rec;
}

}  // namespace

std::string encode_eegd(const EegRecording& rec) {
  check_record(rec);
  const std::string header = eegd_header(rec).dump();
  std::string out(8, '\0');
  const std::uint64_t n = header.size();
  std::memcpy(out.data(), &n, 8);
  out += header;
  out += encode_payload(rec.data);
  return out;
}

EegRecording decode_eegd(std::string_view bytes, const std::string& origin) {
  if (bytes.size() < 8) throw FormatError(origin + ": truncated (no header length)");
  std::uint64_t n;
  std::memcpy(&n, bytes.data(), 8);
  if (n > bytes.size() - 8) throw FormatError(origin + ": truncated header");
  json h;
  try {
    h = json::parse(bytes.substr(8, n));
  } catch (const json::exception& e) {
    throw FormatError(origin + ": header is not JSON: " + e.what());
  }
  return from_header(h, bytes.substr(8 + n), origin);
}

void write_eegd(const EegRecording& rec, const std::string& path) { write_file_atomic(path, encode_eegd(rec)); }

namespace {
std::string sibling_bin(const std::string& json_path) {
  const auto dot = json_path.rfind(".json");
  return (dot == std::string::npos ? json_path : json_path.substr(0, dot)) + ".bin";
}
}  // namespace

void write_eegd_pair(const EegRecording& rec, const std::string& json_path) {
  check_record(rec);
  const std::string bin = sibling_bin(json_path);
  json h = eegd_header(rec);
  const auto slash = bin.find_last_of('/');
  h["payload"] = slash == std::string::npos ? bin : bin.substr(slash + 1);
  write_file_atomic(bin, encode_payload(rec.data));
  write_file_atomic(json_path, h.dump(2) + "\n");
}

EegRecording read_eegd(const std::string& path) {
  if (path.size() > 5 && path.ends_with(".json")) {
    json h;
    try {
      h = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw FormatError(path + ": header is not JSON: " + e.what());
    }
    return from_header(h, read_file(sibling_bin(path)), path);
  }
  return decode_eegd(read_file(path), path);
}

}  // namespace emag
