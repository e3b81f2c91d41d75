#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace emag {

/// Row-major dense matrix. Channel-by-time signals keep each channel's series contiguous.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
/// One 3D position per row, millimetres.
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Base class of every domain error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::string kind = "error")
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what, "parse") {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what, "validation") {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what, "format") {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what, "numeric") {}
};

/// Throws ValidationError(message) when cond is false.
inline void require(bool cond, const std::string& message) {
  if (!cond) throw ValidationError(message);
}

/// splitmix64 finalizer; used to derive independent RNG streams from counters.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Portable random source: std::mt19937_64 bits with explicitly defined
/// real/normal transforms, so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Writes `bytes` to `path` through a temporary file and an atomic rename.
void write_file_atomic(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

std::string to_lower_ascii(std::string s);

}  // namespace emag
