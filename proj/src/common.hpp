#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace planformer {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo,
  kFormat,
  kDimensionMismatch,
  kPrecondition,
  kGenerationFailed,
  kMissingModel,
  kNotFound,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

/// A point in a 2D or 3D workspace, in map units.
class Point {
 public:
  Point() = default;
  Point(double x, double y) : c_{x, y, 0.0}, dim_(2) {}
  Point(double x, double y, double z) : c_{x, y, z}, dim_(3) {}

  static Point zeros(int dim) {
    Point p;
    p.dim_ = dim;
    return p;
  }

  int dim() const noexcept { return dim_; }
  double operator[](int axis) const noexcept { return c_[static_cast<std::size_t>(axis)]; }
  double& operator[](int axis) noexcept { return c_[static_cast<std::size_t>(axis)]; }

  friend bool operator==(const Point& a, const Point& b) noexcept {
    return a.dim_ == b.dim_ && a.c_ == b.c_;
  }

 private:
  std::array<double, 3> c_{};
  int dim_ = 0;
};

inline Point operator+(Point a, const Point& b) noexcept {
  for (int i = 0; i < a.dim(); ++i) a[i] += b[i];
  return a;
}

inline Point operator-(Point a, const Point& b) noexcept {
  for (int i = 0; i < a.dim(); ++i) a[i] -= b[i];
  return a;
}

inline Point operator*(Point a, double s) noexcept {
  for (int i = 0; i < a.dim(); ++i) a[i] *= s;
  return a;
}

inline double dot(const Point& a, const Point& b) noexcept {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(const Point& a, const Point& b) noexcept {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double distance(const Point& a, const Point& b) noexcept {
  return std::sqrt(squared_distance(a, b));
}

std::string to_string(const Point& p);

/// Seeded random stream. Distributions are computed here rather than with
/// <random> distributions so that draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  double normal() {
    // Box-Muller; u1 in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent sub-stream seed from a parent seed and a stream name.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index);

}  // namespace planformer
