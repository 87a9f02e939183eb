#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace mmtamp {

/// Comparison tolerance on times (seconds).
inline constexpr double kTimeEps = 1e-6;
/// Tangency tolerance for geometric overlap (meters).
inline constexpr double kGeomEps = 1e-9;
/// Gap used for strict inequalities in the assignment program (seconds).
inline constexpr double kGapEps = 1e-3;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct CycleError : ValidationError {
  using ValidationError::ValidationError;
};
struct SamplingExhausted : Error {
  using Error::Error;
};
struct DisconnectedMode : Error {
  using Error::Error;
};
struct EncodingError : Error {
  using Error::Error;
};
struct Infeasible : Error {
  using Error::Error;
};
struct TimeLimit : Error {
  using Error::Error;
};
struct SizeLimit : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

/// Planar position of a disc robot (meters).
struct Config2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Config2&, const Config2&) = default;
  friend auto operator<=>(const Config2&, const Config2&) = default;
  Config2 operator+(const Config2& o) const { return {x + o.x, y + o.y}; }
  Config2 operator-(const Config2& o) const { return {x - o.x, y - o.y}; }
  Config2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Config2& o) const { return x * o.x + y * o.y; }
  double cross(const Config2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(const Config2& a, const Config2& b) { return (a - b).norm(); }

/// Planar rigid pose: position plus heading (radians).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  friend bool operator==(const Pose2&, const Pose2&) = default;
  Config2 position() const { return {x, y}; }
  /// Maps a point from this pose's frame into the world frame.
  Config2 apply(const Config2& local) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {x + c * local.x - s * local.y, y + s * local.x + c * local.y};
  }
  /// Rotates a vector from this pose's frame into the world frame.
  Config2 rotate(const Config2& v) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
  }
};

/// Combines hashes in a platform-stable way (splitmix-style).
inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
  std::uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_double(std::uint64_t h, double d) {
  std::uint64_t bits = 0;
  static_assert(sizeof(bits) == sizeof(d));
  std::memcpy(&bits, &d, sizeof(d));
  return hash_mix(h, bits);
}

}  // namespace mmtamp
