#pragma once
// core.hpp - shared vocabulary types for gridrelay: errors, small vectors,
// cells, angles, deterministic RNG and hashing.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gridrelay {

enum class ErrorCode {
    InvalidParameter,
    InvalidInput,
    NotFound,
    UndefinedModularity,
    OutOfBounds,
    AgentEmbedded,
    NoPath,
    NoValidSubgoal,
    RecoveryExhausted,
    GenerationFailed,
    InvalidPose,
    NoDemo,
    DegenerateEpisode,
    Io,
};

inline std::string_view to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::InvalidParameter: return "invalid-parameter";
        case ErrorCode::InvalidInput: return "invalid-input";
        case ErrorCode::NotFound: return "not-found";
        case ErrorCode::UndefinedModularity: return "undefined-modularity";
        case ErrorCode::OutOfBounds: return "out-of-bounds";
        case ErrorCode::AgentEmbedded: return "agent-embedded";
        case ErrorCode::NoPath: return "no-path";
        case ErrorCode::NoValidSubgoal: return "no-valid-subgoal";
        case ErrorCode::RecoveryExhausted: return "recovery-exhausted";
        case ErrorCode::GenerationFailed: return "generation-failed";
        case ErrorCode::InvalidPose: return "invalid-pose";
        case ErrorCode::NoDemo: return "no-demo";
        case ErrorCode::DegenerateEpisode: return "degenerate-episode";
        case ErrorCode::Io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// ---------------------------------------------------------------- vectors

struct Vec2 {
    double x = 0.0, y = 0.0;
    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
    double norm() const { return std::hypot(x, y); }
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    Vec2 xy() const { return {x, y}; }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }
inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

// Grid cell, row-major. Rows follow world y, columns follow world x.
struct Cell {
    int row = 0, col = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

// ---------------------------------------------------------------- angles

inline constexpr double kPi = std::numbers::pi;

// Wraps into [-pi, pi).
inline double wrap_angle(double a) {
    double w = std::fmod(a + kPi, 2.0 * kPi);
    if (w < 0) w += 2.0 * kPi;
    return w - kPi;
}

// Absolute angular difference in [0, pi].
inline double angle_between(double a, double b) { return std::abs(wrap_angle(a - b)); }

// ---------------------------------------------------------------- RNG

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Seeded stream over std::mt19937_64. Determinism is per standard library;
// distributions are constructed per call so no hidden state leaks between draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // [0, 1)
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

    // Inclusive range [lo, hi].
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

    bool bernoulli(double p) { return uniform() < p; }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (stddev <= 0.0) return mean;
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

private:
    std::mt19937_64 engine_;
};

// Fixed sub-seeds so toggling one noise source leaves the others untouched.
enum class Stream : std::uint64_t {
    Layout = 0x4C41594FULL,
    Placement = 0x504C4143ULL,
    Task = 0x5441534BULL,
    SensorNoise = 0x534E5352ULL,
    Embedding = 0x454D4244ULL,
    RandomAnchors = 0x524E4441ULL,
    FailureInjection = 0x46494E4AULL,
};

inline Rng make_stream(std::uint64_t seed, Stream s) {
    return Rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(s))));
}

// ---------------------------------------------------------------- hashing

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xCBF29CE484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Rounds a distance onto a dyadic lattice (2^-20 m) so that sums and
// differences of logged distances are exact in double precision.
inline double quantize_distance(double d) { return std::round(d * 0x1.0p20) * 0x1.0p-20; }

}  // namespace gridrelay
