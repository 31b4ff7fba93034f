#ifndef STREAK_COMMON_HPP
#define STREAK_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace streak {

/// Error categories surfaced by the engine. Tests match on these, not on
/// message text.
enum class Err {
  ParseError,
  WktSyntax,
  GeometryError,
  OutsideSpace,
  NotSpatial,
  LocalIdOverflow,
  SpatialIdCollision,
  UnknownId,
  QuerySyntax,
  UnboundRankVariable,
  MissingGeometryBinding,
  MultipleSpatialFilters,
  NotTwoComponents,
  ModeMismatch,
  Io,
  Config,
};

class Error : public std::runtime_error {
 public:
  Error(Err code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& msg) { throw Error(code, msg); }

/// Engine knobs. One blockSize knob covers both numeric blocks and driver
/// blocks.
struct Config {
  uint32_t blockSize = 1024;
  uint32_t leafCapacity = 64;
  uint32_t bloomBits = 1024;
  uint32_t bloomHashes = 3;
  double alphaIO = 1.0;
  double alphaCPU = 0.1;
  double alphaMerge = 0.05;
  double joinFactor = 1.0;
  uint32_t maxLevels = 10;  // hard-capped at 10

  void set(const std::string& key, const std::string& value) {
    auto u32 = [&] { return static_cast<uint32_t>(std::stoul(value)); };
    auto f64 = [&] { return std::stod(value); };
    if (key == "blockSize") blockSize = u32();
    else if (key == "leafCapacity") leafCapacity = u32();
    else if (key == "bloomBits") bloomBits = u32();
    else if (key == "bloomHashes") bloomHashes = u32();
    else if (key == "alphaIO") alphaIO = f64();
    else if (key == "alphaCPU") alphaCPU = f64();
    else if (key == "alphaMerge") alphaMerge = f64();
    else if (key == "joinFactor") joinFactor = f64();
    else if (key == "maxLevels") maxLevels = u32();
    else fail(Err::Config, "unknown config key: " + key);
    if (maxLevels > 10) fail(Err::Config, "maxLevels is capped at 10");
    if (blockSize == 0 || leafCapacity == 0 || bloomBits == 0 || bloomHashes == 0)
      fail(Err::Config, "config values must be positive");
  }

  void loadFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Err::Io, "cannot open config file: " + path);
    std::string line;
    while (std::getline(in, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (!key.empty()) set(key, value);
    }
  }
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view data, uint64_t seed = 0xcbf29ce484222325ull) {
  uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Deterministic RNG with portable distributions; std:: distributions are
/// implementation-defined and would break byte-identical generation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t nextU64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return splitmix64(state_);
  }

  /// Uniform in [0, 1).
  double nextDouble() { return static_cast<double>(nextU64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  uint64_t nextBelow(uint64_t n) { return n == 0 ? 0 : nextU64() % n; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * nextDouble(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = nextDouble();
    double u2 = nextDouble();
    while (u1 <= 1e-300) u1 = nextDouble();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Exponential(lambda) truncated to [0, 1] by rejection.
  double truncatedExponential(double lambda) {
    for (;;) {
      double u = nextDouble();
      double x = -std::log(1.0 - u) / lambda;
      if (x <= 1.0) return x;
    }
  }

 private:
  uint64_t state_;
};

}  // namespace streak

#endif
