#ifndef STREAK_SPATIAL_ID_HPP
#define STREAK_SPATIAL_ID_HPP

#include <cstdint>
#include <utility>

#include "streak/geometry.hpp"

namespace streak {

/// 64-bit identifier space. Spatial entity ids carry the (S, Z, I, L) layout,
/// most to least significant:
///   S  bit 63          1 for spatial entities
///   Z  bits 62..43     quadrant path, 2 bits per level, left-aligned,
///                      unused low digits zero
///   I  bits 42..4      local identifier within the node
///   L  bits  3..0      level (path length), at most 10
/// Non-spatial ids are dense counters with bit 63 clear.
using TermId = std::uint64_t;

constexpr uint32_t kMaxTreeLevels = 10;
constexpr TermId kSpatialBit = 1ull << 63;
constexpr uint32_t kZFieldBits = 20;
constexpr uint32_t kZShift = 43;
constexpr uint32_t kLocalShift = 4;
constexpr uint64_t kLocalCapacity = 1ull << 39;

inline bool is_spatial_id(TermId id) { return (id & kSpatialBit) != 0; }

inline uint64_t z_bits(const QuadrantPath& path) {
  uint64_t z = 0;
  for (uint8_t i = 0; i < path.level; ++i)
    z |= static_cast<uint64_t>(path.digit[i]) << (kZFieldBits - 2 - 2 * i);
  return z;
}

inline TermId encode_id(const QuadrantPath& path, uint64_t local) {
  if (path.level > kMaxTreeLevels)
    fail(Err::OutsideSpace, "quadrant path deeper than 10 levels");
  if (local >= kLocalCapacity)
    fail(Err::LocalIdOverflow, "local identifier exceeds 39 bits");
  return kSpatialBit | (z_bits(path) << kZShift) | (local << kLocalShift) |
         static_cast<uint64_t>(path.level);
}

inline std::pair<QuadrantPath, uint64_t> decode_id(TermId id) {
  if (!is_spatial_id(id)) fail(Err::NotSpatial, "identifier is not spatial");
  QuadrantPath path;
  path.level = static_cast<uint8_t>(id & 0xF);
  uint64_t z = (id >> kZShift) & ((1ull << kZFieldBits) - 1);
  for (uint8_t i = 0; i < path.level; ++i)
    path.digit[i] = static_cast<uint8_t>((z >> (kZFieldBits - 2 - 2 * i)) & 0x3);
  uint64_t local = (id >> kLocalShift) & (kLocalCapacity - 1);
  return {path, local};
}

/// Contiguous id interval covering every spatial id whose quadrant path
/// extends `path`, plus the node's own residents.
struct IdRange {
  TermId lo = 0, hi = 0;
  bool contains(TermId id) const { return id >= lo && id <= hi; }
};

inline IdRange node_id_range(const QuadrantPath& path) {
  TermId lo = kSpatialBit | (z_bits(path) << kZShift);
  uint32_t prefixBits = 2 * path.level;
  TermId freeMask = prefixBits >= 63 ? 0 : ((1ull << (63 - prefixBits)) - 1);
  return IdRange{lo, lo | freeMask};
}

}  // namespace streak

#endif
