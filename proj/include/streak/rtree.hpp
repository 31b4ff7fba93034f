#ifndef STREAK_RTREE_HPP
#define STREAK_RTREE_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "streak/geometry.hpp"
#include "streak/spatial_id.hpp"

namespace streak {

struct RTreeEntry {
  TermId id = 0;
  MBR mbr{};
};

/// STR-packed R-tree used by the synchronous-traversal join baseline.
class RTree {
 public:
  struct Node {
    MBR mbr{};
    std::vector<Node> children;
    std::vector<RTreeEntry> entries;
    bool leaf() const { return children.empty(); }
  };

  static RTree str_bulk_load(std::vector<RTreeEntry> entries, uint32_t fanout) {
    if (fanout < 2) fail(Err::Config, "R-tree fanout must be at least 2");
    RTree t;
    t.count_ = entries.size();
    if (entries.empty()) {
      t.levels_ = 0;
      return t;
    }
    // Leaf level: sort by center x, slice into vertical slabs, sort each slab
    // by center y, pack runs of `fanout`.
    auto cx = [](const RTreeEntry& e) { return 0.5 * (e.mbr.minX + e.mbr.maxX); };
    auto cy = [](const RTreeEntry& e) { return 0.5 * (e.mbr.minY + e.mbr.maxY); };
    size_t leafCount = (entries.size() + fanout - 1) / fanout;
    size_t slabs = static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(leafCount))));
    size_t slabSize = fanout * ((leafCount + slabs - 1) / slabs);
    std::sort(entries.begin(), entries.end(),
              [&](const RTreeEntry& a, const RTreeEntry& b) { return cx(a) < cx(b); });
    std::vector<Node> level;
    for (size_t s = 0; s < entries.size(); s += slabSize) {
      size_t end = std::min(entries.size(), s + slabSize);
      std::sort(entries.begin() + s, entries.begin() + end,
                [&](const RTreeEntry& a, const RTreeEntry& b) { return cy(a) < cy(b); });
      for (size_t at = s; at < end; at += fanout) {
        Node leaf;
        size_t stop = std::min(end, at + fanout);
        leaf.entries.assign(entries.begin() + at, entries.begin() + stop);
        leaf.mbr = leaf.entries[0].mbr;
        for (const auto& e : leaf.entries) leaf.mbr.expand(e.mbr);
        level.push_back(std::move(leaf));
      }
    }
    t.levels_ = 1;
    // Pack upper levels until one root remains.
    while (level.size() > 1) {
      auto ncx = [](const Node& n) { return 0.5 * (n.mbr.minX + n.mbr.maxX); };
      auto ncy = [](const Node& n) { return 0.5 * (n.mbr.minY + n.mbr.maxY); };
      size_t parents = (level.size() + fanout - 1) / fanout;
      size_t pslabs = static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(parents))));
      size_t pslab = fanout * ((parents + pslabs - 1) / pslabs);
      std::sort(level.begin(), level.end(),
                [&](const Node& a, const Node& b) { return ncx(a) < ncx(b); });
      std::vector<Node> next;
      for (size_t s = 0; s < level.size(); s += pslab) {
        size_t end = std::min(level.size(), s + pslab);
        std::sort(level.begin() + s, level.begin() + end,
                  [&](const Node& a, const Node& b) { return ncy(a) < ncy(b); });
        for (size_t at = s; at < end; at += fanout) {
          Node parent;
          size_t stop = std::min(end, at + fanout);
          parent.children.assign(std::make_move_iterator(level.begin() + at),
                                 std::make_move_iterator(level.begin() + stop));
          parent.mbr = parent.children[0].mbr;
          for (const auto& c : parent.children) parent.mbr.expand(c.mbr);
          next.push_back(std::move(parent));
        }
      }
      level = std::move(next);
      ++t.levels_;
    }
    t.root_ = std::move(level[0]);
    return t;
  }

  const Node& root() const { return root_; }
  size_t size() const { return count_; }
  size_t levels() const { return levels_; }
  bool empty() const { return count_ == 0; }

  /// All entries whose MBR contains the point (descent check for tests).
  std::vector<TermId> pointQuery(double x, double y) const {
    std::vector<TermId> out;
    if (count_ == 0) return out;
    MBR probe{x, y, x, y};
    pointRec(root_, probe, out);
    return out;
  }

 private:
  Node root_;
  size_t count_ = 0;
  size_t levels_ = 0;

  static void pointRec(const Node& n, const MBR& probe, std::vector<TermId>& out) {
    if (!n.mbr.intersects(probe)) return;
    if (n.leaf()) {
      for (const auto& e : n.entries)
        if (e.mbr.intersects(probe)) out.push_back(e.id);
      return;
    }
    for (const auto& c : n.children) pointRec(c, probe, out);
  }
};

namespace detail {

inline void syncJoinRec(const RTree::Node& a, const RTree::Node& b, double d,
                        std::vector<std::pair<TermId, TermId>>& out) {
  if (mbr_min_distance(a.mbr, b.mbr) > d) return;
  if (a.leaf() && b.leaf()) {
    for (const auto& ea : a.entries)
      for (const auto& eb : b.entries)
        if (mbr_min_distance(ea.mbr, eb.mbr) <= d) out.emplace_back(ea.id, eb.id);
    return;
  }
  if (a.leaf()) {
    for (const auto& cb : b.children) syncJoinRec(a, cb, d, out);
    return;
  }
  if (b.leaf()) {
    for (const auto& ca : a.children) syncJoinRec(ca, b, d, out);
    return;
  }
  for (const auto& ca : a.children)
    for (const auto& cb : b.children) syncJoinRec(ca, cb, d, out);
}

}  // namespace detail

/// Synchronous traversal of both trees, pruning node pairs farther than `d`
/// apart and emitting the MBR-level candidate pairs found at the leaves.
inline std::vector<std::pair<TermId, TermId>> sync_traversal_join(const RTree& a, const RTree& b,
                                                                  double d,
                                                                  size_t* candidateCount = nullptr) {
  std::vector<std::pair<TermId, TermId>> out;
  if (!a.empty() && !b.empty()) detail::syncJoinRec(a.root(), b.root(), d, out);
  if (candidateCount) *candidateCount = out.size();
  return out;
}

}  // namespace streak

#endif
