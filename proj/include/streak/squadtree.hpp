#ifndef STREAK_SQUADTREE_HPP
#define STREAK_SQUADTREE_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "streak/store.hpp"

namespace streak {

class BloomFilter {
 public:
  BloomFilter() = default;
  BloomFilter(uint32_t bits, uint32_t hashes)
      : nbits_(bits), nhashes_(hashes), words_((bits + 63) / 64, 0) {}

  void insert(uint64_t key) {
    if (words_.empty()) fail(Err::Config, "bloom filter used before sizing");
    for (uint32_t i = 0; i < nhashes_; ++i) {
      uint64_t h = splitmix64(key + 0x51ul * i) % nbits_;
      words_[h >> 6] |= 1ull << (h & 63);
    }
  }

  /// False positives possible, false negatives are not.
  bool maybeContains(uint64_t key) const {
    if (words_.empty()) return false;
    for (uint32_t i = 0; i < nhashes_; ++i) {
      uint64_t h = splitmix64(key + 0x51ul * i) % nbits_;
      if (!(words_[h >> 6] & (1ull << (h & 63)))) return false;
    }
    return true;
  }

  uint32_t bits() const { return nbits_; }
  uint32_t hashes() const { return nhashes_; }
  std::span<const uint64_t> words() const { return words_; }
  void setWords(std::vector<uint64_t> w) { words_ = std::move(w); }

 private:
  uint32_t nbits_ = 0, nhashes_ = 0;
  std::vector<uint64_t> words_;
};

using CsId = uint32_t;

/// Global registry of distinct characteristic sets (predicate sets).
class CsRegistry {
 public:
  CsId intern(std::vector<TermId> sortedPreds) {
    auto [it, fresh] = bySet_.try_emplace(sortedPreds, static_cast<CsId>(sets_.size()));
    if (fresh) sets_.push_back(std::move(sortedPreds));
    return it->second;
  }

  std::span<const TermId> predicates(CsId id) const { return sets_[id]; }
  size_t size() const { return sets_.size(); }

  /// Ids of stored sets that are supersets of the (sorted) query set.
  std::vector<CsId> matchSupersets(std::span<const TermId> query) const {
    std::vector<CsId> out;
    for (CsId id = 0; id < sets_.size(); ++id) {
      if (std::includes(sets_[id].begin(), sets_[id].end(), query.begin(), query.end()))
        out.push_back(id);
    }
    return out;
  }

  static uint64_t hashSet(std::span<const TermId> sortedPreds) {
    uint64_t h = 0x9d3f;
    for (TermId p : sortedPreds) h = splitmix64(h ^ p);
    return h;
  }

 private:
  std::map<std::vector<TermId>, CsId> bySet_;
  std::vector<std::vector<TermId>> sets_;
};

/// Per-node CS summary: Bloom filter over CS identities plus exact per-CS
/// cardinalities of objects intersecting the node's extent.
struct CsSignature {
  BloomFilter bloom;
  std::map<CsId, uint32_t> counts;  // ordered for deterministic serialization

  void add(const CsRegistry& reg, CsId cs, uint32_t n = 1) {
    bloom.insert(CsRegistry::hashSet(reg.predicates(cs)));
    counts[cs] += n;
  }

  /// Total cardinality over the given candidate CS ids; the Bloom filter
  /// gates each lookup (it cannot produce false negatives).
  uint64_t cardinality(const CsRegistry& reg, std::span<const CsId> candidates) const {
    uint64_t total = 0;
    for (CsId cs : candidates) {
      if (!bloom.maybeContains(CsRegistry::hashSet(reg.predicates(cs)))) continue;
      auto it = counts.find(cs);
      if (it != counts.end()) total += it->second;
    }
    return total;
  }
};

enum class CsKind : uint8_t { Self, Incoming, Outgoing };

/// A resolved CS condition of a driven sub-query: predicate set plus which of
/// the three per-node signatures it applies to.
struct CsQuery {
  CsKind kind = CsKind::Self;
  std::vector<TermId> preds;  // sorted
};

struct SQuadTreeNode {
  QuadrantPath path;
  MBR cell{};
  MBR mbr{};  // tight over intersecting objects, clipped to the cell
  IdRange iRange{};
  std::vector<TermId> residents;  // ids assigned exactly to this node, sorted
  std::vector<TermId> eList;      // shallower-assigned overlappers, sorted
  uint64_t subtreeObjects = 0;    // residents of this node and all descendants
  std::array<std::unique_ptr<SQuadTreeNode>, 4> child;
  CsSignature cs[3];  // indexed by CsKind

  bool isLeaf() const {
    return !child[0] && !child[1] && !child[2] && !child[3];
  }

  const CsSignature& signature(CsKind k) const { return cs[static_cast<size_t>(k)]; }
};

struct ObjectInfo {
  MBR mbr{};
  CsId selfCs = 0;
  const Geometry* geometry = nullptr;
};

/// Phase-1 result: the candidate subtree V (preorder) and its deepest
/// frontier V_L. `drivenCard[i]` is the driven-CS cardinality of v[i] under
/// the primary CS query.
struct CandidateNodes {
  std::vector<const SQuadTreeNode*> v;
  std::vector<uint64_t> drivenCard;
  std::vector<const SQuadTreeNode*> frontier;
};

class SQuadTree {
 public:
  static SQuadTree build(const QuadStore& store, const Config& config) {
    SQuadTree tree;
    tree.config_ = config;
    tree.space_ = store.space;
    tree.buildCs(store);
    tree.buildNodes(store);
    return tree;
  }

  const SQuadTreeNode& root() const { return *root_; }
  const MBR& space() const { return space_; }
  const CsRegistry& registry() const { return reg_; }
  const Config& config() const { return config_; }
  const std::unordered_map<TermId, ObjectInfo>& objects() const { return objects_; }

  const ObjectInfo* object(TermId id) const {
    auto it = objects_.find(id);
    return it == objects_.end() ? nullptr : &it->second;
  }

  /// Characteristic set of an arbitrary entity (empty set id when none).
  std::vector<CsId> resolveQuery(const CsQuery& q) const {
    return reg_.matchSupersets(q.preds);
  }

  static bool node_contains(const SQuadTreeNode& node, TermId id) {
    return node.iRange.contains(id) ||
           std::binary_search(node.eList.begin(), node.eList.end(), id);
  }

  /// Phase 1: top-down traversal keeping nodes that hold driver bindings and
  /// can contain the driven CS per every query. `driverIds` must be sorted.
  /// For a distance-d join the driver condition extends to cells within d of
  /// a driver MBR (pass `driverBoxes` + `expand`); with the defaults it is the
  /// plain I-Range/E-List membership test.
  CandidateNodes candidate_nodes(std::span<const TermId> driverIds,
                                 std::span<const CsQuery> queries,
                                 std::span<const MBR> driverBoxes = {},
                                 double expand = 0) const {
    std::vector<std::vector<CsId>> resolved;
    resolved.reserve(queries.size());
    for (const CsQuery& q : queries) resolved.push_back(resolveQuery(q));
    std::vector<MBR> expanded;
    expanded.reserve(driverBoxes.size());
    for (const MBR& b : driverBoxes)
      expanded.push_back(MBR{b.minX - expand, b.minY - expand, b.maxX + expand, b.maxY + expand});
    CandidateNodes out;
    descend(*root_, driverIds, expanded, queries, resolved, out);
    return out;
  }

  uint64_t drivenCardinality(const SQuadTreeNode& node, const CsQuery& query) const {
    return node.signature(query.kind).cardinality(reg_, resolveQuery(query));
  }

  /// One node per line: path, residents, eList size, CS count triplet.
  void dump(std::ostream& os) const { dumpNode(os, *root_); }

  void serialize(std::ostream& os) const;
  static SQuadTree deserialize(std::istream& is, const QuadStore& store);

 private:
  Config config_;
  MBR space_{};
  std::unique_ptr<SQuadTreeNode> root_;
  CsRegistry reg_;
  std::unordered_map<TermId, ObjectInfo> objects_;
  std::unordered_map<TermId, CsId> entityCs_;              // any subject -> CS
  std::unordered_map<TermId, std::vector<CsId>> incoming_; // spatial id -> CS of pointing entities
  std::unordered_map<TermId, std::vector<CsId>> outgoing_; // spatial id -> CS of pointed entities

  void buildCs(const QuadStore& store) {
    // CS of every subject: its distinct predicate set (SPO order groups them).
    const auto& spo = store.ordering(Ordering::SPO);
    std::vector<TermId> preds;
    TermId curSubject = 0;
    bool open = false;
    auto flush = [&] {
      if (!open) return;
      std::sort(preds.begin(), preds.end());
      preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
      entityCs_[curSubject] = reg_.intern(preds);
      preds.clear();
    };
    for (uint32_t idx : spo) {
      const Quad& q = store.quads[idx];
      if (!open || q.s != curSubject) {
        flush();
        curSubject = q.s;
        open = true;
      }
      preds.push_back(q.p);
    }
    flush();

    // Incoming and outgoing CS per spatial entity, one entry per distinct
    // neighbouring entity (aggregate cardinalities count these entries).
    std::unordered_map<TermId, std::vector<TermId>> inSeen, outSeen;
    for (const Quad& q : store.quads) {
      if (is_spatial_id(q.o) && store.geometryOf.count(q.o)) {
        auto cs = entityCs_.find(q.s);
        if (cs != entityCs_.end()) {
          auto& seen = inSeen[q.o];
          if (std::find(seen.begin(), seen.end(), q.s) == seen.end()) {
            seen.push_back(q.s);
            incoming_[q.o].push_back(cs->second);
          }
        }
      }
      if (is_spatial_id(q.s) && store.geometryOf.count(q.s)) {
        auto cs = entityCs_.find(q.o);
        if (cs != entityCs_.end()) {
          auto& seen = outSeen[q.s];
          if (std::find(seen.begin(), seen.end(), q.o) == seen.end()) {
            seen.push_back(q.o);
            outgoing_[q.s].push_back(cs->second);
          }
        }
      }
    }

    for (auto& [id, geom] : store.geometryOf) {
      ObjectInfo info;
      info.mbr = store.mbrOf.at(id);
      info.geometry = &geom;
      auto it = entityCs_.find(id);
      info.selfCs = it == entityCs_.end() ? reg_.intern({}) : it->second;
      objects_.emplace(id, info);
    }
  }

  struct BuildObj {
    TermId id;
    MBR mbr;
    uint8_t pathLevel;
    QuadrantPath path;
  };

  void buildNodes(const QuadStore& store) {
    std::vector<BuildObj> objs;
    objs.reserve(objects_.size());
    for (TermId id : store.spatialIds()) {
      auto [path, local] = decode_id(id);
      objs.push_back(BuildObj{id, objects_.at(id).mbr, path.level, path});
    }
    root_ = std::make_unique<SQuadTreeNode>();
    root_->path = QuadrantPath{};
    root_->cell = space_;
    root_->iRange = node_id_range(root_->path);
    std::vector<std::pair<TermId, MBR>> noStraddlers;
    buildRec(*root_, std::move(objs), noStraddlers, 0);
  }

  void buildRec(SQuadTreeNode& node, std::vector<BuildObj> objs,
                const std::vector<std::pair<TermId, MBR>>& above, uint32_t depth) {
    node.subtreeObjects = objs.size();
    for (const auto& [id, mbr] : above) node.eList.push_back(id);
    std::sort(node.eList.begin(), node.eList.end());

    // Node MBR and CS signatures cover everything intersecting the cell:
    // every subtree object (fully inside) plus the shallower straddlers,
    // each exactly once.
    bool mbrSet = false;
    auto addBox = [&](const MBR& box) {
      MBR clipped = box.clippedTo(node.cell);
      if (!clipped.valid()) return;
      if (!mbrSet) {
        node.mbr = clipped;
        mbrSet = true;
      } else {
        node.mbr.expand(clipped);
      }
    };
    for (auto& sig : node.cs)
      sig.bloom = BloomFilter(config_.bloomBits, config_.bloomHashes);
    auto addObject = [&](TermId id) {
      const ObjectInfo& info = objects_.at(id);
      node.cs[0].add(reg_, info.selfCs);
      if (auto it = incoming_.find(id); it != incoming_.end())
        for (CsId cs : it->second) node.cs[1].add(reg_, cs);
      if (auto it = outgoing_.find(id); it != outgoing_.end())
        for (CsId cs : it->second) node.cs[2].add(reg_, cs);
    };
    for (const auto& [id, mbr] : above) {
      addBox(mbr);
      addObject(id);
    }
    for (const BuildObj& o : objs) {
      addBox(o.mbr);
      addObject(o.id);
    }

    bool anyDeeper = false;
    for (const BuildObj& o : objs)
      if (o.pathLevel > depth) {
        anyDeeper = true;
        break;
      }
    bool split = objs.size() > config_.leafCapacity && depth < config_.maxLevels && anyDeeper;

    std::vector<BuildObj> stay;
    std::array<std::vector<BuildObj>, 4> down;
    if (split) {
      for (BuildObj& o : objs) {
        if (o.pathLevel > depth) down[o.path.digit[depth]].push_back(std::move(o));
        else stay.push_back(std::move(o));
      }
    } else {
      stay = std::move(objs);
    }

    node.residents.clear();
    for (const BuildObj& o : stay) node.residents.push_back(o.id);
    std::sort(node.residents.begin(), node.residents.end());

    if (!split) return;

    for (uint8_t d = 0; d < 4; ++d) {
      MBR childCell = quadrant_cell(node.cell, d);
      std::vector<std::pair<TermId, MBR>> childAbove;
      for (const auto& entry : above)
        if (entry.second.intersects(childCell)) childAbove.push_back(entry);
      for (const BuildObj& o : stay)
        if (o.mbr.intersects(childCell)) childAbove.emplace_back(o.id, o.mbr);
      if (down[d].empty() && childAbove.empty()) continue;
      auto childNode = std::make_unique<SQuadTreeNode>();
      childNode->path = node.path;
      childNode->path.push(d);
      childNode->cell = childCell;
      childNode->iRange = node_id_range(childNode->path);
      buildRec(*childNode, std::move(down[d]), childAbove, depth + 1);
      node.child[d] = std::move(childNode);
    }
  }

  bool driverHit(const SQuadTreeNode& node, std::span<const TermId> driverIds,
                 std::span<const MBR> expandedBoxes) const {
    auto lo = std::lower_bound(driverIds.begin(), driverIds.end(), node.iRange.lo);
    if (lo != driverIds.end() && *lo <= node.iRange.hi) return true;
    // Sorted-list intersection with the E-List.
    auto a = driverIds.begin();
    auto b = node.eList.begin();
    while (a != driverIds.end() && b != node.eList.end()) {
      if (*a < *b) ++a;
      else if (*b < *a) ++b;
      else return true;
    }
    for (const MBR& box : expandedBoxes)
      if (box.intersects(node.cell)) return true;
    return false;
  }

  void descend(const SQuadTreeNode& node, std::span<const TermId> driverIds,
               std::span<const MBR> expandedBoxes, std::span<const CsQuery> queries,
               const std::vector<std::vector<CsId>>& resolved, CandidateNodes& out) const {
    if (!driverHit(node, driverIds, expandedBoxes)) return;
    uint64_t primaryCard = 0;
    for (size_t i = 0; i < queries.size(); ++i) {
      uint64_t card = node.signature(queries[i].kind).cardinality(reg_, resolved[i]);
      if (card == 0) return;
      if (i == 0) primaryCard = card;
    }
    out.v.push_back(&node);
    out.drivenCard.push_back(primaryCard);
    size_t before = out.v.size();
    for (const auto& c : node.child)
      if (c) descend(*c, driverIds, expandedBoxes, queries, resolved, out);
    if (out.v.size() == before) out.frontier.push_back(&node);
  }

  void dumpNode(std::ostream& os, const SQuadTreeNode& n) const {
    os << n.path.str() << " residents=" << n.residents.size() << " elist=" << n.eList.size()
       << " cs=" << n.cs[0].counts.size() << '/' << n.cs[1].counts.size() << '/'
       << n.cs[2].counts.size() << '\n';
    for (const auto& c : n.child)
      if (c) dumpNode(os, *c);
  }
};

// --- serialization -----------------------------------------------------------

namespace detail {

inline void putU64(std::ostream& os, uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, 8);
}

inline uint64_t getU64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) fail(Err::Io, "truncated snapshot");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void putF64(std::ostream& os, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  putU64(os, v);
}

inline double getF64(std::istream& is) {
  uint64_t v = getU64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

inline void putStr(std::ostream& os, const std::string& s) {
  putU64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

// LEB128 varints; sorted id lists are delta-encoded on top.
inline void putVar(std::ostream& os, uint64_t v) {
  while (v >= 0x80) {
    os.put(static_cast<char>((v & 0x7F) | 0x80));
    v >>= 7;
  }
  os.put(static_cast<char>(v));
}

inline uint64_t getVar(std::istream& is) {
  uint64_t v = 0;
  int shift = 0;
  for (;;) {
    int c = is.get();
    if (c == EOF) fail(Err::Io, "truncated snapshot");
    v |= static_cast<uint64_t>(c & 0x7F) << shift;
    if (!(c & 0x80)) return v;
    shift += 7;
  }
}

inline void putDeltaList(std::ostream& os, const std::vector<TermId>& sorted) {
  putVar(os, sorted.size());
  TermId prev = 0;
  for (TermId id : sorted) {
    putVar(os, id - prev);
    prev = id;
  }
}

inline std::vector<TermId> getDeltaList(std::istream& is) {
  size_t n = getVar(is);
  std::vector<TermId> out(n);
  TermId prev = 0;
  for (size_t i = 0; i < n; ++i) {
    prev += getVar(is);
    out[i] = prev;
  }
  return out;
}

inline std::string getStr(std::istream& is) {
  size_t n = getU64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) fail(Err::Io, "truncated snapshot");
  return s;
}

inline void putMbr(std::ostream& os, const MBR& m) {
  putF64(os, m.minX);
  putF64(os, m.minY);
  putF64(os, m.maxX);
  putF64(os, m.maxY);
}

inline MBR getMbr(std::istream& is) {
  MBR m;
  m.minX = getF64(is);
  m.minY = getF64(is);
  m.maxX = getF64(is);
  m.maxY = getF64(is);
  return m;
}

// The serialized node carries only what cannot be rebuilt from the store:
// structure, E-Lists, MBRs and exact CS counts. Resident lists follow from
// the encoded ids, and Bloom filters are regenerated from the counts.
inline void putSig(std::ostream& os, const CsSignature& sig) {
  putVar(os, sig.counts.size());
  for (const auto& [cs, cnt] : sig.counts) {
    putVar(os, cs);
    putVar(os, cnt);
  }
}

inline void getSig(std::istream& is, CsSignature& sig, const Config& cfg,
                   const CsRegistry& reg) {
  sig.bloom = BloomFilter(cfg.bloomBits, cfg.bloomHashes);
  size_t n = getVar(is);
  for (size_t i = 0; i < n; ++i) {
    CsId cs = static_cast<CsId>(getVar(is));
    uint32_t cnt = static_cast<uint32_t>(getVar(is));
    sig.counts[cs] = cnt;
    sig.bloom.insert(CsRegistry::hashSet(reg.predicates(cs)));
  }
}

inline void putNode(std::ostream& os, const SQuadTreeNode& n) {
  // The path digits follow from the descent; only payload is stored.
  putMbr(os, n.mbr);
  putDeltaList(os, n.eList);
  putVar(os, n.subtreeObjects);
  for (const auto& sig : n.cs) putSig(os, sig);
  uint64_t mask = 0;
  for (int d = 0; d < 4; ++d)
    if (n.child[d]) mask |= 1ull << d;
  putVar(os, mask);
  for (int d = 0; d < 4; ++d)
    if (n.child[d]) putNode(os, *n.child[d]);
}

}  // namespace detail

inline void SQuadTree::serialize(std::ostream& os) const {
  using namespace detail;
  putU64(os, 0x53515431ull);  // "SQT1"
  putMbr(os, space_);
  putVar(os, reg_.size());
  for (CsId id = 0; id < reg_.size(); ++id) {
    auto preds = reg_.predicates(id);
    putVar(os, preds.size());
    for (TermId p : preds) putVar(os, p);
  }
  putNode(os, *root_);
}

inline SQuadTree SQuadTree::deserialize(std::istream& is, const QuadStore& store) {
  using namespace detail;
  if (getU64(is) != 0x53515431ull) fail(Err::Io, "bad tree section magic");
  SQuadTree tree;
  tree.config_ = store.config;
  tree.space_ = getMbr(is);
  size_t nCs = getVar(is);
  for (size_t i = 0; i < nCs; ++i) {
    size_t n = getVar(is);
    std::vector<TermId> preds(n);
    for (size_t j = 0; j < n; ++j) preds[j] = getVar(is);
    tree.reg_.intern(std::move(preds));
  }
  // Rebuild entity CS relations from the store (cheap and deterministic),
  // then read the node structure.
  tree.buildCs(store);
  std::function<std::unique_ptr<SQuadTreeNode>(const MBR&, const QuadrantPath&)> readNode =
      [&](const MBR& cell, const QuadrantPath& path) -> std::unique_ptr<SQuadTreeNode> {
    auto node = std::make_unique<SQuadTreeNode>();
    node->path = path;
    node->cell = cell;
    node->iRange = node_id_range(path);
    node->mbr = getMbr(is);
    node->eList = getDeltaList(is);
    node->subtreeObjects = getVar(is);
    for (auto& sig : node->cs) getSig(is, sig, tree.config_, tree.reg_);
    uint64_t mask = getVar(is);
    for (uint8_t d = 0; d < 4; ++d) {
      if (!(mask & (1ull << d))) continue;
      QuadrantPath childPath = path;
      childPath.push(d);
      node->child[d] = readNode(quadrant_cell(cell, d), childPath);
    }
    return node;
  };
  tree.root_ = readNode(tree.space_, QuadrantPath{});
  // Residents follow from the ids: each object settles on the deepest
  // materialized node on its encoded path.
  for (TermId id : store.spatialIds()) {
    QuadrantPath path = decode_id(id).first;
    SQuadTreeNode* at = tree.root_.get();
    for (uint8_t i = 0; i < path.level; ++i) {
      SQuadTreeNode* next = at->child[path.digit[i]].get();
      if (!next) break;
      at = next;
    }
    at->residents.push_back(id);
  }
  std::function<void(SQuadTreeNode&)> sortResidents = [&](SQuadTreeNode& n) {
    std::sort(n.residents.begin(), n.residents.end());
    for (auto& c : n.child)
      if (c) sortResidents(*c);
  };
  sortResidents(*tree.root_);
  return tree;
}

}  // namespace streak

#endif
