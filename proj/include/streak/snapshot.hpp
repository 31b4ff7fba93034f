#ifndef STREAK_SNAPSHOT_HPP
#define STREAK_SNAPSHOT_HPP

#include "streak/squadtree.hpp"

namespace streak {

// Binary snapshot: magic "STRK1", little-endian sections for config,
// dictionary, quads, geometry bindings and the serialized S-QuadTree.
// Versioned, not interchange-stable across versions.

constexpr char kSnapshotMagic[5] = {'S', 'T', 'R', 'K', '1'};
constexpr uint32_t kSnapshotVersion = 1;

inline void save_snapshot(const QuadStore& store, const SQuadTree& tree, std::ostream& os) {
  using namespace detail;
  os.write(kSnapshotMagic, 5);
  putU64(os, kSnapshotVersion);
  const Config& c = store.config;
  putU64(os, c.blockSize);
  putU64(os, c.leafCapacity);
  putU64(os, c.bloomBits);
  putU64(os, c.bloomHashes);
  putF64(os, c.alphaIO);
  putF64(os, c.alphaCPU);
  putF64(os, c.alphaMerge);
  putF64(os, c.joinFactor);
  putU64(os, c.maxLevels);
  putMbr(os, store.space);

  // Dictionary: dense terms in id order, then spatial terms sorted by id.
  std::vector<std::pair<TermId, const Term*>> dense, spatial;
  store.dict.forEach([&](TermId id, const Term& t) {
    (is_spatial_id(id) ? spatial : dense).emplace_back(id, &t);
  });
  std::sort(dense.begin(), dense.end());
  std::sort(spatial.begin(), spatial.end());
  auto putTerm = [&](TermId id, const Term& t) {
    putU64(os, id);
    putU64(os, static_cast<uint64_t>(t.kind));
    putF64(os, t.number);
    putStr(os, t.lexical);
  };
  putU64(os, dense.size());
  for (auto& [id, t] : dense) putTerm(id, *t);
  putU64(os, spatial.size());
  for (auto& [id, t] : spatial) putTerm(id, *t);

  putU64(os, store.quads.size());
  for (const Quad& q : store.quads) {
    putU64(os, q.reif);
    putU64(os, q.s);
    putU64(os, q.p);
    putU64(os, q.o);
  }

  // Geometry bindings: subject -> WKT lexical of its literal.
  putU64(os, store.geometryOf.size());
  std::vector<TermId> subjects;
  for (auto& [id, g] : store.geometryOf) subjects.push_back(id);
  std::sort(subjects.begin(), subjects.end());
  for (TermId id : subjects) {
    putU64(os, id);
    // Re-derive the literal from the stored geometry via round-trip text.
    const Geometry& g = store.geometryOf.at(id);
    std::string wkt;
    char buf[64];
    auto vtx = [&](const Vec2& v) {
      snprintf(buf, sizeof buf, "%.17g %.17g", v.x, v.y);
      return std::string(buf);
    };
    switch (g.kind) {
      case GeomKind::Point: wkt = "POINT(" + vtx(g.vertices[0]) + ")"; break;
      case GeomKind::LineString: {
        wkt = "LINESTRING(";
        for (size_t i = 0; i < g.vertices.size(); ++i)
          wkt += (i ? ", " : "") + vtx(g.vertices[i]);
        wkt += ")";
        break;
      }
      case GeomKind::Polygon: {
        wkt = "POLYGON((";
        for (size_t i = 0; i < g.vertices.size(); ++i)
          wkt += (i ? ", " : "") + vtx(g.vertices[i]);
        wkt += "))";
        break;
      }
    }
    putStr(os, wkt);
  }

  std::vector<TermId> geomPreds;
  store.dict.forEach([&](TermId id, const Term& t) {
    if (store.isGeometryPredicate(id)) geomPreds.push_back(id);
  });
  std::sort(geomPreds.begin(), geomPreds.end());
  putU64(os, geomPreds.size());
  for (TermId id : geomPreds) putU64(os, id);

  tree.serialize(os);
}

struct Snapshot {
  QuadStore store;
  SQuadTree tree;
};

inline Snapshot load_snapshot(std::istream& is) {
  using namespace detail;
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, kSnapshotMagic, 5) != 0)
    fail(Err::Io, "not a snapshot file (bad magic)");
  if (getU64(is) != kSnapshotVersion) fail(Err::Io, "unsupported snapshot version");

  Snapshot snap;
  QuadStore& store = snap.store;
  Config& c = store.config;
  c.blockSize = static_cast<uint32_t>(getU64(is));
  c.leafCapacity = static_cast<uint32_t>(getU64(is));
  c.bloomBits = static_cast<uint32_t>(getU64(is));
  c.bloomHashes = static_cast<uint32_t>(getU64(is));
  c.alphaIO = getF64(is);
  c.alphaCPU = getF64(is);
  c.alphaMerge = getF64(is);
  c.joinFactor = getF64(is);
  c.maxLevels = static_cast<uint32_t>(getU64(is));
  store.space = getMbr(is);

  auto getTerm = [&](bool spatial) {
    TermId id = getU64(is);
    TermKind kind = static_cast<TermKind>(getU64(is));
    double number = getF64(is);
    std::string lexical = getStr(is);
    Term t;
    t.lexical = std::move(lexical);
    t.kind = kind;
    t.number = number;
    if (kind == TermKind::GeometryLit) t.geometry = parse_wkt(t.lexical);
    TermId got = store.dict.intern(t, spatial, id);
    if (got != id) fail(Err::Io, "snapshot dictionary out of order");
  };
  size_t nDense = getU64(is);
  for (size_t i = 0; i < nDense; ++i) getTerm(false);
  size_t nSpatial = getU64(is);
  for (size_t i = 0; i < nSpatial; ++i) getTerm(true);

  size_t nQuads = getU64(is);
  store.quads.reserve(nQuads);
  for (size_t i = 0; i < nQuads; ++i) {
    Quad q;
    q.reif = getU64(is);
    q.s = getU64(is);
    q.p = getU64(is);
    q.o = getU64(is);
    store.quads.push_back(q);
  }

  size_t nGeom = getU64(is);
  for (size_t i = 0; i < nGeom; ++i) {
    TermId id = getU64(is);
    Geometry g = parse_wkt(getStr(is));
    store.mbrOf.emplace(id, mbr_of(g));
    store.geometryOf.emplace(id, std::move(g));
  }

  size_t nGeomPreds = getU64(is);
  for (size_t i = 0; i < nGeomPreds; ++i) store.registerGeometryPredicate(getU64(is));

  store.finalize();
  snap.tree = SQuadTree::deserialize(is, store);
  return snap;
}

/// Size in bytes of the serialized S-QuadTree section alone.
inline size_t serialized_tree_size(const SQuadTree& tree) {
  std::ostringstream buf;
  tree.serialize(buf);
  return buf.str().size();
}

inline bool sniff_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[5] = {};
  in.read(magic, 5);
  return in && std::memcmp(magic, kSnapshotMagic, 5) == 0;
}

}  // namespace streak

#endif
