#ifndef STREAK_STORE_HPP
#define STREAK_STORE_HPP

#include <algorithm>
#include <array>
#include <cstring>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "streak/core.hpp"

namespace streak {

enum class Ordering : uint8_t { PSO, POS, SPO, OPS, RPS };
constexpr std::array<Ordering, 5> kAllOrderings{Ordering::PSO, Ordering::POS, Ordering::SPO,
                                                Ordering::OPS, Ordering::RPS};

inline const char* ordering_name(Ordering o) {
  switch (o) {
    case Ordering::PSO: return "PSO";
    case Ordering::POS: return "POS";
    case Ordering::SPO: return "SPO";
    case Ordering::OPS: return "OPS";
    case Ordering::RPS: return "RPS";
  }
  return "?";
}

using OrderKey = std::array<TermId, 4>;

inline OrderKey order_key(Ordering o, const Quad& q) {
  switch (o) {
    case Ordering::PSO: return {q.p, q.s, q.o, q.reif};
    case Ordering::POS: return {q.p, q.o, q.s, q.reif};
    case Ordering::SPO: return {q.s, q.p, q.o, q.reif};
    case Ordering::OPS: return {q.o, q.p, q.s, q.reif};
    case Ordering::RPS: return {q.reif, q.p, q.s, q.o};
  }
  return {};
}

/// Scan pattern; unset slots are wildcards.
struct ScanPattern {
  std::optional<TermId> reif, s, p, o;

  std::array<std::optional<TermId>, 4> inKeyOrder(Ordering ord) const {
    switch (ord) {
      case Ordering::PSO: return {p, s, o, reif};
      case Ordering::POS: return {p, o, s, reif};
      case Ordering::SPO: return {s, p, o, reif};
      case Ordering::OPS: return {o, p, s, reif};
      case Ordering::RPS: return {reif, p, s, o};
    }
    return {};
  }

  bool matches(const Quad& q) const {
    return (!reif || *reif == q.reif) && (!s || *s == q.s) && (!p || *p == q.p) &&
           (!o || *o == q.o);
  }
};

struct NumericEntry {
  TermId subject = 0;  // subject or reification id of the carrying quad
  TermId object = 0;   // the numeric literal term
  double value = 0;
};

/// One chunk of a predicate's descending value run.
struct NumericBlock {
  size_t offset = 0;
  uint32_t count = 0;
  double minVal = 0, maxVal = 0;
};

class QuadStore;

/// Sorted cursor over one ordering with an optional constant prefix, residual
/// filters and skip-to on the first unbound key slot.
class Scan {
 public:
  Scan(const QuadStore& store, ScanPattern pattern, Ordering ordering);

  /// Next matching quad; false when exhausted.
  bool next(Quad& out);

  /// Advance past all quads whose leading free sort key is below `value`.
  void skipTo(TermId value);

  Ordering ordering() const { return ordering_; }
  size_t prefixLength() const { return prefixLen_; }

 private:
  const QuadStore& store_;
  ScanPattern pattern_;
  Ordering ordering_;
  size_t prefixLen_ = 0;
  size_t cur_ = 0, end_ = 0;
};

class QuadStore {
 public:
  Dictionary dict;
  std::vector<Quad> quads;
  MBR space{0, 0, 0, 0};
  Config config;

  // spatial entity id -> parsed geometry / cached MBR
  std::unordered_map<TermId, Geometry> geometryOf;
  std::unordered_map<TermId, MBR> mbrOf;

  const std::vector<uint32_t>& ordering(Ordering o) const {
    return order_[static_cast<size_t>(o)];
  }

  bool isGeometryPredicate(TermId p) const { return geometryPreds_.count(p) > 0; }

  /// Sorted ids of all spatial entities.
  const std::vector<TermId>& spatialIds() const { return spatialIds_; }

  Scan scan(const ScanPattern& pattern, Ordering ord) const { return Scan(*this, pattern, ord); }

  /// Exact number of quads matching a pattern (index-assisted).
  size_t countMatches(const ScanPattern& pattern) const {
    Scan s(*this, pattern, bestOrdering(pattern));
    size_t n = 0;
    Quad q;
    while (s.next(q)) ++n;
    return n;
  }

  /// Ordering that turns the most bound slots into a leading constant prefix.
  Ordering bestOrdering(const ScanPattern& pattern) const {
    Ordering best = Ordering::SPO;
    size_t bestLen = 0;
    for (Ordering o : kAllOrderings) {
      auto slots = pattern.inKeyOrder(o);
      size_t len = 0;
      while (len < 4 && slots[len].has_value()) ++len;
      if (len > bestLen) {
        bestLen = len;
        best = o;
      }
    }
    return best;
  }

  /// Descending-value run for a numeric predicate (empty when none).
  std::span<const NumericEntry> numericRun(TermId predicate) const {
    auto it = numeric_.find(predicate);
    if (it == numeric_.end()) return {};
    return it->second;
  }

  /// Chunk a predicate's value run into blocks of `blockSize`.
  std::vector<NumericBlock> numeric_blocks(TermId predicate, uint32_t blockSize) const {
    std::vector<NumericBlock> blocks;
    auto run = numericRun(predicate);
    for (size_t at = 0; at < run.size(); at += blockSize) {
      NumericBlock b;
      b.offset = at;
      b.count = static_cast<uint32_t>(std::min<size_t>(blockSize, run.size() - at));
      b.maxVal = run[at].value;
      b.minVal = run[at + b.count - 1].value;
      blocks.push_back(b);
    }
    return blocks;
  }

  std::span<const NumericEntry> blockEntries(TermId predicate, const NumericBlock& b) const {
    return numericRun(predicate).subspan(b.offset, b.count);
  }

  /// Direct (subject, predicate) -> values map for unsorted numeric fetches.
  std::span<const double> numericValues(TermId predicate, TermId subject) const {
    auto it = numericBySubject_.find(predicate);
    if (it == numericBySubject_.end()) return {};
    auto jt = it->second.find(subject);
    if (jt == it->second.end()) return {};
    return jt->second;
  }

  void finalize() {
    for (size_t i = 0; i < kAllOrderings.size(); ++i) {
      auto& idx = order_[i];
      idx.resize(quads.size());
      for (uint32_t j = 0; j < quads.size(); ++j) idx[j] = j;
      Ordering o = kAllOrderings[i];
      std::sort(idx.begin(), idx.end(), [&](uint32_t a, uint32_t b) {
        return order_key(o, quads[a]) < order_key(o, quads[b]);
      });
    }
    numeric_.clear();
    numericBySubject_.clear();
    for (const Quad& q : quads) {
      const Term& obj = dict.lookup(q.o);
      if (obj.kind != TermKind::NumericLit) continue;
      numeric_[q.p].push_back(NumericEntry{q.s, q.o, obj.number});
      numericBySubject_[q.p][q.s].push_back(obj.number);
    }
    for (auto& [p, run] : numeric_) {
      std::sort(run.begin(), run.end(), [](const NumericEntry& a, const NumericEntry& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.subject < b.subject;
      });
    }
    spatialIds_.clear();
    spatialIds_.reserve(geometryOf.size());
    for (auto& [id, g] : geometryOf) spatialIds_.push_back(id);
    std::sort(spatialIds_.begin(), spatialIds_.end());
  }

  void registerGeometryPredicate(TermId p) { geometryPreds_.insert(p); }

 private:
  friend class Scan;
  std::array<std::vector<uint32_t>, 5> order_;
  std::unordered_set<TermId> geometryPreds_;
  std::vector<TermId> spatialIds_;
  std::unordered_map<TermId, std::vector<NumericEntry>> numeric_;
  std::unordered_map<TermId, std::unordered_map<TermId, std::vector<double>>> numericBySubject_;
};

inline Scan::Scan(const QuadStore& store, ScanPattern pattern, Ordering ordering)
    : store_(store), pattern_(pattern), ordering_(ordering) {
  const auto& idx = store.ordering(ordering);
  auto slots = pattern.inKeyOrder(ordering);
  while (prefixLen_ < 4 && slots[prefixLen_].has_value()) ++prefixLen_;
  OrderKey lo{0, 0, 0, 0};
  OrderKey hi{~0ull, ~0ull, ~0ull, ~0ull};
  for (size_t i = 0; i < prefixLen_; ++i) lo[i] = hi[i] = *slots[i];
  auto cmp = [&](uint32_t quadIdx, const OrderKey& key) {
    return order_key(ordering_, store_.quads[quadIdx]) < key;
  };
  cur_ = std::lower_bound(idx.begin(), idx.end(), lo, cmp) - idx.begin();
  auto cmpHi = [&](const OrderKey& key, uint32_t quadIdx) {
    return key < order_key(ordering_, store_.quads[quadIdx]);
  };
  end_ = std::upper_bound(idx.begin(), idx.end(), hi, cmpHi) - idx.begin();
}

inline bool Scan::next(Quad& out) {
  const auto& idx = store_.ordering(ordering_);
  while (cur_ < end_) {
    const Quad& q = store_.quads[idx[cur_]];
    ++cur_;
    if (pattern_.matches(q)) {
      out = q;
      return true;
    }
  }
  return false;
}

inline void Scan::skipTo(TermId value) {
  if (prefixLen_ >= 4) return;
  const auto& idx = store_.ordering(ordering_);
  size_t slot = prefixLen_;
  auto cmp = [&](uint32_t quadIdx, TermId v) {
    return order_key(ordering_, store_.quads[quadIdx])[slot] < v;
  };
  cur_ = std::lower_bound(idx.begin() + cur_, idx.begin() + end_, value, cmp) - idx.begin();
}

// --- reified Turtle loader ---------------------------------------------------

namespace detail {

struct TermToken {
  enum class Kind { Iri, Literal } kind = Kind::Iri;
  std::string lexical;   // IRIs expanded; literals without quotes
  std::string datatype;  // expanded datatype IRI, empty when absent
};

struct RawTriple {
  int line = 0;
  bool hasMarker = false;
  std::string marker;  // expanded IRI text of the reification id
  TermToken s, p, o;
};

class ReifiedParser {
 public:
  std::vector<RawTriple> parse(std::istream& in) {
    std::vector<RawTriple> out;
    std::string line;
    int lineNo = 0;
    bool pendingMarker = false;
    std::string marker;
    int markerLine = 0;
    while (std::getline(in, line)) {
      ++lineNo;
      size_t at = line.find_first_not_of(" \t\r");
      if (at == std::string::npos) continue;
      std::string_view body(line.data() + at, line.size() - at);
      if (body.starts_with("#@")) {
        if (pendingMarker)
          fail(Err::ParseError,
               "line " + std::to_string(markerLine) + ": marker not followed by a triple");
        marker = parseMarker(body, lineNo);
        pendingMarker = true;
        markerLine = lineNo;
        continue;
      }
      if (body.front() == '#') continue;
      if (body.starts_with("@prefix")) {
        parsePrefix(body, lineNo);
        continue;
      }
      RawTriple t = parseTriple(line, at, lineNo);
      if (pendingMarker) {
        t.hasMarker = true;
        t.marker = marker;
        pendingMarker = false;
      }
      out.push_back(std::move(t));
    }
    if (pendingMarker)
      fail(Err::ParseError,
           "line " + std::to_string(markerLine) + ": marker not followed by a triple");
    return out;
  }

 private:
  std::unordered_map<std::string, std::string> prefixes_;

  [[noreturn]] static void err(int line, const std::string& what) {
    fail(Err::ParseError, "line " + std::to_string(line) + ": " + what);
  }

  std::string parseMarker(std::string_view body, int line) {
    size_t lt = body.find('<');
    size_t gt = body.find('>');
    if (lt == std::string_view::npos || gt == std::string_view::npos || gt < lt)
      err(line, "malformed #@ marker");
    return std::string(body.substr(lt + 1, gt - lt - 1));
  }

  void parsePrefix(std::string_view body, int line) {
    // @prefix name: <iri>.
    size_t p = 7;
    while (p < body.size() && isspace(static_cast<unsigned char>(body[p]))) ++p;
    size_t colon = body.find(':', p);
    if (colon == std::string_view::npos) err(line, "malformed @prefix");
    std::string name(body.substr(p, colon - p));
    size_t lt = body.find('<', colon);
    size_t gt = body.find('>', colon);
    if (lt == std::string_view::npos || gt == std::string_view::npos) err(line, "malformed @prefix");
    prefixes_[name] = std::string(body.substr(lt + 1, gt - lt - 1));
  }

  std::string expand(const std::string& pname, int line) {
    size_t colon = pname.find(':');
    std::string prefix = pname.substr(0, colon);
    auto it = prefixes_.find(prefix);
    if (it == prefixes_.end()) return pname;  // undeclared prefixes kept verbatim
    return it->second + pname.substr(colon + 1);
  }

  TermToken parseTerm(const std::string& line, size_t& pos, int lineNo) {
    while (pos < line.size() && isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos >= line.size()) err(lineNo, "expected term");
    TermToken t;
    char c = line[pos];
    if (c == '<') {
      size_t gt = line.find('>', pos);
      if (gt == std::string::npos) err(lineNo, "unterminated IRI");
      t.lexical = line.substr(pos + 1, gt - pos - 1);
      pos = gt + 1;
      return t;
    }
    if (c == '"') {
      std::string value;
      ++pos;
      while (pos < line.size() && line[pos] != '"') {
        if (line[pos] == '\\' && pos + 1 < line.size()) ++pos;
        value += line[pos++];
      }
      if (pos >= line.size()) err(lineNo, "unterminated literal");
      ++pos;  // closing quote
      t.kind = TermToken::Kind::Literal;
      t.lexical = std::move(value);
      if (pos + 1 < line.size() && line[pos] == '^' && line[pos + 1] == '^') {
        pos += 2;
        if (pos < line.size() && line[pos] == '<') {
          size_t gt = line.find('>', pos);
          if (gt == std::string::npos) err(lineNo, "unterminated datatype IRI");
          t.datatype = line.substr(pos + 1, gt - pos - 1);
          pos = gt + 1;
        } else {
          size_t start = pos;
          while (pos < line.size() && !isspace(static_cast<unsigned char>(line[pos])) &&
                 line[pos] != '.')
            ++pos;
          t.datatype = expand(line.substr(start, pos - start), lineNo);
        }
      }
      return t;
    }
    // pname, default-prefix name, or data variable
    size_t start = pos;
    while (pos < line.size() && !isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    std::string word = line.substr(start, pos - start);
    // A trailing '.' terminates the statement, not the name.
    while (!word.empty() && word.back() == '.') {
      word.pop_back();
      --pos;
    }
    if (word.empty()) err(lineNo, "expected term");
    if (word[0] == '?') {
      t.lexical = word;
      return t;
    }
    if (word.find(':') != std::string::npos) {
      t.lexical = expand(word, lineNo);
      return t;
    }
    err(lineNo, "unrecognized term: " + word);
  }

  RawTriple parseTriple(const std::string& line, size_t at, int lineNo) {
    RawTriple t;
    t.line = lineNo;
    size_t pos = at;
    t.s = parseTerm(line, pos, lineNo);
    t.p = parseTerm(line, pos, lineNo);
    if (t.p.kind == TermToken::Kind::Literal) err(lineNo, "predicate cannot be a literal");
    t.o = parseTerm(line, pos, lineNo);
    while (pos < line.size() && isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos >= line.size() || line[pos] != '.') err(lineNo, "expected '.' after triple");
    ++pos;
    while (pos < line.size() && isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos != line.size()) err(lineNo, "trailing characters after '.'");
    return t;
  }
};

}  // namespace detail

/// Mints spatial ids path-by-path; on local-id overflow the object is handed
/// to the parent node. `capacity` is parameterized only so the overflow rule
/// is testable; callers use the 2^39 default.
class SpatialIdMinter {
 public:
  explicit SpatialIdMinter(uint64_t capacity = kLocalCapacity) : capacity_(capacity) {}

  TermId mint(QuadrantPath path) {
    for (;;) {
      uint64_t& counter = counters_[z_bits(path) | (static_cast<uint64_t>(path.level) << 32)];
      if (counter < capacity_) return encode_id(path, counter++);
      if (path.level == 0) fail(Err::LocalIdOverflow, "root node local ids exhausted");
      --path.level;
    }
  }

 private:
  uint64_t capacity_;
  std::unordered_map<uint64_t, uint64_t> counters_;
};

inline QuadStore load_reified(std::istream& in, const Config& config = {}) {
  detail::ReifiedParser parser;
  std::vector<detail::RawTriple> triples = parser.parse(in);

  QuadStore store;
  store.config = config;

  // Pass 1: find geometries, fix the space, mint spatial ids.
  auto isGeomPred = [](const detail::TermToken& p) {
    return p.kind == detail::TermToken::Kind::Iri && local_name(p.lexical) == "hasGeometry";
  };
  std::vector<std::pair<std::string, Geometry>> geometries;  // first-seen subject order
  std::unordered_map<std::string, size_t> geomIndex;
  for (const auto& t : triples) {
    if (!isGeomPred(t.p)) continue;
    if (t.o.kind != detail::TermToken::Kind::Literal)
      fail(Err::GeometryError, "line " + std::to_string(t.line) + ": hasGeometry object must be a WKT literal");
    Geometry g;
    try {
      g = parse_wkt(t.o.lexical);
    } catch (const Error& e) {
      fail(Err::GeometryError, "line " + std::to_string(t.line) + ": " + e.what());
    }
    if (geomIndex.count(t.s.lexical))
      fail(Err::GeometryError,
           "line " + std::to_string(t.line) + ": duplicate geometry for " + t.s.lexical);
    geomIndex.emplace(t.s.lexical, geometries.size());
    geometries.emplace_back(t.s.lexical, std::move(g));
  }

  std::unordered_map<std::string, TermId> spatialIdOf;
  if (!geometries.empty()) {
    MBR space = mbr_of(geometries[0].second);
    for (auto& [lex, g] : geometries) space.expand(mbr_of(g));
    double padX = space.width() > 0 ? 0.001 * space.width() : 0.001 * std::max(space.height(), 1.0);
    double padY = space.height() > 0 ? 0.001 * space.height() : 0.001 * std::max(space.width(), 1.0);
    space.minX -= padX;
    space.maxX += padX;
    space.minY -= padY;
    space.maxY += padY;
    store.space = space;

    SpatialIdMinter minter;
    for (auto& [lex, g] : geometries) {
      QuadrantPath path = quadrant_path(mbr_of(g), space, config.maxLevels);
      spatialIdOf[lex] = minter.mint(path);
    }
  }

  // Pass 2: intern everything and materialize quads.
  uint64_t syntheticReif = 0;
  auto internToken = [&](const detail::TermToken& tok, bool geometryObject) -> TermId {
    if (tok.kind == detail::TermToken::Kind::Iri) {
      auto it = spatialIdOf.find(tok.lexical);
      if (it != spatialIdOf.end())
        return store.dict.intern(Term::iri(tok.lexical), true, it->second);
      return store.dict.intern(Term::iri(tok.lexical));
    }
    if (geometryObject) {
      Geometry g = parse_wkt(tok.lexical);  // validated in pass 1
      return store.dict.intern(Term::geom(tok.lexical, std::move(g)));
    }
    if (local_name(tok.datatype) == "double") {
      char* end = nullptr;
      double v = std::strtod(tok.lexical.c_str(), &end);
      if (end != tok.lexical.c_str() + tok.lexical.size())
        fail(Err::ParseError, "malformed xsd:double literal: " + tok.lexical);
      return store.dict.intern(Term::numeric(tok.lexical, v));
    }
    std::string lex = tok.datatype.empty() ? tok.lexical : tok.lexical + "^^" + tok.datatype;
    return store.dict.intern(Term::str(lex));
  };

  for (const auto& t : triples) {
    TermId reif;
    if (t.hasMarker) {
      detail::TermToken marker;
      marker.lexical = t.marker;
      reif = internToken(marker, false);
    } else {
      reif = store.dict.intern(Term::iri("_:reif" + std::to_string(syntheticReif++)));
    }
    bool geom = isGeomPred(t.p);
    Quad q;
    q.reif = reif;
    q.s = internToken(t.s, false);
    q.p = internToken(t.p, false);
    q.o = internToken(t.o, geom);
    if (geom) {
      store.registerGeometryPredicate(q.p);
      const Geometry& g = geometries[geomIndex.at(t.s.lexical)].second;
      store.geometryOf.emplace(q.s, g);
      store.mbrOf.emplace(q.s, mbr_of(g));
    }
    store.quads.push_back(q);
  }

  store.finalize();
  return store;
}

inline QuadStore load_reified_file(const std::string& path, const Config& config = {}) {
  std::ifstream in(path);
  if (!in) fail(Err::Io, "cannot open " + path);
  return load_reified(in, config);
}

inline QuadStore load_reified_text(const std::string& text, const Config& config = {}) {
  std::istringstream in(text);
  return load_reified(in, config);
}

}  // namespace streak

#endif
