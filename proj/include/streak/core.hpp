#ifndef STREAK_CORE_HPP
#define STREAK_CORE_HPP

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "streak/geometry.hpp"
#include "streak/spatial_id.hpp"

namespace streak {

enum class TermKind : uint8_t { Iri, StringLit, NumericLit, GeometryLit };

/// Text after the last '#', '/' or ':' — used to recognize well-known
/// predicates (hasGeometry, rdf:subject, ...) across prefix spellings.
inline std::string_view local_name(std::string_view iri) {
  size_t cut = iri.find_last_of("#/:");
  return cut == std::string_view::npos ? iri : iri.substr(cut + 1);
}

struct Term {
  std::string lexical;
  TermKind kind = TermKind::Iri;
  double number = 0;                 // NumericLit only
  std::optional<Geometry> geometry;  // GeometryLit only

  static Term iri(std::string s) { return Term{std::move(s), TermKind::Iri, 0, std::nullopt}; }
  static Term str(std::string s) { return Term{std::move(s), TermKind::StringLit, 0, std::nullopt}; }
  static Term numeric(std::string s, double v) {
    return Term{std::move(s), TermKind::NumericLit, v, std::nullopt};
  }
  static Term geom(std::string s, Geometry g) {
    return Term{std::move(s), TermKind::GeometryLit, 0, std::move(g)};
  }
};

/// One reified RDF statement. `reif` may be shared by several statements.
struct Quad {
  TermId reif = 0, s = 0, p = 0, o = 0;
  bool operator==(const Quad&) const = default;
};

/// Term interning. Non-spatial ids are assigned densely from 0 in first-seen
/// order; spatial ids are supplied by the caller (minted by the id codec).
/// Mutated only during load, frozen afterwards.
class Dictionary {
 public:
  TermId intern(const Term& term, bool isSpatial = false, TermId spatialId = 0) {
    std::string key = keyOf(term);
    auto it = byKey_.find(key);
    if (it != byKey_.end()) return it->second;
    TermId id;
    if (isSpatial) {
      if (!is_spatial_id(spatialId))
        fail(Err::NotSpatial, "spatial intern requires an encoded spatial id");
      auto [sit, fresh] = spatial_.emplace(spatialId, term);
      if (!fresh && sit->second.lexical != term.lexical)
        fail(Err::SpatialIdCollision,
             "spatial id already bound to " + sit->second.lexical);
      id = spatialId;
    } else {
      id = static_cast<TermId>(dense_.size());
      dense_.push_back(term);
    }
    byKey_.emplace(std::move(key), id);
    return id;
  }

  const Term& lookup(TermId id) const {
    if (is_spatial_id(id)) {
      auto it = spatial_.find(id);
      if (it == spatial_.end()) fail(Err::UnknownId, "unknown spatial id");
      return it->second;
    }
    if (id >= dense_.size()) fail(Err::UnknownId, "unknown id " + std::to_string(id));
    return dense_[id];
  }

  /// Id of an already-interned term, if any.
  std::optional<TermId> find(const Term& term) const {
    auto it = byKey_.find(keyOf(term));
    if (it == byKey_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<TermId> findIri(const std::string& lexical) const {
    return find(Term::iri(lexical));
  }

  size_t size() const { return byKey_.size(); }
  size_t denseCount() const { return dense_.size(); }

  template <typename F>
  void forEach(F&& f) const {
    for (size_t i = 0; i < dense_.size(); ++i) f(static_cast<TermId>(i), dense_[i]);
    for (const auto& [id, term] : spatial_) f(id, term);
  }

 private:
  // Kind participates in identity so ":x" the IRI and "x" the literal with
  // the same characters never alias.
  static std::string keyOf(const Term& t) {
    std::string k;
    k.reserve(t.lexical.size() + 1);
    k.push_back(static_cast<char>('0' + static_cast<int>(t.kind)));
    k += t.lexical;
    return k;
  }

  std::unordered_map<std::string, TermId> byKey_;
  std::vector<Term> dense_;
  std::unordered_map<TermId, Term> spatial_;
};

}  // namespace streak

#endif
