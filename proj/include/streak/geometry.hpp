#ifndef STREAK_GEOMETRY_HPP
#define STREAK_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "streak/common.hpp"

namespace streak {

struct Vec2 {
  double x = 0, y = 0;
  bool operator==(const Vec2&) const = default;
};

enum class GeomKind : uint8_t { Point, LineString, Polygon };

/// Planar geometry. Polygons are stored as a closed ring (first == last).
struct Geometry {
  GeomKind kind = GeomKind::Point;
  std::vector<Vec2> vertices;
};

struct MBR {
  double minX = 0, minY = 0, maxX = 0, maxY = 0;

  bool valid() const { return minX <= maxX && minY <= maxY; }

  void expand(const Vec2& p) {
    minX = std::min(minX, p.x);
    minY = std::min(minY, p.y);
    maxX = std::max(maxX, p.x);
    maxY = std::max(maxY, p.y);
  }

  void expand(const MBR& o) {
    minX = std::min(minX, o.minX);
    minY = std::min(minY, o.minY);
    maxX = std::max(maxX, o.maxX);
    maxY = std::max(maxY, o.maxY);
  }

  bool intersects(const MBR& o) const {
    return !(o.minX > maxX || o.maxX < minX || o.minY > maxY || o.maxY < minY);
  }

  bool containsMBR(const MBR& o) const {
    return o.minX >= minX && o.maxX <= maxX && o.minY >= minY && o.maxY <= maxY;
  }

  MBR clippedTo(const MBR& o) const {
    return MBR{std::max(minX, o.minX), std::max(minY, o.minY), std::min(maxX, o.maxX),
               std::min(maxY, o.maxY)};
  }

  double width() const { return maxX - minX; }
  double height() const { return maxY - minY; }
  double diagonal() const { return std::hypot(width(), height()); }

  bool operator==(const MBR&) const = default;
};

inline MBR mbr_of(const Geometry& g) {
  MBR box{g.vertices[0].x, g.vertices[0].y, g.vertices[0].x, g.vertices[0].y};
  for (const Vec2& v : g.vertices) box.expand(v);
  return box;
}

/// Minimum distance between two axis-aligned rectangles; 0 when they overlap.
inline double mbr_min_distance(const MBR& a, const MBR& b) {
  double dx = 0;
  if (b.minX > a.maxX) dx = b.minX - a.maxX;
  else if (a.minX > b.maxX) dx = a.minX - b.maxX;
  double dy = 0;
  if (b.minY > a.maxY) dy = b.minY - a.maxY;
  else if (a.minY > b.maxY) dy = a.minY - b.maxY;
  return std::hypot(dx, dy);
}

// --- WKT ------------------------------------------------------------------
//
// Accepts both the standard `POINT(28.6 77.2)` form and the comma-separated
// `POINT(28.6,77.2)` form, plus per-vertex parentheses as in
// `LINESTRING((a,b),(c,d))`.

namespace detail {

struct WktCursor {
  std::string_view text;
  size_t pos = 0;

  void skipWs() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool eat(char c) {
    skipWs();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  [[noreturn]] void err(const std::string& what) const {
    fail(Err::WktSyntax, "WKT syntax error at offset " + std::to_string(pos) + ": " + what);
  }
  double number() {
    skipWs();
    const char* begin = text.data() + pos;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) err("expected number");
    pos += static_cast<size_t>(end - begin);
    return v;
  }
};

inline std::vector<Vec2> wktCoordList(WktCursor& c) {
  std::vector<Vec2> pts;
  for (;;) {
    bool wrapped = c.eat('(');
    Vec2 p;
    p.x = c.number();
    if (!c.eat(',')) c.skipWs();  // either "x,y" or "x y"
    p.y = c.number();
    if (wrapped && !c.eat(')')) c.err("expected ')'");
    pts.push_back(p);
    if (!c.eat(',')) break;
  }
  return pts;
}

}  // namespace detail

inline Geometry parse_wkt(std::string_view text) {
  detail::WktCursor c{text};
  c.skipWs();
  auto startsWith = [&](std::string_view kw) {
    if (text.size() - c.pos < kw.size()) return false;
    for (size_t i = 0; i < kw.size(); ++i)
      if (std::toupper(static_cast<unsigned char>(text[c.pos + i])) != kw[i]) return false;
    return true;
  };
  Geometry g;
  if (startsWith("POINT")) {
    g.kind = GeomKind::Point;
    c.pos += 5;
  } else if (startsWith("LINESTRING")) {
    g.kind = GeomKind::LineString;
    c.pos += 10;
  } else if (startsWith("POLYGON")) {
    g.kind = GeomKind::Polygon;
    c.pos += 7;
  } else {
    c.err("expected POINT, LINESTRING or POLYGON");
  }
  if (!c.eat('(')) c.err("expected '('");
  c.skipWs();
  if (c.pos < text.size() && text[c.pos] == ')') c.err("empty coordinate list");
  // POLYGON may carry one extra ring nesting: POLYGON((x y, x y, ...)). Both
  // this and the per-vertex-paren style start with '(', so try the nested
  // reading first and fall back to a flat list.
  bool parsed = false;
  if (g.kind == GeomKind::Polygon) {
    size_t save = c.pos;
    if (c.eat('(')) {
      try {
        std::vector<Vec2> pts = detail::wktCoordList(c);
        if (c.eat(')') && c.eat(')')) {
          c.skipWs();
          if (c.pos == text.size()) {
            g.vertices = std::move(pts);
            parsed = true;
          }
        }
      } catch (const Error&) {
      }
      if (!parsed) c.pos = save;
    }
  }
  if (!parsed) {
    g.vertices = detail::wktCoordList(c);
    if (!c.eat(')')) c.err("expected ')'");
    c.skipWs();
    if (c.pos != text.size()) c.err("trailing characters");
  }

  switch (g.kind) {
    case GeomKind::Point:
      if (g.vertices.size() != 1) c.err("POINT takes exactly one vertex");
      break;
    case GeomKind::LineString:
      if (g.vertices.size() < 2) c.err("LINESTRING needs at least 2 vertices");
      break;
    case GeomKind::Polygon:
      if (!g.vertices.empty() && !(g.vertices.front() == g.vertices.back()))
        g.vertices.push_back(g.vertices.front());
      if (g.vertices.size() < 4) c.err("POLYGON needs at least 3 distinct vertices");
      break;
  }
  return g;
}

// --- exact distance --------------------------------------------------------

namespace detail {

inline double pointPoint(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double pointSeg(const Vec2& p, const Vec2& a, const Vec2& b) {
  double dx = b.x - a.x, dy = b.y - a.y;
  double len2 = dx * dx + dy * dy;
  if (len2 == 0) return pointPoint(p, a);
  double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return pointPoint(p, Vec2{a.x + t * dx, a.y + t * dy});
}

inline int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  if (v > 0) return 1;
  if (v < 0) return -1;
  return 0;
}

inline bool onSegment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

inline bool segmentsIntersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  int o1 = orient(a, b, c), o2 = orient(a, b, d);
  int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && onSegment(a, b, c)) return true;
  if (o2 == 0 && onSegment(a, b, d)) return true;
  if (o3 == 0 && onSegment(c, d, a)) return true;
  if (o4 == 0 && onSegment(c, d, b)) return true;
  return false;
}

inline double segSeg(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  if (segmentsIntersect(a, b, c, d)) return 0.0;
  return std::min(std::min(pointSeg(a, c, d), pointSeg(b, c, d)),
                  std::min(pointSeg(c, a, b), pointSeg(d, a, b)));
}

/// Even-odd test against a closed ring (first == last).
inline bool pointInRing(const Vec2& p, const std::vector<Vec2>& ring) {
  bool inside = false;
  for (size_t i = 0; i + 1 < ring.size(); ++i) {
    const Vec2& a = ring[i];
    const Vec2& b = ring[i + 1];
    if ((a.y > p.y) != (b.y > p.y)) {
      double xCross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < xCross) inside = !inside;
    }
  }
  return inside;
}

inline size_t segmentCount(const Geometry& g) {
  return g.kind == GeomKind::Point ? 0 : g.vertices.size() - 1;
}

}  // namespace detail

/// Minimum Euclidean distance between the point sets of two geometries.
/// Polygons count as boundary plus interior, so containment gives 0.
inline double exact_distance(const Geometry& a, const Geometry& b) {
  using namespace detail;
  // Containment cases (a vertex of one inside the other polygon).
  if (a.kind == GeomKind::Polygon) {
    for (const Vec2& v : b.vertices)
      if (pointInRing(v, a.vertices)) return 0.0;
  }
  if (b.kind == GeomKind::Polygon) {
    for (const Vec2& v : a.vertices)
      if (pointInRing(v, b.vertices)) return 0.0;
  }
  const size_t na = segmentCount(a), nb = segmentCount(b);
  if (na == 0 && nb == 0) return pointPoint(a.vertices[0], b.vertices[0]);
  double best = std::numeric_limits<double>::infinity();
  if (na == 0) {
    for (size_t j = 0; j < nb; ++j)
      best = std::min(best, pointSeg(a.vertices[0], b.vertices[j], b.vertices[j + 1]));
    return best;
  }
  if (nb == 0) {
    for (size_t i = 0; i < na; ++i)
      best = std::min(best, pointSeg(b.vertices[0], a.vertices[i], a.vertices[i + 1]));
    return best;
  }
  for (size_t i = 0; i < na; ++i)
    for (size_t j = 0; j < nb; ++j)
      best = std::min(best, segSeg(a.vertices[i], a.vertices[i + 1], b.vertices[j],
                                   b.vertices[j + 1]));
  return best;
}

// --- quadrant paths ---------------------------------------------------------

/// Digit convention: 2*yBit + xBit; xBit = 1 for the right half, yBit = 1 for
/// the upper half.
struct QuadrantPath {
  std::array<uint8_t, 10> digit{};
  uint8_t level = 0;

  void push(uint8_t d) { digit[level++] = d; }

  bool operator==(const QuadrantPath& o) const {
    if (level != o.level) return false;
    for (uint8_t i = 0; i < level; ++i)
      if (digit[i] != o.digit[i]) return false;
    return true;
  }

  /// True when `this` is a (non-strict) prefix of `o`.
  bool isPrefixOf(const QuadrantPath& o) const {
    if (level > o.level) return false;
    for (uint8_t i = 0; i < level; ++i)
      if (digit[i] != o.digit[i]) return false;
    return true;
  }

  std::string str() const {
    std::string s = "[";
    for (uint8_t i = 0; i < level; ++i) {
      if (i) s += ',';
      s += static_cast<char>('0' + digit[i]);
    }
    return s + "]";
  }
};

inline MBR quadrant_cell(const MBR& cell, uint8_t digit) {
  double cx = 0.5 * (cell.minX + cell.maxX);
  double cy = 0.5 * (cell.minY + cell.maxY);
  MBR out = cell;
  if (digit & 1) out.minX = cx; else out.maxX = cx;
  if (digit & 2) out.minY = cy; else out.maxY = cy;
  return out;
}

inline MBR cell_of(const MBR& space, const QuadrantPath& path) {
  MBR cell = space;
  for (uint8_t i = 0; i < path.level; ++i) cell = quadrant_cell(cell, path.digit[i]);
  return cell;
}

/// Longest quadrant path (up to maxLevels) whose cell fully contains m.
inline QuadrantPath quadrant_path(const MBR& m, const MBR& space, uint32_t maxLevels) {
  if (!space.containsMBR(m))
    fail(Err::OutsideSpace, "geometry MBR lies outside the indexed space");
  QuadrantPath p;
  MBR cell = space;
  for (uint32_t l = 0; l < maxLevels; ++l) {
    double cx = 0.5 * (cell.minX + cell.maxX);
    double cy = 0.5 * (cell.minY + cell.maxY);
    uint8_t xb, yb;
    if (m.minX >= cx) xb = 1;
    else if (m.maxX <= cx) xb = 0;
    else break;
    if (m.minY >= cy) yb = 1;
    else if (m.maxY <= cy) yb = 0;
    else break;
    uint8_t d = static_cast<uint8_t>(2 * yb + xb);
    p.push(d);
    cell = quadrant_cell(cell, d);
  }
  return p;
}

}  // namespace streak

#endif
