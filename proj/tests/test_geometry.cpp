#include "streak/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/geom_oracle.hpp"
#include "support/test_util.hpp"

using namespace streak;

TEST(Wkt, PaperStylePoint) {
  Geometry g = parse_wkt("POINT(28.6,77.2)");
  EXPECT_EQ(g.kind, GeomKind::Point);
  ASSERT_EQ(g.vertices.size(), 1u);
  EXPECT_DOUBLE_EQ(g.vertices[0].x, 28.6);
  EXPECT_DOUBLE_EQ(g.vertices[0].y, 77.2);
}

TEST(Wkt, PaperStyleLineString) {
  Geometry g = parse_wkt("LINESTRING((28.3,77.5),(28.4,77.6))");
  EXPECT_EQ(g.kind, GeomKind::LineString);
  ASSERT_EQ(g.vertices.size(), 2u);
  EXPECT_DOUBLE_EQ(g.vertices[1].x, 28.4);
}

TEST(Wkt, StandardForms) {
  EXPECT_EQ(parse_wkt("POINT(1 2)").vertices[0].y, 2.0);
  EXPECT_EQ(parse_wkt("LINESTRING(0 0, 4 1)").vertices.size(), 2u);
  Geometry ring = parse_wkt("POLYGON((0 0, 2 0, 1 2, 0 0))");
  EXPECT_EQ(ring.kind, GeomKind::Polygon);
  EXPECT_EQ(ring.vertices.size(), 4u);
  // Open ring gets closed during normalization.
  Geometry open = parse_wkt("POLYGON((0,0),(2,0),(1,2))");
  EXPECT_EQ(open.vertices.size(), 4u);
  EXPECT_EQ(open.vertices.front(), open.vertices.back());
}

TEST(Wkt, Errors) {
  EXPECT_THROW_CODE(parse_wkt("POINT()"), Err::WktSyntax);
  EXPECT_THROW_CODE(parse_wkt("CIRCLE(1 2)"), Err::WktSyntax);
  EXPECT_THROW_CODE(parse_wkt("POINT(1 2"), Err::WktSyntax);
  EXPECT_THROW_CODE(parse_wkt("LINESTRING(1 2)"), Err::WktSyntax);
  EXPECT_THROW_CODE(parse_wkt("POINT(1 2) junk"), Err::WktSyntax);
}

TEST(Mbr, OfGeometries) {
  EXPECT_EQ(mbr_of(parse_wkt("POINT(2,3)")), (MBR{2, 3, 2, 3}));
  EXPECT_EQ(mbr_of(parse_wkt("LINESTRING(0 0, 4 1)")), (MBR{0, 0, 4, 1}));
  EXPECT_EQ(mbr_of(parse_wkt("POLYGON((0 0, 2 0, 1 2, 0 0))")), (MBR{0, 0, 2, 2}));
}

TEST(Mbr, MinDistance) {
  EXPECT_DOUBLE_EQ(mbr_min_distance({0, 0, 1, 1}, {0.5, 0.5, 2, 2}), 0.0);
  EXPECT_DOUBLE_EQ(mbr_min_distance({0, 0, 1, 1}, {3, 0, 4, 1}), 2.0);
  EXPECT_NEAR(mbr_min_distance({0, 0, 1, 1}, {2, 2, 3, 3}), std::sqrt(2.0), 1e-12);
}

TEST(Mbr, DistanceProperties) {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    MBR a = testsupport::randomBox(rng);
    MBR b = testsupport::randomBox(rng);
    EXPECT_DOUBLE_EQ(mbr_min_distance(a, b), mbr_min_distance(b, a));
    EXPECT_DOUBLE_EQ(mbr_min_distance(a, a), 0.0);
  }
}

TEST(ExactDistance, KnownCases) {
  EXPECT_DOUBLE_EQ(exact_distance(parse_wkt("POINT(0,0)"), parse_wkt("POINT(3,4)")), 5.0);
  EXPECT_DOUBLE_EQ(
      exact_distance(parse_wkt("POINT(0,1)"), parse_wkt("LINESTRING(-1 0, 1 0)")), 1.0);
  // Crossing segments touch.
  EXPECT_DOUBLE_EQ(exact_distance(parse_wkt("LINESTRING(0 0, 2 2)"),
                                  parse_wkt("LINESTRING(0 2, 2 0)")),
                   0.0);
  // A point strictly inside a polygon.
  EXPECT_DOUBLE_EQ(
      exact_distance(parse_wkt("POINT(1,0.5)"), parse_wkt("POLYGON((0 0, 2 0, 1 2, 0 0))")), 0.0);
  // Nested polygons (no boundary contact).
  Geometry outer = parse_wkt("POLYGON((0 0, 10 0, 10 10, 0 10, 0 0))");
  Geometry inner = parse_wkt("POLYGON((4 4, 6 4, 5 6, 4 4))");
  EXPECT_DOUBLE_EQ(exact_distance(outer, inner), 0.0);
}

TEST(ExactDistance, MatchesSearchOracle) {
  Rng rng(42);
  for (int i = 0; i < 60; ++i) {
    Geometry a = testsupport::randomGeometry(rng);
    Geometry b = testsupport::randomGeometry(rng);
    double got = exact_distance(a, b);
    double expected = testsupport::oracleDistance(a, b);
    EXPECT_NEAR(got, expected, 1e-6) << "pair " << i;
  }
}

TEST(ExactDistance, LowerBoundedByMbrDistance) {
  Rng rng(99);
  for (int i = 0; i < 5000; ++i) {
    Geometry a = testsupport::randomGeometry(rng);
    Geometry b = testsupport::randomGeometry(rng);
    EXPECT_GE(exact_distance(a, b) + 1e-9, mbr_min_distance(mbr_of(a), mbr_of(b)));
  }
}

TEST(QuadrantPath, KnownCells) {
  MBR space{0, 0, 1, 1};
  QuadrantPath p = quadrant_path(MBR{0.1, 0.1, 0.1, 0.1}, space, 2);
  ASSERT_EQ(p.level, 2);
  EXPECT_EQ(p.digit[0], 0);
  EXPECT_EQ(p.digit[1], 0);

  EXPECT_EQ(quadrant_path(MBR{0.4, 0.4, 0.6, 0.6}, space, 10).level, 0);

  QuadrantPath q = quadrant_path(MBR{0.6, 0.1, 0.7, 0.2}, space, 1);
  ASSERT_EQ(q.level, 1);
  EXPECT_EQ(q.digit[0], 1);
}

TEST(QuadrantPath, OutsideSpace) {
  EXPECT_THROW_CODE(quadrant_path(MBR{2, 2, 3, 3}, MBR{0, 0, 1, 1}, 4), Err::OutsideSpace);
}

// Exhaustive oracle: enumerate every containing chain of closed cells and
// require the implementation to return one of the deepest ones.
TEST(QuadrantPath, MatchesExhaustiveOracle) {
  MBR space{0, 0, 1, 1};
  Rng rng(5);
  const uint32_t maxLevels = 4;
  for (int i = 0; i < 3000; ++i) {
    MBR m = testsupport::randomBox(rng);
    QuadrantPath got = quadrant_path(m, space, maxLevels);
    uint8_t deepest = 0;
    bool gotSeen = false;
    std::vector<std::pair<MBR, QuadrantPath>> frontier{{space, {}}};
    for (uint32_t level = 0; level < maxLevels; ++level) {
      std::vector<std::pair<MBR, QuadrantPath>> next;
      for (auto& [cell, path] : frontier) {
        for (uint8_t d = 0; d < 4; ++d) {
          MBR child = quadrant_cell(cell, d);
          if (child.containsMBR(m)) {
            QuadrantPath p = path;
            p.push(d);
            deepest = std::max<uint8_t>(deepest, p.level);
            if (p == got) gotSeen = true;
            next.emplace_back(child, p);
          }
        }
      }
      frontier = std::move(next);
    }
    EXPECT_EQ(got.level, deepest) << "not maximal for box " << i;
    if (got.level > 0) EXPECT_TRUE(gotSeen) << "returned path does not contain box " << i;
    EXPECT_TRUE(cell_of(space, got).containsMBR(m));
  }
}
