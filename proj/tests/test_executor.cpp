#include "streak/executor.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/oracle.hpp"
#include "support/test_util.hpp"

using namespace streak;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  EXPECT_TRUE(in.good()) << path;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Query runningExample() {
  return parse_query(slurp(std::string(STREAK_SOURCE_DIR) + "/queries/running_example.sparql"));
}

std::string lex(const QuadStore& s, const ResultSet& rs, const ResultRow& row,
                const std::string& var) {
  auto it = std::find(rs.varNames.begin(), rs.varNames.end(), var);
  EXPECT_NE(it, rs.varNames.end());
  return s.dict.lookup(row.values[it - rs.varNames.begin()]).lexical;
}

void expectSameRows(const ResultSet& got, const ResultSet& want, const std::string& what) {
  ASSERT_EQ(got.varNames, want.varNames) << what;
  ASSERT_EQ(got.rows.size(), want.rows.size()) << what;
  for (size_t i = 0; i < got.rows.size(); ++i) {
    EXPECT_EQ(got.rows[i].values, want.rows[i].values) << what << " row " << i;
    EXPECT_NEAR(got.rows[i].score, want.rows[i].score, 1e-9) << what << " row " << i;
  }
}

/// Two-class dataset: class A entities carry :isA/:scoreA, class B entities
/// :isB/:scoreB; everyone has a point geometry, plus reified :hasType facts
/// with confidences for the reification-join query.
std::string twoClassDataset(Rng& rng, int n, double bFrac = 0.5) {
  std::string text = "@prefix xsd: <http://www.w3.org/2001/XMLSchema#>.\n";
  char buf[256];
  for (int i = 0; i < n; ++i) {
    double x = rng.uniform(0, 100), y = rng.uniform(0, 100);
    double v = rng.truncatedExponential(1.2);
    double conf = rng.nextDouble();
    bool classB = rng.nextDouble() < bFrac;
    std::string e = ":e" + std::to_string(i);
    snprintf(buf, sizeof buf, "#@ <f%d>\n%s :hasType :%s.\n<f%d> :hasConfidence \"%.9f\"^^xsd:double.\n",
             i, e.c_str(), classB ? "parkish" : "hotelish", i, conf);
    text += buf;
    snprintf(buf, sizeof buf, "%s :%s \"%.9f\"^^xsd:double.\n", e.c_str(),
             classB ? "scoreB" : "scoreA", v);
    text += buf;
    text += e + (classB ? " :isB :tag.\n" : " :isA :tag.\n");
    snprintf(buf, sizeof buf, "%s :hasGeometry \"POINT(%.6f %.6f)\".\n", e.c_str(), x, y);
    text += buf;
  }
  return text;
}

const char* kSumQuery =
    "SELECT ?a ?b WHERE { ?a :isA ?t1. ?a :scoreA ?sa. ?a :hasGeometry ?ga. "
    "?b :isB ?t2. ?b :scoreB ?sb. ?b :hasGeometry ?gb. "
    "FILTER(distance(?ga,?gb) < 8) } ORDER BY DESC(?sa + ?sb) LIMIT k";

const char* kProductAscQuery =
    "SELECT ?a ?b WHERE { ?a :isA ?t1. ?a :scoreA ?sa. ?a :hasGeometry ?ga. "
    "?b :isB ?t2. ?b :scoreB ?sb. ?b :hasGeometry ?gb. "
    "FILTER(distance(?ga,?gb) < 8) } ORDER BY ASC(?sa * ?sb) LIMIT k";

const char* kReifiedQuery =
    "SELECT ?a ?b WHERE { "
    "?r rdf:subject ?a. ?r rdf:predicate :hasType. ?r rdf:object :hotelish. "
    "?r :hasConfidence ?ca. ?a :hasGeometry ?ga. "
    "?r1 rdf:subject ?b. ?r1 rdf:predicate :hasType. ?r1 rdf:object :parkish. "
    "?r1 :hasConfidence ?cb. ?b :hasGeometry ?gb. "
    "FILTER((?ga, ?gb) < 8) } ORDER BY ASC(?ca + ?cb) LIMIT k";

struct Fixture {
  QuadStore store;
  SQuadTree tree;
};

Fixture makeFixture(const std::string& text, uint32_t blockSize = 16,
                    uint32_t leafCapacity = 8) {
  Config cfg;
  cfg.blockSize = blockSize;
  cfg.leafCapacity = leafCapacity;
  Fixture f{load_reified_text(text, cfg), {}};
  f.tree = SQuadTree::build(f.store, cfg);
  return f;
}

}  // namespace

TEST(ExecuteTopK, RunningExampleOverWineData) {
  Fixture f = makeFixture(testsupport::kWineSampleNumeric);
  Query q = runningExample();
  ExecStats stats;
  ResultSet rs = execute_topk(q, f.store, f.tree, {}, &stats);
  ASSERT_EQ(rs.rows.size(), 1u);
  EXPECT_EQ(lex(f.store, rs, rs.rows[0], "?wineRegion"), ":Mosel");
  EXPECT_EQ(lex(f.store, rs, rs.rows[0], "?river"), ":Moselle");
  EXPECT_NEAR(rs.rows[0].score, 4500000000.0 * 0.9, 1e-3);
  expectSameRows(rs, testsupport::oracle_topk(q, f.store, 1), "wine");
}

TEST(ExecuteTopK, KLargerThanJoinReturnsEverythingSorted) {
  Fixture f = makeFixture(testsupport::kWineSampleNumeric);
  Query q = runningExample();
  ExecOptions opts;
  opts.k = 100;
  ResultSet rs = execute_topk(q, f.store, f.tree, opts);
  expectSameRows(rs, testsupport::oracle_topk(q, f.store, 100), "k>join");
  EXPECT_EQ(rs.rows.size(), 1u);
}

TEST(ExecuteTopK, AllModesMatchOracleOnRandomData) {
  Rng rng(808);
  std::string text = twoClassDataset(rng, 400);
  Fixture f = makeFixture(text);
  for (const char* queryText : {kSumQuery, kProductAscQuery, kReifiedQuery}) {
    Query q = parse_query(queryText);
    for (int64_t k : {1, 3, 10, 100}) {
      ResultSet want = testsupport::oracle_topk(q, f.store, static_cast<size_t>(k));
      for (PlanMode mode : {PlanMode::Aps, PlanMode::NPlan, PlanMode::SPlan}) {
        ExecOptions opts;
        opts.plan = mode;
        opts.k = k;
        ResultSet got = execute_topk(q, f.store, f.tree, opts);
        expectSameRows(got, want,
                       std::string(queryText).substr(0, 24) + " k=" + std::to_string(k) +
                           " mode=" + std::to_string(static_cast<int>(mode)));
      }
      // R-tree baseline returns identical rows.
      ExecOptions opts;
      opts.algo = JoinAlgo::Rtree;
      opts.k = k;
      ResultSet got = execute_topk(q, f.store, f.tree, opts);
      expectSameRows(got, want, std::string("rtree k=") + std::to_string(k));
    }
  }
}

TEST(ExecuteTopK, PathologicalPlanSwitchingStaysExact) {
  Rng rng(606);
  std::string text = twoClassDataset(rng, 300);
  Fixture f = makeFixture(text, /*blockSize=*/8);
  Query q = parse_query(kSumQuery);
  ExecOptions opts;
  opts.k = 10;
  int flip = 0;
  opts.planHook = [&](double, double) { return flip++ % 2; };
  ExecStats stats;
  ResultSet got = execute_topk(q, f.store, f.tree, opts, &stats);
  expectSameRows(got, testsupport::oracle_topk(q, f.store, 10), "alternating plans");
  if (stats.planTrace.size() >= 2) EXPECT_GE(stats.planSwitches, stats.planTrace.size() - 1);
}

TEST(ExecuteTopK, ForcedPlansFollowTheFlag) {
  Rng rng(707);
  std::string text = twoClassDataset(rng, 200);
  Fixture f = makeFixture(text, /*blockSize=*/8);
  Query q = parse_query(kSumQuery);
  for (auto [mode, letter] : {std::pair{PlanMode::NPlan, 'N'}, {PlanMode::SPlan, 'S'}}) {
    ExecOptions opts;
    opts.plan = mode;
    opts.k = 5;
    ExecStats stats;
    execute_topk(q, f.store, f.tree, opts, &stats);
    ASSERT_FALSE(stats.planTrace.empty());
    for (char c : stats.planTrace) EXPECT_EQ(c, letter);
    EXPECT_EQ(stats.planSwitches, 0u);
  }
}

TEST(ExecuteTopK, EarlyTerminationIsSound) {
  Rng rng(909);
  std::string text = twoClassDataset(rng, 500);
  Fixture f = makeFixture(text, /*blockSize=*/8);
  Query q = parse_query(kSumQuery);
  ExecOptions opts;
  opts.k = 1;
  ExecStats stats;
  ResultSet got = execute_topk(q, f.store, f.tree, opts, &stats);
  expectSameRows(got, testsupport::oracle_topk(q, f.store, 1), "early termination");
  // With k=1 and skewed scores the driver loop should stop well short.
  EXPECT_TRUE(stats.earlyTerminated);
  EXPECT_LT(stats.driverBlocks, (stats.driverRows + 7) / 8);
}

TEST(SipFilter, RootPassesEverything) {
  Fixture f = makeFixture(testsupport::kWineSampleNumeric);
  const SQuadTreeNode* root = &f.tree.root();
  SipFilter sip = SipFilter::fromNodes(std::span(&root, 1));
  for (TermId id : f.store.spatialIds()) EXPECT_TRUE(sip.pass(id));
}

TEST(SipFilter, PartitionsTheScan) {
  Rng rng(111);
  std::string text;
  char buf[128];
  for (int i = 0; i < 400; ++i) {
    snprintf(buf, sizeof buf, ":e%d :hasGeometry \"POINT(%.6f %.6f)\".\n", i,
             rng.uniform(0, 100), rng.uniform(0, 100));
    text += buf;
  }
  Config cfg;
  cfg.leafCapacity = 16;
  QuadStore store = load_reified_text(text, cfg);
  SQuadTree tree = SQuadTree::build(store, cfg);
  // Pick one level-1 child as V*.
  const SQuadTreeNode* child = nullptr;
  for (const auto& c : tree.root().child)
    if (c) {
      child = c.get();
      break;
    }
  ASSERT_NE(child, nullptr);
  SipFilter sip = SipFilter::fromNodes(std::span(&child, 1));
  size_t passed = 0, skipped = 0;
  for (TermId id : store.spatialIds()) (sip.pass(id) ? passed : skipped)++;
  EXPECT_EQ(passed + skipped, store.spatialIds().size());
  // Uniform points over 4 quadrants: roughly a quarter pass.
  EXPECT_GT(passed, 400 * 0.15);
  EXPECT_LT(passed, 400 * 0.35);
}

TEST(SpatialJoinBlock, PairWithinDistanceSurvives) {
  MBR space{0, 0, 10, 10};
  std::vector<SpatialObj> driver{{1, MBR{1, 1, 1, 1}}};
  std::vector<SpatialObj> driven{{2, MBR{1.5, 1, 1.5, 1}}};
  size_t cands = 0;
  auto pairs = spatial_join_block(driver, driven, space, 1.0, 10, &cands);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(cands, 1u);
}

TEST(SpatialJoinBlock, FarCornersPruned) {
  MBR space{0, 0, 1, 1};
  std::vector<SpatialObj> driver{{1, MBR{0.01, 0.01, 0.01, 0.01}}};
  std::vector<SpatialObj> driven{{2, MBR{0.99, 0.99, 0.99, 0.99}}};
  size_t cands = 0;
  auto pairs = spatial_join_block(driver, driven, space, 0.01, 10, &cands);
  EXPECT_TRUE(pairs.empty());
  EXPECT_EQ(cands, 0u);
}

TEST(SpatialJoinBlock, BoundsAgainstNestedLoopOracle) {
  Rng rng(212);
  MBR space{0, 0, 100, 100};
  std::vector<SpatialObj> driver, driven;
  std::vector<Geometry> dgeom, vgeom;
  for (int i = 0; i < 500; ++i) {
    Geometry g = testsupport::randomGeometry(rng);
    for (auto& v : g.vertices) {
      v.x = std::clamp(v.x * 9, 0.5, 99.5);
      v.y = std::clamp(v.y * 9, 0.5, 99.5);
    }
    if (i % 2) {
      driver.push_back({static_cast<TermId>(i), mbr_of(g)});
      dgeom.push_back(g);
    } else {
      driven.push_back({static_cast<TermId>(i), mbr_of(g)});
      vgeom.push_back(g);
    }
  }
  const double d = 4.0;
  size_t cands = 0;
  auto pairs = spatial_join_block(driver, driven, space, d, 10, &cands);
  std::set<std::pair<TermId, TermId>> got(pairs.begin(), pairs.end());

  size_t mbrFilterCount = 0;
  for (size_t i = 0; i < driver.size(); ++i) {
    for (size_t j = 0; j < driven.size(); ++j) {
      bool mbrClose = mbr_min_distance(driver[i].mbr, driven[j].mbr) <= d;
      mbrFilterCount += mbrClose;
      bool exact = exact_distance(dgeom[i], vgeom[j]) <= d;
      if (exact) {
        EXPECT_TRUE(got.count({driver[i].id, driven[j].id}))
            << driver[i].id << " " << driven[j].id;
      }
      if (!mbrClose) EXPECT_FALSE(got.count({driver[i].id, driven[j].id}));
    }
  }
  EXPECT_LE(cands, mbrFilterCount);
}

TEST(Refine, BoundaryUsesStrictLess) {
  QuadStore s = load_reified_text(
      ":a :hasGeometry \"POINT(0,0)\".\n"
      ":b :hasGeometry \"POINT(3,4)\".\n"
      ":c :hasGeometry \"POINT(0,1)\".\n");
  TermId a = *s.dict.findIri(":a");
  TermId b = *s.dict.findIri(":b");
  TermId c = *s.dict.findIri(":c");
  std::vector<std::pair<TermId, TermId>> cands{{a, b}, {a, c}};
  auto kept5 = refine(cands, 5.0, s);  // (a,b) at exactly 5 is dropped
  ASSERT_EQ(kept5.size(), 1u);
  EXPECT_EQ(kept5[0].second, c);
  EXPECT_TRUE(refine(std::span<const std::pair<TermId, TermId>>{}, 1.0, s).empty());
}

TEST(Refine, MbrCloseButExactlyFarPairDropped) {
  // L-shaped linestrings with overlapping boxes but distant point sets.
  QuadStore s = load_reified_text(
      ":a :hasGeometry \"LINESTRING(0 0, 10 0, 10 10)\".\n"
      ":b :hasGeometry \"LINESTRING(0 2, 8 2, 8 8)\".\n");
  TermId a = *s.dict.findIri(":a");
  TermId b = *s.dict.findIri(":b");
  EXPECT_DOUBLE_EQ(mbr_min_distance(s.mbrOf.at(a), s.mbrOf.at(b)), 0.0);
  std::vector<std::pair<TermId, TermId>> cands{{a, b}};
  EXPECT_TRUE(refine(cands, 2.0, s).empty());
  EXPECT_EQ(refine(cands, 2.5, s).size(), 1u);
}

// theta already beating every numeric block bound forces the free N-Plan.
TEST(ApsStep, ZeroBlocksPicksNPlan) {
  CostContext ctx;
  ctx.x = 0;
  ctx.nb = 12;
  ctx.cardFull = 400;
  ctx.tBlock = 2;
  ctx.tFull = 20;
  EXPECT_EQ(pick_driven_plan(ctx), DrivenPlanKind::NPlan);
}
