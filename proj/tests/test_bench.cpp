#include "streak/bench.hpp"

#include <gtest/gtest.h>

#include "streak/datagen.hpp"
#include "streak/snapshot.hpp"
#include "support/test_util.hpp"

using namespace streak;

namespace {

struct Db {
  QuadStore store;
  SQuadTree tree;
};

Db benchDb(uint64_t n = 300) {
  DatasetSpec spec = DatasetSpec::parse(
      "nSpatial = " + std::to_string(n) +
      "\nseed = 21\n"
      "template = name=hotel frac=0.5 numeric=hasStars links=isLocatedIn reif=true\n"
      "template = name=park frac=0.5 numeric=hasArea links=isLocatedIn reif=true\n");
  Config cfg;
  cfg.blockSize = 32;
  cfg.leafCapacity = 16;
  Db db{load_reified_text(generate_dataset(spec), cfg), {}};
  db.tree = SQuadTree::build(db.store, cfg);
  return db;
}

Query benchQuery() {
  return parse_query(
      "SELECT ?place ?nplace WHERE { "
      "?r rdf:subject ?place. ?r rdf:predicate :hasType. ?r rdf:object :hotel. "
      "?r :hasConfidence ?conf. ?place :hasGeometry ?long. "
      "?r1 rdf:subject ?nplace. ?r1 rdf:predicate :hasType. ?r1 rdf:object :park. "
      "?r1 :hasConfidence ?conf1. ?nplace :hasGeometry ?nlong. "
      "FILTER((?long, ?nlong) < 5) } ORDER BY ASC(?conf + ?conf1) LIMIT k");
}

}  // namespace

TEST(Bench, SingleCellReport) {
  Db db = benchDb();
  BenchReport r = run_benchmark(db.store, db.tree, {{"q1", benchQuery()}}, {"aps"}, {1});
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_EQ(r.cells[0].query, "q1");
  EXPECT_EQ(r.cells[0].mode, "aps");
  EXPECT_EQ(r.cells[0].k, 1);
  EXPECT_EQ(r.cells[0].resultRows, 1u);
}

TEST(Bench, ChecksumsAgreeAcrossModes) {
  Db db = benchDb();
  BenchReport r = run_benchmark(db.store, db.tree, {{"q1", benchQuery()}},
                                {"aps", "nplan", "splan", "rtree"}, {1, 10});
  ASSERT_EQ(r.cells.size(), 8u);
  for (size_t i = 1; i < 4; ++i) EXPECT_EQ(r.cells[i].checksum, r.cells[0].checksum);
}

TEST(Bench, KSweepProducesRowsPerCell) {
  Db db = benchDb(150);
  BenchReport r =
      run_benchmark(db.store, db.tree, {{"q1", benchQuery()}}, {"aps", "splan"}, {1, 10, 50, 100});
  EXPECT_EQ(r.cells.size(), 8u);
  std::ostringstream csv;
  write_csv(r, csv);
  std::string text = csv.str();
  // Header plus one line per cell.
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 9);
}

TEST(Snapshot, RoundTripPreservesStoreAndTree) {
  Db db = benchDb(200);
  std::stringstream buf;
  save_snapshot(db.store, db.tree, buf);
  Snapshot back = load_snapshot(buf);
  EXPECT_EQ(back.store.quads.size(), db.store.quads.size());
  EXPECT_EQ(back.store.spatialIds(), db.store.spatialIds());
  EXPECT_EQ(back.store.dict.size(), db.store.dict.size());
  EXPECT_EQ(back.store.space, db.store.space);

  // Same query, same results through the snapshot.
  Query q = benchQuery();
  ExecOptions opts;
  opts.k = 10;
  ResultSet a = execute_topk(q, db.store, db.tree, opts);
  ResultSet b = execute_topk(q, back.store, back.tree, opts);
  EXPECT_EQ(result_checksum(a, db.store), result_checksum(b, back.store));
}

TEST(Snapshot, RejectsGarbage) {
  std::stringstream buf("not a snapshot at all");
  EXPECT_THROW_CODE(load_snapshot(buf), Err::Io);
}
