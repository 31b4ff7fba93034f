#ifndef STREAK_BENCH_HPP
#define STREAK_BENCH_HPP

#include <chrono>

#include "streak/executor.hpp"

namespace streak {

struct BenchMode {
  std::string name;  // aps | nplan | splan | rtree
  PlanMode plan = PlanMode::Aps;
  JoinAlgo algo = JoinAlgo::Squad;

  static BenchMode fromName(const std::string& name) {
    BenchMode m;
    m.name = name;
    if (name == "aps") m.plan = PlanMode::Aps;
    else if (name == "nplan") m.plan = PlanMode::NPlan;
    else if (name == "splan") m.plan = PlanMode::SPlan;
    else if (name == "rtree") m.algo = JoinAlgo::Rtree;
    else fail(Err::Config, "unknown mode: " + name + " (expected aps|nplan|splan|rtree)");
    return m;
  }
};

struct BenchCell {
  std::string query;
  std::string mode;
  int64_t k = 0;
  double wallMs = 0;  // median of the final 3 of 5 runs
  size_t resultRows = 0;
  size_t candidates = 0;
  size_t numericBlocks = 0;
  size_t fullScans = 0;
  size_t planSwitches = 0;
  std::string planTrace;
  uint64_t checksum = 0;
};

struct BenchReport {
  std::vector<BenchCell> cells;
};

inline uint64_t result_checksum(const ResultSet& rs, const QuadStore& store) {
  uint64_t h = fnv1a("streak");
  for (const std::string& v : rs.varNames) h = fnv1a(v, h);
  char buf[32];
  for (const ResultRow& row : rs.rows) {
    for (TermId id : row.values) h = fnv1a(store.dict.lookup(id).lexical, h);
    snprintf(buf, sizeof buf, "%.6f", row.score);
    h = fnv1a(buf, h);
  }
  return h;
}

/// Warm protocol: run each cell 5 times and keep the median of the final 3.
/// Any checksum divergence across modes of the same (query, k) is a
/// correctness bug and fails the run.
inline BenchReport run_benchmark(const QuadStore& store, const SQuadTree& tree,
                                 const std::vector<std::pair<std::string, Query>>& queries,
                                 const std::vector<std::string>& modeNames,
                                 const std::vector<int64_t>& kValues) {
  BenchReport report;
  for (const auto& [name, query] : queries) {
    for (int64_t k : kValues) {
      uint64_t expected = 0;
      bool haveExpected = false;
      for (const std::string& modeName : modeNames) {
        BenchMode mode = BenchMode::fromName(modeName);
        BenchCell cell;
        cell.query = name;
        cell.mode = modeName;
        cell.k = k;
        std::array<double, 5> times{};
        ExecStats stats;
        ResultSet rs;
        for (int run = 0; run < 5; ++run) {
          ExecOptions opts;
          opts.plan = mode.plan;
          opts.algo = mode.algo;
          opts.k = k;
          ExecStats runStats;
          auto t0 = std::chrono::steady_clock::now();
          ResultSet got = execute_topk(query, store, tree, opts, &runStats);
          auto t1 = std::chrono::steady_clock::now();
          times[run] = std::chrono::duration<double, std::milli>(t1 - t0).count();
          rs = std::move(got);
          stats = runStats;
        }
        std::array<double, 3> tail{times[2], times[3], times[4]};
        std::sort(tail.begin(), tail.end());
        cell.wallMs = tail[1];
        cell.resultRows = rs.rows.size();
        cell.candidates = stats.phase3Candidates;
        cell.numericBlocks = stats.numericBlocksFetched;
        cell.fullScans = stats.fullScans;
        cell.planSwitches = stats.planSwitches;
        cell.planTrace = stats.planTrace;
        cell.checksum = result_checksum(rs, store);
        if (!haveExpected) {
          expected = cell.checksum;
          haveExpected = true;
        } else if (cell.checksum != expected) {
          fail(Err::ModeMismatch, "mode " + modeName + " diverges on " + name +
                                      " k=" + std::to_string(k));
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

inline void write_csv(const BenchReport& report, std::ostream& os) {
  os << "query,mode,k,wall_ms,result_rows,candidates,numeric_blocks,full_scans,plan_switches,"
        "checksum,plan_trace\n";
  char buf[64];
  for (const BenchCell& c : report.cells) {
    snprintf(buf, sizeof buf, "%.4f", c.wallMs);
    os << c.query << ',' << c.mode << ',' << c.k << ',' << buf << ',' << c.resultRows << ','
       << c.candidates << ',' << c.numericBlocks << ',' << c.fullScans << ',' << c.planSwitches
       << ',' << std::hex << c.checksum << std::dec << ',' << c.planTrace << '\n';
  }
}

}  // namespace streak

#endif
