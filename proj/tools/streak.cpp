// streak — command-line front end: load/query/gen/bench.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "streak/bench.hpp"
#include "streak/datagen.hpp"
#include "streak/snapshot.hpp"

namespace {

using namespace streak;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Accepts either a snapshot or a raw .ttl input (sniffed by magic).
Snapshot openDatabase(const std::string& path, const Config& cfg) {
  if (sniff_snapshot(path)) {
    std::ifstream in(path, std::ios::binary);
    return load_snapshot(in);
  }
  Snapshot snap;
  snap.store = load_reified_file(path, cfg);
  snap.tree = SQuadTree::build(snap.store, cfg);
  return snap;
}

PlanMode planFromName(const std::string& name) {
  if (name == "aps") return PlanMode::Aps;
  if (name == "nplan") return PlanMode::NPlan;
  if (name == "splan") return PlanMode::SPlan;
  fail(Err::Config, "unknown --plan value: " + name);
}

JoinAlgo algoFromName(const std::string& name) {
  if (name == "squad") return JoinAlgo::Squad;
  if (name == "rtree") return JoinAlgo::Rtree;
  fail(Err::Config, "unknown --join-algo value: " + name);
}

void printTsv(const ResultSet& rs, const QuadStore& store, std::ostream& os) {
  std::vector<size_t> cols;
  for (const std::string& v : rs.projection) {
    auto it = std::find(rs.varNames.begin(), rs.varNames.end(), v);
    cols.push_back(it == rs.varNames.end() ? static_cast<size_t>(-1)
                                           : static_cast<size_t>(it - rs.varNames.begin()));
  }
  char buf[32];
  for (const ResultRow& row : rs.rows) {
    for (size_t i = 0; i < cols.size(); ++i) {
      if (i) os << '\t';
      os << (cols[i] == static_cast<size_t>(-1) ? "" : store.dict.lookup(row.values[cols[i]]).lexical);
    }
    snprintf(buf, sizeof buf, "%.6f", row.score);
    os << '\t' << buf << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streak: top-k SPARQL queries with spatial distance filters"};
  app.require_subcommand(1);
  std::string configPath;
  app.add_option("--config", configPath, "key=value engine configuration file");

  auto* loadCmd = app.add_subcommand("load", "parse input, build the index, write a snapshot");
  std::string loadInput, loadOut;
  loadCmd->add_option("input", loadInput, "reified Turtle input")->required();
  loadCmd->add_option("--out", loadOut, "snapshot output path")->required();

  auto* queryCmd = app.add_subcommand("query", "run a top-k query, TSV on stdout");
  std::string queryDb, queryFile, planName = "aps", algoName = "squad";
  int64_t k = 0;
  bool explain = false;
  queryCmd->add_option("db", queryDb, "snapshot or .ttl input")->required();
  queryCmd->add_option("--query", queryFile, "query file")->required();
  queryCmd->add_option("--k", k, "top-k cutoff (default 100 for LIMIT k queries)");
  queryCmd->add_option("--plan", planName, "aps|nplan|splan");
  queryCmd->add_option("--join-algo", algoName, "squad|rtree");
  queryCmd->add_flag("--explain", explain, "plan trees and per-block trace on stderr");

  auto* genCmd = app.add_subcommand("gen", "generate a synthetic reified dataset");
  std::string genSpec, genOut;
  genCmd->add_option("--spec", genSpec, "dataset spec (key=value)")->required();
  genCmd->add_option("--out", genOut, "output .ttl path")->required();

  auto* benchCmd = app.add_subcommand("bench", "run the benchmark matrix, CSV report");
  std::string benchDb, benchQueries, benchModes = "aps,nplan,splan", benchKs = "1,10,50,100",
              benchOut;
  benchCmd->add_option("--db", benchDb, "snapshot or .ttl input")->required();
  benchCmd->add_option("--queries", benchQueries, "directory of .sparql files")->required();
  benchCmd->add_option("--modes", benchModes, "comma list: aps,nplan,splan,rtree");
  benchCmd->add_option("--k", benchKs, "comma list of k values");
  benchCmd->add_option("--out", benchOut, "CSV output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg;
    if (!configPath.empty()) cfg.loadFile(configPath);

    if (*loadCmd) {
      QuadStore store = load_reified_file(loadInput, cfg);
      SQuadTree tree = SQuadTree::build(store, cfg);
      std::ofstream out(loadOut, std::ios::binary);
      if (!out) fail(Err::Io, "cannot write " + loadOut);
      save_snapshot(store, tree, out);
      std::cerr << "loaded " << store.quads.size() << " quads, "
                << store.spatialIds().size() << " spatial entities; snapshot at " << loadOut
                << " (tree section " << serialized_tree_size(tree) << " bytes)\n";
      return 0;
    }

    if (*queryCmd) {
      Snapshot snap = openDatabase(queryDb, cfg);
      Query q = parse_query(slurp(queryFile));
      ExecOptions opts;
      opts.plan = planFromName(planName);
      opts.algo = algoFromName(algoName);
      opts.k = k;
      opts.explain = explain;
      opts.diag = explain ? &std::cerr : nullptr;
      ExecStats stats;
      ResultSet rs = execute_topk(q, snap.store, snap.tree, opts, &stats);
      printTsv(rs, snap.store, std::cout);
      if (explain) {
        std::cerr << "driver rows=" << stats.driverRows << " blocks=" << stats.driverBlocks
                  << " candidates=" << stats.phase3Candidates << " verified="
                  << stats.verifiedPairs << " sip=" << stats.sipPassed << "/"
                  << (stats.sipPassed + stats.sipSkipped) << " trace=" << stats.planTrace
                  << (stats.earlyTerminated ? " (early out)" : "") << '\n';
      }
      return 0;
    }

    if (*genCmd) {
      DatasetSpec spec = DatasetSpec::parseFile(genSpec);
      std::string text = generate_dataset(spec);
      std::ofstream out(genOut, std::ios::binary);
      if (!out) fail(Err::Io, "cannot write " + genOut);
      out << text;
      std::cerr << "wrote " << text.size() << " bytes for " << spec.nSpatial
                << " spatial entities to " << genOut << '\n';
      return 0;
    }

    if (*benchCmd) {
      Snapshot snap = openDatabase(benchDb, cfg);
      std::vector<std::pair<std::string, Query>> queries;
      std::vector<std::filesystem::path> files;
      for (const auto& entry : std::filesystem::directory_iterator(benchQueries))
        if (entry.path().extension() == ".sparql") files.push_back(entry.path());
      std::sort(files.begin(), files.end());
      if (files.empty()) fail(Err::Io, "no .sparql files under " + benchQueries);
      for (const auto& f : files) queries.emplace_back(f.stem().string(), parse_query(slurp(f)));

      auto splitList = [](const std::string& s) {
        std::vector<std::string> out;
        size_t at = 0;
        while (at <= s.size()) {
          size_t next = s.find(',', at);
          if (next == std::string::npos) next = s.size();
          if (next > at) out.push_back(s.substr(at, next - at));
          at = next + 1;
        }
        return out;
      };
      std::vector<std::string> modes = splitList(benchModes);
      std::vector<int64_t> ks;
      for (const std::string& v : splitList(benchKs)) ks.push_back(std::stoll(v));

      BenchReport report = run_benchmark(snap.store, snap.tree, queries, modes, ks);
      if (benchOut.empty()) {
        write_csv(report, std::cout);
      } else {
        std::ofstream out(benchOut);
        if (!out) fail(Err::Io, "cannot write " + benchOut);
        write_csv(report, out);
        std::cerr << "report with " << report.cells.size() << " cells at " << benchOut << '\n';
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
