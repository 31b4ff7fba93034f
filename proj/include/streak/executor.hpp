#ifndef STREAK_EXECUTOR_HPP
#define STREAK_EXECUTOR_HPP

#include <chrono>
#include <functional>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "streak/node_select.hpp"
#include "streak/plan.hpp"
#include "streak/rtree.hpp"

namespace streak {

constexpr TermId kUnbound = ~0ull;

enum class PlanMode : uint8_t { Aps, NPlan, SPlan };
enum class JoinAlgo : uint8_t { Squad, Rtree };

struct ExecOptions {
  PlanMode plan = PlanMode::Aps;
  JoinAlgo algo = JoinAlgo::Squad;
  int64_t k = 0;  // > 0 overrides the query's LIMIT; required for LIMIT k
  bool explain = false;
  std::ostream* diag = nullptr;
  // Test hook: overrides plan selection (0 = N, 1 = S, anything else = APS).
  std::function<int(double, double)> planHook;
};

struct ExecStats {
  size_t driverRows = 0;
  size_t driverBlocks = 0;
  size_t numericBlocksFetched = 0;
  size_t fullScans = 0;
  size_t phase3Candidates = 0;
  size_t verifiedPairs = 0;
  size_t sipPassed = 0;
  size_t sipSkipped = 0;
  size_t planSwitches = 0;
  bool earlyTerminated = false;
  std::string planTrace;  // one of N/S/R per materialization point
};

/// One result tuple: values parallel to ResultSet::varNames, plus the score.
struct ResultRow {
  std::vector<TermId> values;
  double score = 0;
  bool operator==(const ResultRow&) const = default;
};

struct ResultSet {
  std::vector<std::string> varNames;   // sorted by name
  std::vector<std::string> projection; // declaration order
  std::vector<ResultRow> rows;         // best first
};

/// Total order on rows: better score first, full binding vector breaks ties,
/// identical across plans and the oracle.
inline bool better_row(const ResultRow& a, const ResultRow& b, bool asc) {
  if (a.score != b.score) return asc ? a.score < b.score : a.score > b.score;
  return a.values < b.values;
}

// --- MBR-level spatial join (Phase 3) ------------------------------------------

struct SpatialObj {
  TermId id = 0;
  MBR mbr{};
};

namespace detail {

inline MBR expanded(const MBR& m, double d) {
  return MBR{m.minX - d, m.minY - d, m.maxX + d, m.maxY + d};
}

struct JoinRec {
  std::span<const SpatialObj> driver, driven;
  double d;
  uint32_t maxLevels;
  std::unordered_set<uint64_t> seen;
  std::vector<std::pair<uint32_t, uint32_t>> pairs;

  void run(const MBR& cell, std::vector<uint32_t> dr, std::vector<uint32_t> dv,
           uint32_t level) {
    if (dr.empty() || dv.empty()) return;
    if (cell.diagonal() <= d || level >= maxLevels || dr.size() * dv.size() <= 64) {
      emit(dr, dv);
      return;
    }
    for (uint8_t q = 0; q < 4; ++q) {
      MBR child = quadrant_cell(cell, q);
      std::vector<uint32_t> cdr, cdv;
      for (uint32_t i : dr)
        if (expanded(driver[i].mbr, d).intersects(child)) cdr.push_back(i);
      if (cdr.empty()) continue;
      for (uint32_t j : dv)
        if (driven[j].mbr.intersects(child)) cdv.push_back(j);
      if (cdv.empty()) continue;
      run(child, std::move(cdr), std::move(cdv), level + 1);
    }
  }

  void emit(const std::vector<uint32_t>& dr, const std::vector<uint32_t>& dv) {
    for (uint32_t i : dr)
      for (uint32_t j : dv) {
        if (mbr_min_distance(driver[i].mbr, driven[j].mbr) > d) continue;
        uint64_t key = (static_cast<uint64_t>(i) << 32) | j;
        if (seen.insert(key).second) pairs.emplace_back(i, j);
      }
  }
};

}  // namespace detail

/// Simultaneous quadrant descent over both object sets. The result is a
/// superset of the exact d-join restricted to these objects and a subset of
/// the plain MBR filter join.
inline std::vector<std::pair<TermId, TermId>> spatial_join_block(
    std::span<const SpatialObj> driver, std::span<const SpatialObj> driven, const MBR& space,
    double d, uint32_t maxLevels, size_t* candidateCount = nullptr) {
  detail::JoinRec rec{driver, driven, d, maxLevels};
  std::vector<uint32_t> dr(driver.size()), dv(driven.size());
  for (uint32_t i = 0; i < driver.size(); ++i) dr[i] = i;
  for (uint32_t j = 0; j < driven.size(); ++j) dv[j] = j;
  rec.run(space, std::move(dr), std::move(dv), 0);
  if (candidateCount) *candidateCount = rec.pairs.size();
  std::vector<std::pair<TermId, TermId>> out;
  out.reserve(rec.pairs.size());
  for (auto [i, j] : rec.pairs) out.emplace_back(driver[i].id, driven[j].id);
  return out;
}

/// Refinement: keep pairs whose exact geometry distance is strictly below d.
inline std::vector<std::pair<TermId, TermId>> refine(
    std::span<const std::pair<TermId, TermId>> candidates, double d, const QuadStore& store) {
  std::vector<std::pair<TermId, TermId>> out;
  for (const auto& [a, b] : candidates) {
    auto ga = store.geometryOf.find(a);
    auto gb = store.geometryOf.find(b);
    if (ga == store.geometryOf.end() || gb == store.geometryOf.end()) continue;
    if (exact_distance(ga->second, gb->second) < d) out.emplace_back(a, b);
  }
  return out;
}

// --- SIP filter ------------------------------------------------------------------

/// The sideways information passed to driven-side scans: the V* nodes'
/// id ranges plus their merged E-List.
struct SipFilter {
  std::vector<IdRange> ranges;  // sorted by lo, disjoint (V* is an antichain)
  std::vector<TermId> elist;    // merged and sorted

  static SipFilter fromNodes(std::span<const SQuadTreeNode* const> nodes) {
    SipFilter f;
    for (const SQuadTreeNode* n : nodes) {
      f.ranges.push_back(n->iRange);
      f.elist.insert(f.elist.end(), n->eList.begin(), n->eList.end());
    }
    std::sort(f.ranges.begin(), f.ranges.end(),
              [](const IdRange& a, const IdRange& b) { return a.lo < b.lo; });
    std::sort(f.elist.begin(), f.elist.end());
    f.elist.erase(std::unique(f.elist.begin(), f.elist.end()), f.elist.end());
    return f;
  }

  bool pass(TermId id) const {
    auto it = std::upper_bound(ranges.begin(), ranges.end(), id,
                               [](TermId v, const IdRange& r) { return v < r.lo; });
    if (it != ranges.begin() && std::prev(it)->contains(id)) return true;
    return std::binary_search(elist.begin(), elist.end(), id);
  }

  /// Smallest filter-passing id >= id, for skip-to.
  TermId nextAccepted(TermId id) const {
    TermId next = ~0ull;
    auto it = std::upper_bound(ranges.begin(), ranges.end(), id,
                               [](TermId v, const IdRange& r) { return v < r.lo; });
    if (it != ranges.begin() && std::prev(it)->contains(id)) return id;
    if (it != ranges.end()) next = it->lo;
    auto eit = std::lower_bound(elist.begin(), elist.end(), id);
    if (eit != elist.end()) next = std::min(next, *eit);
    return next;
  }
};

// --- executor --------------------------------------------------------------------

namespace detail {

using Row = std::vector<TermId>;

class VarTable {
 public:
  uint32_t id(const std::string& name) {
    auto [it, fresh] = byName_.try_emplace(name, static_cast<uint32_t>(names_.size()));
    if (fresh) names_.push_back(name);
    return it->second;
  }
  std::optional<uint32_t> find(const std::string& name) const {
    auto it = byName_.find(name);
    if (it == byName_.end()) return std::nullopt;
    return it->second;
  }
  size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::map<std::string, uint32_t> byName_;
  std::vector<std::string> names_;
};

struct CompiledSlot {
  int var = -1;  // VarTable id when the slot is a variable
  std::optional<TermId> constant;
  bool absent = false;
  bool missing = false;  // constant not in the dictionary: matches nothing
};

struct CompiledPattern {
  CompiledSlot reif, s, p, o;
  bool missing = false;

  static CompiledSlot compile(const PatternSlot& slot, VarTable& vars, const QuadStore& store) {
    CompiledSlot c;
    if (slot.kind == PatternSlot::Kind::Absent) {
      c.absent = true;
      return c;
    }
    if (slot.isVar()) {
      c.var = static_cast<int>(vars.id(slot.var));
      return c;
    }
    auto id = store.dict.find(slot.term);
    if (id) c.constant = *id;
    else c.missing = true;
    return c;
  }

  static CompiledPattern compileAll(const TriplePattern& t, VarTable& vars,
                                    const QuadStore& store) {
    CompiledPattern p;
    p.reif = compile(t.reif, vars, store);
    p.s = compile(t.s, vars, store);
    p.p = compile(t.p, vars, store);
    p.o = compile(t.o, vars, store);
    p.missing = p.reif.missing || p.s.missing || p.p.missing || p.o.missing;
    return p;
  }
};

class Evaluator {
 public:
  Evaluator(const QuadStore& store, VarTable& vars) : store_(store), vars_(vars) {}

  /// Extend each row by one pattern via the best index ordering.
  std::vector<Row> extend(const std::vector<Row>& rows, const CompiledPattern& p) const {
    std::vector<Row> out;
    if (p.missing) return out;
    for (const Row& row : rows) {
      ScanPattern sp;
      bool unsat = false;
      auto fix = [&](const CompiledSlot& slot, std::optional<TermId>& dst) {
        if (slot.absent) return;
        if (slot.constant) {
          dst = *slot.constant;
          return;
        }
        TermId bound = row[slot.var];
        if (bound != kUnbound) dst = bound;
      };
      fix(p.reif, sp.reif);
      fix(p.s, sp.s);
      fix(p.p, sp.p);
      fix(p.o, sp.o);
      if (unsat) continue;
      Scan scan = store_.scan(sp, store_.bestOrdering(sp));
      Quad q;
      while (scan.next(q)) {
        Row next = row;
        if (bindSlot(next, p.reif, q.reif) && bindSlot(next, p.s, q.s) &&
            bindSlot(next, p.p, q.p) && bindSlot(next, p.o, q.o))
          out.push_back(std::move(next));
      }
    }
    return out;
  }

  std::vector<Row> evalPatterns(std::span<const CompiledPattern> patterns,
                                std::span<const size_t> order, std::vector<Row> seed) const {
    std::vector<Row> rows = std::move(seed);
    for (size_t idx : order) rows = extend(rows, patterns[idx]);
    return rows;
  }

  Row emptyRow() const { return Row(vars_.size(), kUnbound); }

 private:
  const QuadStore& store_;
  VarTable& vars_;

  static bool bindSlot(Row& row, const CompiledSlot& slot, TermId value) {
    if (slot.absent || slot.constant) return true;
    TermId& cell = row[slot.var];
    if (cell == kUnbound) {
      cell = value;
      return true;
    }
    return cell == value;
  }
};

/// Top-k accumulator; a sorted vector is exact and deterministic at these k.
class TopK {
 public:
  TopK(size_t k, bool asc) : k_(k), asc_(asc) {}

  bool full() const { return rows_.size() >= k_; }
  double theta() const { return rows_.back().score; }

  void add(ResultRow row) {
    if (full() && !better_row(row, rows_.back(), asc_)) return;
    auto at = std::lower_bound(rows_.begin(), rows_.end(), row,
                               [&](const ResultRow& a, const ResultRow& b) {
                                 return better_row(a, b, asc_);
                               });
    rows_.insert(at, std::move(row));
    if (rows_.size() > k_) rows_.pop_back();
  }

  /// True when a score bound can still supply a competitive row.
  bool boundViable(double bound) const {
    if (!full()) return true;
    return asc_ ? bound <= theta() : bound >= theta();
  }

  std::vector<ResultRow> take() && { return std::move(rows_); }

 private:
  size_t k_;
  bool asc_;
  std::vector<ResultRow> rows_;
};

struct PlanCalibration {
  double estFull = 1, estBlock = 1;     // static units before any measurement
  double measFull = -1, measBlock = -1; // seconds

  double tFull() const {
    if (measFull >= 0) return measFull;
    if (measBlock >= 0) return measBlock * (estFull / std::max(estBlock, 1e-9));
    return estFull;
  }
  double tBlock() const {
    if (measBlock >= 0) return measBlock;
    if (measFull >= 0) return measFull * (estBlock / std::max(estFull, 1e-9));
    return estBlock;
  }
  void observeFull(double sec) { measFull = measFull < 0 ? sec : 0.7 * measFull + 0.3 * sec; }
  void observeBlock(double sec) {
    measBlock = measBlock < 0 ? sec : 0.7 * measBlock + 0.3 * sec;
  }
};

class Executor {
 public:
  Executor(const Query& q, const QuadStore& store, const SQuadTree& tree, ExecOptions opts,
           ExecStats* stats)
      : q_(q), store_(store), tree_(tree), opts_(opts),
        stats_(stats ? *stats : scratchStats_),
        k_(opts.k > 0 ? static_cast<size_t>(opts.k)
                      : (q.symbolicK ? 100 : static_cast<size_t>(q.k))),
        topk_(k_, q.asc) {}

  ResultSet run() {
    analyze();
    std::vector<std::pair<std::string, uint32_t>> order;
    for (uint32_t i = 0; i < vars_.size(); ++i) order.emplace_back(vars_.names()[i], i);
    std::sort(order.begin(), order.end());
    for (auto& [name, id] : order) {
      sortedVarNames_.push_back(name);
      sortedVarIds_.push_back(id);
    }
    ResultSet out;
    if (!degenerate_) {
      materializeDriver();
      blockLoop();
    }
    finalize(out);
    return out;
  }

 private:
  const Query& q_;
  const QuadStore& store_;
  const SQuadTree& tree_;
  ExecOptions opts_;
  ExecStats scratchStats_;
  ExecStats& stats_;
  size_t k_;
  TopK topk_;

  VarTable vars_;
  std::vector<std::string> sortedVarNames_;
  std::vector<uint32_t> sortedVarIds_;
  std::vector<CompiledPattern> driverCompiled_, drivenCompiled_;
  AnalyzedSub driver_, driven_;
  PhysicalPlan driverPlan_, nPlan_, sPlan_;
  bool degenerate_ = false;

  std::vector<std::string> driverRankVars_, drivenRankVars_;
  std::unordered_map<std::string, Interval> globalIntervals_;
  uint32_t driverEntityVar_ = 0, drivenEntityVar_ = 0;

  // driven numeric lead
  TermId leadPred_ = 0;
  int leadSubjVar_ = -1, leadValVar_ = -1;
  std::string leadVarName_;
  std::vector<NumericBlock> leadBlocks_;

  struct DriverRow {
    Row row;
    TermId entity;
    double orderKey;
  };
  std::vector<DriverRow> driverRows_;

  PlanCalibration calib_;
  std::optional<RTree> drivenRtree_;
  char lastPlan_ = 0;

  static double now() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }

  void analyze() {
    auto [a, b] = split_driver_driven(q_);
    AnalyzedSub aa = analyze_sub(a, q_, store_);
    AnalyzedSub bb = analyze_sub(b, q_, store_);
    auto [drv, dvn] = choose_driver(aa, bb);
    driver_ = *drv;
    driven_ = *dvn;
    driverPlan_ = optimize_driver(driver_, store_);
    nPlan_ = build_n_plan(driven_, store_);
    sPlan_ = build_s_plan(driven_, store_);

    for (const TriplePattern& t : driver_.sub.patterns)
      driverCompiled_.push_back(CompiledPattern::compileAll(t, vars_, store_));
    for (const TriplePattern& t : driven_.sub.patterns)
      drivenCompiled_.push_back(CompiledPattern::compileAll(t, vars_, store_));
    driverEntityVar_ = vars_.id(driver_.sub.geoSubjectVar);
    drivenEntityVar_ = vars_.id(driven_.sub.geoSubjectVar);

    // Split the rank variables by side and collect their global value ranges.
    std::vector<std::string> rankVars;
    q_.rank.collectVars(rankVars);
    std::sort(rankVars.begin(), rankVars.end());
    rankVars.erase(std::unique(rankVars.begin(), rankVars.end()), rankVars.end());
    auto sideOf = [](const AnalyzedSub& sub, const std::string& v) {
      for (const TriplePattern& t : sub.sub.patterns)
        if (t.o.isVar() && t.o.var == v) return true;
      return false;
    };
    for (const std::string& v : rankVars) {
      bool onDriver = sideOf(driver_, v);
      (onDriver ? driverRankVars_ : drivenRankVars_).push_back(v);
      Interval iv{-1e300, 1e300};
      const AnalyzedSub& side = onDriver ? driver_ : driven_;
      for (const TriplePattern& t : side.sub.patterns) {
        if (!(t.o.isVar() && t.o.var == v && t.p.isConst())) continue;
        auto pid = store_.dict.find(t.p.term);
        if (!pid) {
          degenerate_ = true;
          return;
        }
        auto run = store_.numericRun(*pid);
        if (run.empty()) {
          degenerate_ = true;  // the variable can never bind a number
          return;
        }
        iv = Interval{run.back().value, run.front().value};
      }
      globalIntervals_[v] = iv;
    }

    // Driven numeric lead for block-wise N-Plan retrieval.
    if (nPlan_.leadPattern != kNoPattern) {
      const TriplePattern& t = driven_.sub.patterns[nPlan_.leadPattern];
      auto pid = store_.dict.find(t.p.term);
      if (pid) {
        leadPred_ = *pid;
        leadSubjVar_ = static_cast<int>(vars_.id(t.s.var));
        leadValVar_ = static_cast<int>(vars_.id(t.o.var));
        leadVarName_ = t.o.var;
        leadBlocks_ = store_.numeric_blocks(leadPred_, store_.config.blockSize);
      }
    }

    if (opts_.explain && opts_.diag) {
      *opts_.diag << "-- driver plan\n";
      driverPlan_.tree.print(*opts_.diag);
      *opts_.diag << "-- driven N-Plan\n";
      nPlan_.tree.print(*opts_.diag);
      *opts_.diag << "-- driven S-Plan\n";
      sPlan_.tree.print(*opts_.diag);
    }
  }

  double rankBound(const std::function<Interval(const std::string&)>& intervalOf) const {
    Interval iv = q_.rank.evalInterval(intervalOf);
    return q_.asc ? iv.lo : iv.hi;
  }

  void materializeDriver() {
    Evaluator ev(store_, vars_);
    std::vector<Row> rows =
        ev.evalPatterns(driverCompiled_, driverPlan_.order, {ev.emptyRow()});
    driverRows_.reserve(rows.size());
    for (Row& row : rows) {
      TermId entity = row[driverEntityVar_];
      if (entity == kUnbound || !is_spatial_id(entity) || !tree_.object(entity)) continue;
      bool numeric = true;
      for (const std::string& v : driverRankVars_) {
        TermId val = row[*vars_.find(v)];
        if (val == kUnbound || store_.dict.lookup(val).kind != TermKind::NumericLit) {
          numeric = false;
          break;
        }
      }
      if (!numeric) continue;  // can never produce a scored row
      double key = rankBound([&](const std::string& v) -> Interval {
        auto id = vars_.find(v);
        if (id && row[*id] != kUnbound) {
          const Term& term = store_.dict.lookup(row[*id]);
          if (term.kind == TermKind::NumericLit) return {term.number, term.number};
        }
        return globalIntervals_.at(v);
      });
      driverRows_.push_back(DriverRow{std::move(row), entity, key});
    }
    std::stable_sort(driverRows_.begin(), driverRows_.end(),
                     [&](const DriverRow& a, const DriverRow& b) {
                       return q_.asc ? a.orderKey < b.orderKey : a.orderKey > b.orderKey;
                     });
    stats_.driverRows = driverRows_.size();

    // Calibration bootstrap from scan cardinalities.
    double estFull = 0;
    for (size_t c : driven_.patternCards) estFull += static_cast<double>(c);
    calib_.estFull = std::max(1.0, estFull);
    calib_.estBlock = calib_.estFull / std::max<size_t>(1, leadBlocks_.size());
  }

  void blockLoop() {
    const size_t blockSize = store_.config.blockSize;
    for (size_t at = 0; at < driverRows_.size(); at += blockSize) {
      size_t end = std::min(driverRows_.size(), at + blockSize);
      std::span<const DriverRow> block(driverRows_.data() + at, end - at);
      if (topk_.full() && !topk_.boundViable(block.front().orderKey)) {
        stats_.earlyTerminated = true;
        return;
      }
      processBlock(block, at / blockSize);
    }
  }

  struct BlockContext {
    std::vector<TermId> entities;  // sorted unique driver entities
    std::unordered_map<TermId, std::vector<const Row*>> rowsByEntity;
    std::vector<SpatialObj> objs;
    std::unordered_map<std::string, Interval> driverIntervals;
  };

  BlockContext makeBlockContext(std::span<const DriverRow> block) const {
    BlockContext ctx;
    for (const DriverRow& dr : block) {
      auto [it, fresh] = ctx.rowsByEntity.try_emplace(dr.entity);
      it->second.push_back(&dr.row);
      if (fresh) {
        ctx.entities.push_back(dr.entity);
        ctx.objs.push_back(SpatialObj{dr.entity, tree_.object(dr.entity)->mbr});
      }
    }
    std::sort(ctx.entities.begin(), ctx.entities.end());
    for (const std::string& v : driverRankVars_) {
      Interval iv{1e300, -1e300};
      uint32_t vid = *vars_.find(v);
      for (const DriverRow& dr : block) {
        double x = store_.dict.lookup(dr.row[vid]).number;
        iv.lo = std::min(iv.lo, x);
        iv.hi = std::max(iv.hi, x);
      }
      ctx.driverIntervals[v] = iv;
    }
    return ctx;
  }

  /// Bound of (driver block x driven numeric block j); the driven side's
  /// other variables stay at their global ranges.
  double drivenBlockBound(const BlockContext& ctx, const NumericBlock& nb) const {
    return rankBound([&](const std::string& v) -> Interval {
      auto it = ctx.driverIntervals.find(v);
      if (it != ctx.driverIntervals.end()) return it->second;
      if (v == leadVarName_) return Interval{nb.minVal, nb.maxVal};
      return globalIntervals_.at(v);
    });
  }

  void processBlock(std::span<const DriverRow> block, size_t blockIndex) {
    ++stats_.driverBlocks;
    BlockContext ctx = makeBlockContext(block);

    // Phase 1 + optimal node selection. Driver bindings enter both as ids and
    // as d-expanded boxes so near-boundary partners stay reachable.
    std::vector<MBR> driverBoxes;
    driverBoxes.reserve(ctx.objs.size());
    for (const SpatialObj& o : ctx.objs) driverBoxes.push_back(o.mbr);
    CandidateNodes cand =
        tree_.candidate_nodes(ctx.entities, driven_.csQueries, driverBoxes, q_.filter.threshold);
    if (cand.v.empty()) return;
    std::unordered_map<const SQuadTreeNode*, uint32_t> indexOf;
    for (uint32_t i = 0; i < cand.v.size(); ++i) indexOf.emplace(cand.v[i], i);
    std::vector<SelectNode> dp(cand.v.size());
    for (uint32_t i = 0; i < cand.v.size(); ++i) {
      dp[i].inV = true;
      dp[i].csCardinality = static_cast<double>(cand.drivenCard[i]);
      dp[i].eListSize = static_cast<double>(cand.v[i]->eList.size());
      for (const auto& child : cand.v[i]->child) {
        if (!child) continue;
        auto it = indexOf.find(child.get());
        if (it != indexOf.end()) dp[i].children.push_back(it->second);
      }
    }
    NodeCostModel costModel{store_.config.alphaIO, store_.config.alphaCPU,
                            store_.config.alphaMerge};
    SelectionResult sel = select_optimal(dp, 0, costModel);
    std::vector<const SQuadTreeNode*> chosen;
    double cardFull = 0;
    for (uint32_t i : sel.chosen) {
      chosen.push_back(cand.v[i]);
      cardFull += dp[i].csCardinality;
    }
    SipFilter sip = SipFilter::fromNodes(chosen);

    // Threshold-driven block count and the cost-based plan choice.
    double nb = static_cast<double>(leadBlocks_.size());
    size_t x = 0;
    std::vector<std::pair<double, size_t>> blockBounds;  // (bound, block idx)
    for (size_t j = 0; j < leadBlocks_.size(); ++j) {
      double bound = drivenBlockBound(ctx, leadBlocks_[j]);
      blockBounds.emplace_back(bound, j);
      if (!topk_.full()) ++x;
      else if (q_.asc ? bound < topk_.theta() : bound > topk_.theta()) ++x;
    }
    std::stable_sort(blockBounds.begin(), blockBounds.end(),
                     [&](const auto& a, const auto& b) {
                       return q_.asc ? a.first < b.first : a.first > b.first;
                     });

    CostContext costCtx;
    costCtx.x = static_cast<double>(x);
    costCtx.nb = std::max(1.0, nb);
    costCtx.cardFull = cardFull;
    costCtx.tBlock = calib_.tBlock();
    costCtx.tFull = calib_.tFull();
    costCtx.joinFactor = store_.config.joinFactor;
    costCtx.driverBlockSize = static_cast<double>(block.size());

    char mode;
    if (opts_.algo == JoinAlgo::Rtree) {
      mode = 'R';
    } else if (opts_.plan == PlanMode::NPlan) {
      mode = 'N';
    } else if (opts_.plan == PlanMode::SPlan) {
      mode = 'S';
    } else if (leadBlocks_.empty()) {
      mode = 'S';
    } else if (opts_.planHook) {
      double cn = total_cost(estimate_cost(DrivenPlanKind::NPlan, costCtx), costCtx);
      double cs = total_cost(estimate_cost(DrivenPlanKind::SPlan, costCtx), costCtx);
      int pick = opts_.planHook(cn, cs);
      mode = pick == 0 ? 'N' : pick == 1 ? 'S' : (pick_driven_plan(costCtx) ==
                                                  DrivenPlanKind::NPlan ? 'N' : 'S');
    } else {
      mode = pick_driven_plan(costCtx) == DrivenPlanKind::NPlan ? 'N' : 'S';
    }
    if (!stats_.planTrace.empty() && lastPlan_ && mode != lastPlan_ && mode != 'R' &&
        lastPlan_ != 'R')
      ++stats_.planSwitches;
    lastPlan_ = mode;
    stats_.planTrace.push_back(mode);

    if (opts_.explain && opts_.diag) {
      *opts_.diag << "block " << blockIndex << ": |V|=" << cand.v.size() << " V*={";
      for (size_t i = 0; i < chosen.size(); ++i)
        *opts_.diag << (i ? " " : "") << chosen[i]->path.str();
      *opts_.diag << "} sigma=" << sel.sigma << " xi=" << sel.xi << " x=" << x << "/"
                  << leadBlocks_.size() << " plan=" << mode << '\n';
    }

    if (mode == 'N') runNPlan(ctx, sip, blockBounds);
    else if (mode == 'S') runSPlan(ctx, sip);
    else runRtree(ctx);
  }

  /// Join verified geometry pairs back to full rows and score them. Rows
  /// enter the heap with values in sorted-variable order so tie-breaking is
  /// plan-independent.
  void emitPairs(const BlockContext& ctx,
                 const std::vector<std::pair<TermId, TermId>>& verified,
                 const std::unordered_map<TermId, std::vector<Row>>& drivenRows) {
    stats_.verifiedPairs += verified.size();
    for (const auto& [de, re] : verified) {
      auto dit = ctx.rowsByEntity.find(de);
      auto rit = drivenRows.find(re);
      if (dit == ctx.rowsByEntity.end() || rit == drivenRows.end()) continue;
      for (const Row* drow : dit->second) {
        for (const Row& rrow : rit->second) {
          Row merged = *drow;
          for (size_t i = 0; i < merged.size(); ++i)
            if (merged[i] == kUnbound) merged[i] = rrow[i];
          bool ok = true;
          double score = q_.rank.eval([&](const std::string& v) {
            auto id = vars_.find(v);
            if (!id || merged[*id] == kUnbound) {
              ok = false;
              return 0.0;
            }
            const Term& t = store_.dict.lookup(merged[*id]);
            if (t.kind != TermKind::NumericLit) {
              ok = false;
              return 0.0;
            }
            return t.number;
          });
          if (!ok) continue;
          ResultRow out;
          out.score = score;
          out.values.reserve(sortedVarIds_.size());
          for (uint32_t id : sortedVarIds_) out.values.push_back(merged[id]);
          topk_.add(std::move(out));
        }
      }
    }
  }

  /// Group driven rows by entity after SIP row checks.
  bool groupDrivenRows(std::vector<Row>&& rows, const SipFilter* sip,
                       std::unordered_map<TermId, std::vector<Row>>& byEntity,
                       std::vector<SpatialObj>& objs) {
    for (Row& row : rows) {
      TermId entity = row[drivenEntityVar_];
      if (entity == kUnbound || !is_spatial_id(entity)) continue;
      const ObjectInfo* info = tree_.object(entity);
      if (!info) continue;
      if (sip) {
        if (!sip->pass(entity)) {
          ++stats_.sipSkipped;
          continue;
        }
        ++stats_.sipPassed;
      }
      bool numeric = true;
      for (const std::string& v : drivenRankVars_) {
        auto id = vars_.find(v);
        TermId val = row[*id];
        if (val == kUnbound || store_.dict.lookup(val).kind != TermKind::NumericLit) {
          numeric = false;
          break;
        }
      }
      if (!numeric) continue;
      auto [it, fresh] = byEntity.try_emplace(entity);
      if (fresh) objs.push_back(SpatialObj{entity, info->mbr});
      it->second.push_back(std::move(row));
    }
    return !byEntity.empty();
  }

  void runNPlan(const BlockContext& ctx, const SipFilter& sip,
                const std::vector<std::pair<double, size_t>>& blockBounds) {
    Evaluator ev(store_, vars_);
    auto run = store_.numericRun(leadPred_);
    for (const auto& [bound, j] : blockBounds) {
      if (topk_.full() && !topk_.boundViable(bound)) break;
      double t0 = now();
      const NumericBlock& nb = leadBlocks_[j];
      std::vector<Row> seed;
      seed.reserve(nb.count);
      for (const NumericEntry& e :
           std::span(run).subspan(nb.offset, nb.count)) {
        Row row = ev.emptyRow();
        row[leadSubjVar_] = e.subject;
        row[leadValVar_] = e.object;
        seed.push_back(std::move(row));
      }
      std::vector<Row> rows = ev.evalPatterns(drivenCompiled_, nPlan_.order, std::move(seed));
      std::unordered_map<TermId, std::vector<Row>> byEntity;
      std::vector<SpatialObj> objs;
      groupDrivenRows(std::move(rows), &sip, byEntity, objs);
      ++stats_.numericBlocksFetched;
      if (!objs.empty()) {
        size_t cands = 0;
        auto pairs = spatial_join_block(ctx.objs, objs, tree_.space(), q_.filter.threshold,
                                        store_.config.maxLevels, &cands);
        stats_.phase3Candidates += cands;
        auto verified = refine(pairs, q_.filter.threshold, store_);
        emitPairs(ctx, verified, byEntity);
      }
      calib_.observeBlock(now() - t0);
    }
  }

  void runSPlan(const BlockContext& ctx, const SipFilter& sip) {
    double t0 = now();
    Evaluator ev(store_, vars_);
    // SIP-filtered driven geometry scan, skipping over id gaps.
    std::vector<SpatialObj> objs;
    if (driven_.geometryPredicate != 0) {
      ScanPattern pat;
      pat.p = driven_.geometryPredicate;
      Scan scan = store_.scan(pat, Ordering::PSO);
      size_t total = store_.countMatches(pat);
      Quad quad;
      while (scan.next(quad)) {
        TermId id = quad.s;
        if (!is_spatial_id(id)) continue;
        if (!sip.pass(id)) {
          TermId next = sip.nextAccepted(id);
          if (next == ~0ull) break;
          if (next > id + 1) scan.skipTo(next);
          continue;
        }
        const ObjectInfo* info = tree_.object(id);
        if (info) objs.push_back(SpatialObj{id, info->mbr});
      }
      stats_.sipPassed += objs.size();
      stats_.sipSkipped += total - objs.size();
    }
    ++stats_.fullScans;

    size_t cands = 0;
    auto pairs = spatial_join_block(ctx.objs, objs, tree_.space(), q_.filter.threshold,
                                    store_.config.maxLevels, &cands);
    stats_.phase3Candidates += cands;
    auto verified = refine(pairs, q_.filter.threshold, store_);

    // Evaluate the driven sub-query only for survivors; numeric last.
    std::unordered_map<TermId, std::vector<Row>> byEntity;
    std::vector<SpatialObj> dummy;
    std::set<TermId> survivors;
    for (const auto& [de, re] : verified) survivors.insert(re);
    for (TermId id : survivors) {
      Row seed = ev.emptyRow();
      seed[drivenEntityVar_] = id;
      std::vector<Row> rows = ev.evalPatterns(drivenCompiled_, sPlan_.order, {std::move(seed)});
      groupDrivenRows(std::move(rows), nullptr, byEntity, dummy);
    }
    emitPairs(ctx, verified, byEntity);
    calib_.observeFull(now() - t0);
  }

  void runRtree(const BlockContext& ctx) {
    Evaluator ev(store_, vars_);
    if (!drivenRtree_) {
      std::vector<RTreeEntry> entries;
      entries.reserve(tree_.objects().size());
      for (const auto& [id, info] : tree_.objects()) entries.push_back(RTreeEntry{id, info.mbr});
      std::sort(entries.begin(), entries.end(),
                [](const RTreeEntry& a, const RTreeEntry& b) { return a.id < b.id; });
      drivenRtree_ = RTree::str_bulk_load(std::move(entries), 16);
    }
    std::vector<RTreeEntry> driverEntries;
    for (const SpatialObj& o : ctx.objs) driverEntries.push_back(RTreeEntry{o.id, o.mbr});
    RTree driverTree = RTree::str_bulk_load(std::move(driverEntries), 16);
    size_t cands = 0;
    auto pairs = sync_traversal_join(driverTree, *drivenRtree_, q_.filter.threshold, &cands);
    stats_.phase3Candidates += cands;
    auto verified = refine(pairs, q_.filter.threshold, store_);

    std::unordered_map<TermId, std::vector<Row>> byEntity;
    std::vector<SpatialObj> dummy;
    std::set<TermId> survivors;
    for (const auto& [de, re] : verified) survivors.insert(re);
    for (TermId id : survivors) {
      Row seed = ev.emptyRow();
      seed[drivenEntityVar_] = id;
      std::vector<Row> rows = ev.evalPatterns(drivenCompiled_, sPlan_.order, {std::move(seed)});
      groupDrivenRows(std::move(rows), nullptr, byEntity, dummy);
    }
    emitPairs(ctx, verified, byEntity);
  }

  void finalize(ResultSet& out) {
    out.varNames = sortedVarNames_;
    out.projection = q_.projection;
    out.rows = std::move(topk_).take();
  }
};

}  // namespace detail

/// Block-wise top-k spatial join pipeline over the store and its S-QuadTree.
inline ResultSet execute_topk(const Query& q, const QuadStore& store, const SQuadTree& tree,
                              ExecOptions opts = {}, ExecStats* stats = nullptr) {
  return detail::Executor(q, store, tree, std::move(opts), stats).run();
}

}  // namespace streak

#endif
