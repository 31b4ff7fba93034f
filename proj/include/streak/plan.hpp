#ifndef STREAK_PLAN_HPP
#define STREAK_PLAN_HPP

#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "streak/query.hpp"
#include "streak/squadtree.hpp"

namespace streak {

constexpr size_t kNoPattern = static_cast<size_t>(-1);

// --- physical plan trees -------------------------------------------------------

struct PlanNode {
  enum class Op : uint8_t { IndexScan, MergeJoin, HashJoin, NumericBlockScan, SipSpatialProbe };
  Op op = Op::IndexScan;
  std::string detail;
  std::vector<PlanNode> kids;

  void print(std::ostream& os, int indent = 0) const {
    for (int i = 0; i < indent; ++i) os << "  ";
    switch (op) {
      case Op::IndexScan: os << "IndexScan"; break;
      case Op::MergeJoin: os << "MergeJoin"; break;
      case Op::HashJoin: os << "HashJoin"; break;
      case Op::NumericBlockScan: os << "NumericBlockScan"; break;
      case Op::SipSpatialProbe: os << "SipSpatialProbe"; break;
    }
    if (!detail.empty()) os << ' ' << detail;
    os << '\n';
    for (const PlanNode& k : kids) k.print(os, indent + 1);
  }
};

enum class PlanRole : uint8_t { Driver, DrivenN, DrivenS };

struct PhysicalPlan {
  PlanRole role = PlanRole::Driver;
  std::vector<size_t> order;      // pattern evaluation order (indices into sub.patterns)
  size_t leadPattern = kNoPattern;  // NumericBlockScan seed, when present
  PlanNode tree;
};

// --- sub-query analysis ---------------------------------------------------------

/// One side of the join with everything the planner and executor need:
/// resolved CS queries, quantifiable patterns, and a cardinality estimate.
struct AnalyzedSub {
  SubQuery sub;
  std::vector<CsQuery> csQueries;         // primary (Self) first
  std::vector<size_t> quantPatterns;      // patterns binding a rank variable as object
  std::vector<size_t> patternCards;       // index match count per pattern
  double estCardinality = 0;              // min over pattern match counts
  TermId geometryPredicate = 0;           // resolved predicate of the hasGeometry pattern
  size_t geometryPattern = kNoPattern;
};

namespace detail {

inline std::optional<TermId> constantId(const QuadStore& store, const PatternSlot& slot) {
  if (!slot.isConst()) return std::nullopt;
  return store.dict.find(slot.term);
}

}  // namespace detail

/// Resolve a triple pattern into a scan pattern. nullopt means a constant is
/// absent from the dictionary, so the pattern cannot match at all.
inline std::optional<ScanPattern> resolve_pattern(const TriplePattern& t, const QuadStore& store) {
  ScanPattern out;
  auto fill = [&](const PatternSlot& slot, std::optional<TermId>& dst) {
    if (!slot.isConst()) return true;
    auto id = store.dict.find(slot.term);
    if (!id) return false;
    dst = *id;
    return true;
  };
  if (!fill(t.reif, out.reif) || !fill(t.s, out.s) || !fill(t.p, out.p) || !fill(t.o, out.o))
    return std::nullopt;
  return out;
}

inline AnalyzedSub analyze_sub(const SubQuery& sub, const Query& q, const QuadStore& store) {
  AnalyzedSub a;
  a.sub = sub;

  std::vector<std::string> rankVars;
  q.rank.collectVars(rankVars);

  double minCard = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < sub.patterns.size(); ++i) {
    const TriplePattern& t = sub.patterns[i];
    auto sp = resolve_pattern(t, store);
    size_t card = sp ? store.countMatches(*sp) : 0;
    a.patternCards.push_back(card);
    minCard = std::min(minCard, static_cast<double>(card));
    if (t.o.isVar() &&
        std::find(rankVars.begin(), rankVars.end(), t.o.var) != rankVars.end())
      a.quantPatterns.push_back(i);
    if (t.p.isConst() && local_name(t.p.term.lexical) == "hasGeometry" && t.o.isVar() &&
        t.o.var == sub.geoLiteralVar) {
      a.geometryPattern = i;
      auto id = store.dict.find(t.p.term);
      a.geometryPredicate = id.value_or(0);
    }
  }
  a.estCardinality = sub.patterns.empty() ? 0 : minCard;

  // CS queries: Self over the geometry subject's constant predicates, then
  // Incoming/Outgoing conditions contributed by neighbouring variables.
  auto constPredsOn = [&](const std::string& subjectVar) {
    std::vector<TermId> preds;
    for (const TriplePattern& t : sub.patterns) {
      if (!(t.s.isVar() && t.s.var == subjectVar)) continue;
      if (!t.p.isConst()) continue;
      auto id = store.dict.find(t.p.term);
      preds.push_back(id.value_or(~0ull));  // unknown predicate: unsatisfiable set
    }
    std::sort(preds.begin(), preds.end());
    preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
    return preds;
  };

  CsQuery self{CsKind::Self, constPredsOn(sub.geoSubjectVar)};
  a.csQueries.push_back(std::move(self));
  for (const TriplePattern& t : sub.patterns) {
    if (t.o.isVar() && t.o.var == sub.geoSubjectVar && t.s.isVar() &&
        t.s.var != sub.geoSubjectVar) {
      std::vector<TermId> preds = constPredsOn(t.s.var);
      if (!preds.empty()) a.csQueries.push_back(CsQuery{CsKind::Incoming, std::move(preds)});
    }
    if (t.s.isVar() && t.s.var == sub.geoSubjectVar && t.o.isVar() &&
        t.o.var != sub.geoSubjectVar && t.o.var != sub.geoLiteralVar) {
      std::vector<TermId> preds = constPredsOn(t.o.var);
      if (!preds.empty()) a.csQueries.push_back(CsQuery{CsKind::Outgoing, std::move(preds)});
    }
  }
  return a;
}

/// Smaller estimated cardinality drives; ties prefer the side with more
/// quantifiable patterns (better early termination), then declaration order.
inline bool first_drives(const AnalyzedSub& a, const AnalyzedSub& b) {
  if (a.estCardinality != b.estCardinality) return a.estCardinality < b.estCardinality;
  if (a.quantPatterns.size() != b.quantPatterns.size())
    return a.quantPatterns.size() > b.quantPatterns.size();
  return true;
}

inline std::pair<const AnalyzedSub*, const AnalyzedSub*> choose_driver(const AnalyzedSub& a,
                                                                       const AnalyzedSub& b) {
  if (first_drives(a, b)) return {&a, &b};
  return {&b, &a};
}

namespace detail {

inline std::string patternText(const TriplePattern& t) {
  std::string s;
  printSlot(s, t.s);
  s += ' ';
  printSlot(s, t.p);
  s += ' ';
  printSlot(s, t.o);
  return s;
}

/// Value spread of a quantifiable pattern's predicate (used to pick the
/// leading numeric scan when several qualify).
inline double spreadOf(const QuadStore& store, const TriplePattern& t) {
  if (!t.p.isConst()) return 0;
  auto id = store.dict.find(t.p.term);
  if (!id) return 0;
  auto run = store.numericRun(*id);
  if (run.empty()) return 0;
  return run.front().value - run.back().value;
}

inline size_t pickNumericLead(const AnalyzedSub& a, const QuadStore& store) {
  size_t best = kNoPattern;
  double bestSpread = -1;
  for (size_t i : a.quantPatterns) {
    const TriplePattern& t = a.sub.patterns[i];
    // Only plain (?s <pred> ?v) patterns can seed a numeric block scan.
    if (t.reif.kind != PatternSlot::Kind::Absent || !t.s.isVar() || !t.p.isConst() ||
        !t.o.isVar())
      continue;
    double s = spreadOf(store, t);
    if (s > bestSpread) {
      bestSpread = s;
      best = i;
    }
  }
  return best;
}

inline void patternVars(const TriplePattern& t, std::vector<std::string>& out) {
  for (const PatternSlot* s : {&t.reif, &t.s, &t.p, &t.o})
    if (s->isVar()) out.push_back(s->var);
}

/// Left-deep join order: patterns connected to an already-bound variable come
/// first (ascending match count as the tiebreak) so seeded evaluation never
/// degenerates into a cross product. With `quantLast`, quantifiable patterns
/// of equal connectivity are deferred (numeric values fetched last).
inline std::vector<size_t> connectedOrder(const AnalyzedSub& a,
                                          std::vector<std::string> bound,
                                          std::vector<size_t> skip, bool quantLast) {
  std::vector<size_t> remaining;
  for (size_t i = 0; i < a.sub.patterns.size(); ++i)
    if (std::find(skip.begin(), skip.end(), i) == skip.end()) remaining.push_back(i);
  auto isQuant = [&](size_t i) {
    return std::find(a.quantPatterns.begin(), a.quantPatterns.end(), i) !=
           a.quantPatterns.end();
  };
  std::vector<size_t> out;
  while (!remaining.empty()) {
    size_t bestAt = 0;
    std::array<size_t, 3> bestKey{~0ull, ~0ull, ~0ull};
    for (size_t at = 0; at < remaining.size(); ++at) {
      size_t idx = remaining[at];
      std::vector<std::string> vars;
      patternVars(a.sub.patterns[idx], vars);
      bool connected = bound.empty();
      for (const std::string& v : vars)
        if (std::find(bound.begin(), bound.end(), v) != bound.end()) {
          connected = true;
          break;
        }
      std::array<size_t, 3> key{connected ? 0u : 1u,
                                quantLast && isQuant(idx) ? 1u : 0u, a.patternCards[idx]};
      if (key < bestKey) {
        bestKey = key;
        bestAt = at;
      }
    }
    size_t pick = remaining[bestAt];
    out.push_back(pick);
    remaining.erase(remaining.begin() + bestAt);
    patternVars(a.sub.patterns[pick], bound);
  }
  return out;
}

inline PlanNode joinChain(const AnalyzedSub& a, PlanNode bottom, std::span<const size_t> order,
                          bool preferMerge) {
  PlanNode cur = std::move(bottom);
  bool sorted = preferMerge;
  for (size_t idx : order) {
    PlanNode scan;
    scan.op = PlanNode::Op::IndexScan;
    scan.detail = patternText(a.sub.patterns[idx]);
    PlanNode join;
    join.op = sorted ? PlanNode::Op::MergeJoin : PlanNode::Op::HashJoin;
    join.kids.push_back(std::move(cur));
    join.kids.push_back(std::move(scan));
    cur = std::move(join);
    sorted = false;  // join output ordering is not maintained further up
  }
  return cur;
}

}  // namespace detail

/// Driver plan: rank-feeding numeric scan leftmost, remaining patterns by
/// ascending estimated cardinality. `order` lists every pattern once, in
/// evaluation order.
inline PhysicalPlan optimize_driver(const AnalyzedSub& a, const QuadStore& store) {
  PhysicalPlan plan;
  plan.role = PlanRole::Driver;
  plan.leadPattern = detail::pickNumericLead(a, store);
  std::vector<size_t> skip;
  std::vector<std::string> bound;
  if (plan.leadPattern != kNoPattern) {
    skip.push_back(plan.leadPattern);
    detail::patternVars(a.sub.patterns[plan.leadPattern], bound);
  }
  std::vector<size_t> rest = detail::connectedOrder(a, std::move(bound), skip, false);

  PlanNode bottom;
  std::span<const size_t> chain = rest;
  bool bottomSorted = false;
  if (plan.leadPattern != kNoPattern) {
    plan.order.push_back(plan.leadPattern);
    bottom.op = PlanNode::Op::NumericBlockScan;  // value order, no merge above
    bottom.detail = detail::patternText(a.sub.patterns[plan.leadPattern]);
  } else {
    bottom.op = PlanNode::Op::IndexScan;
    bottomSorted = true;  // index scans stream in key order
    if (!rest.empty()) {
      bottom.detail = detail::patternText(a.sub.patterns[rest.front()]);
      chain = chain.subspan(1);
    }
  }
  plan.order.insert(plan.order.end(), rest.begin(), rest.end());
  plan.tree = detail::joinChain(a, std::move(bottom), chain, bottomSorted);
  return plan;
}

/// N-Plan: block-wise retrieval rooted at the driven rank predicate, joins
/// above, spatial probe last.
inline PhysicalPlan build_n_plan(const AnalyzedSub& a, const QuadStore& store) {
  PhysicalPlan plan;
  plan.role = PlanRole::DrivenN;
  plan.leadPattern = detail::pickNumericLead(a, store);
  std::vector<size_t> skip;
  std::vector<std::string> bound;
  if (plan.leadPattern != kNoPattern) {
    skip.push_back(plan.leadPattern);
    detail::patternVars(a.sub.patterns[plan.leadPattern], bound);
  }
  plan.order = detail::connectedOrder(a, std::move(bound), skip, false);

  PlanNode bottom;
  if (plan.leadPattern != kNoPattern) {
    bottom.op = PlanNode::Op::NumericBlockScan;
    bottom.detail = detail::patternText(a.sub.patterns[plan.leadPattern]);
  } else {
    bottom.op = PlanNode::Op::IndexScan;
    bottom.detail = "(full driven scan)";
  }
  PlanNode joins = detail::joinChain(a, std::move(bottom), plan.order, false);
  plan.tree.op = PlanNode::Op::SipSpatialProbe;
  plan.tree.detail = "spatial join + refinement";
  plan.tree.kids.push_back(std::move(joins));
  return plan;
}

/// S-Plan: full driven geometry scan filtered sideways by V*, spatial join
/// first, joins above, numeric values fetched last. `order` lists every
/// pattern once, geometry first.
inline PhysicalPlan build_s_plan(const AnalyzedSub& a, const QuadStore& store) {
  PhysicalPlan plan;
  plan.role = PlanRole::DrivenS;
  std::vector<size_t> skip{a.geometryPattern};
  if (a.geometryPattern != kNoPattern) plan.order.push_back(a.geometryPattern);
  std::vector<std::string> bound{a.sub.geoSubjectVar, a.sub.geoLiteralVar};
  std::vector<size_t> rest =
      detail::connectedOrder(a, std::move(bound), skip, /*quantLast=*/true);
  plan.order.insert(plan.order.end(), rest.begin(), rest.end());

  PlanNode scan;
  scan.op = PlanNode::Op::IndexScan;
  scan.detail = a.geometryPattern != kNoPattern
                    ? detail::patternText(a.sub.patterns[a.geometryPattern])
                    : "(geometry scan)";
  PlanNode probe;
  probe.op = PlanNode::Op::SipSpatialProbe;
  probe.detail = "V* I-Range/E-List filter + spatial join";
  probe.kids.push_back(std::move(scan));
  std::vector<size_t> chain(plan.order.begin() + (plan.order.empty() ? 0 : 1), plan.order.end());
  plan.tree = detail::joinChain(a, std::move(probe), chain, false);
  return plan;
}

// --- cost model ------------------------------------------------------------------

struct CostEstimate {
  double time = 0;
  double cardinality = 0;
};

enum class DrivenPlanKind : uint8_t { NPlan, SPlan };

/// Inputs of the block-wise cost model at one materialization point.
struct CostContext {
  double x = 0;        // numeric blocks whose bound still beats the threshold
  double nb = 1;       // total numeric blocks of the rank predicate
  double cardFull = 0; // C(R): driven cardinality from the CS statistics over V*
  double tBlock = 0;   // T(R_i)
  double tFull = 0;    // T(R)
  double ratioFullToBlock = 0;  // R/R_i; defaults to nb when unset
  double joinFactor = 1.0;
  double driverBlockSize = 1.0;
};

/// Block-wise time/cardinality estimate. N-Plan follows the early-termination
/// branch below the full/block ratio; at or above it the repeated scans are
/// charged at least one full scan. C(R') is C(R_i) = x*C(R)/nb for N-Plan and
/// C(R) for S-Plan.
inline CostEstimate estimate_cost(DrivenPlanKind kind, const CostContext& ctx) {
  double nb = std::max(1.0, ctx.nb);
  double ratio = ctx.ratioFullToBlock > 0 ? ctx.ratioFullToBlock : nb;
  CostEstimate est;
  if (kind == DrivenPlanKind::NPlan) {
    est.cardinality = ctx.x * ctx.cardFull / nb;
    est.time = ctx.x < ratio ? ctx.x * ctx.tBlock : std::max(ctx.tFull, ctx.x * ctx.tBlock);
  } else {
    est.cardinality = ctx.cardFull;
    est.time = ctx.tFull;
  }
  return est;
}

inline double total_cost(const CostEstimate& est, const CostContext& ctx) {
  return est.time + ctx.joinFactor * est.cardinality * ctx.driverBlockSize;
}

/// Argmin over the two driven plans; ties go to S-Plan once the block count
/// has degenerated to a full pass, otherwise to N-Plan.
inline DrivenPlanKind pick_driven_plan(const CostContext& ctx) {
  double n = total_cost(estimate_cost(DrivenPlanKind::NPlan, ctx), ctx);
  double s = total_cost(estimate_cost(DrivenPlanKind::SPlan, ctx), ctx);
  if (n < s) return DrivenPlanKind::NPlan;
  if (s < n) return DrivenPlanKind::SPlan;
  return ctx.x >= ctx.nb ? DrivenPlanKind::SPlan : DrivenPlanKind::NPlan;
}

}  // namespace streak

#endif
