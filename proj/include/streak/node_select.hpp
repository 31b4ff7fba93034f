#ifndef STREAK_NODE_SELECT_HPP
#define STREAK_NODE_SELECT_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "streak/common.hpp"

namespace streak {

struct NodeCostModel {
  double alphaIO = 1.0;
  double alphaCPU = 0.1;
  double alphaMerge = 0.05;
};

/// cost(a) = alphaIO * |CS(a)| + alphaCPU * |E-list(a)|
inline double node_cost(double csCardinality, double eListSize, const NodeCostModel& m) {
  return m.alphaIO * csCardinality + m.alphaCPU * eListSize;
}

/// Abstract view of one candidate-tree node; decoupled from SQuadTreeNode so
/// the DP runs on arbitrary trees.
struct SelectNode {
  bool inV = false;
  double csCardinality = 0;
  double eListSize = 0;
  std::vector<uint32_t> children;
};

struct SelectionResult {
  std::vector<uint32_t> chosen;  // indices into the input nodes, an antichain
  double sigma = 0;              // sigma*(root): cost of the selection
  double xi = 0;                 // xi*(root): sum of merge weights over chosen
};

namespace detail {

struct DpResult {
  std::vector<uint32_t> chosen;
  double sigma = 0;
  double xi = 0;
  bool empty() const { return chosen.empty(); }
};

inline DpResult selectRec(std::span<const SelectNode> nodes, uint32_t at,
                          const NodeCostModel& m) {
  const SelectNode& a = nodes[at];
  if (!a.inV) return {};
  double costA = node_cost(a.csCardinality, a.eListSize, m);
  double xiA = m.alphaMerge * a.eListSize;

  std::vector<DpResult> kids;
  for (uint32_t c : a.children) {
    DpResult r = selectRec(nodes, c, m);
    if (!r.empty()) kids.push_back(std::move(r));
  }
  // Frontier nodes of V select themselves (recurrence for leaves).
  if (kids.empty()) return DpResult{{at}, costA, xiA};

  double childSigma = 0, childXi = 0;
  for (const DpResult& r : kids) {
    childSigma += r.sigma;
    childXi += r.xi;
  }
  double mu = kids.size() > 1 ? childXi : 0.0;
  double childOption = childSigma + mu;
  // Strictly cheaper parents win; ties descend. Children regularly tie their
  // parent exactly (point data splits cardinalities losslessly), and the
  // deeper pick is what keeps the sideways filter ranges tight.
  if (costA < childOption) return DpResult{{at}, costA, xiA};
  DpResult out;
  out.sigma = childOption;
  out.xi = childXi;
  for (DpResult& r : kids)
    out.chosen.insert(out.chosen.end(), r.chosen.begin(), r.chosen.end());
  return out;
}

}  // namespace detail

/// Theorem-1 dynamic program over the candidate subtree. Linear in the node
/// count; returns the optimal covering antichain with its cost terms.
inline SelectionResult select_optimal(std::span<const SelectNode> nodes, uint32_t root,
                                      const NodeCostModel& m) {
  detail::DpResult r = detail::selectRec(nodes, root, m);
  return SelectionResult{std::move(r.chosen), r.sigma, r.xi};
}

}  // namespace streak

#endif
