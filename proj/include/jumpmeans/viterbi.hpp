#pragma once

#include <vector>

#include "jumpmeans/common.hpp"

namespace jumpmeans {

// Minimum-cost labeling of a segment chain. node_cost is (K+1) x M, edge_cost
// M x M and shared across positions; +inf encodes forbidden assignments.
//
// Runs the recursion on suffix costs and reconstructs the path forward,
// preferring the smaller label on ties at every choice. That makes the result
// the lexicographically smallest minimizer, which an exhaustive search that
// scans labelings in lexicographic order and keeps strict improvements
// reproduces exactly.
//
// Labels are 0-based here; callers translate to state ids. Throws DataError
// when every labeling has infinite cost.
inline std::vector<int> min_cost_path(const std::vector<std::vector<double>>& node_cost,
                                      const std::vector<std::vector<double>>& edge_cost) {
  const std::size_t segs = node_cost.size();
  if (segs == 0) return {};
  const std::size_t m = node_cost.front().size();
  if (m == 0) throw DataError("min_cost_path: no states");

  std::vector<std::vector<double>> suffix(segs, std::vector<double>(m, kInf));
  suffix.back() = node_cost.back();
  for (std::size_t k = segs - 1; k-- > 0;) {
    for (std::size_t s = 0; s < m; ++s) {
      if (node_cost[k][s] == kInf) continue;
      double best = kInf;
      for (std::size_t t = 0; t < m; ++t) {
        double c = edge_cost[s][t];
        if (c == kInf || suffix[k + 1][t] == kInf) continue;
        c += suffix[k + 1][t];
        if (c < best) best = c;
      }
      if (best < kInf) suffix[k][s] = node_cost[k][s] + best;
    }
  }

  std::vector<int> path(segs);
  double best = kInf;
  int pick = -1;
  for (std::size_t s = 0; s < m; ++s)
    if (suffix[0][s] < best) {
      best = suffix[0][s];
      pick = static_cast<int>(s);
    }
  if (pick < 0) throw DataError("min_cost_path: no feasible labeling");
  path[0] = pick;
  for (std::size_t k = 1; k < segs; ++k) {
    double target = kInf;
    pick = -1;
    for (std::size_t t = 0; t < m; ++t) {
      double c = edge_cost[path[k - 1]][t];
      if (c == kInf || suffix[k][t] == kInf) continue;
      c += suffix[k][t];
      if (c < target) {
        target = c;
        pick = static_cast<int>(t);
      }
    }
    if (pick < 0) throw DataError("min_cost_path: dead end during reconstruction");
    path[k] = pick;
  }
  return path;
}

}  // namespace jumpmeans
