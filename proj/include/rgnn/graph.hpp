#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rgnn/errors.hpp"
#include "rgnn/rng.hpp"
#include "rgnn/sparse.hpp"
#include "rgnn/tape.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

// Undirected graph in CSR form: symmetric, neighbor lists sorted, no
// duplicates, no self-loops (normalization adds those explicitly).
struct CsrGraph {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> row_offsets;  // num_nodes + 1
  std::vector<std::size_t> col_indices;

  // Builds from an edge list: symmetrizes directed input, drops duplicates
  // and self-loops.
  static CsrGraph from_edges(
      std::size_t num_nodes,
      const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::vector<std::pair<std::size_t, std::size_t>> dir;
    dir.reserve(edges.size() * 2);
    for (const auto& [u, v] : edges) {
      if (u >= num_nodes || v >= num_nodes)
        throw IndexError("CsrGraph: edge (" + std::to_string(u) + "," +
                         std::to_string(v) + ") out of range for " +
                         std::to_string(num_nodes) + " nodes");
      if (u == v) continue;
      dir.emplace_back(u, v);
      dir.emplace_back(v, u);
    }
    std::sort(dir.begin(), dir.end());
    dir.erase(std::unique(dir.begin(), dir.end()), dir.end());

    CsrGraph g;
    g.num_nodes = num_nodes;
    g.row_offsets.assign(num_nodes + 1, 0);
    g.col_indices.reserve(dir.size());
    for (const auto& [u, v] : dir) {
      ++g.row_offsets[u + 1];
      g.col_indices.push_back(v);
    }
    for (std::size_t i = 0; i < num_nodes; ++i)
      g.row_offsets[i + 1] += g.row_offsets[i];
    return g;
  }

  std::size_t degree(std::size_t v) const {
    if (v >= num_nodes)
      throw IndexError("degree: node " + std::to_string(v) +
                       " out of range for " + std::to_string(num_nodes) +
                       " nodes");
    return row_offsets[v + 1] - row_offsets[v];
  }

  std::span<const std::size_t> neighbors(std::size_t v) const {
    if (v >= num_nodes)
      throw IndexError("neighbors: node " + std::to_string(v) +
                       " out of range");
    return {col_indices.data() + row_offsets[v],
            col_indices.data() + row_offsets[v + 1]};
  }

  // Undirected edge count.
  std::size_t num_edges() const { return col_indices.size() / 2; }

  // Undirected edges as sorted (u < v) pairs, in canonical order.
  std::vector<std::pair<std::size_t, std::size_t>> edge_list() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(num_edges());
    for (std::size_t u = 0; u < num_nodes; ++u)
      for (std::size_t v : neighbors(u))
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  void validate() const {
    if (row_offsets.size() != num_nodes + 1)
      throw ContractError("CsrGraph: row_offsets length mismatch");
    if (row_offsets.back() != col_indices.size())
      throw ContractError("CsrGraph: offsets do not cover entries");
    for (std::size_t u = 0; u < num_nodes; ++u) {
      if (row_offsets[u] > row_offsets[u + 1])
        throw ContractError("CsrGraph: row_offsets not nondecreasing");
      auto nb = neighbors(u);
      for (std::size_t i = 0; i < nb.size(); ++i) {
        const std::size_t v = nb[i];
        if (v >= num_nodes) throw ContractError("CsrGraph: neighbor id range");
        if (v == u) throw ContractError("CsrGraph: self-loop stored");
        if (i > 0 && nb[i - 1] >= v)
          throw ContractError("CsrGraph: neighbors not strictly sorted");
        auto back = neighbors(v);
        if (!std::binary_search(back.begin(), back.end(), u))
          throw ContractError("CsrGraph: edge (" + std::to_string(u) + "," +
                              std::to_string(v) + ") not symmetric");
      }
    }
  }
};

inline std::size_t degree(const CsrGraph& g, std::size_t v) {
  return g.degree(v);
}

// D^-1/2 (A + I) D^-1/2: the graph's pattern plus one self-loop per node,
// entry (i,j) weighted by 1/sqrt(d_i * d_j) with d the self-loop-inclusive
// degree. Cheap to copy (shared storage).
class NormalizedAdjacency {
 public:
  NormalizedAdjacency() = default;
  NormalizedAdjacency(CsrPatternPtr pattern,
                      std::shared_ptr<const std::vector<double>> weights,
                      std::vector<double> inv_sqrt_degree)
      : op_{std::move(pattern), std::move(weights)},
        inv_sqrt_degree_(std::move(inv_sqrt_degree)) {}

  std::size_t num_nodes() const { return op_.pattern->rows; }
  const CsrPattern& pattern() const { return *op_.pattern; }
  const CsrPatternPtr& pattern_ptr() const { return op_.pattern; }
  const std::vector<double>& weights() const { return *op_.weights; }
  const SparseOp& op() const { return op_; }

  // Weight of entry (i, j); the entry must exist in the pattern.
  double entry(std::size_t i, std::size_t j) const {
    const CsrPattern& p = *op_.pattern;
    const auto lo = p.col_indices.begin() +
                    static_cast<std::ptrdiff_t>(p.row_offsets[i]);
    const auto hi = p.col_indices.begin() +
                    static_cast<std::ptrdiff_t>(p.row_offsets[i + 1]);
    const auto it = std::lower_bound(lo, hi, j);
    if (it == hi || *it != j)
      throw IndexError("NormalizedAdjacency::entry: no entry (" +
                       std::to_string(i) + "," + std::to_string(j) + ")");
    return (*op_.weights)[static_cast<std::size_t>(it - p.col_indices.begin())];
  }

  // 1/sqrt(d_i) for the self-loop-inclusive degree; the building block for
  // sampled sub-operators.
  double inv_sqrt_degree(std::size_t i) const { return inv_sqrt_degree_[i]; }

 private:
  SparseOp op_;
  std::vector<double> inv_sqrt_degree_;
};

inline NormalizedAdjacency sym_normalize(const CsrGraph& g) {
  const std::size_t n = g.num_nodes;
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));

  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::size_t> cols;
  cols.reserve(g.col_indices.size() + n);
  auto weights = std::make_shared<std::vector<double>>();
  weights->reserve(g.col_indices.size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool self_done = false;
    for (std::size_t v : g.neighbors(i)) {
      if (!self_done && v > i) {
        cols.push_back(i);
        weights->push_back(inv_sqrt[i] * inv_sqrt[i]);
        self_done = true;
      }
      cols.push_back(v);
      weights->push_back(inv_sqrt[i] * inv_sqrt[v]);
    }
    if (!self_done) {
      cols.push_back(i);
      weights->push_back(inv_sqrt[i] * inv_sqrt[i]);
    }
    offsets[i + 1] = cols.size();
  }
  auto pattern = std::make_shared<const CsrPattern>(
      CsrPattern::build(n, n, std::move(offsets), std::move(cols)));
  return NormalizedAdjacency(std::move(pattern), std::move(weights),
                             std::move(inv_sqrt));
}

inline Tensor spmm(Tape& tape, const NormalizedAdjacency& adj,
                   const Tensor& h) {
  return tape.spmm(adj.op(), h);
}

// The graph's pattern plus self-loops, unweighted; the support of GAT
// attention (n[i] plus the node itself).
inline CsrPatternPtr attention_pattern(const CsrGraph& g) {
  const std::size_t n = g.num_nodes;
  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::size_t> cols;
  cols.reserve(g.col_indices.size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool self_done = false;
    for (std::size_t v : g.neighbors(i)) {
      if (!self_done && v > i) {
        cols.push_back(i);
        self_done = true;
      }
      cols.push_back(v);
    }
    if (!self_done) cols.push_back(i);
    offsets[i + 1] = cols.size();
  }
  return std::make_shared<const CsrPattern>(
      CsrPattern::build(n, n, std::move(offsets), std::move(cols)));
}

// Per-node uniform neighbor sample, without replacement. A degree-0 node
// falls back to itself so its representation never loses the self-loop.
struct SampledAdjacency {
  std::vector<std::size_t> nodes;
  std::vector<std::vector<std::size_t>> neighbors;  // aligned with nodes
};

inline SampledAdjacency sample_neighbors(const CsrGraph& g,
                                         const std::vector<std::size_t>& nodes,
                                         std::size_t s, RngStream& rng) {
  if (s == 0) throw ContractError("sample_neighbors: sample size must be >= 1");
  SampledAdjacency out;
  out.nodes = nodes;
  out.neighbors.reserve(nodes.size());
  for (std::size_t v : nodes) {
    const auto nb = g.neighbors(v);  // throws IndexError on bad id
    if (nb.empty()) {
      out.neighbors.push_back({v});
      continue;
    }
    if (s >= nb.size()) {
      out.neighbors.emplace_back(nb.begin(), nb.end());
      continue;
    }
    // partial Fisher-Yates over a scratch copy
    std::vector<std::size_t> scratch(nb.begin(), nb.end());
    for (std::size_t k = 0; k < s; ++k) {
      const std::size_t j = k + rng.below(scratch.size() - k);
      std::swap(scratch[k], scratch[j]);
    }
    scratch.resize(s);
    out.neighbors.push_back(std::move(scratch));
  }
  return out;
}

// Node sets B_0 (targets) through B_M produced by recursive neighborhood
// sampling. Each level is an order-preserving superset of the previous one
// (B_l is the prefix of B_{l+1}), and sampled[l] maps each node of B_l to its
// sampled neighbor ids, all of which appear in B_{l+1}.
struct BatchHierarchy {
  std::vector<std::vector<std::size_t>> levels;
  std::vector<std::vector<std::vector<std::size_t>>> sampled;
  std::vector<std::unordered_map<std::size_t, std::size_t>> local;

  std::size_t depth() const { return levels.size() - 1; }

  std::size_t local_id(std::size_t level, std::size_t global) const {
    const auto it = local[level].find(global);
    if (it == local[level].end())
      throw IndexError("BatchHierarchy: node " + std::to_string(global) +
                       " not present at level " + std::to_string(level));
    return it->second;
  }
};

inline BatchHierarchy build_batch_hierarchy(
    const CsrGraph& g, const std::vector<std::size_t>& batch,
    const std::vector<std::size_t>& sizes, RngStream& rng) {
  if (batch.empty())
    throw ContractError("build_batch_hierarchy: empty batch");
  BatchHierarchy h;
  h.levels.push_back(batch);
  for (std::size_t s : sizes) {
    const auto& cur = h.levels.back();
    SampledAdjacency sa = sample_neighbors(g, cur, s, rng);
    std::vector<std::size_t> next = cur;  // prefix property
    std::unordered_map<std::size_t, std::size_t> seen;
    seen.reserve(cur.size() * 2);
    for (std::size_t i = 0; i < cur.size(); ++i) seen.emplace(cur[i], i);
    for (const auto& nbrs : sa.neighbors)
      for (std::size_t v : nbrs)
        if (seen.emplace(v, next.size()).second) next.push_back(v);
    h.sampled.push_back(std::move(sa.neighbors));
    h.levels.push_back(std::move(next));
  }
  h.local.resize(h.levels.size());
  for (std::size_t l = 0; l < h.levels.size(); ++l) {
    h.local[l].reserve(h.levels[l].size() * 2);
    for (std::size_t i = 0; i < h.levels[l].size(); ++i)
      h.local[l].emplace(h.levels[l][i], i);
  }
  return h;
}

// (source, context) pairs from uniform random walks. One walk per start;
// every node visited after the start contributes a pair (repeat visits
// included); the walk halts early if it reaches a degree-0 node.
struct WalkPairs {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

inline WalkPairs random_walks(const CsrGraph& g,
                              const std::vector<std::size_t>& starts,
                              std::size_t length, RngStream& rng) {
  if (length == 0) throw ContractError("random_walks: length must be >= 1");
  WalkPairs out;
  out.pairs.reserve(starts.size() * length);
  for (std::size_t start : starts) {
    std::size_t cur = start;
    for (std::size_t step = 0; step < length; ++step) {
      const auto nb = g.neighbors(cur);
      if (nb.empty()) break;
      cur = nb[rng.below(nb.size())];
      out.pairs.emplace_back(start, cur);
    }
  }
  return out;
}

}  // namespace rgnn
