#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "rgnn/data.hpp"
#include "rgnn/errors.hpp"
#include "rgnn/graph.hpp"
#include "rgnn/rng.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

struct PerturbSpec {
  enum class Kind { kEdgeRewire, kFeatureNoise };
  Kind kind = Kind::kEdgeRewire;
  double p = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (p < 0.0 || p > 1.0)
      throw ConfigError("perturbation: p must be in [0,1]");
  }
};

struct RewireResult {
  CsrGraph graph;
  std::size_t removed = 0;
  std::size_t insert_skips = 0;  // insertions abandoned after 100 redraws
};

// Cuts each undirected edge with probability p, then replaces each cut edge
// with one between two uniformly drawn distinct nodes, redrawing on
// self-loops and already-present edges (up to 100 times, then the insertion
// is skipped). At p=1 the result is a random graph of the same density, up to
// skips. Pure: the input graph is untouched.
inline RewireResult rewire_edges(const CsrGraph& g, double p, RngStream& rng) {
  if (p < 0.0 || p > 1.0)
    throw ConfigError("rewire_edges: p must be in [0,1]");
  RewireResult res;
  const auto original = g.edge_list();
  std::set<std::pair<std::size_t, std::size_t>> current(original.begin(),
                                                        original.end());
  std::vector<std::pair<std::size_t, std::size_t>> cut;
  if (p > 0.0) {
    for (const auto& e : original) {
      if (rng.bernoulli(p)) {
        current.erase(e);
        cut.push_back(e);
      }
    }
  }
  res.removed = cut.size();
  for (std::size_t i = 0; i < cut.size(); ++i) {
    bool inserted = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      std::size_t u = rng.below(g.num_nodes);
      std::size_t v = rng.below(g.num_nodes);
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      if (current.emplace(u, v).second) {
        inserted = true;
        break;
      }
    }
    if (!inserted) ++res.insert_skips;
  }
  res.graph = CsrGraph::from_edges(
      g.num_nodes, {current.begin(), current.end()});
  return res;
}

// Replaces each node's whole feature row with i.i.d. N(0,1) draws with
// probability p. Pure: returns a fresh tensor.
inline Tensor mutate_features(const Tensor& x, double p, RngStream& rng) {
  if (p < 0.0 || p > 1.0)
    throw ConfigError("mutate_features: p must be in [0,1]");
  Tensor out = x.clone();
  out.requires_grad = false;
  if (p == 0.0) return out;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (!rng.bernoulli(p)) continue;
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = rng.normal();
  }
  return out;
}

// Applies the perturbation to every graph (or feature matrix) of a bundle;
// the noise models imperfect data, so train and evaluation sides both see it.
inline DatasetBundle apply_perturbation(const DatasetBundle& bundle,
                                        const PerturbSpec& spec) {
  spec.validate();
  DatasetBundle out = bundle;
  for (std::size_t g = 0; g < out.num_graphs(); ++g) {
    RngStream rng = RngStream::derived(spec.seed, 0x9e47u + g);
    if (spec.kind == PerturbSpec::Kind::kEdgeRewire)
      out.graphs[g] = rewire_edges(out.graphs[g], spec.p, rng).graph;
    else
      out.features[g] = mutate_features(out.features[g], spec.p, rng);
  }
  return out;
}

}  // namespace rgnn
