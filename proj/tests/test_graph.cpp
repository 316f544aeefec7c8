#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <queue>
#include <set>

#include "oracles.hpp"
#include "rgnn/gradcheck.hpp"
#include "rgnn/graph.hpp"

using namespace rgnn;
using Catch::Approx;

TEST_CASE("from_edges symmetrizes, dedups and drops self-loops") {
  CsrGraph g = CsrGraph::from_edges(4, {{1, 0}, {0, 1}, {2, 2}, {3, 1}});
  g.validate();
  REQUIRE(g.num_edges() == 2);
  REQUIRE(g.degree(0) == 1);
  REQUIRE(g.degree(1) == 2);
  REQUIRE(g.degree(2) == 0);
  REQUIRE(g.degree(3) == 1);
  REQUIRE_THROWS_AS(g.degree(4), IndexError);
  REQUIRE_THROWS_AS(CsrGraph::from_edges(2, {{0, 5}}), IndexError);
}

TEST_CASE("degree examples and the handshake lemma") {
  CsrGraph k4 = CsrGraph::from_edges(
      4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  for (std::size_t v = 0; v < 4; ++v) REQUIRE(degree(k4, v) == 3);

  RngStream rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    CsrGraph g = oracle::random_graph(20, 0.2, rng);
    std::size_t sum = 0;
    for (std::size_t v = 0; v < g.num_nodes; ++v) sum += g.degree(v);
    REQUIRE(sum == 2 * g.num_edges());
  }
}

TEST_CASE("sym_normalize closed forms") {
  {
    CsrGraph g = CsrGraph::from_edges(1, {});
    NormalizedAdjacency adj = sym_normalize(g);
    REQUIRE(adj.pattern().nnz() == 1);
    REQUIRE(adj.weights()[0] == 1.0);
  }
  {
    CsrGraph g = CsrGraph::from_edges(2, {{0, 1}});
    NormalizedAdjacency adj = sym_normalize(g);
    REQUIRE(adj.pattern().nnz() == 4);
    for (double w : adj.weights()) REQUIRE(w == Approx(0.5));
  }
}

TEST_CASE("sym_normalize matches the dense oracle and stays symmetric") {
  RngStream rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    CsrGraph g = oracle::random_graph(30, 0.15, rng);
    NormalizedAdjacency adj = sym_normalize(g);
    const auto dense = oracle::dense_normalized(g);
    const CsrPattern& p = adj.pattern();
    // every stored entry matches the dense rule...
    std::map<std::pair<std::size_t, std::size_t>, double> stored;
    for (std::size_t r = 0; r < p.rows; ++r)
      for (std::size_t k = p.row_offsets[r]; k < p.row_offsets[r + 1]; ++k) {
        REQUIRE(std::abs(adj.weights()[k] - dense[r * 30 + p.col_indices[k]]) <
                1e-12);
        stored[{r, p.col_indices[k]}] = adj.weights()[k];
      }
    // ...and nothing else is nonzero
    std::size_t nonzeros = 0;
    for (double v : dense)
      if (v != 0.0) ++nonzeros;
    REQUIRE(nonzeros == p.nnz());
    // symmetric in pattern and weight
    for (const auto& [key, w] : stored) {
      const auto it = stored.find({key.second, key.first});
      REQUIRE(it != stored.end());
      REQUIRE(it->second == Approx(w));
    }
  }
}

TEST_CASE("normalized adjacency largest eigenvalue is at most 1") {
  RngStream rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    CsrGraph g = oracle::random_graph(16, 0.2, rng);
    const auto dense = oracle::dense_normalized(g);
    REQUIRE(oracle::power_iteration_max_eig(dense, 16) <= 1.0 + 1e-9);
  }
}

TEST_CASE("spmm closed forms") {
  {
    // isolated nodes: adjacency acts as the identity
    CsrGraph g = CsrGraph::from_edges(3, {});
    Tape tape;
    Tensor h = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
    Tensor out = spmm(tape, sym_normalize(g), h);
    REQUIRE(oracle::max_abs_diff(out, h) == 0.0);
  }
  {
    CsrGraph g = CsrGraph::from_edges(2, {{0, 1}});
    Tape tape;
    Tensor out = spmm(tape, sym_normalize(g), Tensor::matrix(2, 1, {2, 0}));
    REQUIRE(out.at(0, 0) == Approx(1.0));
    REQUIRE(out.at(1, 0) == Approx(1.0));
  }
  {
    CsrGraph g = CsrGraph::from_edges(2, {{0, 1}});
    Tape tape;
    REQUIRE_THROWS_AS(spmm(tape, sym_normalize(g), Tensor::matrix(3, 1, {1, 2, 3})),
                      ShapeError);
  }
}

TEST_CASE("spmm equals the dense oracle on graphs up to 64 nodes") {
  RngStream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(63);
    CsrGraph g = oracle::random_graph(n, 0.1 + 0.3 * rng.uniform(), rng);
    NormalizedAdjacency adj = sym_normalize(g);
    Tensor h = oracle::random_tensor(n, 3, rng);
    Tape tape;
    Tensor got = spmm(tape, adj, h);
    Tensor expect = oracle::dense_apply(oracle::dense_normalized(g), n, h);
    REQUIRE(oracle::max_abs_diff(got, expect) < 1e-12);
  }
}

TEST_CASE("spmm gradient matches finite differences") {
  RngStream rng(8);
  CsrGraph g = oracle::random_graph(6, 0.4, rng);
  NormalizedAdjacency adj = sym_normalize(g);
  Tensor h = oracle::random_tensor(6, 2, rng);
  h.requires_grad = true;
  Tensor r = oracle::random_tensor(6, 2, rng);
  auto rep = grad_check(
      [&](Tape& t) { return t.sum(t.hadamard(spmm(t, adj, h), r)); },
      {{"h", &h}});
  REQUIRE(rep.max_rel_err < 1e-6);
}

TEST_CASE("sample_neighbors: exhaustive, degree-0, and bad ids") {
  CsrGraph g = CsrGraph::from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  RngStream rng(9);
  SampledAdjacency exact = sample_neighbors(g, {0}, 10, rng);
  REQUIRE(exact.neighbors[0] == std::vector<std::size_t>{1, 2, 3, 4});

  CsrGraph iso = CsrGraph::from_edges(2, {});
  SampledAdjacency self = sample_neighbors(iso, {1}, 3, rng);
  REQUIRE(self.neighbors[0] == std::vector<std::size_t>{1});

  REQUIRE_THROWS_AS(sample_neighbors(g, {7}, 1, rng), IndexError);
  REQUIRE_THROWS_AS(sample_neighbors(g, {0}, 0, rng), ContractError);
}

TEST_CASE("sample_neighbors draws uniformly") {
  CsrGraph g = CsrGraph::from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  RngStream rng(10);
  std::map<std::size_t, std::size_t> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    SampledAdjacency s = sample_neighbors(g, {0}, 1, rng);
    REQUIRE(s.neighbors[0].size() == 1);
    ++counts[s.neighbors[0][0]];
  }
  for (std::size_t v = 1; v <= 4; ++v) {
    const double freq = static_cast<double>(counts[v]) / draws;
    REQUIRE(freq > 0.22);
    REQUIRE(freq < 0.28);
  }
}

TEST_CASE("sample_neighbors without replacement produces distinct ids") {
  RngStream rng(11);
  CsrGraph g = oracle::random_graph(20, 0.4, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t v = rng.below(20);
    SampledAdjacency s = sample_neighbors(g, {v}, 3, rng);
    std::set<std::size_t> uniq(s.neighbors[0].begin(), s.neighbors[0].end());
    REQUIRE(uniq.size() == s.neighbors[0].size());
    REQUIRE(s.neighbors[0].size() == std::min<std::size_t>(3, std::max<std::size_t>(g.degree(v), 1)));
  }
}

TEST_CASE("batch hierarchy: trivial and exhaustive cases") {
  CsrGraph k5 = CsrGraph::from_edges(
      5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}});
  RngStream rng(12);

  BatchHierarchy flat = build_batch_hierarchy(k5, {2, 4}, {}, rng);
  REQUIRE(flat.depth() == 0);
  REQUIRE(flat.levels[0] == std::vector<std::size_t>{2, 4});

  BatchHierarchy h = build_batch_hierarchy(k5, {0}, {4}, rng);
  REQUIRE(h.depth() == 1);
  REQUIRE(h.levels[1].size() == 5);

  REQUIRE_THROWS_AS(build_batch_hierarchy(k5, {}, {2}, rng), ContractError);
}

TEST_CASE("batch hierarchy invariants and counting bound") {
  RngStream rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    CsrGraph g = oracle::random_graph(60, 0.15, rng);
    std::vector<std::size_t> batch{1, 5, 9};
    const std::vector<std::size_t> sizes{25, 10};
    BatchHierarchy h = build_batch_hierarchy(g, batch, sizes, rng);
    REQUIRE(h.levels.size() == 3);
    // B_l is a prefix of B_{l+1}
    for (std::size_t l = 0; l + 1 < h.levels.size(); ++l)
      for (std::size_t i = 0; i < h.levels[l].size(); ++i)
        REQUIRE(h.levels[l][i] == h.levels[l + 1][i]);
    // sampled neighbors appear in the next level
    for (std::size_t l = 0; l < h.sampled.size(); ++l)
      for (const auto& nbrs : h.sampled[l])
        for (std::size_t v : nbrs) REQUIRE(h.local[l + 1].count(v) == 1);
    // |B_2| <= |B_0| (1+S_1)(1+S_2)
    REQUIRE(h.levels[2].size() <= batch.size() * (1 + sizes[0]) * (1 + sizes[1]));
  }
}

TEST_CASE("batch hierarchy is reproducible per seed") {
  RngStream graph_rng(14);
  CsrGraph g = oracle::random_graph(40, 0.2, graph_rng);
  RngStream a(99), b(99), c(100);
  BatchHierarchy ha = build_batch_hierarchy(g, {0, 1, 2}, {5, 3}, a);
  BatchHierarchy hb = build_batch_hierarchy(g, {0, 1, 2}, {5, 3}, b);
  BatchHierarchy hc = build_batch_hierarchy(g, {0, 1, 2}, {5, 3}, c);
  REQUIRE(ha.levels == hb.levels);
  REQUIRE(ha.sampled == hb.sampled);
  bool differs = ha.levels != hc.levels || ha.sampled != hc.sampled;
  REQUIRE(differs);
}

TEST_CASE("random walks: degenerate and forced trajectories") {
  RngStream rng(15);
  CsrGraph iso = CsrGraph::from_edges(1, {});
  REQUIRE(random_walks(iso, {0}, 3, rng).empty());

  CsrGraph path = CsrGraph::from_edges(2, {{0, 1}});
  WalkPairs pairs = random_walks(path, {0}, 2, rng);
  REQUIRE(pairs.pairs ==
          std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {0, 0}});

  REQUIRE_THROWS_AS(random_walks(path, {0}, 0, rng), ContractError);
}

TEST_CASE("random walks choose the first step uniformly") {
  CsrGraph tri = CsrGraph::from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
  RngStream rng(16);
  std::size_t first_is_1 = 0;
  const int walks = 30000;
  for (int i = 0; i < walks; ++i) {
    WalkPairs p = random_walks(tri, {0}, 2, rng);
    REQUIRE(p.pairs.size() == 2);
    if (p.pairs[0].second == 1) ++first_is_1;
  }
  const double freq = static_cast<double>(first_is_1) / walks;
  REQUIRE(freq > 0.48);
  REQUIRE(freq < 0.52);
}

TEST_CASE("walk pairs respect BFS reachability within the walk length") {
  RngStream rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    CsrGraph g = oracle::random_graph(30, 0.1, rng);
    const std::size_t L = 3;
    std::vector<std::size_t> starts(g.num_nodes);
    std::iota(starts.begin(), starts.end(), 0);
    WalkPairs pairs = random_walks(g, starts, L, rng);
    // BFS distances from every start
    for (const auto& [s, ctx] : pairs.pairs) {
      std::vector<int> dist(g.num_nodes, -1);
      std::queue<std::size_t> q;
      q.push(s);
      dist[s] = 0;
      while (!q.empty()) {
        const std::size_t u = q.front();
        q.pop();
        for (std::size_t v : g.neighbors(u))
          if (dist[v] < 0) {
            dist[v] = dist[u] + 1;
            q.push(v);
          }
      }
      REQUIRE(dist[ctx] >= 0);
      REQUIRE(static_cast<std::size_t>(dist[ctx]) <= L);
    }
  }
}
