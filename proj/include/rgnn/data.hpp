#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgnn/errors.hpp"
#include "rgnn/graph.hpp"
#include "rgnn/labels.hpp"
#include "rgnn/rng.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

// On-disk dataset layout (all plain text, canonical ordering so save/load
// round-trips are byte-identical):
//   meta.json               task, label kind, counts
//   graph_<i>.edges         one undirected edge per line, "u<TAB>v", u < v
//   graph_<i>.features.tsv  node id + F floats (17 significant digits)
//   graph_<i>.labels.tsv    node id + class id (multiclass) or 0/1 vector
//   splits.json             train/val/test: node ids, or graph ids when
//                           kind == "graphs" (multi-graph corpora)

struct SplitSet {
  bool graph_level = false;
  std::vector<std::size_t> train, val, test;
};

struct DatasetBundle {
  std::string task = "supervised";  // advisory default task for the CLI
  LabelKind label_kind = LabelKind::kMulticlass;
  std::vector<CsrGraph> graphs;
  std::vector<Tensor> features;      // per graph, N x F
  std::vector<LabelMatrix> labels;   // per graph
  SplitSet split;
  nlohmann::json meta_extra;         // e.g. synthetic-generation metadata

  bool multigraph() const { return graphs.size() > 1; }
  std::size_t num_graphs() const { return graphs.size(); }
  std::size_t feature_dim() const {
    return features.empty() ? 0 : features.front().cols();
  }
  std::size_t num_classes() const {
    return labels.empty() ? 0 : labels.front().num_classes();
  }

  void validate() const {
    if (graphs.empty()) throw DataError("dataset: no graphs");
    if (features.size() != graphs.size() || labels.size() != graphs.size())
      throw DataError("dataset: per-graph arrays disagree");
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      graphs[g].validate();
      if (features[g].rows() != graphs[g].num_nodes)
        throw DataError("dataset: graph " + std::to_string(g) +
                        " feature rows do not match node count");
      if (labels[g].num_nodes() != graphs[g].num_nodes)
        throw DataError("dataset: graph " + std::to_string(g) +
                        " label rows do not match node count");
      if (features[g].cols() != feature_dim())
        throw DataError("dataset: feature width varies across graphs");
      if (labels[g].num_classes() != num_classes())
        throw DataError("dataset: class count varies across graphs");
      labels[g].validate();
    }
    const std::size_t limit =
        split.graph_level ? graphs.size() : graphs.front().num_nodes;
    if (!split.graph_level && multigraph())
      throw DataError("dataset: multi-graph corpora need graph-level splits");
    std::set<std::size_t> seen;
    const auto check = [&](const std::vector<std::size_t>& ids,
                           const char* name) {
      for (std::size_t id : ids) {
        if (id >= limit)
          throw DataError("splits.json: " + std::string(name) + " id " +
                          std::to_string(id) + " out of range");
        if (!seen.insert(id).second)
          throw DataError("splits.json: id " + std::to_string(id) +
                          " appears in more than one split");
      }
    };
    check(split.train, "train");
    check(split.val, "val");
    check(split.test, "test");
  }
};

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::size_t parse_index(const std::string& s, const std::string& file,
                               std::size_t line) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw DataError(file + ":" + std::to_string(line) + ": expected integer, got '" +
                    s + "'");
  }
}

inline double parse_double(const std::string& s, const std::string& file,
                           std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(file + ":" + std::to_string(line) + ": expected number, got '" +
                    s + "'");
  }
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing or unreadable file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing or unreadable file: " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace detail

inline DatasetBundle load_dataset(const std::filesystem::path& dir) {
  using nlohmann::json;
  const json meta = detail::read_json(dir / "meta.json");
  DatasetBundle b;
  try {
    b.task = meta.value("task", std::string("supervised"));
    b.label_kind = label_kind_from(meta.at("label_kind").get<std::string>());
  } catch (const json::exception& e) {
    throw DataError("meta.json: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw DataError("meta.json: " + std::string(e.what()));
  }
  const std::size_t num_graphs = meta.value("num_graphs", std::size_t{1});
  const std::size_t feature_dim = meta.value("feature_dim", std::size_t{0});
  const std::size_t num_classes = meta.value("num_classes", std::size_t{0});
  if (num_graphs == 0 || feature_dim == 0 || num_classes == 0)
    throw DataError("meta.json: num_graphs, feature_dim and num_classes must be positive");
  if (meta.contains("extra")) b.meta_extra = meta.at("extra");

  for (std::size_t g = 0; g < num_graphs; ++g) {
    const std::string stem = "graph_" + std::to_string(g);

    // features define the node count
    const auto feat_path = dir / (stem + ".features.tsv");
    const auto feat_lines = detail::read_lines(feat_path);
    const std::size_t n = feat_lines.size();
    if (n == 0) throw DataError(feat_path.string() + ": no nodes");
    Tensor x({n, feature_dim});
    for (std::size_t i = 0; i < n; ++i) {
      const auto fields = detail::split_tabs(feat_lines[i]);
      if (fields.size() != feature_dim + 1)
        throw DataError(feat_path.string() + ":" + std::to_string(i + 1) +
                        ": expected node id + " + std::to_string(feature_dim) +
                        " features, got " + std::to_string(fields.size() - 1));
      const std::size_t id =
          detail::parse_index(fields[0], feat_path.string(), i + 1);
      if (id != i)
        throw DataError(feat_path.string() + ":" + std::to_string(i + 1) +
                        ": node ids must be 0..N-1 in order");
      for (std::size_t f = 0; f < feature_dim; ++f)
        x.at(i, f) =
            detail::parse_double(fields[f + 1], feat_path.string(), i + 1);
    }

    const auto edge_path = dir / (stem + ".edges");
    const auto edge_lines = detail::read_lines(edge_path);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    edges.reserve(edge_lines.size());
    for (std::size_t i = 0; i < edge_lines.size(); ++i) {
      if (edge_lines[i].empty()) continue;
      const auto fields = detail::split_tabs(edge_lines[i]);
      if (fields.size() != 2)
        throw DataError(edge_path.string() + ":" + std::to_string(i + 1) +
                        ": expected two tab-separated node ids");
      const std::size_t u =
          detail::parse_index(fields[0], edge_path.string(), i + 1);
      const std::size_t v =
          detail::parse_index(fields[1], edge_path.string(), i + 1);
      if (u >= n || v >= n)
        throw DataError(edge_path.string() + ":" + std::to_string(i + 1) +
                        ": node id out of range (graph has " +
                        std::to_string(n) + " nodes)");
      edges.emplace_back(u, v);
    }

    const auto label_path = dir / (stem + ".labels.tsv");
    const auto label_lines = detail::read_lines(label_path);
    if (label_lines.size() != n)
      throw DataError(label_path.string() + ": expected " + std::to_string(n) +
                      " rows, got " + std::to_string(label_lines.size()));
    LabelMatrix lm;
    lm.kind = b.label_kind;
    lm.values = Tensor({n, num_classes});
    for (std::size_t i = 0; i < n; ++i) {
      const auto fields = detail::split_tabs(label_lines[i]);
      const std::size_t expect =
          b.label_kind == LabelKind::kMulticlass ? 2 : num_classes + 1;
      if (fields.size() != expect)
        throw DataError(label_path.string() + ":" + std::to_string(i + 1) +
                        ": expected " + std::to_string(expect) + " fields");
      const std::size_t id =
          detail::parse_index(fields[0], label_path.string(), i + 1);
      if (id != i)
        throw DataError(label_path.string() + ":" + std::to_string(i + 1) +
                        ": node ids must be 0..N-1 in order");
      if (b.label_kind == LabelKind::kMulticlass) {
        const std::size_t cls =
            detail::parse_index(fields[1], label_path.string(), i + 1);
        if (cls >= num_classes)
          throw DataError(label_path.string() + ":" + std::to_string(i + 1) +
                          ": class id " + std::to_string(cls) +
                          " out of range (" + std::to_string(num_classes) +
                          " classes)");
        lm.values.at(i, cls) = 1.0;
      } else {
        for (std::size_t c = 0; c < num_classes; ++c) {
          const std::string& f = fields[c + 1];
          if (f != "0" && f != "1")
            throw DataError(label_path.string() + ":" + std::to_string(i + 1) +
                            ": multilabel entries must be 0 or 1");
          lm.values.at(i, c) = f == "1" ? 1.0 : 0.0;
        }
      }
    }

    b.graphs.push_back(CsrGraph::from_edges(n, edges));
    b.features.push_back(std::move(x));
    b.labels.push_back(std::move(lm));
  }

  const json splits = detail::read_json(dir / "splits.json");
  try {
    b.split.graph_level = splits.value("kind", std::string("nodes")) == "graphs";
    b.split.train = splits.at("train").get<std::vector<std::size_t>>();
    b.split.val = splits.at("val").get<std::vector<std::size_t>>();
    b.split.test = splits.at("test").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw DataError("splits.json: " + std::string(e.what()));
  }

  b.validate();
  return b;
}

inline void save_dataset(const DatasetBundle& bundle,
                         const std::filesystem::path& dir) {
  using nlohmann::json;
  bundle.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec && !std::filesystem::is_directory(dir))
    throw DataError("cannot create dataset directory: " + dir.string());

  json meta;
  meta["schema_version"] = 1;
  meta["task"] = bundle.task;
  meta["label_kind"] = label_kind_name(bundle.label_kind);
  meta["num_graphs"] = bundle.num_graphs();
  meta["feature_dim"] = bundle.feature_dim();
  meta["num_classes"] = bundle.num_classes();
  if (!bundle.meta_extra.is_null()) meta["extra"] = bundle.meta_extra;
  detail::write_text(dir / "meta.json", meta.dump(2) + "\n");

  for (std::size_t g = 0; g < bundle.num_graphs(); ++g) {
    const std::string stem = "graph_" + std::to_string(g);
    std::string edges;
    for (const auto& [u, v] : bundle.graphs[g].edge_list())
      edges += std::to_string(u) + "\t" + std::to_string(v) + "\n";
    detail::write_text(dir / (stem + ".edges"), edges);

    std::string feats;
    const Tensor& x = bundle.features[g];
    for (std::size_t i = 0; i < x.rows(); ++i) {
      feats += std::to_string(i);
      for (std::size_t f = 0; f < x.cols(); ++f)
        feats += "\t" + detail::fmt17(x.at(i, f));
      feats += "\n";
    }
    detail::write_text(dir / (stem + ".features.tsv"), feats);

    std::string labs;
    const LabelMatrix& lm = bundle.labels[g];
    for (std::size_t i = 0; i < lm.num_nodes(); ++i) {
      labs += std::to_string(i);
      if (lm.kind == LabelKind::kMulticlass) {
        std::size_t cls = 0;
        for (std::size_t c = 0; c < lm.num_classes(); ++c)
          if (lm.values.at(i, c) == 1.0) cls = c;
        labs += "\t" + std::to_string(cls);
      } else {
        for (std::size_t c = 0; c < lm.num_classes(); ++c)
          labs += lm.values.at(i, c) == 1.0 ? "\t1" : "\t0";
      }
      labs += "\n";
    }
    detail::write_text(dir / (stem + ".labels.tsv"), labs);
  }

  json splits;
  splits["kind"] = bundle.split.graph_level ? "graphs" : "nodes";
  splits["train"] = bundle.split.train;
  splits["val"] = bundle.split.val;
  splits["test"] = bundle.split.test;
  detail::write_text(dir / "splits.json", splits.dump(2) + "\n");
}

// ---- synthetic datasets ----

struct SyntheticParams {
  enum class Kind { kSbm, kFeaturesCluster };

  Kind kind = Kind::kSbm;
  std::size_t blocks = 4;
  std::size_t nodes_per_block = 125;
  double p_in = 0.05;    // SBM within-block edge probability
  double p_out = 0.005;  // SBM cross-block edge probability
  double edge_p = 0.01;  // features_cluster: uniform (structure-free) graph
  std::size_t feature_dim = 16;
  double center_scale = 1.0;  // 0 makes features uninformative
  double noise_sigma = 1.0;
  double train_frac = 0.6;
  double val_frac = 0.2;

  void validate() const {
    if (blocks < 2) throw ConfigError("synthetic: blocks must be >= 2");
    if (nodes_per_block == 0)
      throw ConfigError("synthetic: nodes_per_block must be > 0");
    if (feature_dim == 0) throw ConfigError("synthetic: feature_dim must be > 0");
    if (kind == Kind::kSbm && !(p_in > p_out))
      throw ConfigError("synthetic: sbm requires p_in > p_out");
    if (p_in < 0 || p_in > 1 || p_out < 0 || p_out > 1 || edge_p < 0 ||
        edge_p > 1)
      throw ConfigError("synthetic: edge probabilities must be in [0,1]");
    if (train_frac <= 0 || val_frac < 0 || train_frac + val_frac >= 1.0)
      throw ConfigError("synthetic: split fractions must leave room for test");
  }
};

// Stochastic block model with block-correlated Gaussian features and block
// labels, plus a features-only variant whose graph carries no block signal.
// Splits are stratified per block. Deterministic per seed.
inline DatasetBundle make_synthetic(const SyntheticParams& p,
                                    std::uint64_t seed) {
  p.validate();
  RngStream edge_rng = RngStream::derived(seed, 0xed6e5u);
  RngStream feat_rng = RngStream::derived(seed, 0xfea75u);
  RngStream split_rng = RngStream::derived(seed, 0x59175u);

  const std::size_t n = p.blocks * p.nodes_per_block;
  const auto block_of = [&](std::size_t v) { return v / p.nodes_per_block; };

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) {
      const double prob = p.kind == SyntheticParams::Kind::kSbm
                              ? (block_of(u) == block_of(v) ? p.p_in : p.p_out)
                              : p.edge_p;
      if (edge_rng.bernoulli(prob)) edges.emplace_back(u, v);
    }

  std::vector<std::vector<double>> centers(p.blocks);
  for (auto& c : centers) {
    c.resize(p.feature_dim);
    for (double& v : c) v = p.center_scale * feat_rng.normal();
  }
  Tensor x({n, p.feature_dim});
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t f = 0; f < p.feature_dim; ++f)
      x.at(v, f) = centers[block_of(v)][f] + p.noise_sigma * feat_rng.normal();

  LabelMatrix lm;
  lm.kind = LabelKind::kMulticlass;
  lm.values = Tensor({n, p.blocks});
  for (std::size_t v = 0; v < n; ++v) lm.values.at(v, block_of(v)) = 1.0;

  DatasetBundle b;
  b.label_kind = LabelKind::kMulticlass;
  b.graphs.push_back(CsrGraph::from_edges(n, edges));
  b.features.push_back(std::move(x));
  b.labels.push_back(std::move(lm));

  for (std::size_t blk = 0; blk < p.blocks; ++blk) {
    std::vector<std::size_t> ids(p.nodes_per_block);
    for (std::size_t i = 0; i < ids.size(); ++i)
      ids[i] = blk * p.nodes_per_block + i;
    for (std::size_t i = ids.size(); i-- > 1;)
      std::swap(ids[i], ids[split_rng.below(i + 1)]);
    const auto n_train =
        static_cast<std::size_t>(p.train_frac * static_cast<double>(ids.size()));
    const auto n_val =
        static_cast<std::size_t>(p.val_frac * static_cast<double>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i < n_train) b.split.train.push_back(ids[i]);
      else if (i < n_train + n_val) b.split.val.push_back(ids[i]);
      else b.split.test.push_back(ids[i]);
    }
  }
  std::sort(b.split.train.begin(), b.split.train.end());
  std::sort(b.split.val.begin(), b.split.val.end());
  std::sort(b.split.test.begin(), b.split.test.end());

  b.meta_extra = {
      {"synthetic",
       {{"kind", p.kind == SyntheticParams::Kind::kSbm ? "sbm" : "features_cluster"},
        {"blocks", p.blocks},
        {"nodes_per_block", p.nodes_per_block},
        {"p_in", p.p_in},
        {"p_out", p.p_out},
        {"edge_p", p.edge_p},
        {"center_scale", p.center_scale},
        {"noise_sigma", p.noise_sigma},
        {"seed", seed}}}};
  b.validate();
  return b;
}

}  // namespace rgnn
