#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rgnn/errors.hpp"
#include "rgnn/graph.hpp"
#include "rgnn/layers.hpp"
#include "rgnn/rng.hpp"
#include "rgnn/tape.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

enum class Base { kGcn, kGat };
enum class Combinator { kPlain, kResidual, kVanillaRnn, kLstm, kGru };
enum class CellSharing { kShared, kPerLayer };

inline bool is_recurrent(Combinator c) {
  return c == Combinator::kVanillaRnn || c == Combinator::kLstm ||
         c == Combinator::kGru;
}

// Variant names follow the paper family: gcn, gat, gcn-res, gat-res,
// rgcn-rnn, rgcn-lstm, rgcn-gru, rgat-rnn, rgat-lstm, rgat-gru.
inline std::pair<Base, Combinator> parse_variant(const std::string& name) {
  std::string stem = name;
  Combinator comb = Combinator::kPlain;
  const auto ends_with = [&](const std::string& suffix) {
    return stem.size() > suffix.size() &&
           stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) ==
               0;
  };
  if (ends_with("-res")) {
    comb = Combinator::kResidual;
    stem.resize(stem.size() - 4);
  } else if (ends_with("-rnn")) {
    comb = Combinator::kVanillaRnn;
    stem.resize(stem.size() - 4);
  } else if (ends_with("-lstm")) {
    comb = Combinator::kLstm;
    stem.resize(stem.size() - 5);
  } else if (ends_with("-gru")) {
    comb = Combinator::kGru;
    stem.resize(stem.size() - 4);
  }
  Base base;
  if (is_recurrent(comb)) {
    if (stem == "rgcn") base = Base::kGcn;
    else if (stem == "rgat") base = Base::kGat;
    else
      throw ConfigError("unknown model variant: " + name +
                        " (recurrent variants are rgcn-*/rgat-*)");
  } else {
    if (stem == "gcn") base = Base::kGcn;
    else if (stem == "gat") base = Base::kGat;
    else throw ConfigError("unknown model variant: " + name);
  }
  return {base, comb};
}

inline std::string variant_name(Base base, Combinator comb) {
  const std::string stem = base == Base::kGcn ? "gcn" : "gat";
  switch (comb) {
    case Combinator::kPlain: return stem;
    case Combinator::kResidual: return stem + "-res";
    case Combinator::kVanillaRnn: return "r" + stem + "-rnn";
    case Combinator::kLstm: return "r" + stem + "-lstm";
    case Combinator::kGru: return "r" + stem + "-gru";
  }
  throw ContractError("variant_name: unknown combinator");
}

struct ModelConfig {
  Base base = Base::kGcn;
  Combinator combinator = Combinator::kPlain;
  std::size_t depth = 2;        // M
  std::size_t in_features = 0;  // F
  std::size_t hidden = 16;      // C
  std::size_t num_classes = 0;  // |Y|
  std::size_t heads = 1;
  double dropout = 0.0;
  double leaky_slope = 0.2;
  HeadActivation gat_head_activation = HeadActivation::kSigmoid;
  CellSharing cell_sharing = CellSharing::kShared;

  void validate() const {
    if (in_features == 0) throw ConfigError("model: in_features must be > 0");
    if (hidden == 0) throw ConfigError("model: hidden must be > 0");
    if (num_classes == 0) throw ConfigError("model: num_classes must be > 0");
    if (base == Base::kGat && (heads == 0 || hidden % heads != 0))
      throw ConfigError("model: heads (" + std::to_string(heads) +
                        ") must divide hidden (" + std::to_string(hidden) +
                        ")");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("model: dropout must be in [0,1)");
  }
};

// Cached per-graph operators so training loops build them once.
struct GraphOps {
  NormalizedAdjacency norm;  // GCN aggregation
  CsrPatternPtr attention;   // GAT support (adjacency + self)
  std::size_t num_nodes = 0;

  static GraphOps build(const CsrGraph& g) {
    GraphOps ops;
    ops.norm = sym_normalize(g);
    ops.attention = attention_pattern(g);
    ops.num_nodes = g.num_nodes;
    return ops;
  }
};

// Hidden state carried across layers; c is only defined for LSTM.
struct ModelState {
  Tensor h;
  Tensor c;
};

// The architecture under study: input projection, a stack of GNN layers whose
// outputs pass through a depth-wise combinator (plain, residual, or a
// recurrent cell), and an affine output head.
//
// H^0 = RNN(W_in X + b_in, 0);  H^{l+1} = combine(ELU(GNN_l(H^l)), H^l).
//
// GNN parameters are per layer (unshared). The recurrent cell is shared
// across depth by default; cell_sharing = kPerLayer instantiates depth+1
// cells (index 0 serves the initial step, l+1 serves layer l).
class RgnnModel {
 public:
  RgnnModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    RngStream rng = RngStream::derived(init_seed, 0x1417u);
    w_in_ = Tensor::glorot(cfg_.in_features, cfg_.hidden, rng);
    w_in_.requires_grad = true;
    b_in_ = Tensor::zeros({cfg_.hidden});
    b_in_.requires_grad = true;
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
      if (cfg_.base == Base::kGcn)
        gcn_.push_back(GcnLayer::init(cfg_.hidden, cfg_.hidden, rng));
      else
        gat_.push_back(GatLayer::init(cfg_.hidden, cfg_.hidden, cfg_.heads,
                                      rng, cfg_.leaky_slope,
                                      cfg_.gat_head_activation));
    }
    const std::size_t cells =
        cfg_.cell_sharing == CellSharing::kShared ? 1 : cfg_.depth + 1;
    switch (cfg_.combinator) {
      case Combinator::kVanillaRnn:
        for (std::size_t i = 0; i < cells; ++i)
          rnn_.push_back(VanillaRnnCell::init(cfg_.hidden, rng));
        break;
      case Combinator::kLstm:
        for (std::size_t i = 0; i < cells; ++i)
          lstm_.push_back(LstmCell::init(cfg_.hidden, rng));
        break;
      case Combinator::kGru:
        for (std::size_t i = 0; i < cells; ++i)
          gru_.push_back(GruCell::init(cfg_.hidden, rng));
        break;
      default:
        break;
    }
    w_out_ = Tensor::glorot(cfg_.hidden, cfg_.num_classes, rng);
    w_out_.requires_grad = true;
    b_out_ = Tensor::zeros({cfg_.num_classes});
    b_out_.requires_grad = true;
  }

  const ModelConfig& config() const { return cfg_; }

  // Parameters in a stable, enumerable order (Adam state and checkpoints key
  // off these names).
  ParamRefs params() {
    ParamRefs out;
    out.emplace_back("input.w", &w_in_);
    out.emplace_back("input.b", &b_in_);
    for (std::size_t l = 0; l < gcn_.size(); ++l)
      out.emplace_back("layer" + std::to_string(l) + ".theta", &gcn_[l].theta);
    for (std::size_t l = 0; l < gat_.size(); ++l)
      for (std::size_t k = 0; k < cfg_.heads; ++k) {
        const std::string p =
            "layer" + std::to_string(l) + ".head" + std::to_string(k);
        out.emplace_back(p + ".w", &gat_[l].w[k]);
        out.emplace_back(p + ".a", &gat_[l].a[k]);
      }
    const auto cell_name = [&](std::size_t i) {
      return cfg_.cell_sharing == CellSharing::kShared
                 ? std::string("cell")
                 : "cell" + std::to_string(i);
    };
    for (std::size_t i = 0; i < rnn_.size(); ++i)
      rnn_[i].collect(cell_name(i), out);
    for (std::size_t i = 0; i < lstm_.size(); ++i)
      lstm_[i].collect(cell_name(i), out);
    for (std::size_t i = 0; i < gru_.size(); ++i)
      gru_[i].collect(cell_name(i), out);
    out.emplace_back("head.w", &w_out_);
    out.emplace_back("head.b", &b_out_);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (const auto& [name, t] : params()) n += t->numel();
    return n;
  }

  // H^0: project features, then one recurrent step against zero state.
  // Plain/residual combinators use the projection directly.
  ModelState init_hidden(Tape& tape, const Tensor& x) {
    if (x.cols() != cfg_.in_features)
      throw ShapeError("init_hidden: features " + shape_str(x.shape()) +
                       " do not match in_features " +
                       std::to_string(cfg_.in_features));
    Tensor proj = tape.add(tape.matmul(x, w_in_), b_in_);
    const Shape hs = {x.rows(), cfg_.hidden};
    switch (cfg_.combinator) {
      case Combinator::kPlain:
      case Combinator::kResidual:
        return {proj, Tensor()};
      case Combinator::kVanillaRnn:
        return {rnn_step(tape, rnn_[0], proj, Tensor::zeros(hs)), Tensor()};
      case Combinator::kLstm: {
        LstmState s = lstm_step(tape, lstm_[0], proj, Tensor::zeros(hs),
                                Tensor::zeros(hs));
        return {s.h, s.c};
      }
      case Combinator::kGru:
        return {gru_step(tape, gru_[0], proj, Tensor::zeros(hs)), Tensor()};
    }
    throw ContractError("init_hidden: unknown combinator");
  }

  // Full-graph forward; dropout (train only) applies to input features.
  Tensor forward_full(Tape& tape, const GraphOps& ops, const Tensor& x,
                      bool train, RngStream& rng) {
    if (ops.num_nodes != x.rows())
      throw ShapeError("forward_full: graph has " +
                       std::to_string(ops.num_nodes) + " nodes but features " +
                       shape_str(x.shape()));
    Tensor xin = train ? tape.dropout(x, cfg_.dropout, rng) : x;
    ModelState st = init_hidden(tape, xin);
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
      Tensor agg = cfg_.base == Base::kGcn
                       ? gcn_forward(tape, gcn_[l], ops.norm, st.h)
                       : gat_forward(tape, gat_[l], ops.attention, st.h);
      st = combine(tape, l, tape.elu(agg), st);
    }
    return st.h;
  }

  Tensor forward_full(Tape& tape, const CsrGraph& g, const Tensor& x,
                      bool train, RngStream& rng) {
    return forward_full(tape, GraphOps::build(g), x, train, rng);
  }

  // Batched forward over a sampled hierarchy. x_bottom holds features for the
  // bottom level B_M; aggregation walks levels bottom-up using each level's
  // sampled adjacency (weights restricted from the full normalization), and
  // the recurrent/residual state rides along the level prefix. Returns B_0
  // rows.
  Tensor forward_batched(Tape& tape, const GraphOps& ops,
                         const BatchHierarchy& hier, const Tensor& x_bottom,
                         bool train, RngStream& rng) {
    if (hier.depth() != cfg_.depth)
      throw ContractError("forward_batched: hierarchy depth " +
                          std::to_string(hier.depth()) +
                          " does not match model depth " +
                          std::to_string(cfg_.depth));
    const std::size_t M = cfg_.depth;
    if (x_bottom.rows() != hier.levels[M].size())
      throw ShapeError("forward_batched: expected features for " +
                       std::to_string(hier.levels[M].size()) +
                       " bottom-level nodes, got " +
                       shape_str(x_bottom.shape()));
    Tensor xin = train ? tape.dropout(x_bottom, cfg_.dropout, rng) : x_bottom;
    ModelState st = init_hidden(tape, xin);
    for (std::size_t l = 0; l < M; ++l) {
      const std::size_t src_level = M - l;      // states live on this level
      const std::size_t dst_level = src_level - 1;
      const auto& dst_nodes = hier.levels[dst_level];
      const std::size_t m = dst_nodes.size();

      Tensor agg;
      if (cfg_.base == Base::kGcn) {
        agg = gcn_forward(tape, gcn_[l],
                          sampled_gcn_op(ops, hier, dst_level, src_level),
                          st.h);
      } else {
        std::vector<std::size_t> dst_to_src(m);
        std::iota(dst_to_src.begin(), dst_to_src.end(), 0);  // level prefix
        agg = gat_forward(tape, gat_[l],
                          sampled_pattern(hier, dst_level, src_level), st.h,
                          dst_to_src);
      }
      // carry state for the surviving prefix
      std::vector<std::size_t> prefix(m);
      std::iota(prefix.begin(), prefix.end(), 0);
      ModelState carried;
      carried.h = tape.gather_rows(st.h, prefix);
      if (st.c.defined()) carried.c = tape.gather_rows(st.c, prefix);
      st = combine(tape, l, tape.elu(agg), carried);
    }
    return st.h;
  }

  // Affine output head; the losses own the nonlinearity.
  Tensor predict(Tape& tape, const Tensor& h) {
    return tape.add(tape.matmul(h, w_out_), b_out_);
  }

  // Raw parameter data in params() order, for checkpoints and best-epoch
  // snapshots.
  std::vector<double> snapshot() {
    std::vector<double> out;
    for (const auto& [name, t] : params())
      out.insert(out.end(), t->data(), t->data() + t->numel());
    return out;
  }

  void restore(const std::vector<double>& flat) {
    std::size_t off = 0;
    for (const auto& [name, t] : params()) {
      if (off + t->numel() > flat.size())
        throw ContractError("restore: snapshot too short");
      std::copy_n(flat.data() + off, t->numel(), t->data());
      off += t->numel();
    }
    if (off != flat.size())
      throw ContractError("restore: snapshot size mismatch");
  }

 private:
  ModelState combine(Tape& tape, std::size_t layer, const Tensor& x_hat,
                     const ModelState& prev) {
    const std::size_t ci =
        cfg_.cell_sharing == CellSharing::kShared ? 0 : layer + 1;
    switch (cfg_.combinator) {
      case Combinator::kPlain:
        return {x_hat, Tensor()};
      case Combinator::kResidual:
        return {tape.add(x_hat, prev.h), Tensor()};
      case Combinator::kVanillaRnn:
        return {rnn_step(tape, rnn_[ci], x_hat, prev.h), Tensor()};
      case Combinator::kLstm: {
        LstmState s = lstm_step(tape, lstm_[ci], x_hat, prev.h, prev.c);
        return {s.h, s.c};
      }
      case Combinator::kGru:
        return {gru_step(tape, gru_[ci], x_hat, prev.h), Tensor()};
    }
    throw ContractError("combine: unknown combinator");
  }

  // Sparse aggregation operator for one hierarchy step: row i covers
  // dst_level node i, entries are its self-loop plus sampled neighbors
  // (column space = src_level locals), weighted by the full-graph
  // normalization.
  SparseOp sampled_gcn_op(const GraphOps& ops, const BatchHierarchy& hier,
                          std::size_t dst_level, std::size_t src_level) const {
    const auto& dst_nodes = hier.levels[dst_level];
    std::vector<std::size_t> offsets(dst_nodes.size() + 1, 0);
    std::vector<std::size_t> cols;
    auto weights = std::make_shared<std::vector<double>>();
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t i = 0; i < dst_nodes.size(); ++i) {
      const std::size_t gi = dst_nodes[i];
      row.clear();
      row.emplace_back(i, ops.norm.inv_sqrt_degree(gi) *
                              ops.norm.inv_sqrt_degree(gi));
      for (std::size_t gj : hier.sampled[dst_level][i]) {
        if (gj == gi) continue;  // degree-0 fallback duplicates the self-loop
        row.emplace_back(hier.local_id(src_level, gj),
                         ops.norm.inv_sqrt_degree(gi) *
                             ops.norm.inv_sqrt_degree(gj));
      }
      std::sort(row.begin(), row.end());
      for (const auto& [c, w] : row) {
        cols.push_back(c);
        weights->push_back(w);
      }
      offsets[i + 1] = cols.size();
    }
    auto pattern = std::make_shared<const CsrPattern>(
        CsrPattern::build(dst_nodes.size(), hier.levels[src_level].size(),
                          std::move(offsets), std::move(cols)));
    return SparseOp{std::move(pattern), std::move(weights)};
  }

  CsrPatternPtr sampled_pattern(const BatchHierarchy& hier,
                                std::size_t dst_level,
                                std::size_t src_level) const {
    const auto& dst_nodes = hier.levels[dst_level];
    std::vector<std::size_t> offsets(dst_nodes.size() + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<std::size_t> row;
    for (std::size_t i = 0; i < dst_nodes.size(); ++i) {
      row.clear();
      row.push_back(i);
      for (std::size_t gj : hier.sampled[dst_level][i]) {
        if (gj == dst_nodes[i]) continue;
        row.push_back(hier.local_id(src_level, gj));
      }
      std::sort(row.begin(), row.end());
      cols.insert(cols.end(), row.begin(), row.end());
      offsets[i + 1] = cols.size();
    }
    return std::make_shared<const CsrPattern>(
        CsrPattern::build(dst_nodes.size(), hier.levels[src_level].size(),
                          std::move(offsets), std::move(cols)));
  }

  ModelConfig cfg_;
  Tensor w_in_, b_in_;
  std::vector<GcnLayer> gcn_;
  std::vector<GatLayer> gat_;
  std::vector<VanillaRnnCell> rnn_;
  std::vector<LstmCell> lstm_;
  std::vector<GruCell> gru_;
  Tensor w_out_, b_out_;
};

}  // namespace rgnn
