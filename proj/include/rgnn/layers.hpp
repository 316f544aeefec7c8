#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rgnn/errors.hpp"
#include "rgnn/graph.hpp"
#include "rgnn/rng.hpp"
#include "rgnn/tape.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

enum class HeadActivation { kSigmoid, kElu };

// ---- GCN ----

struct GcnLayer {
  Tensor theta;  // C_in x C_out

  static GcnLayer init(std::size_t c_in, std::size_t c_out, RngStream& rng) {
    GcnLayer l;
    l.theta = Tensor::glorot(c_in, c_out, rng);
    l.theta.requires_grad = true;
    return l;
  }
};

// (A_hat H) Theta with the symmetrically normalized adjacency. No activation
// here; the model composer applies it.
inline Tensor gcn_forward(Tape& tape, const GcnLayer& layer,
                          const NormalizedAdjacency& adj, const Tensor& h) {
  return tape.matmul(tape.spmm(adj.op(), h), layer.theta);
}

// Sampled/batched variant over an arbitrary sparse operator.
inline Tensor gcn_forward(Tape& tape, const GcnLayer& layer,
                          const SparseOp& op, const Tensor& h) {
  return tape.matmul(tape.spmm(op, h), layer.theta);
}

// ---- GAT ----

struct GatLayer {
  std::size_t heads = 1;
  double leaky_slope = 0.2;
  HeadActivation head_activation = HeadActivation::kSigmoid;
  std::vector<Tensor> w;  // per head: C_in x (C_out / heads)
  std::vector<Tensor> a;  // per head: 2 * (C_out / heads)

  static GatLayer init(std::size_t c_in, std::size_t c_out, std::size_t heads,
                       RngStream& rng, double leaky_slope = 0.2,
                       HeadActivation act = HeadActivation::kSigmoid) {
    if (heads == 0 || c_out % heads != 0)
      throw ConfigError("GatLayer: heads (" + std::to_string(heads) +
                        ") must divide output width (" +
                        std::to_string(c_out) + ")");
    GatLayer l;
    l.heads = heads;
    l.leaky_slope = leaky_slope;
    l.head_activation = act;
    const std::size_t d = c_out / heads;
    for (std::size_t k = 0; k < heads; ++k) {
      Tensor wk = Tensor::glorot(c_in, d, rng);
      wk.requires_grad = true;
      l.w.push_back(std::move(wk));
      const double bound = std::sqrt(6.0 / static_cast<double>(2 * d + 1));
      Tensor ak = Tensor::random_uniform({2 * d}, -bound, bound, rng);
      ak.requires_grad = true;
      l.a.push_back(std::move(ak));
    }
    return l;
  }
};

// Multi-head attention over pattern entries (neighborhood plus self).
// dst_to_src maps pattern row i to the row of h holding the same node; empty
// means identity (the square full-graph case). Per head: z = h W, logits
// LeakyReLU(a . [z_i || z_j]), softmax over each node's support, aggregate,
// apply the head activation, then concatenate heads.
inline Tensor gat_forward(Tape& tape, const GatLayer& layer,
                          const CsrPatternPtr& pattern, const Tensor& h,
                          const std::vector<std::size_t>& dst_to_src = {},
                          std::vector<Tensor>* attention_out = nullptr) {
  std::vector<Tensor> heads;
  heads.reserve(layer.heads);
  for (std::size_t k = 0; k < layer.heads; ++k) {
    Tensor z = tape.matmul(h, layer.w[k]);
    Tensor z_dst = dst_to_src.empty() ? z : tape.gather_rows(z, dst_to_src);
    Tensor logits = tape.leaky_relu(
        tape.gat_edge_scores(pattern, z_dst, z, layer.a[k]),
        layer.leaky_slope);
    Tensor alpha = tape.edge_softmax(pattern, logits);
    if (attention_out) attention_out->push_back(alpha);
    Tensor agg = tape.edge_weighted_spmm(pattern, alpha, z);
    heads.push_back(layer.head_activation == HeadActivation::kSigmoid
                        ? tape.sigmoid(agg)
                        : tape.elu(agg));
  }
  return layer.heads == 1 ? heads.front() : tape.concat_cols(heads);
}

inline Tensor gat_forward(Tape& tape, const GatLayer& layer, const CsrGraph& g,
                          const Tensor& h,
                          std::vector<Tensor>* attention_out = nullptr) {
  return gat_forward(tape, layer, attention_pattern(g), h, {}, attention_out);
}

// ---- recurrent cells ----
// All cells take x and h of one width C: the state-merge across layers
// happens in a single hidden space.

struct LstmCell {
  Tensor w_i, u_i, b_i;
  Tensor w_f, u_f, b_f;
  Tensor w_o, u_o, b_o;
  Tensor w_c, u_c, b_c;

  // Glorot weights, zero biases, forget bias 1 so early training passes
  // state through.
  static LstmCell init(std::size_t c, RngStream& rng,
                       double forget_bias = 1.0) {
    LstmCell cell;
    for (Tensor* t : {&cell.w_i, &cell.u_i, &cell.w_f, &cell.u_f, &cell.w_o,
                      &cell.u_o, &cell.w_c, &cell.u_c}) {
      *t = Tensor::glorot(c, c, rng);
      t->requires_grad = true;
    }
    for (Tensor* t : {&cell.b_i, &cell.b_f, &cell.b_o, &cell.b_c}) {
      *t = Tensor::zeros({c});
      t->requires_grad = true;
    }
    for (std::size_t i = 0; i < c; ++i) cell.b_f.at(i) = forget_bias;
    return cell;
  }

  void collect(const std::string& prefix, ParamRefs& out) {
    out.emplace_back(prefix + ".w_i", &w_i);
    out.emplace_back(prefix + ".u_i", &u_i);
    out.emplace_back(prefix + ".b_i", &b_i);
    out.emplace_back(prefix + ".w_f", &w_f);
    out.emplace_back(prefix + ".u_f", &u_f);
    out.emplace_back(prefix + ".b_f", &b_f);
    out.emplace_back(prefix + ".w_o", &w_o);
    out.emplace_back(prefix + ".u_o", &u_o);
    out.emplace_back(prefix + ".b_o", &b_o);
    out.emplace_back(prefix + ".w_c", &w_c);
    out.emplace_back(prefix + ".u_c", &u_c);
    out.emplace_back(prefix + ".b_c", &b_c);
  }
};

struct LstmState {
  Tensor h;
  Tensor c;
};

inline LstmState lstm_step(Tape& tape, const LstmCell& cell, const Tensor& x,
                           const Tensor& h_prev, const Tensor& c_prev) {
  const auto gate = [&](const Tensor& w, const Tensor& u, const Tensor& b) {
    return tape.add(tape.add(tape.matmul(x, w), tape.matmul(h_prev, u)), b);
  };
  Tensor i = tape.sigmoid(gate(cell.w_i, cell.u_i, cell.b_i));
  Tensor f = tape.sigmoid(gate(cell.w_f, cell.u_f, cell.b_f));
  Tensor o = tape.sigmoid(gate(cell.w_o, cell.u_o, cell.b_o));
  Tensor c_hat = tape.tanh(gate(cell.w_c, cell.u_c, cell.b_c));
  Tensor c = tape.add(tape.hadamard(f, c_prev), tape.hadamard(i, c_hat));
  Tensor h = tape.hadamard(o, tape.tanh(c));
  return {h, c};
}

struct GruCell {
  Tensor w_z, u_z, b_z;
  Tensor w_r, u_r, b_r;
  Tensor w_h, u_h, b_h;

  static GruCell init(std::size_t c, RngStream& rng) {
    GruCell cell;
    for (Tensor* t :
         {&cell.w_z, &cell.u_z, &cell.w_r, &cell.u_r, &cell.w_h, &cell.u_h}) {
      *t = Tensor::glorot(c, c, rng);
      t->requires_grad = true;
    }
    for (Tensor* t : {&cell.b_z, &cell.b_r, &cell.b_h}) {
      *t = Tensor::zeros({c});
      t->requires_grad = true;
    }
    return cell;
  }

  void collect(const std::string& prefix, ParamRefs& out) {
    out.emplace_back(prefix + ".w_z", &w_z);
    out.emplace_back(prefix + ".u_z", &u_z);
    out.emplace_back(prefix + ".b_z", &b_z);
    out.emplace_back(prefix + ".w_r", &w_r);
    out.emplace_back(prefix + ".u_r", &u_r);
    out.emplace_back(prefix + ".b_r", &b_r);
    out.emplace_back(prefix + ".w_h", &w_h);
    out.emplace_back(prefix + ".u_h", &u_h);
    out.emplace_back(prefix + ".b_h", &b_h);
  }
};

// Reset gate applied inside the U_h product: h_hat = tanh(x W_h + (r o h) U_h + b_h).
inline Tensor gru_step(Tape& tape, const GruCell& cell, const Tensor& x,
                       const Tensor& h_prev) {
  const auto gate = [&](const Tensor& w, const Tensor& u, const Tensor& b) {
    return tape.add(tape.add(tape.matmul(x, w), tape.matmul(h_prev, u)), b);
  };
  Tensor z = tape.sigmoid(gate(cell.w_z, cell.u_z, cell.b_z));
  Tensor r = tape.sigmoid(gate(cell.w_r, cell.u_r, cell.b_r));
  Tensor h_hat = tape.tanh(
      tape.add(tape.add(tape.matmul(x, cell.w_h),
                        tape.matmul(tape.hadamard(r, h_prev), cell.u_h)),
               cell.b_h));
  Tensor keep = tape.sub(Tensor::ones(z.shape()), z);
  return tape.add(tape.hadamard(keep, h_prev), tape.hadamard(z, h_hat));
}

struct VanillaRnnCell {
  Tensor w, u, b;  // h = tanh(h_prev W + x U + b)

  static VanillaRnnCell init(std::size_t c, RngStream& rng) {
    VanillaRnnCell cell;
    cell.w = Tensor::glorot(c, c, rng);
    cell.u = Tensor::glorot(c, c, rng);
    cell.w.requires_grad = cell.u.requires_grad = true;
    cell.b = Tensor::zeros({c});
    cell.b.requires_grad = true;
    return cell;
  }

  void collect(const std::string& prefix, ParamRefs& out) {
    out.emplace_back(prefix + ".w", &w);
    out.emplace_back(prefix + ".u", &u);
    out.emplace_back(prefix + ".b", &b);
  }
};

inline Tensor rnn_step(Tape& tape, const VanillaRnnCell& cell, const Tensor& x,
                       const Tensor& h_prev) {
  return tape.tanh(tape.add(
      tape.add(tape.matmul(h_prev, cell.w), tape.matmul(x, cell.u)), cell.b));
}

}  // namespace rgnn
