#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rgnn/errors.hpp"
#include "rgnn/rng.hpp"
#include "rgnn/sparse.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

// Gradients keyed by parameter name, shapes mirroring the parameters.
using GradientMap = std::map<std::string, Tensor>;

// Named references to the parameter tensors of a model, in a stable order.
using ParamRefs = std::vector<std::pair<std::string, Tensor*>>;

enum class Act { kSigmoid, kTanh, kElu, kLeakyRelu, kExp, kLog };
enum class Ewise { kAdd, kSub, kHadamard };

// Reverse-mode tape over dense matrices plus the sparse graph kernels.
//
// Define-by-run: every op appends one node holding the output value and the
// ids of its inputs, so the node list is always topologically ordered.
// backward() traverses it once in reverse insertion order, then clears the
// tape. Input tensors unknown to the tape are auto-registered as leaves;
// gradients accumulate per tensor *object*, so a parameter used several times
// (a shared recurrent cell) receives the sum of all its contributions.
class Tape {
 public:
  Tape() : epoch_(next_epoch()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t num_nodes() const { return nodes_.size(); }

  // Registers t as a differentiable leaf on this tape.
  void watch(Tensor& t) {
    t.requires_grad = true;
    ensure_input(t);
  }

  // ---- dense primitives ----

  Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul lhs");
    require_rank2(b, "matmul rhs");
    if (a.cols() != b.rows())
      throw ShapeError("matmul: inner dimensions disagree, " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    emap_mut(out, m, n).noalias() = emap(a, m, k) * emap(b, k, n);
    return push(OpKind::kMatmul, {input(a), input(b)}, std::move(out));
  }

  // Elementwise ops; b may also be a row vector broadcast over a's rows (the
  // stacked-bias pattern), in which case its gradient sums over the rows.
  Tensor add(const Tensor& a, const Tensor& b) { return ewise2(OpKind::kAdd, a, b); }
  Tensor sub(const Tensor& a, const Tensor& b) { return ewise2(OpKind::kSub, a, b); }
  Tensor hadamard(const Tensor& a, const Tensor& b) {
    return ewise2(OpKind::kHadamard, a, b);
  }

  Tensor ewise(Ewise op, const Tensor& a, const Tensor& b) {
    switch (op) {
      case Ewise::kAdd: return add(a, b);
      case Ewise::kSub: return sub(a, b);
      case Ewise::kHadamard: return hadamard(a, b);
    }
    throw ContractError("ewise: unknown op");
  }

  Tensor sigmoid(const Tensor& x) { return unary(OpKind::kSigmoid, x); }
  Tensor tanh(const Tensor& x) { return unary(OpKind::kTanh, x); }
  Tensor elu(const Tensor& x) { return unary(OpKind::kElu, x); }
  Tensor leaky_relu(const Tensor& x, double slope = 0.2) {
    return unary(OpKind::kLeakyRelu, x, slope);
  }
  Tensor exp(const Tensor& x) { return unary(OpKind::kExp, x); }
  Tensor log(const Tensor& x) { return unary(OpKind::kLog, x); }
  // log(sigmoid(x)) in the stable softplus form; building block of the
  // binary-cross-entropy and negative-sampling losses.
  Tensor logsigmoid(const Tensor& x) { return unary(OpKind::kLogSigmoid, x); }

  Tensor activation(Act kind, const Tensor& x, double slope = 0.2) {
    switch (kind) {
      case Act::kSigmoid: return sigmoid(x);
      case Act::kTanh: return tanh(x);
      case Act::kElu: return elu(x);
      case Act::kLeakyRelu: return leaky_relu(x, slope);
      case Act::kExp: return exp(x);
      case Act::kLog: return log(x);
    }
    throw ContractError("activation: unknown kind");
  }

  // Row-wise softmax with per-row max subtraction. Masked entries (mask 0)
  // are exactly zero in the output and receive zero gradient.
  Tensor softmax_rows(const Tensor& x,
                      const std::vector<std::uint8_t>& mask = {}) {
    require_rank2(x, "softmax_rows");
    const std::size_t m = x.rows(), n = x.cols();
    std::shared_ptr<const std::vector<std::uint8_t>> mask_ptr;
    if (!mask.empty()) {
      if (mask.size() != m * n)
        throw ShapeError("softmax_rows: mask size " +
                         std::to_string(mask.size()) + " does not match " +
                         shape_str(x.shape()));
      mask_ptr = std::make_shared<const std::vector<std::uint8_t>>(mask);
    }
    Tensor out({m, n});
    for (std::size_t r = 0; r < m; ++r) {
      double mx = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (std::size_t c = 0; c < n; ++c) {
        if (mask_ptr && !(*mask_ptr)[r * n + c]) continue;
        any = true;
        mx = std::max(mx, x.at(r, c));
      }
      if (!any)
        throw DomainError("softmax_rows: row " + std::to_string(r) +
                          " is fully masked");
      double denom = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        if (mask_ptr && !(*mask_ptr)[r * n + c]) continue;
        denom += std::exp(x.at(r, c) - mx);
      }
      for (std::size_t c = 0; c < n; ++c) {
        if (mask_ptr && !(*mask_ptr)[r * n + c]) continue;
        out.at(r, c) = std::exp(x.at(r, c) - mx) / denom;
      }
    }
    Node n_;
    n_.mask = mask_ptr;
    return push(OpKind::kSoftmaxRows, {input(x)}, std::move(out), std::move(n_));
  }

  // Row selection; backward scatter-adds, so duplicate indices accumulate.
  Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx) {
    require_rank2(x, "gather_rows");
    const std::size_t n = x.cols();
    Tensor out({idx.size(), n});
    for (std::size_t t = 0; t < idx.size(); ++t) {
      if (idx[t] >= x.rows())
        throw IndexError("gather_rows: index " + std::to_string(idx[t]) +
                         " out of range for " + std::to_string(x.rows()) +
                         " rows");
      std::copy_n(x.data() + idx[t] * n, n, out.data() + t * n);
    }
    Node node;
    node.indices = std::make_shared<const std::vector<std::size_t>>(idx);
    return push(OpKind::kGatherRows, {input(x)}, std::move(out),
                std::move(node));
  }

  Tensor transpose(const Tensor& x) {
    require_rank2(x, "transpose");
    const std::size_t m = x.rows(), n = x.cols();
    Tensor out({n, m});
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) out.at(c, r) = x.at(r, c);
    return push(OpKind::kTranspose, {input(x)}, std::move(out));
  }

  Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const std::size_t m = parts.front().rows();
    std::size_t total = 0;
    std::vector<int> ids;
    for (const Tensor& p : parts) {
      require_rank2(p, "concat_cols");
      if (p.rows() != m)
        throw ShapeError("concat_cols: row counts disagree, " +
                         shape_str(parts.front().shape()) + " vs " +
                         shape_str(p.shape()));
      total += p.cols();
      ids.push_back(input(p));
    }
    Tensor out({m, total});
    std::size_t off = 0;
    for (const Tensor& p : parts) {
      for (std::size_t r = 0; r < m; ++r)
        std::copy_n(p.data() + r * p.cols(), p.cols(),
                    out.data() + r * total + off);
      off += p.cols();
    }
    return push(OpKind::kConcatCols, std::move(ids), std::move(out));
  }

  Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += x.at(i);
    return push(OpKind::kSum, {input(x)}, Tensor::scalar(s));
  }

  Tensor scale(const Tensor& x, double c) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out.at(i) = c * x.at(i);
    Node node;
    node.scalar = c;
    return push(OpKind::kScale, {input(x)}, std::move(out), std::move(node));
  }

  Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw ContractError("mean: empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
  }

  // Inverted dropout: kept entries are scaled by 1/keep so inference needs no
  // rescaling. rate 0 is the identity.
  Tensor dropout(const Tensor& x, double rate, RngStream& rng) {
    if (rate == 0.0) return x;
    if (rate < 0.0 || rate >= 1.0)
      throw ConfigError("dropout: rate must be in [0,1), got " +
                        std::to_string(rate));
    const double keep = 1.0 - rate;
    auto mask = std::make_shared<std::vector<std::uint8_t>>(x.numel());
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const bool k = rng.uniform() < keep;
      (*mask)[i] = k;
      out.at(i) = k ? x.at(i) / keep : 0.0;
    }
    Node node;
    node.mask = std::move(mask);
    node.scalar = keep;
    return push(OpKind::kDropout, {input(x)}, std::move(out), std::move(node));
  }

  // ---- sparse kernels ----

  // out = A * h for a fixed-weight sparse operator A (m x n), h (n x C).
  // Differentiable w.r.t. h; backward multiplies by the transpose.
  Tensor spmm(const SparseOp& a, const Tensor& h) {
    if (!a.defined()) throw ContractError("spmm: undefined operator");
    require_rank2(h, "spmm input");
    const CsrPattern& p = *a.pattern;
    if (h.rows() != p.cols)
      throw ShapeError("spmm: operator has " + std::to_string(p.cols) +
                       " columns but input is " + shape_str(h.shape()));
    const std::size_t c = h.cols();
    Tensor out({p.rows, c});
    const std::vector<double>& w = *a.weights;
    for (std::size_t r = 0; r < p.rows; ++r) {
      double* dst = out.data() + r * c;
      for (std::size_t k = p.row_offsets[r]; k < p.row_offsets[r + 1]; ++k) {
        const double wk = w[k];
        const double* src = h.data() + p.col_indices[k] * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += wk * src[j];
      }
    }
    Node node;
    node.sparse = a;
    return push(OpKind::kSpmm, {input(h)}, std::move(out), std::move(node));
  }

  // Per-edge attention logits e_k = a[0:d] . z_dst[row(k)] + a[d:2d] . z_src[col(k)]
  // over the entries of an attention pattern. z_dst is (rows x d), z_src is
  // (cols x d), a is a rank-1 tensor of size 2d.
  Tensor gat_edge_scores(const CsrPatternPtr& pattern, const Tensor& z_dst,
                         const Tensor& z_src, const Tensor& a) {
    require_rank2(z_dst, "gat_edge_scores z_dst");
    require_rank2(z_src, "gat_edge_scores z_src");
    const std::size_t d = z_dst.cols();
    if (z_src.cols() != d || a.rank() != 1 || a.numel() != 2 * d)
      throw ShapeError("gat_edge_scores: attention vector " +
                       shape_str(a.shape()) + " does not match head width " +
                       std::to_string(d));
    if (z_dst.rows() != pattern->rows || z_src.rows() != pattern->cols)
      throw ShapeError("gat_edge_scores: states do not match pattern " +
                       std::to_string(pattern->rows) + "x" +
                       std::to_string(pattern->cols));
    // s_dst[i] = a_left . z_dst[i], s_src[j] = a_right . z_src[j]
    std::vector<double> s_dst(pattern->rows, 0.0), s_src(pattern->cols, 0.0);
    for (std::size_t i = 0; i < pattern->rows; ++i)
      for (std::size_t t = 0; t < d; ++t) s_dst[i] += a.at(t) * z_dst.at(i, t);
    for (std::size_t j = 0; j < pattern->cols; ++j)
      for (std::size_t t = 0; t < d; ++t)
        s_src[j] += a.at(d + t) * z_src.at(j, t);
    Tensor out({pattern->nnz()});
    for (std::size_t r = 0; r < pattern->rows; ++r)
      for (std::size_t k = pattern->row_offsets[r];
           k < pattern->row_offsets[r + 1]; ++k)
        out.at(k) = s_dst[r] + s_src[pattern->col_indices[k]];
    Node node;
    node.pattern = pattern;
    return push(OpKind::kGatEdgeScores, {input(z_dst), input(z_src), input(a)},
                std::move(out), std::move(node));
  }

  // Softmax over each row segment of the pattern's entry list.
  Tensor edge_softmax(const CsrPatternPtr& pattern, const Tensor& e) {
    if (e.rank() != 1 || e.numel() != pattern->nnz())
      throw ShapeError("edge_softmax: expected " +
                       std::to_string(pattern->nnz()) + " edge values, got " +
                       shape_str(e.shape()));
    Tensor out({pattern->nnz()});
    for (std::size_t r = 0; r < pattern->rows; ++r) {
      const std::size_t lo = pattern->row_offsets[r],
                        hi = pattern->row_offsets[r + 1];
      if (lo == hi)
        throw DomainError("edge_softmax: row " + std::to_string(r) +
                          " has no entries");
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = lo; k < hi; ++k) mx = std::max(mx, e.at(k));
      double denom = 0.0;
      for (std::size_t k = lo; k < hi; ++k) denom += std::exp(e.at(k) - mx);
      for (std::size_t k = lo; k < hi; ++k)
        out.at(k) = std::exp(e.at(k) - mx) / denom;
    }
    Node node;
    node.pattern = pattern;
    return push(OpKind::kEdgeSoftmax, {input(e)}, std::move(out),
                std::move(node));
  }

  // out[r] = sum_k alpha_k * z[col(k)] over row r's entries; differentiable in
  // both the per-edge weights and the states.
  Tensor edge_weighted_spmm(const CsrPatternPtr& pattern, const Tensor& alpha,
                            const Tensor& z) {
    require_rank2(z, "edge_weighted_spmm states");
    if (alpha.rank() != 1 || alpha.numel() != pattern->nnz())
      throw ShapeError("edge_weighted_spmm: expected " +
                       std::to_string(pattern->nnz()) + " weights, got " +
                       shape_str(alpha.shape()));
    if (z.rows() != pattern->cols)
      throw ShapeError("edge_weighted_spmm: states " + shape_str(z.shape()) +
                       " do not match pattern columns " +
                       std::to_string(pattern->cols));
    const std::size_t c = z.cols();
    Tensor out({pattern->rows, c});
    for (std::size_t r = 0; r < pattern->rows; ++r) {
      double* dst = out.data() + r * c;
      for (std::size_t k = pattern->row_offsets[r];
           k < pattern->row_offsets[r + 1]; ++k) {
        const double w = alpha.at(k);
        const double* src = z.data() + pattern->col_indices[k] * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += w * src[j];
      }
    }
    Node node;
    node.pattern = pattern;
    return push(OpKind::kEdgeWeightedSpmm, {input(alpha), input(z)},
                std::move(out), std::move(node));
  }

  // Mean over rows of (logsumexp(row) - logit[true class]); the stable form
  // of cross entropy after softmax. labels must be one-hot rows.
  Tensor softmax_xent_mean(const Tensor& logits, const Tensor& labels) {
    require_rank2(logits, "softmax_xent_mean logits");
    if (!logits.same_shape(labels))
      throw ShapeError("softmax_xent_mean: logits " +
                       shape_str(logits.shape()) + " vs labels " +
                       shape_str(labels.shape()));
    const std::size_t m = logits.rows(), n = logits.cols();
    double total = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      double mx = logits.at(r, 0);
      for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, logits.at(r, c));
      double denom = 0.0, true_logit = 0.0, label_sum = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        denom += std::exp(logits.at(r, c) - mx);
        true_logit += labels.at(r, c) * logits.at(r, c);
        label_sum += labels.at(r, c);
      }
      if (label_sum != 1.0)
        throw ContractError("softmax_xent_mean: row " + std::to_string(r) +
                            " does not have exactly one true class");
      total += mx + std::log(denom) - true_logit;
    }
    return push(OpKind::kSoftmaxXentMean, {input(logits), input(labels)},
                Tensor::scalar(total / static_cast<double>(m)));
  }

  // ---- reverse pass ----

  // Gradients of a scalar loss for every named parameter; parameters the loss
  // does not reach get zeros. The tape is cleared afterwards.
  GradientMap backward(const Tensor& loss, const ParamRefs& params) {
    if (loss.tape_ != this || loss.tape_epoch_ != epoch_ || loss.node_ < 0)
      throw ContractError("backward: loss was not produced on this tape");
    if (loss.numel() != 1)
      throw ContractError("backward: loss must be a scalar, got " +
                          shape_str(loss.shape()));
    std::vector<Tensor> grad(nodes_.size());
    grad[static_cast<std::size_t>(loss.node_)] = Tensor::ones(loss.shape());

    for (std::size_t i = nodes_.size(); i-- > 0;) {
      const Node& n = nodes_[i];
      if (!n.needs_grad || !grad[i].defined()) continue;
      backprop_node(n, grad[i], grad);
    }

    GradientMap out;
    for (const auto& [name, p] : params) {
      if (p->tape_ == this && p->tape_epoch_ == epoch_ && p->node_ >= 0 &&
          grad[static_cast<std::size_t>(p->node_)].defined())
        out.emplace(name, grad[static_cast<std::size_t>(p->node_)]);
      else
        out.emplace(name, Tensor::zeros(p->shape()));
    }
    clear();
    return out;
  }

  void clear() {
    nodes_.clear();
    epoch_ = next_epoch();
  }

 private:
  // Epochs are globally unique so a tensor recorded on a destroyed tape can
  // never be mistaken for a live node when a new tape reuses the address.
  static std::uint64_t next_epoch() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
  }
  enum class OpKind : std::uint8_t {
    kLeaf,
    kMatmul,
    kAdd,
    kSub,
    kHadamard,
    kSigmoid,
    kTanh,
    kElu,
    kLeakyRelu,
    kExp,
    kLog,
    kLogSigmoid,
    kSoftmaxRows,
    kGatherRows,
    kTranspose,
    kConcatCols,
    kSum,
    kScale,
    kDropout,
    kSpmm,
    kGatEdgeScores,
    kEdgeSoftmax,
    kEdgeWeightedSpmm,
    kSoftmaxXentMean,
  };

  struct Node {
    Node() = default;

    OpKind op = OpKind::kLeaf;
    std::vector<int> in;
    Tensor out;
    bool needs_grad = false;
    bool broadcast_b = false;  // ewise: rhs is a row vector over lhs rows
    double scalar = 0.0;       // leaky slope / scale factor / dropout keep
    SparseOp sparse;
    CsrPatternPtr pattern;
    std::shared_ptr<const std::vector<std::size_t>> indices;
    std::shared_ptr<const std::vector<std::uint8_t>> mask;
  };

  static const char* op_name(OpKind k) {
    switch (k) {
      case OpKind::kLeaf: return "leaf";
      case OpKind::kMatmul: return "matmul";
      case OpKind::kAdd: return "add";
      case OpKind::kSub: return "sub";
      case OpKind::kHadamard: return "hadamard";
      case OpKind::kSigmoid: return "sigmoid";
      case OpKind::kTanh: return "tanh";
      case OpKind::kElu: return "elu";
      case OpKind::kLeakyRelu: return "leaky_relu";
      case OpKind::kExp: return "exp";
      case OpKind::kLog: return "log";
      case OpKind::kLogSigmoid: return "logsigmoid";
      case OpKind::kSoftmaxRows: return "softmax_rows";
      case OpKind::kGatherRows: return "gather_rows";
      case OpKind::kTranspose: return "transpose";
      case OpKind::kConcatCols: return "concat_cols";
      case OpKind::kSum: return "sum";
      case OpKind::kScale: return "scale";
      case OpKind::kDropout: return "dropout";
      case OpKind::kSpmm: return "spmm";
      case OpKind::kGatEdgeScores: return "gat_edge_scores";
      case OpKind::kEdgeSoftmax: return "edge_softmax";
      case OpKind::kEdgeWeightedSpmm: return "edge_weighted_spmm";
      case OpKind::kSoftmaxXentMean: return "softmax_xent_mean";
    }
    return "?";
  }

  using EMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  static Eigen::Map<const EMat> emap(const Tensor& t, std::size_t r,
                                     std::size_t c) {
    return {t.data(), static_cast<Eigen::Index>(r),
            static_cast<Eigen::Index>(c)};
  }
  static Eigen::Map<EMat> emap_mut(Tensor& t, std::size_t r, std::size_t c) {
    return {t.data(), static_cast<Eigen::Index>(r),
            static_cast<Eigen::Index>(c)};
  }

  static void require_rank2(const Tensor& t, const char* what) {
    if (t.rank() != 2)
      throw ShapeError(std::string(what) + ": expected a matrix, got " +
                       shape_str(t.shape()));
  }

  static double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

  // Registers t as a leaf if this tape does not know it yet.
  int input(const Tensor& t) { return ensure_input(t); }

  int ensure_input(const Tensor& t) {
    if (!t.defined()) throw ContractError("op input tensor is undefined");
    if (t.tape_ == this && t.tape_epoch_ == epoch_ && t.node_ >= 0)
      return t.node_;
    Node leaf;
    leaf.op = OpKind::kLeaf;
    leaf.out = t;
    leaf.needs_grad = t.requires_grad;
    const int id = static_cast<int>(nodes_.size());
    t.tape_ = this;
    t.tape_epoch_ = epoch_;
    t.node_ = id;
    nodes_.push_back(std::move(leaf));
    return id;
  }

  Tensor push(OpKind op, std::vector<int> in, Tensor out) {
    Node extra;
    return push(op, std::move(in), std::move(out), std::move(extra));
  }

  Tensor push(OpKind op, std::vector<int> in, Tensor out, Node extra) {
    Node n = std::move(extra);
    n.op = op;
    n.in = std::move(in);
    n.needs_grad = false;
    for (int id : n.in)
      if (nodes_[static_cast<std::size_t>(id)].needs_grad) n.needs_grad = true;
    out.requires_grad = n.needs_grad;
    out.tape_ = this;
    out.tape_epoch_ = epoch_;
    out.node_ = static_cast<int>(nodes_.size());
    if (debug::check_finite_enabled() && !out.all_finite())
      throw NumericError(std::string("non-finite values in output of ") +
                         op_name(op));
    n.out = out;
    nodes_.push_back(std::move(n));
    return out;
  }

  static bool row_broadcast_ok(const Tensor& a, const Tensor& b) {
    return a.rank() == 2 && b.rank() == 1 && b.numel() == a.cols();
  }

  Tensor ewise2(OpKind op, const Tensor& a, const Tensor& b) {
    const bool broadcast = row_broadcast_ok(a, b);
    if (!broadcast && !a.same_shape(b))
      throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out(a.shape());
    const std::size_t n = a.cols();
    for (std::size_t i = 0; i < a.numel(); ++i) {
      const double bv = broadcast ? b.at(i % n) : b.at(i);
      switch (op) {
        case OpKind::kAdd: out.at(i) = a.at(i) + bv; break;
        case OpKind::kSub: out.at(i) = a.at(i) - bv; break;
        case OpKind::kHadamard: out.at(i) = a.at(i) * bv; break;
        default: throw ContractError("ewise2: bad op");
      }
    }
    Node node;
    node.broadcast_b = broadcast;
    return push(op, {input(a), input(b)}, std::move(out), std::move(node));
  }

  Tensor unary(OpKind op, const Tensor& x, double slope = 0.0) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double v = x.at(i);
      switch (op) {
        case OpKind::kSigmoid: out.at(i) = stable_sigmoid(v); break;
        case OpKind::kTanh: out.at(i) = std::tanh(v); break;
        case OpKind::kElu: out.at(i) = v > 0.0 ? v : std::expm1(v); break;
        case OpKind::kLeakyRelu: out.at(i) = v > 0.0 ? v : slope * v; break;
        case OpKind::kExp: out.at(i) = std::exp(v); break;
        case OpKind::kLog:
          if (v <= 0.0)
            throw DomainError("log: non-positive entry " + std::to_string(v) +
                              " at index " + std::to_string(i));
          out.at(i) = std::log(v);
          break;
        case OpKind::kLogSigmoid:
          // -softplus(-x), branch picked to keep exp() bounded
          out.at(i) = v >= 0.0 ? -std::log1p(std::exp(-v))
                               : v - std::log1p(std::exp(v));
          break;
        default: throw ContractError("unary: bad op");
      }
    }
    Node node;
    node.scalar = slope;
    return push(op, {input(x)}, std::move(out), std::move(node));
  }

  Tensor* grad_slot(int id, std::vector<Tensor>& grad) {
    if (id < 0) return nullptr;
    const auto u = static_cast<std::size_t>(id);
    if (!nodes_[u].needs_grad) return nullptr;
    if (!grad[u].defined()) grad[u] = Tensor::zeros(nodes_[u].out.shape());
    return &grad[u];
  }

  void backprop_node(const Node& n, const Tensor& g,
                     std::vector<Tensor>& grad) {
    const auto in_val = [&](std::size_t k) -> const Tensor& {
      return nodes_[static_cast<std::size_t>(n.in[k])].out;
    };
    switch (n.op) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatmul: {
        const Tensor& a = in_val(0);
        const Tensor& b = in_val(1);
        const std::size_t m = a.rows(), k = a.cols(), c = b.cols();
        if (Tensor* da = grad_slot(n.in[0], grad))
          emap_mut(*da, m, k).noalias() +=
              emap(g, m, c) * emap(b, k, c).transpose();
        if (Tensor* db = grad_slot(n.in[1], grad))
          emap_mut(*db, k, c).noalias() +=
              emap(a, m, k).transpose() * emap(g, m, c);
        break;
      }
      case OpKind::kAdd:
      case OpKind::kSub:
      case OpKind::kHadamard: {
        const Tensor& a = in_val(0);
        const Tensor& b = in_val(1);
        const double sign = n.op == OpKind::kSub ? -1.0 : 1.0;
        const std::size_t w = a.cols();
        if (Tensor* da = grad_slot(n.in[0], grad)) {
          for (std::size_t i = 0; i < a.numel(); ++i) {
            const double bv = n.broadcast_b ? b.at(i % w) : b.at(i);
            da->at(i) += n.op == OpKind::kHadamard ? g.at(i) * bv : g.at(i);
          }
        }
        if (Tensor* db = grad_slot(n.in[1], grad)) {
          for (std::size_t i = 0; i < a.numel(); ++i) {
            const double contrib =
                n.op == OpKind::kHadamard ? g.at(i) * a.at(i) : sign * g.at(i);
            db->at(n.broadcast_b ? i % w : i) += contrib;
          }
        }
        break;
      }
      case OpKind::kSigmoid: {
        if (Tensor* dx = grad_slot(n.in[0], grad))
          for (std::size_t i = 0; i < g.numel(); ++i) {
            const double y = n.out.at(i);
            dx->at(i) += g.at(i) * y * (1.0 - y);
          }
        break;
      }
      case OpKind::kTanh: {
        if (Tensor* dx = grad_slot(n.in[0], grad))
          for (std::size_t i = 0; i < g.numel(); ++i) {
            const double y = n.out.at(i);
            dx->at(i) += g.at(i) * (1.0 - y * y);
          }
        break;
      }
      case OpKind::kElu: {
        const Tensor& x = in_val(0);
        if (Tensor* dx = grad_slot(n.in[0], grad))
          for (std::size_t i = 0; i < g.numel(); ++i)
            dx->at(i) += g.at(i) * (x.at(i) > 0.0 ? 1.0 : n.out.at(i) + 1.0);
        break;
      }
      case OpKind::kLeakyRelu: {
        const Tensor& x = in_val(0);
        if (Tensor* dx = grad_slot(n.in[0], grad))
          for (std::size_t i = 0; i < g.numel(); ++i)
            dx->at(i) += g.at(i) * (x.at(i) > 0.0 ? 1.0 : n.scalar);
        break;
      }
      case OpKind::kExp: {
        if (Tensor* dx = grad_slot(n.in[0], grad))
          for (std::size_t i = 0; i < g.numel(); ++i)
            dx->at(i) += g.at(i) * n.out.at(i);
        break;
      }
      case OpKind::kLog: {
        const Tensor& x = in_val(0);
        if (Tensor* dx = grad_slot(n.in[0], grad))
          for (std::size_t i = 0; i < g.numel(); ++i)
            dx->at(i) += g.at(i) / x.at(i);
        break;
      }
      case OpKind::kLogSigmoid: {
        const Tensor& x = in_val(0);
        if (Tensor* dx = grad_slot(n.in[0], grad))
          for (std::size_t i = 0; i < g.numel(); ++i)
            dx->at(i) += g.at(i) * stable_sigmoid(-x.at(i));
        break;
      }
      case OpKind::kSoftmaxRows: {
        Tensor* dx = grad_slot(n.in[0], grad);
        if (!dx) break;
        const std::size_t m = n.out.rows(), w = n.out.cols();
        for (std::size_t r = 0; r < m; ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < w; ++c) {
            if (n.mask && !(*n.mask)[r * w + c]) continue;
            dot += g.at(r, c) * n.out.at(r, c);
          }
          for (std::size_t c = 0; c < w; ++c) {
            if (n.mask && !(*n.mask)[r * w + c]) continue;
            dx->at(r, c) += n.out.at(r, c) * (g.at(r, c) - dot);
          }
        }
        break;
      }
      case OpKind::kGatherRows: {
        Tensor* dx = grad_slot(n.in[0], grad);
        if (!dx) break;
        const std::size_t w = n.out.cols();
        for (std::size_t t = 0; t < n.indices->size(); ++t) {
          double* dst = dx->data() + (*n.indices)[t] * w;
          const double* src = g.data() + t * w;
          for (std::size_t c = 0; c < w; ++c) dst[c] += src[c];
        }
        break;
      }
      case OpKind::kTranspose: {
        if (Tensor* dx = grad_slot(n.in[0], grad)) {
          const std::size_t m = n.out.rows(), w = n.out.cols();
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < w; ++c) dx->at(c, r) += g.at(r, c);
        }
        break;
      }
      case OpKind::kConcatCols: {
        const std::size_t m = n.out.rows(), total = n.out.cols();
        std::size_t off = 0;
        for (std::size_t k = 0; k < n.in.size(); ++k) {
          const std::size_t w = in_val(k).cols();
          if (Tensor* dp = grad_slot(n.in[k], grad)) {
            for (std::size_t r = 0; r < m; ++r)
              for (std::size_t c = 0; c < w; ++c)
                dp->at(r, c) += g.data()[r * total + off + c];
          }
          off += w;
        }
        break;
      }
      case OpKind::kSum: {
        if (Tensor* dx = grad_slot(n.in[0], grad)) {
          const double gv = g.at(0);
          for (std::size_t i = 0; i < dx->numel(); ++i) dx->at(i) += gv;
        }
        break;
      }
      case OpKind::kScale: {
        if (Tensor* dx = grad_slot(n.in[0], grad))
          for (std::size_t i = 0; i < g.numel(); ++i)
            dx->at(i) += n.scalar * g.at(i);
        break;
      }
      case OpKind::kDropout: {
        if (Tensor* dx = grad_slot(n.in[0], grad))
          for (std::size_t i = 0; i < g.numel(); ++i)
            if ((*n.mask)[i]) dx->at(i) += g.at(i) / n.scalar;
        break;
      }
      case OpKind::kSpmm: {
        Tensor* dh = grad_slot(n.in[0], grad);
        if (!dh) break;
        const CsrPattern& p = *n.sparse.pattern;
        const std::vector<double>& w = *n.sparse.weights;
        const std::size_t c = n.out.cols();
        for (std::size_t col = 0; col < p.cols; ++col) {
          double* dst = dh->data() + col * c;
          for (std::size_t k = p.t_row_offsets[col]; k < p.t_row_offsets[col + 1];
               ++k) {
            const double wk = w[p.t_perm[k]];
            const double* src = g.data() + p.t_col_indices[k] * c;
            for (std::size_t j = 0; j < c; ++j) dst[j] += wk * src[j];
          }
        }
        break;
      }
      case OpKind::kGatEdgeScores: {
        const CsrPattern& p = *n.pattern;
        const Tensor& zd = in_val(0);
        const Tensor& zs = in_val(1);
        const Tensor& a = in_val(2);
        const std::size_t d = zd.cols();
        std::vector<double> row_sum(p.rows, 0.0), col_sum(p.cols, 0.0);
        for (std::size_t r = 0; r < p.rows; ++r)
          for (std::size_t k = p.row_offsets[r]; k < p.row_offsets[r + 1]; ++k) {
            row_sum[r] += g.at(k);
            col_sum[p.col_indices[k]] += g.at(k);
          }
        if (Tensor* dzd = grad_slot(n.in[0], grad))
          for (std::size_t r = 0; r < p.rows; ++r)
            for (std::size_t t = 0; t < d; ++t)
              dzd->at(r, t) += a.at(t) * row_sum[r];
        if (Tensor* dzs = grad_slot(n.in[1], grad))
          for (std::size_t j = 0; j < p.cols; ++j)
            for (std::size_t t = 0; t < d; ++t)
              dzs->at(j, t) += a.at(d + t) * col_sum[j];
        if (Tensor* da = grad_slot(n.in[2], grad)) {
          for (std::size_t r = 0; r < p.rows; ++r)
            for (std::size_t t = 0; t < d; ++t)
              da->at(t) += row_sum[r] * zd.at(r, t);
          for (std::size_t j = 0; j < p.cols; ++j)
            for (std::size_t t = 0; t < d; ++t)
              da->at(d + t) += col_sum[j] * zs.at(j, t);
        }
        break;
      }
      case OpKind::kEdgeSoftmax: {
        Tensor* de = grad_slot(n.in[0], grad);
        if (!de) break;
        const CsrPattern& p = *n.pattern;
        for (std::size_t r = 0; r < p.rows; ++r) {
          const std::size_t lo = p.row_offsets[r], hi = p.row_offsets[r + 1];
          double dot = 0.0;
          for (std::size_t k = lo; k < hi; ++k) dot += g.at(k) * n.out.at(k);
          for (std::size_t k = lo; k < hi; ++k)
            de->at(k) += n.out.at(k) * (g.at(k) - dot);
        }
        break;
      }
      case OpKind::kEdgeWeightedSpmm: {
        const CsrPattern& p = *n.pattern;
        const Tensor& alpha = in_val(0);
        const Tensor& z = in_val(1);
        const std::size_t c = z.cols();
        if (Tensor* dalpha = grad_slot(n.in[0], grad)) {
          for (std::size_t r = 0; r < p.rows; ++r)
            for (std::size_t k = p.row_offsets[r]; k < p.row_offsets[r + 1];
                 ++k) {
              const double* gi = g.data() + r * c;
              const double* zj = z.data() + p.col_indices[k] * c;
              double dot = 0.0;
              for (std::size_t j = 0; j < c; ++j) dot += gi[j] * zj[j];
              dalpha->at(k) += dot;
            }
        }
        if (Tensor* dz = grad_slot(n.in[1], grad)) {
          for (std::size_t col = 0; col < p.cols; ++col) {
            double* dst = dz->data() + col * c;
            for (std::size_t k = p.t_row_offsets[col];
                 k < p.t_row_offsets[col + 1]; ++k) {
              const double w = alpha.at(p.t_perm[k]);
              const double* src = g.data() + p.t_col_indices[k] * c;
              for (std::size_t j = 0; j < c; ++j) dst[j] += w * src[j];
            }
          }
        }
        break;
      }
      case OpKind::kSoftmaxXentMean: {
        const Tensor& x = in_val(0);
        const Tensor& y = in_val(1);
        const std::size_t m = x.rows(), w = x.cols();
        const double gv = g.at(0) / static_cast<double>(m);
        if (Tensor* dx = grad_slot(n.in[0], grad)) {
          for (std::size_t r = 0; r < m; ++r) {
            double mx = x.at(r, 0);
            for (std::size_t c = 1; c < w; ++c) mx = std::max(mx, x.at(r, c));
            double denom = 0.0;
            for (std::size_t c = 0; c < w; ++c)
              denom += std::exp(x.at(r, c) - mx);
            for (std::size_t c = 0; c < w; ++c)
              dx->at(r, c) +=
                  gv * (std::exp(x.at(r, c) - mx) / denom - y.at(r, c));
          }
        }
        if (Tensor* dy = grad_slot(n.in[1], grad))
          for (std::size_t i = 0; i < y.numel(); ++i)
            dy->at(i) += -gv * x.at(i);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::uint64_t epoch_ = 0;
};

}  // namespace rgnn
