#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rgnn/errors.hpp"
#include "rgnn/eval.hpp"
#include "rgnn/graph.hpp"
#include "rgnn/labels.hpp"
#include "rgnn/optimizer.hpp"
#include "rgnn/rng.hpp"
#include "rgnn/tape.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

// Sigmoid cross entropy averaged over nodes and classes, in the stable
// log-sigmoid form: -1/(N|Y|) sum [ y logsig(o) + (1-y) logsig(-o) ].
// (The multi-label objective is stated as a log-likelihood to maximize; this
// is its negation, so the trainer always minimizes.)
inline Tensor multilabel_loss(Tape& tape, const Tensor& logits,
                              const LabelMatrix& labels) {
  if (labels.kind != LabelKind::kMultilabel)
    throw ContractError("multilabel_loss: labels are not multilabel");
  if (!logits.same_shape(labels.values))
    throw ShapeError("multilabel_loss: logits " + shape_str(logits.shape()) +
                     " vs labels " + shape_str(labels.values.shape()));
  Tensor y = labels.values.detached();
  Tensor y_comp(y.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y_comp.at(i) = 1.0 - y.at(i);
  Tensor pos = tape.hadamard(tape.logsigmoid(logits), y);
  Tensor neg = tape.hadamard(tape.logsigmoid(tape.scale(logits, -1.0)), y_comp);
  return tape.scale(tape.sum(tape.add(pos, neg)),
                    -1.0 / static_cast<double>(logits.numel()));
}

// Cross entropy after softmax, mean over nodes, log-sum-exp stabilized.
inline Tensor multiclass_loss(Tape& tape, const Tensor& logits,
                              const LabelMatrix& labels) {
  if (labels.kind != LabelKind::kMulticlass)
    throw ContractError("multiclass_loss: labels are not multiclass");
  return tape.softmax_xent_mean(logits, labels.values.detached());
}

inline Tensor supervised_loss(Tape& tape, const Tensor& logits,
                              const LabelMatrix& labels) {
  return labels.kind == LabelKind::kMulticlass
             ? multiclass_loss(tape, logits, labels)
             : multilabel_loss(tape, logits, labels);
}

struct NegativeSampleConfig {
  std::size_t negatives = 10;  // K

  void validate() const {
    if (negatives == 0)
      throw ConfigError("negative sampling: K must be >= 1");
  }
};

// One shared set of K negatives per batch; every pair in the batch contrasts
// against the same set. Uniform over all nodes, with replacement, no
// exclusion of sources or true contexts.
struct NegativeSamples {
  std::size_t num_pairs = 0;
  std::vector<std::size_t> shared;  // K node ids

  // Row view of the conceptual num_pairs x K matrix: all rows identical.
  const std::vector<std::size_t>& row(std::size_t) const { return shared; }
};

inline NegativeSamples sample_negatives(const NegativeSampleConfig& cfg,
                                        std::size_t num_pairs,
                                        std::size_t num_nodes,
                                        RngStream& rng) {
  cfg.validate();
  if (num_nodes == 0)
    throw ContractError("sample_negatives: num_nodes must be >= 1");
  NegativeSamples out;
  out.num_pairs = num_pairs;
  out.shared.reserve(cfg.negatives);
  for (std::size_t k = 0; k < cfg.negatives; ++k)
    out.shared.push_back(rng.below(num_nodes));
  return out;
}

// Skip-gram-with-negative-sampling loss over walk pairs:
// -mean over pairs of [ logsig(h_j . h_i) + sum_k logsig(-h_k . h_i) ].
inline Tensor unsup_loss(Tape& tape, const Tensor& h, const WalkPairs& pairs,
                         const NegativeSamples& negs) {
  if (pairs.empty()) throw ContractError("unsup_loss: no walk pairs");
  std::vector<std::size_t> src, ctx;
  src.reserve(pairs.size());
  ctx.reserve(pairs.size());
  for (const auto& [i, j] : pairs.pairs) {
    if (i >= h.rows() || j >= h.rows())
      throw IndexError("unsup_loss: pair node id out of range");
    src.push_back(i);
    ctx.push_back(j);
  }
  for (std::size_t k : negs.shared)
    if (k >= h.rows())
      throw IndexError("unsup_loss: negative node id out of range");

  Tensor hs = tape.gather_rows(h, src);                       // P x C
  Tensor hc = tape.gather_rows(h, ctx);                       // P x C
  Tensor ones_col = Tensor::ones({h.cols(), 1});
  Tensor pos_scores = tape.matmul(tape.hadamard(hs, hc), ones_col);  // P x 1
  Tensor pos_term = tape.sum(tape.logsigmoid(pos_scores));

  Tensor hn = tape.gather_rows(h, negs.shared);               // K x C
  Tensor neg_scores = tape.matmul(hs, tape.transpose(hn));    // P x K
  Tensor neg_term =
      tape.sum(tape.logsigmoid(tape.scale(neg_scores, -1.0)));

  return tape.scale(tape.add(pos_term, neg_term),
                    -1.0 / static_cast<double>(pairs.size()));
}

// ---- downstream linear probe ----

struct ProbeResult {
  Tensor w, b;
  double test_f1 = 0.0;
  double final_train_loss = 0.0;
};

// Logistic-regression probe on frozen embeddings: full-batch Adam, sigmoid
// per class for multilabel, softmax for multiclass. The fixed recipe
// (200 epochs, lr 0.01) keeps the reported metric reproducible.
inline ProbeResult train_linear_probe(const Tensor& embeddings,
                                      const LabelMatrix& labels,
                                      const std::vector<std::size_t>& train_ids,
                                      const std::vector<std::size_t>& test_ids,
                                      std::size_t epochs = 200,
                                      double lr = 0.01,
                                      std::uint64_t seed = 7) {
  if (embeddings.rank() != 2 || embeddings.cols() == 0)
    throw ContractError("train_linear_probe: embeddings must be N x C, C >= 1");
  if (train_ids.empty())
    throw ContractError("train_linear_probe: empty train split");
  if (test_ids.empty())
    throw ContractError("train_linear_probe: empty test split");

  const std::size_t c = embeddings.cols(), y = labels.num_classes();
  const auto take = [&](const std::vector<std::size_t>& ids) {
    Tensor out({ids.size(), c});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] >= embeddings.rows())
        throw IndexError("train_linear_probe: id out of range");
      for (std::size_t j = 0; j < c; ++j)
        out.at(i, j) = embeddings.at(ids[i], j);
    }
    return out;
  };
  Tensor train_x = take(train_ids);
  Tensor test_x = take(test_ids);
  LabelMatrix train_y = labels.select(train_ids);
  LabelMatrix test_y = labels.select(test_ids);

  RngStream rng = RngStream::derived(seed, 0x960beu);
  ProbeResult res;
  res.w = Tensor::glorot(c, y, rng);
  res.w.requires_grad = true;
  res.b = Tensor::zeros({y});
  res.b.requires_grad = true;

  ParamRefs params{{"probe.w", &res.w}, {"probe.b", &res.b}};
  AdamState adam(params, AdamConfig{});
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Tape tape;
    Tensor logits = tape.add(tape.matmul(train_x, res.w), res.b);
    Tensor loss = supervised_loss(tape, logits, train_y);
    res.final_train_loss = loss.value();
    GradientMap grads = tape.backward(loss, params);
    adam_step(params, grads, adam, lr);
  }

  Tape tape;
  Tensor logits = tape.add(tape.matmul(test_x, res.w), res.b);
  res.test_f1 = micro_f1(logits, test_y);
  return res;
}

}  // namespace rgnn
