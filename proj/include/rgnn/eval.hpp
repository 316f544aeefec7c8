#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "rgnn/errors.hpp"
#include "rgnn/labels.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

// Decision counts pooled over every (node, class) cell.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Multilabel: predict class j iff sigmoid(logit) > 0.5, i.e. logit > 0
// (a tie at exactly 0.5 counts as negative). Multiclass: argmax per row,
// lowest index on ties.
inline ConfusionCounts confusion_counts(const Tensor& logits,
                                        const LabelMatrix& labels) {
  if (!logits.same_shape(labels.values))
    throw ShapeError("confusion_counts: logits " + shape_str(logits.shape()) +
                     " vs labels " + shape_str(labels.values.shape()));
  ConfusionCounts out;
  const std::size_t m = logits.rows(), n = logits.cols();
  for (std::size_t r = 0; r < m; ++r) {
    std::size_t argmax = 0;
    if (labels.kind == LabelKind::kMulticlass) {
      for (std::size_t c = 1; c < n; ++c)
        if (logits.at(r, c) > logits.at(r, argmax)) argmax = c;
    }
    for (std::size_t c = 0; c < n; ++c) {
      const bool pred = labels.kind == LabelKind::kMulticlass
                            ? c == argmax
                            : logits.at(r, c) > 0.0;
      const bool truth = labels.values.at(r, c) != 0.0;
      if (pred && truth) ++out.tp;
      else if (pred && !truth) ++out.fp;
      else if (!pred && truth) ++out.fn;
    }
  }
  return out;
}

inline double micro_f1(const ConfusionCounts& c) {
  // no positives and no predictions: vacuously perfect
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) /
         static_cast<double>(2 * c.tp + c.fp + c.fn);
}

inline double micro_f1(const Tensor& logits, const LabelMatrix& labels) {
  return micro_f1(confusion_counts(logits, labels));
}

// Debug dump only; the reported metric is always the pooled micro form.
inline std::vector<ConfusionCounts> per_class_counts(
    const Tensor& logits, const LabelMatrix& labels) {
  std::vector<ConfusionCounts> out(logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t argmax = 0;
    if (labels.kind == LabelKind::kMulticlass)
      for (std::size_t c = 1; c < logits.cols(); ++c)
        if (logits.at(r, c) > logits.at(r, argmax)) argmax = c;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      const bool pred = labels.kind == LabelKind::kMulticlass
                            ? c == argmax
                            : logits.at(r, c) > 0.0;
      const bool truth = labels.values.at(r, c) != 0.0;
      if (pred && truth) ++out[c].tp;
      else if (pred && !truth) ++out[c].fp;
      else if (!pred && truth) ++out[c].fn;
    }
  }
  return out;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Sample mean and (n-1)-denominator standard deviation; std is 0 for a
// single run.
inline MeanStd aggregate_runs(const std::vector<double>& values) {
  if (values.empty()) throw ContractError("aggregate_runs: no runs");
  MeanStd out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace rgnn
