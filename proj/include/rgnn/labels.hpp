#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "rgnn/errors.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

enum class LabelKind { kMulticlass, kMultilabel };

// N x |Y| matrix of {0,1}. Multiclass rows carry exactly one 1; multilabel
// rows any number.
struct LabelMatrix {
  LabelKind kind = LabelKind::kMulticlass;
  Tensor values;

  std::size_t num_nodes() const { return values.rows(); }
  std::size_t num_classes() const { return values.cols(); }

  void validate() const {
    if (values.rank() != 2)
      throw ContractError("LabelMatrix: values must be a matrix");
    for (std::size_t r = 0; r < values.rows(); ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < values.cols(); ++c) {
        const double v = values.at(r, c);
        if (v != 0.0 && v != 1.0)
          throw ContractError("LabelMatrix: entry (" + std::to_string(r) +
                              "," + std::to_string(c) + ") is not 0/1");
        sum += v;
      }
      if (kind == LabelKind::kMulticlass && sum != 1.0)
        throw ContractError("LabelMatrix: multiclass row " +
                            std::to_string(r) +
                            " does not have exactly one label");
    }
  }

  // Rows selected by node ids, as a fresh label matrix.
  LabelMatrix select(const std::vector<std::size_t>& ids) const {
    LabelMatrix out;
    out.kind = kind;
    out.values = Tensor({ids.size(), values.cols()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] >= values.rows())
        throw IndexError("LabelMatrix::select: id " + std::to_string(ids[i]) +
                         " out of range");
      for (std::size_t c = 0; c < values.cols(); ++c)
        out.values.at(i, c) = values.at(ids[i], c);
    }
    return out;
  }
};

inline const char* label_kind_name(LabelKind k) {
  return k == LabelKind::kMulticlass ? "multiclass" : "multilabel";
}

inline LabelKind label_kind_from(const std::string& s) {
  if (s == "multiclass") return LabelKind::kMulticlass;
  if (s == "multilabel") return LabelKind::kMultilabel;
  throw ConfigError("unknown label kind: " + s);
}

}  // namespace rgnn
