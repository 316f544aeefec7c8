#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "rgnn/eval.hpp"

using namespace rgnn;
using Catch::Approx;

namespace {

LabelMatrix labels_of(LabelKind kind, std::size_t n, std::size_t y,
                      std::vector<double> vals) {
  LabelMatrix lm;
  lm.kind = kind;
  lm.values = Tensor::matrix(n, y, std::move(vals));
  return lm;
}

}  // namespace

TEST_CASE("micro f1 trivial outcomes") {
  LabelMatrix lm = labels_of(LabelKind::kMultilabel, 2, 2, {1, 0, 0, 1});
  // perfect predictions
  Tensor good = Tensor::matrix(2, 2, {5, -5, -5, 5});
  REQUIRE(micro_f1(good, lm) == 1.0);
  // nothing predicted although positives exist
  Tensor none = Tensor::matrix(2, 2, {-5, -5, -5, -5});
  REQUIRE(micro_f1(none, lm) == 0.0);
  // no positives, no predictions: vacuously 1.0
  LabelMatrix empty = labels_of(LabelKind::kMultilabel, 1, 2, {0, 0});
  REQUIRE(micro_f1(Tensor::matrix(1, 2, {-1, -1}), empty) == 1.0);
  // a tie at logit 0 (sigmoid exactly 0.5) counts as negative
  LabelMatrix pos = labels_of(LabelKind::kMultilabel, 1, 1, {1});
  REQUIRE(micro_f1(Tensor::matrix(1, 1, {0}), pos) == 0.0);
  REQUIRE_THROWS_AS(micro_f1(Tensor::matrix(2, 3, {0, 0, 0, 0, 0, 0}), lm),
                    ShapeError);
}

TEST_CASE("micro f1 from hand-enumerated confusion counts") {
  // 3 nodes x 2 labels with tp=2, fp=1, fn=1 -> 2*2/(4+1+1) = 2/3
  LabelMatrix lm = labels_of(LabelKind::kMultilabel, 3, 2,
                             {1, 0,
                              1, 1,
                              0, 0});
  Tensor logits = Tensor::matrix(3, 2,
                                 {4, -4,    // tp, tn
                                  4, -4,    // tp, fn
                                  4, -4});  // fp, tn
  ConfusionCounts c = confusion_counts(logits, lm);
  REQUIRE(c.tp == 2);
  REQUIRE(c.fp == 1);
  REQUIRE(c.fn == 1);
  REQUIRE(micro_f1(c) == Approx(2.0 / 3.0));
}

TEST_CASE("multiclass micro f1 equals accuracy") {
  RngStream rng(50);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 30, y = 4;
    Tensor logits = oracle::random_tensor(n, y, rng);
    std::vector<double> vals(n * y, 0.0);
    for (std::size_t r = 0; r < n; ++r) vals[r * y + rng.below(y)] = 1.0;
    LabelMatrix lm = labels_of(LabelKind::kMulticlass, n, y, vals);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < n; ++r) {
      std::size_t am = 0;
      for (std::size_t c = 1; c < y; ++c)
        if (logits.at(r, c) > logits.at(r, am)) am = c;
      if (lm.values.at(r, am) == 1.0) ++correct;
    }
    REQUIRE(micro_f1(logits, lm) ==
            Approx(static_cast<double>(correct) / n));
  }
}

TEST_CASE("micro f1 is invariant to node permutation") {
  RngStream rng(51);
  const std::size_t n = 20, y = 3;
  Tensor logits = oracle::random_tensor(n, y, rng);
  std::vector<double> vals(n * y, 0.0);
  for (std::size_t r = 0; r < n; ++r) vals[r * y + rng.below(y)] = 1.0;
  LabelMatrix lm = labels_of(LabelKind::kMulticlass, n, y, vals);
  const double base = micro_f1(logits, lm);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i-- > 1;) std::swap(perm[i], perm[rng.below(i + 1)]);
  Tensor logits_p(logits.shape());
  LabelMatrix lm_p;
  lm_p.kind = lm.kind;
  lm_p.values = Tensor(lm.values.shape());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < y; ++c) {
      logits_p.at(perm[r], c) = logits.at(r, c);
      lm_p.values.at(perm[r], c) = lm.values.at(r, c);
    }
  REQUIRE(micro_f1(logits_p, lm_p) == base);
}

TEST_CASE("per-class debug counts pool back to the micro numbers") {
  LabelMatrix lm = labels_of(LabelKind::kMultilabel, 3, 2,
                             {1, 0, 1, 1, 0, 0});
  Tensor logits = Tensor::matrix(3, 2, {4, -4, 4, -4, 4, -4});
  const auto per_class = per_class_counts(logits, lm);
  REQUIRE(per_class.size() == 2);
  ConfusionCounts pooled;
  for (const auto& c : per_class) {
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
  }
  const ConfusionCounts micro = confusion_counts(logits, lm);
  REQUIRE(pooled.tp == micro.tp);
  REQUIRE(pooled.fp == micro.fp);
  REQUIRE(pooled.fn == micro.fn);
}

TEST_CASE("aggregate_runs mean and sample standard deviation") {
  REQUIRE(aggregate_runs({0.7}).mean == Approx(0.7));
  REQUIRE(aggregate_runs({0.7}).std == 0.0);
  MeanStd flat = aggregate_runs({0.9, 0.9, 0.9});
  REQUIRE(flat.mean == Approx(0.9));
  REQUIRE(flat.std == Approx(0.0).margin(1e-15));
  MeanStd pair = aggregate_runs({0.8, 1.0});
  REQUIRE(pair.mean == Approx(0.9));
  REQUIRE(pair.std == Approx(0.1414213562373095).epsilon(1e-6));
  REQUIRE_THROWS_AS(aggregate_runs({}), ContractError);
}
