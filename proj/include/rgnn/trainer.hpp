#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgnn/data.hpp"
#include "rgnn/errors.hpp"
#include "rgnn/eval.hpp"
#include "rgnn/model.hpp"
#include "rgnn/objectives.hpp"
#include "rgnn/optimizer.hpp"
#include "rgnn/rng.hpp"

namespace rgnn {

enum class Task { kSupervised, kUnsupervised };

// One flat record of every knob of a run; serializes to the flat JSON config
// the CLI consumes and echoes.
struct ExperimentConfig {
  std::string dataset_dir;
  Task task = Task::kSupervised;

  std::string model = "gcn";  // variant name, see parse_variant
  std::size_t layers = 2;     // M
  std::size_t hidden = 16;
  std::size_t heads = 1;
  double dropout = 0.0;
  double leaky_slope = 0.2;
  std::string cell_sharing = "shared";
  std::string gat_head_activation = "sigmoid";

  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 0.0;
  std::size_t epochs = 200;
  std::size_t patience = 30;

  bool batched = false;
  std::size_t batch_size = 128;
  std::vector<std::size_t> sample_sizes;

  std::size_t walk_length = 2;
  std::size_t negatives = 10;

  std::uint64_t seed = 1;

  void validate() const {
    parse_variant(model);  // throws ConfigError on bad names
    if (hidden == 0) throw ConfigError("config: hidden must be > 0");
    if (heads == 0) throw ConfigError("config: heads must be > 0");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("config: dropout must be in [0,1)");
    if (lr < 0.0) throw ConfigError("config: lr must be >= 0");
    if (epochs == 0) throw ConfigError("config: epochs must be > 0");
    if (batched) {
      if (batch_size == 0) throw ConfigError("config: batch_size must be > 0");
      // unsupervised batching chunks walk sources; only the supervised
      // hierarchy needs per-layer sample sizes
      if (task == Task::kSupervised && sample_sizes.size() != layers)
        throw ConfigError("config: batched training needs exactly " +
                          std::to_string(layers) +
                          " sample_sizes (one per layer), got " +
                          std::to_string(sample_sizes.size()));
      for (std::size_t s : sample_sizes)
        if (s == 0) throw ConfigError("config: sample_sizes must be >= 1");
    }
    if (task == Task::kUnsupervised) {
      if (walk_length == 0)
        throw ConfigError("config: walk_length must be >= 1");
      if (negatives == 0) throw ConfigError("config: negatives must be >= 1");
    }
  }

  ModelConfig model_config(std::size_t in_features,
                           std::size_t num_classes) const {
    ModelConfig mc;
    const auto [base, comb] = parse_variant(model);
    mc.base = base;
    mc.combinator = comb;
    mc.depth = layers;
    mc.in_features = in_features;
    mc.hidden = hidden;
    mc.num_classes = num_classes;
    mc.heads = heads;
    mc.dropout = dropout;
    mc.leaky_slope = leaky_slope;
    mc.gat_head_activation = gat_head_activation == "elu"
                                 ? HeadActivation::kElu
                                 : HeadActivation::kSigmoid;
    mc.cell_sharing = cell_sharing == "per_layer" ? CellSharing::kPerLayer
                                                  : CellSharing::kShared;
    return mc;
  }

  AdamConfig adam_config() const { return {lr, beta1, beta2, eps}; }

  nlohmann::json to_json() const {
    return {{"dataset", dataset_dir},
            {"task", task == Task::kSupervised ? "supervised" : "unsupervised"},
            {"model", model},
            {"layers", layers},
            {"hidden", hidden},
            {"heads", heads},
            {"dropout", dropout},
            {"leaky_slope", leaky_slope},
            {"cell_sharing", cell_sharing},
            {"gat_head_activation", gat_head_activation},
            {"lr", lr},
            {"beta1", beta1},
            {"beta2", beta2},
            {"eps", eps},
            {"grad_clip", grad_clip},
            {"epochs", epochs},
            {"patience", patience},
            {"batched", batched},
            {"batch_size", batch_size},
            {"sample_sizes", sample_sizes},
            {"walk_length", walk_length},
            {"negatives", negatives},
            {"seed", seed}};
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
      c.dataset_dir = j.value("dataset", c.dataset_dir);
      if (j.contains("task")) {
        const std::string t = j.at("task").get<std::string>();
        if (t == "supervised") c.task = Task::kSupervised;
        else if (t == "unsupervised") c.task = Task::kUnsupervised;
        else throw ConfigError("config: unknown task '" + t + "'");
      }
      c.model = j.value("model", c.model);
      c.layers = j.value("layers", c.layers);
      c.hidden = j.value("hidden", c.hidden);
      c.heads = j.value("heads", c.heads);
      c.dropout = j.value("dropout", c.dropout);
      c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
      c.cell_sharing = j.value("cell_sharing", c.cell_sharing);
      c.gat_head_activation =
          j.value("gat_head_activation", c.gat_head_activation);
      c.lr = j.value("lr", c.lr);
      c.beta1 = j.value("beta1", c.beta1);
      c.beta2 = j.value("beta2", c.beta2);
      c.eps = j.value("eps", c.eps);
      c.grad_clip = j.value("grad_clip", c.grad_clip);
      c.epochs = j.value("epochs", c.epochs);
      c.patience = j.value("patience", c.patience);
      c.batched = j.value("batched", c.batched);
      c.batch_size = j.value("batch_size", c.batch_size);
      c.sample_sizes = j.value("sample_sizes", c.sample_sizes);
      c.walk_length = j.value("walk_length", c.walk_length);
      c.negatives = j.value("negatives", c.negatives);
      c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config: " + std::string(e.what()));
    }
    return c;
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_f1;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_f1 = 0.0;
  double test_f1 = 0.0;
  double wall_seconds = 0.0;
  std::size_t parameter_count = 0;
  // Unsupervised runs also carry the final embeddings, one tensor per graph.
  std::vector<Tensor> embeddings;
};

namespace detail {

inline void check_finite_loss(double loss, std::size_t epoch) {
  if (!std::isfinite(loss))
    throw NumericError("training loss is not finite at epoch " +
                       std::to_string(epoch));
}

}  // namespace detail

// Full-graph supervised training with validation-based model selection.
// Multi-graph corpora (split ids are graph ids, every node labeled) take one
// optimizer step per train graph per epoch, in shuffled order. On return the
// model holds the best-validation parameters and test_f1 was computed from
// them.
inline TrainResult train_supervised_full(RgnnModel& model,
                                         const DatasetBundle& data,
                                         const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  data.validate();
  if (data.split.train.empty())
    throw ContractError("train_supervised_full: empty train split");

  std::vector<GraphOps> ops;
  ops.reserve(data.num_graphs());
  for (const auto& g : data.graphs) ops.push_back(GraphOps::build(g));

  RngStream dropout_rng = RngStream::derived(cfg.seed, 0xd309u);
  RngStream shuffle_rng = RngStream::derived(cfg.seed, 0x5a55u);
  RngStream eval_rng = RngStream::derived(cfg.seed, 0xe7a1u);

  ParamRefs params = model.params();
  AdamState adam(params, cfg.adam_config());

  const bool multi = data.multigraph();
  // Pre-selected train labels for the single-graph case.
  LabelMatrix train_labels;
  if (!multi) train_labels = data.labels[0].select(data.split.train);

  const auto evaluate = [&](const std::vector<std::size_t>& ids) -> double {
    if (ids.empty()) return 0.0;
    if (!multi) {
      Tape tape;
      Tensor h = model.forward_full(tape, ops[0], data.features[0],
                                    /*train=*/false, eval_rng);
      Tensor sel = tape.gather_rows(model.predict(tape, h), ids);
      return micro_f1(sel, data.labels[0].select(ids));
    }
    ConfusionCounts pooled;
    for (std::size_t gid : ids) {
      Tape tape;
      Tensor h = model.forward_full(tape, ops[gid], data.features[gid],
                                    /*train=*/false, eval_rng);
      const ConfusionCounts c =
          confusion_counts(model.predict(tape, h), data.labels[gid]);
      pooled.tp += c.tp;
      pooled.fp += c.fp;
      pooled.fn += c.fn;
    }
    return micro_f1(pooled);
  };

  TrainResult res;
  res.parameter_count = model.parameter_count();
  std::vector<double> best_snapshot = model.snapshot();
  bool has_best = false;
  // no validation split: no selection signal, keep the final parameters and
  // run the full epoch budget
  const bool has_val = !data.split.val.empty();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double train_loss = 0.0;
    if (!multi) {
      Tape tape;
      Tensor h = model.forward_full(tape, ops[0], data.features[0],
                                    /*train=*/true, dropout_rng);
      Tensor sel = tape.gather_rows(model.predict(tape, h), data.split.train);
      Tensor loss = supervised_loss(tape, sel, train_labels);
      train_loss = loss.value();
      detail::check_finite_loss(train_loss, epoch);
      GradientMap grads = tape.backward(loss, params);
      clip_grad_norm(grads, cfg.grad_clip);
      adam_step(params, grads, adam, cfg.lr);
    } else {
      std::vector<std::size_t> order = data.split.train;
      for (std::size_t i = order.size(); i-- > 1;)
        std::swap(order[i], order[shuffle_rng.below(i + 1)]);
      for (std::size_t gid : order) {
        Tape tape;
        Tensor h = model.forward_full(tape, ops[gid], data.features[gid],
                                      /*train=*/true, dropout_rng);
        Tensor loss =
            supervised_loss(tape, model.predict(tape, h), data.labels[gid]);
        train_loss += loss.value();
        detail::check_finite_loss(loss.value(), epoch);
        GradientMap grads = tape.backward(loss, params);
        clip_grad_norm(grads, cfg.grad_clip);
        adam_step(params, grads, adam, cfg.lr);
      }
      train_loss /= static_cast<double>(order.size());
    }

    if (has_val) {
      const double val_f1 = evaluate(data.split.val);
      res.history.push_back({epoch, train_loss, val_f1});
      if (!has_best || val_f1 > res.best_val_f1) {
        has_best = true;
        res.best_val_f1 = val_f1;
        res.best_epoch = epoch;
        best_snapshot = model.snapshot();
      }
      if (epoch - res.best_epoch >= cfg.patience) break;
    } else {
      res.history.push_back({epoch, train_loss, std::nullopt});
      res.best_epoch = epoch;
      best_snapshot = model.snapshot();
    }
  }

  model.restore(best_snapshot);
  res.test_f1 = evaluate(data.split.test);
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

// Mini-batch supervised training over sampled hierarchies (single-graph).
// Evaluation stays exact via forward_full.
inline TrainResult train_supervised_batched(RgnnModel& model,
                                            const DatasetBundle& data,
                                            const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  data.validate();
  if (!cfg.batched)
    throw ContractError("train_supervised_batched: cfg.batched is not set");
  cfg.validate();
  if (data.multigraph())
    throw ContractError(
        "train_supervised_batched: multi-graph corpora train full-graph, "
        "one step per graph");
  if (data.split.train.empty())
    throw ContractError("train_supervised_batched: empty train split");

  const CsrGraph& g = data.graphs[0];
  const Tensor& x = data.features[0];
  GraphOps ops = GraphOps::build(g);

  RngStream dropout_rng = RngStream::derived(cfg.seed, 0xd309u);
  RngStream shuffle_rng = RngStream::derived(cfg.seed, 0x5a55u);
  RngStream sample_rng = RngStream::derived(cfg.seed, 0x5a3fu);
  RngStream eval_rng = RngStream::derived(cfg.seed, 0xe7a1u);

  ParamRefs params = model.params();
  AdamState adam(params, cfg.adam_config());

  const auto evaluate = [&](const std::vector<std::size_t>& ids) -> double {
    if (ids.empty()) return 0.0;
    Tape tape;
    Tensor h = model.forward_full(tape, ops, x, /*train=*/false, eval_rng);
    Tensor sel = tape.gather_rows(model.predict(tape, h), ids);
    return micro_f1(sel, data.labels[0].select(ids));
  };

  TrainResult res;
  res.parameter_count = model.parameter_count();
  std::vector<double> best_snapshot = model.snapshot();
  bool has_best = false;
  const bool has_val = !data.split.val.empty();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = data.split.train;
    for (std::size_t i = order.size(); i-- > 1;)
      std::swap(order[i], order[shuffle_rng.below(i + 1)]);

    double train_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      const std::vector<std::size_t> batch(order.begin() + start,
                                           order.begin() + end);
      BatchHierarchy hier =
          build_batch_hierarchy(g, batch, cfg.sample_sizes, sample_rng);
      const auto& bottom = hier.levels.back();
      Tensor x_bottom({bottom.size(), x.cols()});
      for (std::size_t i = 0; i < bottom.size(); ++i)
        for (std::size_t c = 0; c < x.cols(); ++c)
          x_bottom.at(i, c) = x.at(bottom[i], c);

      Tape tape;
      Tensor h = model.forward_batched(tape, ops, hier, x_bottom,
                                       /*train=*/true, dropout_rng);
      Tensor loss = supervised_loss(tape, model.predict(tape, h),
                                    data.labels[0].select(batch));
      train_loss += loss.value();
      detail::check_finite_loss(loss.value(), epoch);
      GradientMap grads = tape.backward(loss, params);
      clip_grad_norm(grads, cfg.grad_clip);
      adam_step(params, grads, adam, cfg.lr);
      ++batches;
    }
    train_loss /= static_cast<double>(batches);

    if (has_val) {
      const double val_f1 = evaluate(data.split.val);
      res.history.push_back({epoch, train_loss, val_f1});
      if (!has_best || val_f1 > res.best_val_f1) {
        has_best = true;
        res.best_val_f1 = val_f1;
        res.best_epoch = epoch;
        best_snapshot = model.snapshot();
      }
      if (epoch - res.best_epoch >= cfg.patience) break;
    } else {
      res.history.push_back({epoch, train_loss, std::nullopt});
      res.best_epoch = epoch;
      best_snapshot = model.snapshot();
    }
  }

  model.restore(best_snapshot);
  res.test_f1 = evaluate(data.split.test);
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

// Unsupervised training: per epoch, walks from every node generate
// (source, context) pairs and the skip-gram loss contrasts them against one
// negative set shared by the whole batch. With cfg.batched the walk sources
// are chunked into batches of batch_size, each with its own shared negatives
// and optimizer step; otherwise all of a graph's nodes form one batch. Runs
// for the configured epoch budget (there is no validation signal), then the
// final embeddings are scored with the downstream linear probe on the
// train/test splits.
inline TrainResult train_unsupervised(RgnnModel& model,
                                      const DatasetBundle& data,
                                      const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  data.validate();
  if (cfg.task != Task::kUnsupervised)
    throw ContractError("train_unsupervised: cfg.task is not unsupervised");
  std::size_t total_edges = 0;
  for (const auto& g : data.graphs) total_edges += g.num_edges();
  if (total_edges == 0)
    throw ContractError("train_unsupervised: graph has no edges, no walk pairs");

  std::vector<GraphOps> ops;
  for (const auto& g : data.graphs) ops.push_back(GraphOps::build(g));
  // Train graphs for multi-graph corpora; the single graph otherwise.
  std::vector<std::size_t> train_graphs;
  if (data.multigraph()) train_graphs = data.split.train;
  else train_graphs.push_back(0);

  RngStream dropout_rng = RngStream::derived(cfg.seed, 0xd309u);
  RngStream shuffle_rng = RngStream::derived(cfg.seed, 0x5a55u);
  RngStream walk_rng = RngStream::derived(cfg.seed, 0x3a1cu);
  RngStream neg_rng = RngStream::derived(cfg.seed, 0x6e65u);
  RngStream eval_rng = RngStream::derived(cfg.seed, 0xe7a1u);

  ParamRefs params = model.params();
  AdamState adam(params, cfg.adam_config());
  NegativeSampleConfig neg_cfg{cfg.negatives};

  TrainResult res;
  res.parameter_count = model.parameter_count();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::size_t steps = 0;
    for (std::size_t gid : train_graphs) {
      const CsrGraph& g = data.graphs[gid];
      std::vector<std::size_t> starts(g.num_nodes);
      std::iota(starts.begin(), starts.end(), 0);
      if (cfg.batched) {
        for (std::size_t i = starts.size(); i-- > 1;)
          std::swap(starts[i], starts[shuffle_rng.below(i + 1)]);
      }
      const std::size_t chunk = cfg.batched ? cfg.batch_size : starts.size();
      for (std::size_t lo = 0; lo < starts.size(); lo += chunk) {
        const std::vector<std::size_t> batch(
            starts.begin() + static_cast<std::ptrdiff_t>(lo),
            starts.begin() +
                static_cast<std::ptrdiff_t>(std::min(lo + chunk, starts.size())));
        WalkPairs pairs = random_walks(g, batch, cfg.walk_length, walk_rng);
        if (pairs.empty()) continue;
        NegativeSamples negs =
            sample_negatives(neg_cfg, pairs.size(), g.num_nodes, neg_rng);
        Tape tape;
        Tensor h = model.forward_full(tape, ops[gid], data.features[gid],
                                      /*train=*/true, dropout_rng);
        Tensor loss = unsup_loss(tape, h, pairs, negs);
        epoch_loss += loss.value();
        detail::check_finite_loss(loss.value(), epoch);
        GradientMap grads = tape.backward(loss, params);
        clip_grad_norm(grads, cfg.grad_clip);
        adam_step(params, grads, adam, cfg.lr);
        ++steps;
      }
    }
    if (steps == 0)
      throw ContractError("train_unsupervised: no graph produced walk pairs");
    res.history.push_back({epoch, epoch_loss / static_cast<double>(steps),
                           std::nullopt});
  }

  // Final embeddings (exact forward, no dropout).
  for (std::size_t gid = 0; gid < data.num_graphs(); ++gid) {
    Tape tape;
    res.embeddings.push_back(
        model
            .forward_full(tape, ops[gid], data.features[gid],
                          /*train=*/false, eval_rng)
            .detached()
            .clone());
  }

  // Downstream probe: single-graph corpora probe train vs test node ids;
  // multi-graph corpora pool nodes of the train/test graphs.
  if (!data.multigraph()) {
    ProbeResult probe = train_linear_probe(
        res.embeddings[0], data.labels[0], data.split.train, data.split.test);
    res.test_f1 = probe.test_f1;
  } else {
    const std::size_t c = model.config().hidden;
    std::vector<double> rows;
    std::vector<std::size_t> train_ids, test_ids;
    LabelMatrix pooled;
    pooled.kind = data.label_kind;
    std::vector<double> label_rows;
    std::size_t next = 0;
    const auto append = [&](const std::vector<std::size_t>& gids,
                            std::vector<std::size_t>& out_ids) {
      for (std::size_t gid : gids) {
        const Tensor& e = res.embeddings[gid];
        rows.insert(rows.end(), e.data(), e.data() + e.numel());
        const Tensor& lv = data.labels[gid].values;
        label_rows.insert(label_rows.end(), lv.data(), lv.data() + lv.numel());
        for (std::size_t i = 0; i < e.rows(); ++i) out_ids.push_back(next++);
      }
    };
    append(data.split.train, train_ids);
    append(data.split.test, test_ids);
    Tensor all_emb({next, c}, std::move(rows));
    pooled.values = Tensor({next, data.num_classes()}, std::move(label_rows));
    ProbeResult probe =
        train_linear_probe(all_emb, pooled, train_ids, test_ids);
    res.test_f1 = probe.test_f1;
  }

  res.best_epoch = res.history.empty() ? 0 : res.history.back().epoch;
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

}  // namespace rgnn
