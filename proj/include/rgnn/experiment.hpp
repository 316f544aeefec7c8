#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgnn/data.hpp"
#include "rgnn/eval.hpp"
#include "rgnn/model.hpp"
#include "rgnn/perturb.hpp"
#include "rgnn/trainer.hpp"

namespace rgnn {

constexpr int kRunRecordSchemaVersion = 1;

// One finished run: the echoed config, the training history/metrics, and the
// trained model (holding best-validation parameters) for checkpointing.
struct RunOutput {
  ExperimentConfig cfg;
  RgnnModel model;
  TrainResult result;

  RunOutput(ExperimentConfig c, RgnnModel m)
      : cfg(std::move(c)), model(std::move(m)) {}
};

inline RunOutput run_experiment(const DatasetBundle& data,
                                ExperimentConfig cfg) {
  cfg.validate();
  ModelConfig mc = cfg.model_config(data.feature_dim(), data.num_classes());
  const std::uint64_t seed = cfg.seed;
  RunOutput out(std::move(cfg), RgnnModel(mc, seed));
  if (out.cfg.task == Task::kUnsupervised)
    out.result = train_unsupervised(out.model, data, out.cfg);
  else if (out.cfg.batched)
    out.result = train_supervised_batched(out.model, data, out.cfg);
  else
    out.result = train_supervised_full(out.model, data, out.cfg);
  return out;
}

// ---- JSONL run records ----

inline nlohmann::json config_record(const ExperimentConfig& cfg) {
  return {{"schema_version", kRunRecordSchemaVersion},
          {"type", "config"},
          {"config", cfg.to_json()}};
}

inline nlohmann::json epoch_record(const EpochRecord& e) {
  nlohmann::json j{{"schema_version", kRunRecordSchemaVersion},
                   {"type", "epoch"},
                   {"epoch", e.epoch},
                   {"train_loss", e.train_loss}};
  if (e.val_f1) j["val_f1"] = *e.val_f1;
  else j["val_f1"] = nullptr;
  return j;
}

inline nlohmann::json final_record(const TrainResult& r, std::uint64_t seed) {
  return {{"schema_version", kRunRecordSchemaVersion},
          {"type", "final"},
          {"test_f1", r.test_f1},
          {"best_epoch", r.best_epoch},
          {"best_val_f1", r.best_val_f1},
          {"wall_seconds", r.wall_seconds},
          {"parameter_count", r.parameter_count},
          {"seed", seed}};
}

using RecordSink = std::function<void(const nlohmann::json&)>;

inline void emit_run_records(const RunOutput& run, const RecordSink& sink) {
  if (!sink) return;
  sink(config_record(run.cfg));
  for (const EpochRecord& e : run.result.history) sink(epoch_record(e));
  sink(final_record(run.result, run.cfg.seed));
}

// ---- sweeps ----

struct SweepPoint {
  std::string variant;
  double x = 0.0;  // depth, or perturbation probability
  MeanStd f1;
  std::vector<double> runs;  // per-repeat test f1, seed order
};

// Depth sweep: every variant x depth x repeat gets a full run with
// seed = base seed + repeat; per-point aggregates go to the sink as
// plot-ready sweep_point records (exactly |variants| * |depths| of them).
inline std::vector<SweepPoint> sweep_depth(
    const DatasetBundle& data, const ExperimentConfig& base,
    const std::vector<std::string>& variants,
    const std::vector<std::size_t>& depths, std::size_t repeats,
    const RecordSink& sink = {}) {
  if (depths.empty()) throw ConfigError("sweep_depth: no depths");
  if (variants.empty()) throw ConfigError("sweep_depth: no variants");
  if (repeats == 0) throw ConfigError("sweep_depth: repeats must be >= 1");
  if (sink) sink(config_record(base));
  std::vector<SweepPoint> points;
  for (const std::string& variant : variants) {
    for (std::size_t depth : depths) {
      SweepPoint pt;
      pt.variant = variant;
      pt.x = static_cast<double>(depth);
      for (std::size_t r = 0; r < repeats; ++r) {
        ExperimentConfig cfg = base;
        cfg.model = variant;
        cfg.layers = depth;
        cfg.seed = base.seed + r;
        if (cfg.batched) cfg.sample_sizes.resize(depth, cfg.sample_sizes.empty()
                                                            ? 10
                                                            : cfg.sample_sizes.back());
        pt.runs.push_back(run_experiment(data, std::move(cfg)).result.test_f1);
      }
      pt.f1 = aggregate_runs(pt.runs);
      if (sink)
        sink({{"schema_version", kRunRecordSchemaVersion},
              {"type", "sweep_point"},
              {"sweep", "depth"},
              {"variant", variant},
              {"depth", depth},
              {"mean_test_f1", pt.f1.mean},
              {"std_test_f1", pt.f1.std},
              {"repeats", repeats},
              {"test_f1_runs", pt.runs}});
      points.push_back(std::move(pt));
    }
  }
  return points;
}

// Perturbation sweep: the noise applies to the whole dataset (training and
// evaluation both see the perturbed graph/features), one fresh draw per
// repeat.
inline std::vector<SweepPoint> sweep_perturb(
    const DatasetBundle& data, const ExperimentConfig& base,
    const std::vector<std::string>& variants, PerturbSpec::Kind kind,
    const std::vector<double>& ps, std::size_t repeats,
    const RecordSink& sink = {}) {
  if (ps.empty()) throw ConfigError("sweep_perturb: no probabilities");
  if (variants.empty()) throw ConfigError("sweep_perturb: no variants");
  if (repeats == 0) throw ConfigError("sweep_perturb: repeats must be >= 1");
  for (double p : ps)
    if (p < 0.0 || p > 1.0)
      throw ConfigError("sweep_perturb: p must be in [0,1]");
  if (sink) sink(config_record(base));
  const char* kind_name =
      kind == PerturbSpec::Kind::kEdgeRewire ? "edge_rewire" : "feature_noise";
  std::vector<SweepPoint> points;
  for (const std::string& variant : variants) {
    for (double p : ps) {
      SweepPoint pt;
      pt.variant = variant;
      pt.x = p;
      for (std::size_t r = 0; r < repeats; ++r) {
        ExperimentConfig cfg = base;
        cfg.model = variant;
        cfg.seed = base.seed + r;
        PerturbSpec spec{kind, p, splitmix64(cfg.seed ^ 0x9e47abcdu)};
        const DatasetBundle noisy = apply_perturbation(data, spec);
        pt.runs.push_back(
            run_experiment(noisy, std::move(cfg)).result.test_f1);
      }
      pt.f1 = aggregate_runs(pt.runs);
      if (sink)
        sink({{"schema_version", kRunRecordSchemaVersion},
              {"type", "sweep_point"},
              {"sweep", "perturb"},
              {"perturb_kind", kind_name},
              {"applies_to", "train+eval"},
              {"variant", variant},
              {"p", p},
              {"mean_test_f1", pt.f1.mean},
              {"std_test_f1", pt.f1.std},
              {"repeats", repeats},
              {"test_f1_runs", pt.runs}});
      points.push_back(std::move(pt));
    }
  }
  return points;
}

}  // namespace rgnn
