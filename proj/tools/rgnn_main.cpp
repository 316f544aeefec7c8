// rgnn: train/evaluate recurrent graph neural networks, run depth and
// perturbation sweeps, and manage checkpoints. See README for the record
// schema and dataset layout.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgnn/rgnn.hpp"

namespace {

using nlohmann::json;

// Flag values the user may override on top of a --config file. Only options
// actually passed on the command line are applied.
struct TrainFlags {
  std::string config_path;
  std::string dataset;
  std::string task;
  std::string model;
  std::size_t layers = 0;
  std::size_t hidden = 0;
  std::size_t heads = 0;
  double dropout = 0.0;
  double leaky_slope = 0.0;
  std::string cell_sharing;
  std::string gat_head_activation;
  double lr = 0.0;
  double beta1 = 0.0, beta2 = 0.0, eps = 0.0, grad_clip = 0.0;
  std::size_t epochs = 0, patience = 0;
  bool batched = false;
  std::size_t batch_size = 0;
  std::vector<std::size_t> sample_sizes;
  std::size_t walk_length = 0, negatives = 0;
  std::uint64_t seed = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config_path,
                  "flat JSON config file; flags override its values");
  cmd->add_option("--dataset", f.dataset, "dataset directory");
  cmd->add_option("--task", f.task, "supervised | unsupervised");
  cmd->add_option("--model", f.model,
                  "gcn | gat | gcn-res | gat-res | rgcn-{rnn,lstm,gru} | "
                  "rgat-{rnn,lstm,gru}");
  cmd->add_option("--layers", f.layers, "model depth M");
  cmd->add_option("--hidden", f.hidden, "hidden width C");
  cmd->add_option("--heads", f.heads, "GAT attention heads");
  cmd->add_option("--dropout", f.dropout, "input-feature dropout rate");
  cmd->add_option("--leaky-slope", f.leaky_slope, "GAT LeakyReLU slope");
  cmd->add_option("--cell-sharing", f.cell_sharing, "shared | per_layer");
  cmd->add_option("--gat-head-activation", f.gat_head_activation,
                  "sigmoid | elu");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--beta1", f.beta1, "Adam beta1");
  cmd->add_option("--beta2", f.beta2, "Adam beta2");
  cmd->add_option("--eps", f.eps, "Adam epsilon");
  cmd->add_option("--grad-clip", f.grad_clip,
                  "global-norm gradient clip (0 = off)");
  cmd->add_option("--epochs", f.epochs, "epoch budget");
  cmd->add_option("--patience", f.patience,
                  "early-stopping patience on validation micro-F1");
  cmd->add_flag("--batched", f.batched, "mini-batch training over sampled hierarchies");
  cmd->add_option("--batch-size", f.batch_size, "nodes per batch");
  cmd->add_option("--sample-sizes", f.sample_sizes,
                  "neighborhood sample sizes S_1..S_M (comma separated)")
      ->delimiter(',');
  cmd->add_option("--walk-length", f.walk_length, "random-walk length");
  cmd->add_option("--negatives", f.negatives, "negative samples per pair");
  cmd->add_option("--seed", f.seed, "master seed");
}

rgnn::ExperimentConfig merge_config(const CLI::App* cmd, const TrainFlags& f) {
  rgnn::ExperimentConfig cfg;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw rgnn::ConfigError("cannot read config file: " + f.config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw rgnn::ConfigError("config file: " + std::string(e.what()));
    }
    cfg = rgnn::ExperimentConfig::from_json(j);
  }
  const auto set = [&](const char* flag) {
    return cmd->count(flag) > 0;
  };
  if (set("--dataset")) cfg.dataset_dir = f.dataset;
  if (set("--task")) {
    if (f.task == "supervised") cfg.task = rgnn::Task::kSupervised;
    else if (f.task == "unsupervised") cfg.task = rgnn::Task::kUnsupervised;
    else throw rgnn::ConfigError("--task must be supervised or unsupervised");
  }
  if (set("--model")) cfg.model = f.model;
  if (set("--layers")) cfg.layers = f.layers;
  if (set("--hidden")) cfg.hidden = f.hidden;
  if (set("--heads")) cfg.heads = f.heads;
  if (set("--dropout")) cfg.dropout = f.dropout;
  if (set("--leaky-slope")) cfg.leaky_slope = f.leaky_slope;
  if (set("--cell-sharing")) cfg.cell_sharing = f.cell_sharing;
  if (set("--gat-head-activation"))
    cfg.gat_head_activation = f.gat_head_activation;
  if (set("--lr")) cfg.lr = f.lr;
  if (set("--beta1")) cfg.beta1 = f.beta1;
  if (set("--beta2")) cfg.beta2 = f.beta2;
  if (set("--eps")) cfg.eps = f.eps;
  if (set("--grad-clip")) cfg.grad_clip = f.grad_clip;
  if (set("--epochs")) cfg.epochs = f.epochs;
  if (set("--patience")) cfg.patience = f.patience;
  if (set("--batched")) cfg.batched = f.batched;
  if (set("--batch-size")) cfg.batch_size = f.batch_size;
  if (set("--sample-sizes")) cfg.sample_sizes = f.sample_sizes;
  if (set("--walk-length")) cfg.walk_length = f.walk_length;
  if (set("--negatives")) cfg.negatives = f.negatives;
  if (set("--seed")) cfg.seed = f.seed;
  return cfg;
}

// JSONL sink: stdout by default, --out file otherwise.
struct Output {
  std::ofstream file;
  std::ostream* os = &std::cout;

  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file.open(path, std::ios::binary | std::ios::trunc);
    if (!file) throw rgnn::DataError("cannot write output file: " + path);
    os = &file;
  }

  rgnn::RecordSink sink() {
    return [this](const json& j) { *os << j.dump() << "\n"; };
  }
};

rgnn::DatasetBundle load_bundle(const std::string& dir) {
  if (dir.empty()) throw rgnn::ConfigError("--dataset is required");
  return rgnn::load_dataset(dir);
}

int cmd_train(const CLI::App* cmd, const TrainFlags& flags,
              const std::string& out_path, const std::string& ckpt_path) {
  rgnn::ExperimentConfig cfg = merge_config(cmd, flags);
  cfg.validate();
  rgnn::DatasetBundle data = load_bundle(cfg.dataset_dir);
  Output out(out_path);
  rgnn::RunOutput run = rgnn::run_experiment(data, std::move(cfg));
  rgnn::emit_run_records(run, out.sink());
  if (!ckpt_path.empty()) rgnn::save_model_checkpoint(ckpt_path, run.model);
  return 0;
}

int cmd_sweep_depth(const CLI::App* cmd, const TrainFlags& flags,
                    const std::string& out_path,
                    const std::vector<std::size_t>& depths,
                    std::size_t repeats,
                    const std::vector<std::string>& variants) {
  rgnn::ExperimentConfig cfg = merge_config(cmd, flags);
  rgnn::DatasetBundle data = load_bundle(cfg.dataset_dir);
  Output out(out_path);
  rgnn::sweep_depth(data, cfg, variants, depths, repeats, out.sink());
  return 0;
}

int cmd_sweep_perturb(const CLI::App* cmd, const TrainFlags& flags,
                      const std::string& out_path, const std::string& kind,
                      const std::vector<double>& ps, std::size_t repeats,
                      const std::vector<std::string>& variants) {
  rgnn::ExperimentConfig cfg = merge_config(cmd, flags);
  rgnn::DatasetBundle data = load_bundle(cfg.dataset_dir);
  rgnn::PerturbSpec::Kind k;
  if (kind == "edge_rewire") k = rgnn::PerturbSpec::Kind::kEdgeRewire;
  else if (kind == "feature_noise") k = rgnn::PerturbSpec::Kind::kFeatureNoise;
  else
    throw rgnn::ConfigError(
        "--kind must be edge_rewire or feature_noise, got " + kind);
  Output out(out_path);
  rgnn::sweep_perturb(data, cfg, variants, k, ps, repeats, out.sink());
  return 0;
}

void check_compat(const rgnn::RgnnModel& model, const rgnn::DatasetBundle& data,
                  const std::string& ckpt) {
  if (model.config().in_features != data.feature_dim())
    throw rgnn::DataError("checkpoint " + ckpt + " expects " +
                          std::to_string(model.config().in_features) +
                          " features but dataset has " +
                          std::to_string(data.feature_dim()));
  if (model.config().num_classes != data.num_classes())
    throw rgnn::DataError("checkpoint " + ckpt + " expects " +
                          std::to_string(model.config().num_classes) +
                          " classes but dataset has " +
                          std::to_string(data.num_classes()));
}

int cmd_embed(const std::string& ckpt, const std::string& dataset,
              const std::string& out_path) {
  rgnn::RgnnModel model = rgnn::load_model_checkpoint(ckpt);
  rgnn::DatasetBundle data = load_bundle(dataset);
  check_compat(model, data, ckpt);
  rgnn::RngStream rng(0);
  std::vector<rgnn::Tensor> embeddings;
  for (std::size_t g = 0; g < data.num_graphs(); ++g) {
    rgnn::Tape tape;
    embeddings.push_back(model
                             .forward_full(tape, data.graphs[g],
                                           data.features[g],
                                           /*train=*/false, rng)
                             .detached());
  }
  json header;
  header["schema_version"] = 1;
  header["kind"] = "rgnn-embeddings";
  header["model"] = rgnn::model_header(model.config());
  header["num_graphs"] = data.num_graphs();
  std::vector<std::pair<std::string, const rgnn::Tensor*>> tensors;
  for (std::size_t g = 0; g < embeddings.size(); ++g)
    tensors.emplace_back("embeddings_" + std::to_string(g), &embeddings[g]);
  rgnn::save_container(out_path, std::move(header), tensors);
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& dataset,
             const std::string& task_flag) {
  rgnn::RgnnModel model = rgnn::load_model_checkpoint(ckpt);
  rgnn::DatasetBundle data = load_bundle(dataset);
  check_compat(model, data, ckpt);
  const std::string task = task_flag.empty() ? data.task : task_flag;
  rgnn::RngStream rng(0);

  double test_f1 = 0.0;
  if (task == "unsupervised") {
    // embeddings + the fixed downstream probe, matching train_unsupervised
    std::vector<rgnn::Tensor> emb;
    for (std::size_t g = 0; g < data.num_graphs(); ++g) {
      rgnn::Tape tape;
      emb.push_back(model
                        .forward_full(tape, data.graphs[g], data.features[g],
                                      /*train=*/false, rng)
                        .detached());
    }
    if (data.multigraph())
      throw rgnn::ConfigError(
          "eval --task unsupervised supports single-graph datasets; rerun "
          "training for multi-graph probing");
    rgnn::ProbeResult probe = rgnn::train_linear_probe(
        emb[0], data.labels[0], data.split.train, data.split.test);
    test_f1 = probe.test_f1;
  } else if (!data.multigraph()) {
    rgnn::Tape tape;
    rgnn::Tensor h = model.forward_full(tape, data.graphs[0], data.features[0],
                                        /*train=*/false, rng);
    rgnn::Tensor sel =
        tape.gather_rows(model.predict(tape, h), data.split.test);
    test_f1 = rgnn::micro_f1(sel, data.labels[0].select(data.split.test));
  } else {
    rgnn::ConfusionCounts pooled;
    for (std::size_t gid : data.split.test) {
      rgnn::Tape tape;
      rgnn::Tensor h = model.forward_full(
          tape, data.graphs[gid], data.features[gid], /*train=*/false, rng);
      const auto c =
          rgnn::confusion_counts(model.predict(tape, h), data.labels[gid]);
      pooled.tp += c.tp;
      pooled.fp += c.fp;
      pooled.fn += c.fn;
    }
    test_f1 = rgnn::micro_f1(pooled);
  }
  json metrics{{"schema_version", 1},
               {"type", "metrics"},
               {"task", task},
               {"test_f1", test_f1}};
  std::cout << metrics.dump() << "\n";
  return 0;
}

int cmd_synth(const std::string& kind, const rgnn::SyntheticParams& base,
              std::uint64_t seed, const std::string& out_dir) {
  rgnn::SyntheticParams p = base;
  if (kind == "sbm") p.kind = rgnn::SyntheticParams::Kind::kSbm;
  else if (kind == "features_cluster")
    p.kind = rgnn::SyntheticParams::Kind::kFeaturesCluster;
  else
    throw rgnn::ConfigError("--kind must be sbm or features_cluster, got " +
                            kind);
  rgnn::DatasetBundle b = rgnn::make_synthetic(p, seed);
  rgnn::save_dataset(b, out_dir);
  std::cout << json{{"type", "synth"},
                    {"out", out_dir},
                    {"nodes", b.graphs[0].num_nodes},
                    {"edges", b.graphs[0].num_edges()}}
                   .dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recurrent graph neural network toolkit"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  std::string out_path, ckpt_path;
  CLI::App* train = app.add_subcommand("train", "train one model");
  add_train_flags(train, train_flags);
  train->add_option("--out", out_path, "JSONL output file (default stdout)");
  train->add_option("--ckpt", ckpt_path, "checkpoint output file");

  TrainFlags depth_flags;
  std::string depth_out;
  std::vector<std::size_t> depths{2, 4, 6, 8};
  std::size_t depth_repeats = 5;
  std::vector<std::string> depth_variants{"gcn", "gcn-res", "rgcn-lstm",
                                          "rgcn-gru"};
  CLI::App* sweep_d = app.add_subcommand(
      "sweep-depth", "train every variant at every depth, repeated over seeds");
  add_train_flags(sweep_d, depth_flags);
  sweep_d->add_option("--out", depth_out, "JSONL output file");
  sweep_d->add_option("--depths", depths, "depths to sweep")->delimiter(',');
  sweep_d->add_option("--repeats", depth_repeats, "runs per point");
  sweep_d->add_option("--variants", depth_variants, "model variants")
      ->delimiter(',');

  TrainFlags perturb_flags;
  std::string perturb_out, perturb_kind = "edge_rewire";
  std::vector<double> ps{0.0, 0.5, 1.0};
  std::size_t perturb_repeats = 5;
  std::vector<std::string> perturb_variants{"gcn", "gcn-res", "rgcn-lstm",
                                            "rgcn-gru"};
  CLI::App* sweep_p = app.add_subcommand(
      "sweep-perturb",
      "train every variant on noisy copies of the dataset (noise applies to "
      "train and eval sides)");
  add_train_flags(sweep_p, perturb_flags);
  sweep_p->add_option("--out", perturb_out, "JSONL output file");
  sweep_p->add_option("--kind", perturb_kind, "edge_rewire | feature_noise");
  sweep_p->add_option("--ps", ps, "perturbation probabilities")
      ->delimiter(',');
  sweep_p->add_option("--repeats", perturb_repeats, "runs per point");
  sweep_p->add_option("--variants", perturb_variants, "model variants")
      ->delimiter(',');

  std::string embed_ckpt, embed_dataset, embed_out = "embeddings.bin";
  CLI::App* embed =
      app.add_subcommand("embed", "write node embeddings from a checkpoint");
  embed->add_option("--ckpt", embed_ckpt, "checkpoint file")->required();
  embed->add_option("--dataset", embed_dataset, "dataset directory")
      ->required();
  embed->add_option("--out", embed_out, "embeddings output file");

  std::string eval_ckpt, eval_dataset, eval_task;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "recompute test micro-F1 from a checkpoint");
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "dataset directory")
      ->required();
  eval_cmd->add_option("--task", eval_task,
                       "supervised | unsupervised (default: dataset meta)");

  std::string synth_kind = "sbm", synth_out;
  rgnn::SyntheticParams synth_params;
  std::uint64_t synth_seed = 1;
  CLI::App* synth =
      app.add_subcommand("synth", "generate a synthetic dataset on disk");
  synth->add_option("--kind", synth_kind, "sbm | features_cluster");
  synth->add_option("--blocks", synth_params.blocks, "number of blocks");
  synth->add_option("--nodes-per-block", synth_params.nodes_per_block,
                    "nodes per block");
  synth->add_option("--p-in", synth_params.p_in, "within-block edge prob");
  synth->add_option("--p-out", synth_params.p_out, "cross-block edge prob");
  synth->add_option("--edge-p", synth_params.edge_p,
                    "uniform edge prob (features_cluster)");
  synth->add_option("--feature-dim", synth_params.feature_dim, "feature width");
  synth->add_option("--center-scale", synth_params.center_scale,
                    "block center scale (0 = uninformative features)");
  synth->add_option("--noise-sigma", synth_params.noise_sigma,
                    "per-node feature noise");
  synth->add_option("--train-frac", synth_params.train_frac, "train fraction");
  synth->add_option("--val-frac", synth_params.val_frac, "val fraction");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  try {
    app.parse(argc, argv);
    if (train->parsed())
      return cmd_train(train, train_flags, out_path, ckpt_path);
    if (sweep_d->parsed())
      return cmd_sweep_depth(sweep_d, depth_flags, depth_out, depths,
                             depth_repeats, depth_variants);
    if (sweep_p->parsed())
      return cmd_sweep_perturb(sweep_p, perturb_flags, perturb_out,
                               perturb_kind, ps, perturb_repeats,
                               perturb_variants);
    if (embed->parsed()) return cmd_embed(embed_ckpt, embed_dataset, embed_out);
    if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_dataset, eval_task);
    if (synth->parsed())
      return cmd_synth(synth_kind, synth_params, synth_seed, synth_out);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad flags are config errors
  } catch (const rgnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const rgnn::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const rgnn::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const rgnn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
