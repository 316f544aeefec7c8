// Acceptance suite: one binary, one pass/fail line per criterion, nonzero
// exit if anything fails. Criterion 5 needs the converted Pubmed dataset and
// is skipped when it is absent (see README); criterion 6 covers the depth
// trend either way.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rgnn/rgnn.hpp"

using namespace rgnn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  bool skipped = false;
  std::string detail;
};

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// ---------- criterion 1: gradient suite ----------

Outcome gradient_suite() {
  Outcome out;
  RngStream rng(101);
  double worst = 0.0;
  std::string worst_name;
  const auto note = [&](const std::string& name, double err) {
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
    if (err >= 1e-4) {
      out.pass = false;
      out.detail += name + " rel err " + fmt(err) + "; ";
    }
  };

  for (int trial = 0; trial < 5; ++trial) {
    // GCN layer
    {
      CsrGraph g = oracle::random_graph(6, 0.5, rng);
      NormalizedAdjacency adj = sym_normalize(g);
      GcnLayer layer = GcnLayer::init(3, 3, rng);
      Tensor h = oracle::random_tensor(6, 3, rng);
      h.requires_grad = true;
      Tensor r = oracle::random_tensor(6, 3, rng);
      auto rep = grad_check(
          [&](Tape& t) {
            return t.sum(t.hadamard(gcn_forward(t, layer, adj, h), r));
          },
          {{"theta", &layer.theta}, {"h", &h}});
      note("gcn", rep.max_rel_err);
    }
    // GAT layer
    {
      CsrGraph g = oracle::random_graph(6, 0.5, rng);
      GatLayer layer = GatLayer::init(3, 4, 2, rng);
      Tensor h = oracle::random_tensor(6, 3, rng);
      h.requires_grad = true;
      Tensor r = oracle::random_tensor(6, 4, rng);
      ParamRefs params{{"h", &h}};
      for (std::size_t k = 0; k < 2; ++k) {
        params.emplace_back("w" + std::to_string(k), &layer.w[k]);
        params.emplace_back("a" + std::to_string(k), &layer.a[k]);
      }
      auto rep = grad_check(
          [&](Tape& t) {
            return t.sum(t.hadamard(gat_forward(t, layer, g, h), r));
          },
          params);
      note("gat", rep.max_rel_err);
    }
    // recurrent cells
    {
      VanillaRnnCell cell = VanillaRnnCell::init(3, rng);
      ParamRefs params;
      cell.collect("rnn", params);
      Tensor x = oracle::random_tensor(2, 3, rng);
      Tensor h0 = oracle::random_tensor(2, 3, rng);
      Tensor r = oracle::random_tensor(2, 3, rng);
      auto rep = grad_check(
          [&](Tape& t) {
            return t.sum(t.hadamard(rnn_step(t, cell, x, h0), r));
          },
          params);
      note("vanilla-rnn", rep.max_rel_err);
    }
    {
      LstmCell cell = LstmCell::init(3, rng);
      ParamRefs params;
      cell.collect("lstm", params);
      Tensor x = oracle::random_tensor(2, 3, rng);
      Tensor h0 = oracle::random_tensor(2, 3, rng);
      Tensor c0 = oracle::random_tensor(2, 3, rng);
      Tensor r1 = oracle::random_tensor(2, 3, rng);
      Tensor r2 = oracle::random_tensor(2, 3, rng);
      auto rep = grad_check(
          [&](Tape& t) {
            LstmState s = lstm_step(t, cell, x, h0, c0);
            return t.add(t.sum(t.hadamard(s.h, r1)),
                         t.sum(t.hadamard(s.c, r2)));
          },
          params);
      note("lstm", rep.max_rel_err);
    }
    {
      GruCell cell = GruCell::init(3, rng);
      ParamRefs params;
      cell.collect("gru", params);
      Tensor x = oracle::random_tensor(2, 3, rng);
      Tensor h0 = oracle::random_tensor(2, 3, rng);
      Tensor r = oracle::random_tensor(2, 3, rng);
      auto rep = grad_check(
          [&](Tape& t) {
            return t.sum(t.hadamard(gru_step(t, cell, x, h0), r));
          },
          params);
      note("gru", rep.max_rel_err);
    }
    // supervised losses
    {
      Tensor logits = oracle::random_tensor(3, 4, rng);
      logits.requires_grad = true;
      std::vector<double> vals(12, 0.0);
      for (std::size_t i = 0; i < 12; ++i)
        vals[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
      LabelMatrix ml{LabelKind::kMultilabel, Tensor::matrix(3, 4, vals)};
      auto rep = grad_check(
          [&](Tape& t) { return multilabel_loss(t, logits, ml); },
          {{"logits", &logits}});
      note("multilabel_loss", rep.max_rel_err);

      std::vector<double> one(12, 0.0);
      for (std::size_t r = 0; r < 3; ++r) one[r * 4 + rng.below(4)] = 1.0;
      LabelMatrix mc{LabelKind::kMulticlass, Tensor::matrix(3, 4, one)};
      auto rep2 = grad_check(
          [&](Tape& t) { return multiclass_loss(t, logits, mc); },
          {{"logits", &logits}});
      note("multiclass_loss", rep2.max_rel_err);
    }
    // unsupervised loss
    {
      Tensor h = oracle::random_tensor(6, 3, rng);
      h.requires_grad = true;
      WalkPairs pairs;
      pairs.pairs = {{0, 1}, {2, 3}, {4, 5}};
      NegativeSamples negs;
      negs.num_pairs = 3;
      negs.shared = {1, 4, 0};
      auto rep = grad_check(
          [&](Tape& t) { return unsup_loss(t, h, pairs, negs); }, {{"h", &h}});
      note("unsup_loss", rep.max_rel_err);
    }
    // full 2-layer RGCN-LSTM and RGAT-GRU forwards through the loss
    for (const char* variant : {"rgcn-lstm", "rgat-gru"}) {
      ModelConfig mc;
      const auto [base, comb] = parse_variant(variant);
      mc.base = base;
      mc.combinator = comb;
      mc.depth = 2;
      mc.in_features = 3;
      mc.hidden = 4;
      mc.num_classes = 3;
      mc.heads = 2;
      RgnnModel model(mc, rng.next_u64());
      CsrGraph g = oracle::random_graph(5, 0.5, rng);
      GraphOps ops = GraphOps::build(g);
      Tensor x = oracle::random_tensor(5, 3, rng);
      std::vector<double> one(5 * 3, 0.0);
      for (std::size_t r = 0; r < 5; ++r) one[r * 3 + rng.below(3)] = 1.0;
      LabelMatrix labels{LabelKind::kMulticlass, Tensor::matrix(5, 3, one)};
      RngStream fwd(0);
      auto rep = grad_check(
          [&](Tape& t) {
            Tensor h = model.forward_full(t, ops, x, false, fwd);
            return multiclass_loss(t, model.predict(t, h), labels);
          },
          model.params());
      note(variant, rep.max_rel_err);
    }
  }
  out.detail = "max rel err " + fmt(worst) + " (" + worst_name + ")";
  return out;
}

// ---------- criterion 2: sparse/dense oracle equivalence ----------

Outcome sparse_dense_equivalence() {
  Outcome out;
  RngStream rng(202);
  double worst_gcn = 0.0, worst_gat = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(63);
    CsrGraph g = oracle::random_graph(n, 0.05 + 0.3 * rng.uniform(), rng);
    NormalizedAdjacency adj = sym_normalize(g);
    const auto dense = oracle::dense_normalized(g);
    Tensor h = oracle::random_tensor(n, 4, rng);

    Tape tape;
    Tensor s = spmm(tape, adj, h);
    worst_gcn = std::max(worst_gcn,
                         oracle::max_abs_diff(s, oracle::dense_apply(dense, n, h)));

    GcnLayer layer = GcnLayer::init(4, 3, rng);
    Tensor got = gcn_forward(tape, layer, adj, h);
    Tensor expect =
        oracle::matmul(oracle::dense_apply(dense, n, h), layer.theta);
    worst_gcn = std::max(worst_gcn, oracle::max_abs_diff(got, expect));

    GatLayer gat = GatLayer::init(4, 4, 2, rng);
    Tensor gat_got = gat_forward(tape, gat, g, h);
    worst_gat = std::max(
        worst_gat, oracle::max_abs_diff(gat_got, oracle::gat_loop(gat, g, h)));
  }
  if (worst_gcn >= 1e-12 || worst_gat >= 1e-12) out.pass = false;
  out.detail =
      "gcn max diff " + fmt(worst_gcn) + ", gat max diff " + fmt(worst_gat);
  return out;
}

// ---------- criterion 3: closed-form loss values ----------

Outcome closed_form_losses() {
  Outcome out;
  const double ln2 = std::log(2.0), ln3 = std::log(3.0);
  Tape tape;
  LabelMatrix ml{LabelKind::kMultilabel,
                 Tensor::matrix(2, 3, {1, 0, 1, 0, 1, 0})};
  const double bce = multilabel_loss(tape, Tensor::zeros({2, 3}), ml).value();

  LabelMatrix mc{LabelKind::kMulticlass,
                 Tensor::matrix(2, 3, {1, 0, 0, 0, 0, 1})};
  const double ce = multiclass_loss(tape, Tensor::zeros({2, 3}), mc).value();

  WalkPairs pairs;
  pairs.pairs = {{0, 1}};
  NegativeSamples negs;
  negs.num_pairs = 1;
  negs.shared.assign(10, 2);
  const double unsup =
      unsup_loss(tape, Tensor::zeros({3, 4}), pairs, negs).value();

  if (std::abs(bce - ln2) >= 1e-12) {
    out.pass = false;
    out.detail += "bce " + fmt(bce) + " vs ln2; ";
  }
  if (std::abs(ce - ln3) >= 1e-12) {
    out.pass = false;
    out.detail += "ce " + fmt(ce) + " vs ln3; ";
  }
  if (std::abs(unsup - 11.0 * ln2) >= 1e-12) {
    out.pass = false;
    out.detail += "unsup " + fmt(unsup) + " vs 11 ln2; ";
  }
  if (out.pass)
    out.detail = "bce=ln2, ce=ln3, unsup=(K+1) ln2 all within 1e-12";
  return out;
}

// ---------- criterion 4: batched == full under exhaustive sampling ----------

Outcome batched_full_equivalence() {
  Outcome out;
  RngStream rng(404);
  double worst = 0.0;
  const Combinator combs[] = {Combinator::kPlain, Combinator::kResidual,
                              Combinator::kVanillaRnn, Combinator::kLstm,
                              Combinator::kGru};
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6 + rng.below(20);
    CsrGraph g = oracle::random_graph(n, 0.25, rng);
    ModelConfig mc;
    mc.base = trial % 2 == 0 ? Base::kGcn : Base::kGat;
    mc.combinator = combs[trial % 5];
    mc.depth = 2;
    mc.in_features = 3;
    mc.hidden = 4;
    mc.num_classes = 2;
    mc.heads = 2;
    RgnnModel model(mc, rng.next_u64());
    GraphOps ops = GraphOps::build(g);
    Tensor x = oracle::random_tensor(n, 3, rng);

    std::vector<std::size_t> batch{0, n / 2, n - 1};
    BatchHierarchy hier = build_batch_hierarchy(g, batch, {n, n}, rng);
    const auto& bottom = hier.levels.back();
    Tensor xb({bottom.size(), 3});
    for (std::size_t i = 0; i < bottom.size(); ++i)
      for (std::size_t c = 0; c < 3; ++c) xb.at(i, c) = x.at(bottom[i], c);

    Tape tape;
    RngStream r1(0), r2(0);
    Tensor batched = model.forward_batched(tape, ops, hier, xb, false, r1);
    Tensor full = model.forward_full(tape, ops, x, false, r2);
    for (std::size_t i = 0; i < batch.size(); ++i)
      for (std::size_t c = 0; c < 4; ++c)
        worst = std::max(worst,
                         std::abs(batched.at(i, c) - full.at(batch[i], c)));
  }
  if (worst >= 1e-12) out.pass = false;
  out.detail = "max divergence " + fmt(worst);
  return out;
}

// ---------- criterion 5: Pubmed supervised reproduction ----------

Outcome pubmed_reproduction() {
  Outcome out;
  fs::path dir;
  if (const char* env = std::getenv("RGNN_PUBMED_DIR")) dir = env;
  else dir = fs::path(RGNN_DATA_DIR) / "pubmed";
  if (!fs::exists(dir / "meta.json")) {
    out.skipped = true;
    out.detail = "dataset not present at " + dir.string() +
                 " (see README: scripts/convert_pubmed.py); criterion 6 is "
                 "mandatory instead";
    return out;
  }
  DatasetBundle data = load_dataset(dir);
  ExperimentConfig cfg;
  cfg.task = Task::kSupervised;
  cfg.layers = 2;
  cfg.hidden = 64;
  cfg.dropout = 0.2;
  cfg.lr = 0.01;
  cfg.epochs = 100;
  cfg.patience = 20;

  const auto mean_f1 = [&](const std::string& variant) {
    std::vector<double> runs;
    for (std::uint64_t s = 1; s <= 5; ++s) {
      ExperimentConfig c = cfg;
      c.model = variant;
      c.seed = s;
      runs.push_back(run_experiment(data, std::move(c)).result.test_f1);
    }
    return aggregate_runs(runs);
  };
  const MeanStd lstm = mean_f1("rgcn-lstm");
  const MeanStd gcn = mean_f1("gcn");
  out.detail = "rgcn-lstm " + fmt(lstm.mean) + "+-" + fmt(lstm.std) +
               ", gcn " + fmt(gcn.mean) + "+-" + fmt(gcn.std);
  if (lstm.mean < 0.88) out.pass = false;
  if (lstm.mean - gcn.mean < 0.01) out.pass = false;
  return out;
}

// ---------- criteria 6 & 7 share the synthetic task ----------

// 500-node 4-block SBM where features carry most of the class signal and the
// graph helps only moderately: repeated aggregation mixes blocks, which is
// what separates plain smoothing from gated state updates at depth.
DatasetBundle depth_task() {
  SyntheticParams p;
  p.blocks = 4;
  p.nodes_per_block = 125;  // 500 nodes
  p.p_in = 0.06;
  p.p_out = 0.03;
  p.feature_dim = 16;
  p.center_scale = 1.0;
  p.noise_sigma = 1.0;
  return make_synthetic(p, 2024);
}

ExperimentConfig sweep_base() {
  ExperimentConfig cfg;
  cfg.hidden = 16;
  cfg.lr = 0.01;
  cfg.dropout = 0.2;
  cfg.epochs = 200;
  cfg.patience = 40;
  cfg.seed = 1;
  return cfg;
}

double point_mean(const std::vector<SweepPoint>& points,
                  const std::string& variant, double x) {
  for (const SweepPoint& pt : points)
    if (pt.variant == variant && pt.x == x) return pt.f1.mean;
  throw ContractError("missing sweep point " + variant);
}

Outcome depth_trend() {
  Outcome out;
  DatasetBundle data = depth_task();
  const std::vector<std::string> variants{"gcn", "gcn-res", "rgcn-lstm",
                                          "rgcn-gru"};
  const std::vector<std::size_t> depths{2, 4, 6, 8};
  auto points = sweep_depth(data, sweep_base(), variants, depths, 5);

  const double gcn2 = point_mean(points, "gcn", 2);
  const double gcn8 = point_mean(points, "gcn", 8);
  const double res8 = point_mean(points, "gcn-res", 8);
  const double lstm2 = point_mean(points, "rgcn-lstm", 2);
  const double lstm8 = point_mean(points, "rgcn-lstm", 8);

  out.detail = "gcn d2 " + fmt(gcn2) + " d8 " + fmt(gcn8) + "; gcn-res d8 " +
               fmt(res8) + "; rgcn-lstm d2 " + fmt(lstm2) + " d8 " +
               fmt(lstm8);
  if (!(gcn2 - gcn8 >= 0.05)) {
    out.pass = false;
    out.detail += "; plain gcn did not degrade by 0.05";
  }
  if (!(std::abs(lstm8 - lstm2) <= 0.03)) {
    out.pass = false;
    out.detail += "; rgcn-lstm moved more than 0.03 across depth";
  }
  if (!(lstm8 > res8)) {
    out.pass = false;
    out.detail += "; rgcn-lstm(8) did not beat gcn-res(8)";
  }
  return out;
}

Outcome perturbation_trend() {
  Outcome out;
  DatasetBundle data = depth_task();
  const std::vector<std::string> variants{"gcn", "gcn-res", "rgcn-lstm",
                                          "rgcn-gru"};
  const std::vector<double> ps{0.0, 0.5, 1.0};
  ExperimentConfig cfg = sweep_base();
  cfg.layers = 3;

  for (const auto kind : {PerturbSpec::Kind::kEdgeRewire,
                          PerturbSpec::Kind::kFeatureNoise}) {
    const char* kind_name =
        kind == PerturbSpec::Kind::kEdgeRewire ? "edge" : "feat";
    auto points = sweep_perturb(data, cfg, variants, kind, ps, 5);
    for (const std::string& v : variants) {
      const double p0 = point_mean(points, v, 0.0);
      const double p1 = point_mean(points, v, 1.0);
      if (!(p1 <= p0)) {
        out.pass = false;
        out.detail += std::string(kind_name) + ":" + v + " rose at p=1 (" +
                      fmt(p0) + " -> " + fmt(p1) + "); ";
      }
    }
    const double lstm05 = point_mean(points, "rgcn-lstm", 0.5);
    const double gcn05 = point_mean(points, "gcn", 0.5);
    out.detail += std::string(kind_name) + " p=.5 rgcn-lstm " + fmt(lstm05) +
                  " vs gcn " + fmt(gcn05) + "; ";
    if (!(lstm05 >= gcn05)) {
      out.pass = false;
      out.detail += std::string(kind_name) + ": rgcn-lstm below gcn at p=0.5; ";
    }
  }
  return out;
}

// ---------- criterion 8: unsupervised separation ----------

Outcome unsupervised_separation() {
  Outcome out;
  SyntheticParams p;
  p.blocks = 2;
  p.nodes_per_block = 10;
  p.p_in = 1.0;
  p.p_out = 0.0;
  p.feature_dim = 6;
  p.center_scale = 0.0;  // structure is the only signal
  p.noise_sigma = 1.0;
  DatasetBundle data = make_synthetic(p, 17);

  ExperimentConfig cfg;
  cfg.task = Task::kUnsupervised;
  cfg.model = "rgcn-lstm";
  cfg.layers = 2;
  cfg.hidden = 8;
  cfg.lr = 0.025;
  cfg.epochs = 200;
  cfg.walk_length = 2;
  cfg.negatives = 10;
  cfg.seed = 1;
  RunOutput run = run_experiment(data, std::move(cfg));
  const Tensor& emb = run.result.embeddings[0];

  const auto cosine = [&](std::size_t a, std::size_t b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t c = 0; c < emb.cols(); ++c) {
      dot += emb.at(a, c) * emb.at(b, c);
      na += emb.at(a, c) * emb.at(a, c);
      nb += emb.at(b, c) * emb.at(b, c);
    }
    return dot / std::sqrt(na * nb);
  };
  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t a = 0; a < 20; ++a)
    for (std::size_t b = a + 1; b < 20; ++b) {
      if (a / 10 == b / 10) {
        intra += cosine(a, b);
        ++n_intra;
      } else {
        inter += cosine(a, b);
        ++n_inter;
      }
    }
  intra /= static_cast<double>(n_intra);
  inter /= static_cast<double>(n_inter);

  out.detail = "intra-inter cosine gap " + fmt(intra - inter) +
               ", probe test F1 " + fmt(run.result.test_f1);
  if (!(intra - inter >= 0.2)) out.pass = false;
  if (!(run.result.test_f1 >= 0.9)) out.pass = false;
  return out;
}

// ---------- criterion 9: determinism & persistence ----------

Outcome determinism_persistence() {
  Outcome out;
  SyntheticParams p;
  p.blocks = 2;
  p.nodes_per_block = 12;
  p.p_in = 0.5;
  p.p_out = 0.05;
  p.feature_dim = 4;
  DatasetBundle data = make_synthetic(p, 99);

  ExperimentConfig cfg;
  cfg.model = "rgcn-lstm";
  cfg.layers = 2;
  cfg.hidden = 8;
  cfg.dropout = 0.2;
  cfg.epochs = 10;
  cfg.patience = 10;
  cfg.seed = 3;

  // identical JSONL streams (wall_seconds is wall-clock time and is the one
  // field exempt from bit-identity; everything else must match byte for byte)
  const auto jsonl = [&]() {
    std::vector<std::string> lines;
    RunOutput run = run_experiment(data, cfg);
    emit_run_records(run, [&](const nlohmann::json& j) {
      nlohmann::json masked = j;
      masked.erase("wall_seconds");
      lines.push_back(masked.dump());
    });
    return lines;
  };
  if (jsonl() != jsonl()) {
    out.pass = false;
    out.detail += "JSONL streams differ; ";
  }

  // checkpoint round-trip preserves forward outputs bit-exactly
  RunOutput run = run_experiment(data, cfg);
  const fs::path ckpt = fs::temp_directory_path() / "rgnn_accept.ckpt";
  save_model_checkpoint(ckpt, run.model);
  RgnnModel loaded = load_model_checkpoint(ckpt);
  Tape tape;
  RngStream r1(0), r2(0);
  Tensor a =
      run.model.forward_full(tape, data.graphs[0], data.features[0], false, r1);
  Tensor b =
      loaded.forward_full(tape, data.graphs[0], data.features[0], false, r2);
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a.at(i) != b.at(i)) {
      out.pass = false;
      out.detail += "checkpoint forward outputs differ; ";
      break;
    }
  fs::remove(ckpt);

  // dataset save/load round-trip is byte-identical
  const fs::path d1 = fs::temp_directory_path() / "rgnn_accept_d1";
  const fs::path d2 = fs::temp_directory_path() / "rgnn_accept_d2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  save_dataset(data, d1);
  save_dataset(load_dataset(d1), d2);
  for (const auto& entry : fs::directory_iterator(d1)) {
    std::ifstream f1(entry.path(), std::ios::binary);
    std::ifstream f2(d2 / entry.path().filename(), std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    if (s1 != s2) {
      out.pass = false;
      out.detail += "dataset files differ after round-trip; ";
      break;
    }
  }
  fs::remove_all(d1);
  fs::remove_all(d2);

  if (out.pass)
    out.detail = "bit-identical records, checkpoints, and dataset files";
  return out;
}

struct Criterion {
  int id;
  std::string name;
  double time_cap_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "gradient suite", 120.0, gradient_suite},
      {2, "sparse/dense oracle equivalence", 60.0, sparse_dense_equivalence},
      {3, "closed-form loss values", 60.0, closed_form_losses},
      {4, "batched/full equivalence", 60.0, batched_full_equivalence},
      {5, "Pubmed supervised reproduction", 900.0, pubmed_reproduction},
      {6, "depth-trend reproduction", 600.0, depth_trend},
      {7, "perturbation-trend reproduction", 600.0, perturbation_trend},
      {8, "unsupervised separation", 120.0, unsupervised_separation},
      {9, "determinism & persistence", 120.0, determinism_persistence},
  };

  bool all_pass = true;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = elapsed_s(t0);
    if (!out.skipped && secs > c.time_cap_s) {
      out.pass = false;
      out.detail += " [exceeded " + fmt(c.time_cap_s) + "s budget]";
    }
    const char* tag = out.skipped ? "[SKIP]" : out.pass ? "[PASS]" : "[FAIL]";
    std::cout << tag << " criterion " << c.id << ": " << c.name << " ("
              << fmt(secs) << "s) - " << out.detail << "\n";
    if (!out.skipped && !out.pass) all_pass = false;
  }
  std::cout << (all_pass ? "ACCEPTANCE: PASS" : "ACCEPTANCE: FAIL") << "\n";
  return all_pass ? 0 : 1;
}
