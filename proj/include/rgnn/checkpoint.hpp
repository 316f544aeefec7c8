#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgnn/errors.hpp"
#include "rgnn/model.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

// Binary container for checkpoints and embeddings:
//   [u64 LE header length][header JSON][payload: little-endian f64]
// The header lists hyperparameters and, per named tensor, shape and byte
// offset into the payload. Round-trips are bit-exact.

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline void put_f64_le(std::string& out, double d) {
  put_u64_le(out, std::bit_cast<std::uint64_t>(d));
}

inline double get_f64_le(const unsigned char* p) {
  return std::bit_cast<double>(get_u64_le(p));
}

}  // namespace detail

struct Checkpoint {
  nlohmann::json header;
  std::vector<double> payload;

  Tensor tensor(const std::string& name) const {
    for (const auto& entry : header.at("params")) {
      if (entry.at("name").get<std::string>() != name) continue;
      const Shape shape = entry.at("shape").get<Shape>();
      const std::size_t offset = entry.at("offset").get<std::size_t>() / 8;
      const std::size_t count = numel_of(shape);
      if (offset + count > payload.size())
        throw DataError("checkpoint: tensor " + name + " exceeds payload");
      return Tensor(shape, {payload.begin() + static_cast<std::ptrdiff_t>(offset),
                            payload.begin() +
                                static_cast<std::ptrdiff_t>(offset + count)});
    }
    throw DataError("checkpoint: no tensor named " + name);
  }
};

inline void save_container(
    const std::filesystem::path& path, nlohmann::json header,
    const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  nlohmann::json params = nlohmann::json::array();
  std::string payload;
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    params.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
    for (std::size_t i = 0; i < t->numel(); ++i)
      detail::put_f64_le(payload, t->at(i));
    offset += t->numel() * 8;
  }
  header["params"] = std::move(params);

  const std::string head = header.dump();
  std::string out;
  detail::put_u64_le(out, head.size());
  out += head;
  out += payload;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("checkpoint write failed: " + path.string());
}

inline Checkpoint load_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("missing or unreadable checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 8)
    throw DataError("checkpoint truncated (no header length): " + path.string());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t head_len = detail::get_u64_le(p);
  if (8 + head_len > bytes.size())
    throw DataError("checkpoint truncated (header): " + path.string());
  Checkpoint ck;
  try {
    ck.header = nlohmann::json::parse(bytes.substr(8, head_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint header: " + std::string(e.what()));
  }
  const std::size_t payload_bytes = bytes.size() - 8 - head_len;
  if (payload_bytes % 8 != 0)
    throw DataError("checkpoint truncated (payload): " + path.string());
  ck.payload.resize(payload_bytes / 8);
  for (std::size_t i = 0; i < ck.payload.size(); ++i)
    ck.payload[i] = detail::get_f64_le(p + 8 + head_len + 8 * i);

  // Validate coverage so a cut-off file fails loudly.
  if (ck.header.contains("params")) {
    for (const auto& entry : ck.header.at("params")) {
      const Shape shape = entry.at("shape").get<Shape>();
      const std::size_t off = entry.at("offset").get<std::size_t>();
      if (off % 8 != 0 || off / 8 + numel_of(shape) > ck.payload.size())
        throw DataError("checkpoint truncated: tensor " +
                        entry.at("name").get<std::string>() +
                        " exceeds payload in " + path.string());
    }
  }
  return ck;
}

// ---- model <-> checkpoint ----

inline nlohmann::json model_header(const ModelConfig& cfg) {
  return {{"base", cfg.base == Base::kGcn ? "gcn" : "gat"},
          {"combinator", cfg.combinator == Combinator::kPlain      ? "plain"
                         : cfg.combinator == Combinator::kResidual ? "residual"
                         : cfg.combinator == Combinator::kVanillaRnn
                             ? "vanilla_rnn"
                         : cfg.combinator == Combinator::kLstm ? "lstm"
                                                               : "gru"},
          {"depth", cfg.depth},
          {"in_features", cfg.in_features},
          {"hidden", cfg.hidden},
          {"num_classes", cfg.num_classes},
          {"heads", cfg.heads},
          {"dropout", cfg.dropout},
          {"leaky_slope", cfg.leaky_slope},
          {"gat_head_activation",
           cfg.gat_head_activation == HeadActivation::kSigmoid ? "sigmoid"
                                                               : "elu"},
          {"cell_sharing",
           cfg.cell_sharing == CellSharing::kShared ? "shared" : "per_layer"}};
}

inline ModelConfig model_config_from_header(const nlohmann::json& h) {
  ModelConfig cfg;
  const std::string base = h.at("base").get<std::string>();
  cfg.base = base == "gcn" ? Base::kGcn : Base::kGat;
  const std::string comb = h.at("combinator").get<std::string>();
  if (comb == "plain") cfg.combinator = Combinator::kPlain;
  else if (comb == "residual") cfg.combinator = Combinator::kResidual;
  else if (comb == "vanilla_rnn") cfg.combinator = Combinator::kVanillaRnn;
  else if (comb == "lstm") cfg.combinator = Combinator::kLstm;
  else if (comb == "gru") cfg.combinator = Combinator::kGru;
  else throw DataError("checkpoint: unknown combinator " + comb);
  cfg.depth = h.at("depth").get<std::size_t>();
  cfg.in_features = h.at("in_features").get<std::size_t>();
  cfg.hidden = h.at("hidden").get<std::size_t>();
  cfg.num_classes = h.at("num_classes").get<std::size_t>();
  cfg.heads = h.at("heads").get<std::size_t>();
  cfg.dropout = h.at("dropout").get<double>();
  cfg.leaky_slope = h.at("leaky_slope").get<double>();
  cfg.gat_head_activation =
      h.at("gat_head_activation").get<std::string>() == "sigmoid"
          ? HeadActivation::kSigmoid
          : HeadActivation::kElu;
  cfg.cell_sharing = h.at("cell_sharing").get<std::string>() == "shared"
                         ? CellSharing::kShared
                         : CellSharing::kPerLayer;
  return cfg;
}

inline void save_model_checkpoint(const std::filesystem::path& path,
                                  RgnnModel& model) {
  nlohmann::json header;
  header["schema_version"] = 1;
  header["kind"] = "rgnn-checkpoint";
  header["model"] = model_header(model.config());
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (const auto& [name, t] : model.params()) tensors.emplace_back(name, t);
  save_container(path, std::move(header), tensors);
}

inline RgnnModel load_model_checkpoint(const std::filesystem::path& path) {
  Checkpoint ck = load_container(path);
  if (ck.header.value("kind", std::string()) != "rgnn-checkpoint")
    throw DataError("not a model checkpoint: " + path.string());
  ModelConfig cfg = model_config_from_header(ck.header.at("model"));
  RgnnModel model(cfg, 0);
  for (const auto& [name, t] : model.params()) {
    Tensor stored = ck.tensor(name);
    if (!stored.same_shape(*t))
      throw DataError("checkpoint: tensor " + name + " has shape " +
                      shape_str(stored.shape()) + ", expected " +
                      shape_str(t->shape()));
    std::copy_n(stored.data(), stored.numel(), t->data());
  }
  return model;
}

}  // namespace rgnn
