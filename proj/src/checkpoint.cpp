// SPDX-License-Identifier: Apache-2.0
#include "dam/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dam/error.hpp"

namespace dam {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4);

void append_floats(std::string& out, std::span<const float> values) {
  const std::size_t base = out.size();
  out.resize(base + values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    std::memcpy(out.data() + base + i * 4, &bits, 4);
  }
}

std::vector<float> read_floats(const std::string& blob, std::size_t offset, std::size_t count) {
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, blob.data() + offset + i * 4, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

class BlobWriter {
 public:
  void add(const std::string& name, const DenseArray& a) {
    index_.push_back({{"name", name}, {"shape", a.shape()}, {"offset", data_.size()}});
    append_floats(data_, a.data());
  }
  const std::string& data() const { return data_; }
  const json& index() const { return index_; }

 private:
  std::string data_;
  json index_ = json::array();
};

class BlobReader {
 public:
  BlobReader(std::string data, const json& index) : data_(std::move(data)) {
    for (const auto& e : index) {
      const auto name = e.at("name").get<std::string>();
      auto shape = e.at("shape").get<std::vector<std::size_t>>();
      const auto offset = e.at("offset").get<std::size_t>();
      const std::size_t count = shape_product(shape);
      if (offset % 4 != 0 || offset > data_.size() || count > (data_.size() - offset) / 4) {
        throw CheckpointError("checkpoint blob '" + name + "' lies outside tensors.bin");
      }
      if (!entries_.emplace(name, DenseArray(std::move(shape), read_floats(data_, offset, count))).second) {
        throw CheckpointError("checkpoint blob '" + name + "' is listed twice");
      }
    }
  }
  const DenseArray& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw CheckpointError("checkpoint blob '" + name + "' missing");
    return it->second;
  }
  // Every blob under `prefix`, in the order given by `names`.
  ParameterBundle bundle(const std::string& prefix, const std::vector<std::string>& names) const {
    ParameterBundle b;
    for (const auto& n : names) b.insert(n, get(prefix + n));
    return b;
  }

 private:
  std::string data_;
  std::map<std::string, DenseArray> entries_;
};

json backbone_config_json(const BackboneConfig& c) {
  return {{"input_dim", c.input_dim},
          {"hidden_dim", c.hidden_dim},
          {"num_blocks", c.num_blocks},
          {"vocab_size", c.vocab_size},
          {"adapter_downsample_factor", c.adapter.downsample_factor}};
}

BackboneConfig backbone_config_from(const json& j) {
  BackboneConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.num_blocks = j.at("num_blocks").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.adapter.downsample_factor = j.at("adapter_downsample_factor").get<std::size_t>();
  c.validate();
  return c;
}

std::vector<std::string> names_of(const ParameterBundle& b) {
  std::vector<std::string> out;
  for (const auto& [n, _] : b.entries()) out.push_back(n);
  return out;
}

std::string tag(const char* group, std::size_t i) { return std::string(group) + "/" + std::to_string(i) + "/"; }

}  // namespace

nlohmann::json signature_to_json(const ShapeSignature& signature) {
  json out = json::array();
  for (const auto& [name, shape] : signature) out.push_back({{"name", name}, {"shape", shape}});
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const fs::path& dir, const Checkpoint& c) {
  const TrainerState& s = c.state;
  if (s.bank.size() != s.stage || s.router.size() != s.stage || s.dataset_names.size() != s.stage ||
      s.scores.stages() != s.stage || s.stage_losses.size() != s.stage) {
    throw ContractError("save_checkpoint: trainer state is inconsistent");
  }
  if (!s.grams.empty() && s.grams.size() != s.stage) throw ContractError("save_checkpoint: gram count mismatch");
  const Backbone backbone(c.backbone_config, c.backbone_weights);
  for (const auto& a : s.bank.bundles()) backbone.check_adapter(a);

  BlobWriter blobs;
  for (const auto& [name, value] : c.backbone_weights.entries()) blobs.add("backbone/" + name, value);
  for (std::size_t t = 0; t < s.stage; ++t) {
    for (const auto& [name, value] : s.bank[t].entries()) blobs.add(tag("adapter", t) + name, value);
    blobs.add("centroid/" + std::to_string(t), s.router.centroids[t]);
  }
  for (std::size_t t = 0; t < s.grams.size(); ++t) {
    for (const auto& [name, value] : s.grams[t]) blobs.add(tag("gram", t) + name, value);
  }

  json losses = json::array();
  for (const auto& [before, after] : s.stage_losses) losses.push_back({before, after});
  json manifest = {
      {"format_version", kCheckpointFormatVersion},
      {"backbone", backbone_config_json(c.backbone_config)},
      {"backbone_entries", names_of(c.backbone_weights)},
      {"shape_signature", signature_to_json(init_adapter(c.backbone_config, 0).shape_signature())},
      {"stage", s.stage},
      {"dataset_names", s.dataset_names},
      {"temperature", s.router.temperature},
      {"centroid_counts", s.router.counts},
      {"strategy", strategy_name(c.composer.strategy)},
      {"top_k", c.composer.top_k},
      {"scores", s.scores.rows()},
      {"stage_losses", losses},
      {"has_grams", !s.grams.empty()},
      {"metadata", c.metadata},
      {"blobs", blobs.index()},
  };

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / "tensors.bin", blobs.data());
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("checkpoint directory not found: " + dir.string());
  json m;
  try {
    m = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw CheckpointError("unreadable manifest in " + dir.string() + ": " + e.what());
  }
  try {
    if (m.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw CheckpointError("unsupported checkpoint format version " + m.at("format_version").dump());
    }
    Checkpoint c;
    c.backbone_config = backbone_config_from(m.at("backbone"));
    const ShapeSignature expected = init_adapter(c.backbone_config, 0).shape_signature();
    if (m.at("shape_signature") != signature_to_json(expected)) {
      throw CheckpointError("checkpoint shape_signature does not match its backbone configuration");
    }

    const BlobReader blobs(read_file(dir / "tensors.bin"), m.at("blobs"));
    c.backbone_weights = blobs.bundle("backbone/", m.at("backbone_entries").get<std::vector<std::string>>());
    if (c.backbone_weights.shape_signature() != init_backbone_weights(c.backbone_config, 0).shape_signature()) {
      throw CheckpointError("checkpoint backbone weights do not match the backbone configuration");
    }

    TrainerState& s = c.state;
    s.stage = m.at("stage").get<std::size_t>();
    s.dataset_names = m.at("dataset_names").get<std::vector<std::string>>();
    s.router.temperature = m.at("temperature").get<double>();
    const auto counts = m.at("centroid_counts").get<std::vector<std::size_t>>();
    if (s.dataset_names.size() != s.stage || counts.size() != s.stage) {
      throw CheckpointError("checkpoint manifest lists inconsistent stage counts");
    }
    std::vector<std::string> adapter_names;
    for (const auto& [n, _] : expected) adapter_names.push_back(n);
    for (std::size_t t = 0; t < s.stage; ++t) {
      ParameterBundle a = blobs.bundle(tag("adapter", t), adapter_names);
      if (a.shape_signature() != expected) {
        throw CheckpointError("adapter " + std::to_string(t + 1) + " does not match the manifest shape_signature");
      }
      s.bank.append(std::move(a));
      s.router.add(blobs.get("centroid/" + std::to_string(t)), counts[t]);
    }
    if (m.at("has_grams").get<bool>()) {
      for (std::size_t t = 0; t < s.stage; ++t) {
        GramStats g;
        for (const auto& n : adapter_linear_names(c.backbone_config)) g.emplace(n, blobs.get(tag("gram", t) + n));
        s.grams.push_back(std::move(g));
      }
    }
    s.scores = ScoreMatrix(m.at("scores").get<std::vector<std::vector<double>>>());
    if (s.scores.stages() != s.stage) throw CheckpointError("checkpoint score matrix has the wrong number of rows");
    for (const auto& pair : m.at("stage_losses")) s.stage_losses.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
    if (s.stage_losses.size() != s.stage) throw CheckpointError("checkpoint stage losses have the wrong length");

    c.composer.strategy = parse_strategy(m.at("strategy").get<std::string>());
    c.composer.top_k = m.at("top_k").get<std::size_t>();
    c.metadata = m.at("metadata");
    return c;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
  } catch (const ContractError& e) {
    throw CheckpointError("invalid checkpoint in " + dir.string() + ": " + e.what());
  } catch (const DimensionError& e) {
    throw CheckpointError("invalid checkpoint in " + dir.string() + ": " + e.what());
  }
}

}  // namespace dam
