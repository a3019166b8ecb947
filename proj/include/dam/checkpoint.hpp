// SPDX-License-Identifier: Apache-2.0
//
// On-disk container for a (possibly partial) continual run:
//
//   <dir>/manifest.json  format version, shape signature, dataset names,
//                        temperature, top-k, run metadata, blob index
//   <dir>/tensors.bin    raw little-endian float32 blobs
//
// Both files are written to a temporary name and renamed into place, the
// manifest last, so a reader never sees a half-written checkpoint.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "dam/backbone.hpp"
#include "dam/composer.hpp"
#include "dam/trainer.hpp"

namespace dam {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  BackboneConfig backbone_config;
  ParameterBundle backbone_weights;
  TrainerState state;
  ComposerConfig composer;
  // Opaque run description (experiment config, hash, seed). Stored verbatim.
  nlohmann::json metadata = nlohmann::json::object();

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.backbone_config == b.backbone_config && a.backbone_weights == b.backbone_weights &&
           a.state == b.state && a.composer.strategy == b.composer.strategy &&
           a.composer.top_k == b.composer.top_k && a.metadata == b.metadata;
  }
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

nlohmann::json signature_to_json(const ShapeSignature& signature);

}  // namespace dam
