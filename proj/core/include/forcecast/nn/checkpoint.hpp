#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "forcecast/nn/model.hpp"
#include "forcecast/state.hpp"

namespace forcecast::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ParamRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
  bool operator==(const ParamRecord&) const = default;
};

/// Model spec, the normalizer the model was trained with, the training
/// configuration (JSON text) and its digest, then every named tensor.
struct Checkpoint {
  ModelSpec spec;
  Normalizer normalizer;
  std::string train_config = "{}";
  std::string config_digest;
  std::vector<ParamRecord> params;
  bool operator==(const Checkpoint&) const = default;
};

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string config_digest(const std::string& text);

Checkpoint make_checkpoint(const ForceModel& model, const Normalizer& normalizer, const std::string& train_config);

/// Binary layout (little endian): "FCKP", u32 version, u64 header size, JSON header,
/// u32 record count, then per record: u32 name size, name, u32 rank, u64 dims, float32 values.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws DataError on a malformed or truncated archive.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values into the model. Every model tensor must appear exactly once with
/// a matching shape and no extra records may exist; throws DataError otherwise.
void load_parameters(ForceModel& model, const Checkpoint& checkpoint);
std::unique_ptr<ForceModel> instantiate(const Checkpoint& checkpoint);

}  // namespace forcecast::nn
