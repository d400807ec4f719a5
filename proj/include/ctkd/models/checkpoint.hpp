// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctkd/autodiff/tensor.hpp"
#include "ctkd/models/model.hpp"

namespace ctkd::models {

inline constexpr char kCheckpointMagic[8] = {'C', 'T', 'K', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
};

/// Versioned binary container: magic, version, JSON metadata, then named
/// f64 arrays. All integers and doubles little-endian; values round-trip
/// bit-exactly.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  /// Tensors whose names start with prefix + ".", in stored order.
  std::vector<ad::Tensor> group(const std::string& prefix) const;
  void add_group(const std::string& prefix, const std::vector<ad::Tensor>& params);
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws FormatError on bad magic, unknown version or truncation.
Checkpoint read_checkpoint(const std::filesystem::path& path);

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

/// Stores the model under meta["model"] and tensors "model.<i>".
void pack_model(Checkpoint& ckpt, const Model& model);
Model unpack_model(const Checkpoint& ckpt);

}  // namespace ctkd::models
