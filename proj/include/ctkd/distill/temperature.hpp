// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctkd/autodiff/tensor.hpp"

namespace ctkd::distill {

enum class TemperatureKind { global, instance };

std::string to_string(TemperatureKind kind);
TemperatureKind parse_temperature_kind(const std::string& name);

struct TemperatureSpec {
  TemperatureKind kind = TemperatureKind::global;
  double tau_init = 1.0;
  double tau_range = 20.0;
  /// Initial raw prediction of the global module.
  double global_init = 0.0;
  /// Hidden width of the instance MLP.
  std::size_t inter_channels = 256;
  /// Number of classes, i.e. logit width seen by the instance MLP.
  std::size_t classes = 0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TemperatureSpec&) const = default;
};

nlohmann::json to_json(const TemperatureSpec& spec);
TemperatureSpec temperature_spec_from_json(const nlohmann::json& j);

/// Learnable temperature.
///
/// Maps a raw prediction T_pred to tau = tau_init + tau_range * sigmoid(T_pred),
/// so tau stays strictly inside (tau_init, tau_init + tau_range). The global
/// variant learns T_pred directly as one scalar; the instance variant predicts
/// one T_pred per row with a two-layer MLP (2C -> inter_channels -> 1, relu in
/// between) over the concatenated teacher and student logits.
class TemperatureModule {
public:
  static TemperatureModule build(const TemperatureSpec& spec);
  static TemperatureModule from_parameters(const TemperatureSpec& spec,
                                           std::vector<ad::Tensor> params);

  /// Returns tau: shape {1} for global, B x 1 for instance. Both logit
  /// inputs are detached, so gradients only reach this module's parameters.
  ad::Tensor predict(const ad::Tensor& teacher_logits, const ad::Tensor& student_logits) const;

  const TemperatureSpec& spec() const { return spec_; }
  std::vector<ad::Tensor>& parameters() { return params_; }
  const std::vector<ad::Tensor>& parameters() const { return params_; }

private:
  TemperatureModule(TemperatureSpec spec, std::vector<ad::Tensor> params)
      : spec_(std::move(spec)), params_(std::move(params)) {}
  TemperatureSpec spec_;
  std::vector<ad::Tensor> params_;
};

}  // namespace ctkd::distill
