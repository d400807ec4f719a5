// SPDX-License-Identifier: Apache-2.0
#include "ctkd/distill/temperature.hpp"

#include <cmath>
#include <random>

#include "ctkd/autodiff/ops.hpp"
#include "ctkd/errors.hpp"

namespace ctkd::distill {

std::string to_string(TemperatureKind kind) {
  return kind == TemperatureKind::global ? "global" : "instance";
}

TemperatureKind parse_temperature_kind(const std::string& name) {
  if (name == "global") return TemperatureKind::global;
  if (name == "instance") return TemperatureKind::instance;
  throw ValidationError("unknown temperature module kind '" + name + "'");
}

void TemperatureSpec::validate() const {
  if (!(tau_init > 0.0)) throw ValidationError("tau_init must be positive");
  if (!(tau_range > 0.0)) throw ValidationError("tau_range must be positive");
  if (!std::isfinite(global_init)) throw ValidationError("global temperature init must be finite");
  if (kind == TemperatureKind::instance) {
    if (classes == 0) throw ValidationError("instance temperature needs the class count");
    if (inter_channels == 0) throw ValidationError("instance temperature needs inter_channels > 0");
  }
}

nlohmann::json to_json(const TemperatureSpec& spec) {
  return {{"kind", to_string(spec.kind)},     {"tau_init", spec.tau_init},
          {"tau_range", spec.tau_range},      {"global_init", spec.global_init},
          {"inter_channels", spec.inter_channels}, {"classes", spec.classes},
          {"seed", spec.seed}};
}

TemperatureSpec temperature_spec_from_json(const nlohmann::json& j) {
  try {
    TemperatureSpec s;
    s.kind = parse_temperature_kind(j.at("kind").get<std::string>());
    s.tau_init = j.at("tau_init").get<double>();
    s.tau_range = j.at("tau_range").get<double>();
    s.global_init = j.at("global_init").get<double>();
    s.inter_channels = j.at("inter_channels").get<std::size_t>();
    s.classes = j.at("classes").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed temperature spec: ") + e.what());
  }
}

namespace {

std::vector<ad::Shape> shapes_for(const TemperatureSpec& spec) {
  if (spec.kind == TemperatureKind::global) return {{1}};
  return {{2 * spec.classes, spec.inter_channels}, {spec.inter_channels}, {spec.inter_channels, 1}, {1}};
}

}  // namespace

TemperatureModule TemperatureModule::build(const TemperatureSpec& spec) {
  spec.validate();
  std::vector<ad::Tensor> params;
  if (spec.kind == TemperatureKind::global) {
    params.push_back(ad::Tensor::scalar(spec.global_init, true));
    return TemperatureModule(spec, std::move(params));
  }
  std::mt19937_64 rng(spec.seed);
  const auto shapes = shapes_for(spec);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const std::size_t fan_in = i < 2 ? 2 * spec.classes : spec.inter_channels;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(ad::numel(shapes[i]));
    for (auto& x : v) x = dist(rng);
    params.push_back(ad::Tensor::from(shapes[i], std::move(v), true));
  }
  return TemperatureModule(spec, std::move(params));
}

TemperatureModule TemperatureModule::from_parameters(const TemperatureSpec& spec,
                                                     std::vector<ad::Tensor> params) {
  spec.validate();
  const auto shapes = shapes_for(spec);
  if (params.size() != shapes.size()) {
    throw ValidationError("temperature module expects " + std::to_string(shapes.size()) +
                          " parameter tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params[i].shape() != shapes[i]) {
      throw ValidationError("temperature parameter " + std::to_string(i) + " has shape " +
                            ad::to_string(params[i].shape()));
    }
    params[i].set_requires_grad(true);
  }
  return TemperatureModule(spec, std::move(params));
}

ad::Tensor TemperatureModule::predict(const ad::Tensor& teacher_logits,
                                      const ad::Tensor& student_logits) const {
  if (teacher_logits.shape() != student_logits.shape()) {
    throw ShapeError("temperature module: teacher logits " + ad::to_string(teacher_logits.shape()) +
                     " vs student logits " + ad::to_string(student_logits.shape()));
  }
  if (spec_.kind == TemperatureKind::global) {
    return ad::bounded_sigmoid(params_[0], spec_.tau_init, spec_.tau_range);
  }
  if (teacher_logits.rank() != 2 || teacher_logits.shape()[1] != spec_.classes) {
    throw ShapeError("instance temperature expects B x " + std::to_string(spec_.classes) +
                     " logits, got " + ad::to_string(teacher_logits.shape()));
  }
  const auto input = ad::concat_rows(teacher_logits.detach(), student_logits.detach());
  const auto hidden = ad::relu(ad::add_bias(ad::matmul(input, params_[0]), params_[1]));
  const auto t_pred = ad::add_bias(ad::matmul(hidden, params_[2]), params_[3]);
  return ad::bounded_sigmoid(t_pred, spec_.tau_init, spec_.tau_range);
}

}  // namespace ctkd::distill
