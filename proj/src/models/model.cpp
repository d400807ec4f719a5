// SPDX-License-Identifier: Apache-2.0
#include "ctkd/models/model.hpp"

#include <cmath>
#include <random>

#include "ctkd/autodiff/ops.hpp"
#include "ctkd/errors.hpp"

namespace ctkd::models {

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::linear: return "linear";
    case Arch::mlp: return "mlp";
    case Arch::small_cnn: return "small_cnn";
  }
  return "unknown";
}

Arch parse_arch(const std::string& name) {
  if (name == "linear") return Arch::linear;
  if (name == "mlp") return Arch::mlp;
  if (name == "small_cnn") return Arch::small_cnn;
  throw ValidationError("unknown architecture '" + name + "'");
}

std::size_t ModelSpec::image_side() const {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(input_dim))));
  return side * side == input_dim ? side : 0;
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw ValidationError("model input dimensionality must be positive");
  if (classes == 0) throw ValidationError("model class count must be positive");
  if (widths.empty()) throw ValidationError("model needs at least one layer width");
  for (auto w : widths) {
    if (w == 0) throw ValidationError("model layer widths must be positive");
  }
  if (widths.back() != classes) {
    throw ValidationError("final layer width " + std::to_string(widths.back()) +
                          " does not equal class count " + std::to_string(classes));
  }
  if (arch != Arch::mlp && widths.size() != 1) {
    throw ValidationError(to_string(arch) + " models take no hidden layers");
  }
  if (arch == Arch::small_cnn && image_side() < 2) {
    throw ValidationError("small_cnn input dimensionality must be a square of side >= 2");
  }
}

ModelSpec linear_spec(std::size_t input_dim, std::size_t classes, std::uint64_t seed) {
  return {Arch::linear, input_dim, {classes}, classes, seed};
}

ModelSpec mlp_spec(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t classes,
                   std::uint64_t seed) {
  hidden.push_back(classes);
  return {Arch::mlp, input_dim, std::move(hidden), classes, seed};
}

ModelSpec small_cnn_spec(std::size_t side, std::size_t classes, std::uint64_t seed) {
  return {Arch::small_cnn, side * side, {classes}, classes, seed};
}

std::vector<ad::Shape> parameter_shapes(const ModelSpec& spec) {
  spec.validate();
  std::vector<ad::Shape> shapes;
  if (spec.arch == Arch::small_cnn) {
    const std::size_t half = spec.image_side() / 2;
    shapes.push_back({kCnnChannels, 9});
    shapes.push_back({kCnnChannels});
    shapes.push_back({kCnnChannels * half * half, spec.classes});
    shapes.push_back({spec.classes});
    return shapes;
  }
  std::size_t fan_in = spec.input_dim;
  for (auto w : spec.widths) {
    shapes.push_back({fan_in, w});
    shapes.push_back({w});
    fan_in = w;
  }
  return shapes;
}

Model::Model(ModelSpec spec, std::vector<ad::Tensor> params)
    : spec_(std::move(spec)), params_(std::move(params)) {}

Model Model::build(const ModelSpec& spec) {
  const auto shapes = parameter_shapes(spec);
  std::mt19937_64 rng(spec.seed);
  std::vector<ad::Tensor> params;
  // Weights come in (weight, bias) pairs; both use the weight's fan-in.
  std::size_t fan_in = 1;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (i % 2 == 0) fan_in = shapes[i].size() == 2 ? shapes[i][0] : 1;
    if (spec.arch == Arch::small_cnn && i < 2) fan_in = 9;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(ad::numel(shapes[i]));
    for (auto& x : v) x = dist(rng);
    params.push_back(ad::Tensor::from(shapes[i], std::move(v), true));
  }
  return Model(spec, std::move(params));
}

Model Model::from_parameters(const ModelSpec& spec, std::vector<ad::Tensor> params) {
  const auto shapes = parameter_shapes(spec);
  if (shapes.size() != params.size()) {
    throw ValidationError("expected " + std::to_string(shapes.size()) + " parameter tensors, got " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params[i].shape() != shapes[i]) {
      throw ValidationError("parameter " + std::to_string(i) + " has shape " +
                            ad::to_string(params[i].shape()) + ", expected " +
                            ad::to_string(shapes[i]));
    }
    params[i].set_requires_grad(true);
  }
  return Model(spec, std::move(params));
}

ad::Tensor Model::forward(const ad::Tensor& batch) const {
  if (batch.rank() != 2 || batch.shape()[1] != spec_.input_dim) {
    throw ShapeError("model expects B x " + std::to_string(spec_.input_dim) + " input, got " +
                     ad::to_string(batch.shape()));
  }
  if (spec_.arch == Arch::small_cnn) {
    const std::size_t side = spec_.image_side();
    auto h = ad::relu(ad::conv3x3(batch, params_[0], params_[1], side));
    h = ad::avg_pool2x2(h, kCnnChannels, side);
    return ad::add_bias(ad::matmul(h, params_[2]), params_[3]);
  }
  ad::Tensor h = batch;
  const std::size_t layers = params_.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::add_bias(ad::matmul(h, params_[2 * l]), params_[2 * l + 1]);
    if (l + 1 < layers) h = ad::relu(h);
  }
  return h;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.numel();
  return n;
}

Model Model::clone() const {
  std::vector<ad::Tensor> copy;
  copy.reserve(params_.size());
  for (const auto& p : params_) {
    copy.push_back(ad::Tensor::from(p.shape(), {p.values().begin(), p.values().end()}, true));
  }
  return Model(spec_, std::move(copy));
}

}  // namespace ctkd::models
