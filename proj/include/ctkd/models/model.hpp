// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ctkd/autodiff/tensor.hpp"

namespace ctkd::models {

enum class Arch { linear, mlp, small_cnn };

std::string to_string(Arch arch);
/// Throws ValidationError on an unknown name.
Arch parse_arch(const std::string& name);

/// Number of feature maps produced by the small_cnn convolution.
inline constexpr std::size_t kCnnChannels = 8;

struct ModelSpec {
  Arch arch = Arch::linear;
  std::size_t input_dim = 0;
  /// Widths of every dense layer after the input, ending with the class count.
  /// linear and small_cnn take exactly one entry.
  std::vector<std::size_t> widths;
  std::size_t classes = 0;
  std::uint64_t seed = 0;

  /// Throws ValidationError describing the first problem found.
  void validate() const;
  /// Square image side for small_cnn.
  std::size_t image_side() const;

  bool operator==(const ModelSpec&) const = default;
};

ModelSpec linear_spec(std::size_t input_dim, std::size_t classes, std::uint64_t seed);
ModelSpec mlp_spec(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t classes,
                   std::uint64_t seed);
ModelSpec small_cnn_spec(std::size_t side, std::size_t classes, std::uint64_t seed);

/// A feed-forward classifier. Parameters are shared handles, so copies of a
/// Model alias the same weights; use clone() for an independent copy.
class Model {
public:
  /// Initializes every parameter uniformly in +-1/sqrt(fan_in).
  static Model build(const ModelSpec& spec);
  /// Rebuilds a model from explicit parameter values (checkpoint restore).
  static Model from_parameters(const ModelSpec& spec, std::vector<ad::Tensor> params);

  /// Pre-softmax logits, B x classes.
  ad::Tensor forward(const ad::Tensor& batch) const;

  const ModelSpec& spec() const { return spec_; }
  std::vector<ad::Tensor>& parameters() { return params_; }
  const std::vector<ad::Tensor>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  Model clone() const;

private:
  Model(ModelSpec spec, std::vector<ad::Tensor> params);
  ModelSpec spec_;
  std::vector<ad::Tensor> params_;
};

/// Shapes of the parameter tensors implied by a spec, in storage order.
std::vector<ad::Shape> parameter_shapes(const ModelSpec& spec);

}  // namespace ctkd::models
