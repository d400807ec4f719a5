// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctkd/autodiff/tensor.hpp"

namespace ctkd::data {

/// Labelled samples, one row of `dim` features per sample. Image datasets
/// store side*side pixels per row and set image_side.
struct Dataset {
  std::vector<double> features;
  std::vector<int> labels;
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::size_t image_side = 0;
  std::string split = "train";
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  bool is_image() const { return image_side > 0; }
  /// Throws ValidationError when counts or labels are inconsistent.
  void validate() const;

  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
  /// Gathers the given rows into a B x dim constant tensor.
  ad::Tensor gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
  /// All rows in order.
  ad::Tensor all_features() const;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

/// Per-dimension standardization fitted on one split and reusable on others.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Dataset& train);
  void apply(Dataset& ds) const;
};

struct BlobSpec {
  std::size_t classes = 10;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 100;
  std::size_t dim = 20;
  double spread = 1.0;
  /// Gaussian modes per class; samples cycle through their class's modes.
  std::size_t modes_per_class = 1;
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian clusters. Every class owns modes_per_class means drawn
/// from a standard normal; sample i of a class is mode (i mod modes) +
/// spread * N(0, I). Train and test share the means and use independent
/// sample streams. Features are raw (unstandardized); rows are grouped by
/// class.
DatasetPair gen_blobs(const BlobSpec& spec);

inline constexpr char kDatasetMagic[8] = {'C', 'T', 'K', 'D', 'D', 'A', 'T', 'A'};
inline constexpr std::uint32_t kDatasetVersion = 1;

/// Versioned binary cache of a train/test pair (little-endian, bit-exact).
void write_dataset_cache(const std::filesystem::path& path, const DatasetPair& pair);
DatasetPair read_dataset_cache(const std::filesystem::path& path);

/// One line per sample: label followed by the features.
void export_csv(const std::filesystem::path& path, const Dataset& ds);

/// Shuffled mini-batches for one epoch. The permutation is a pure function
/// of (seed, epoch); the final partial batch is kept.
struct BatchPlan {
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;

  std::vector<std::size_t> permutation(std::size_t n) const;
  std::vector<std::vector<std::size_t>> batches(std::size_t n) const;
};

}  // namespace ctkd::data
