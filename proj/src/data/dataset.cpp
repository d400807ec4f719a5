// SPDX-License-Identifier: Apache-2.0
#include "ctkd/data/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "ctkd/errors.hpp"
#include "ctkd/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset cache assumes a little-endian host");

namespace ctkd::data {

void Dataset::validate() const {
  if (dim == 0) throw ValidationError("dataset feature dimensionality must be positive");
  if (features.size() != labels.size() * dim) {
    throw ValidationError(fmt::format("dataset has {} feature values for {} labels of width {}",
                                      features.size(), labels.size(), dim));
  }
  if (image_side && image_side * image_side != dim) {
    throw ValidationError("image side does not match feature width");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ValidationError(fmt::format("label {} outside [0, {})", y, classes));
    }
  }
}

ad::Tensor Dataset::gather(std::span<const std::size_t> indices) const {
  std::vector<double> out(indices.size() * dim);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(features.data() + indices[i] * dim, dim, out.data() + i * dim);
  }
  return ad::Tensor::from({indices.size(), dim}, std::move(out));
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels[indices[i]];
  return out;
}

ad::Tensor Dataset::all_features() const { return ad::Tensor::from({size(), dim}, features); }

Standardizer Standardizer::fit(const Dataset& train) {
  Standardizer s;
  const std::size_t n = train.size();
  s.mean.assign(train.dim, 0.0);
  s.scale.assign(train.dim, 1.0);
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < train.dim; ++d) s.mean[d] += train.features[i * train.dim + d];
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(train.dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < train.dim; ++d) {
      const double diff = train.features[i * train.dim + d] - s.mean[d];
      var[d] += diff * diff;
    }
  }
  for (std::size_t d = 0; d < train.dim; ++d) {
    const double sd = std::sqrt(var[d] / static_cast<double>(n));
    s.scale[d] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(Dataset& ds) const {
  if (mean.size() != ds.dim) throw ShapeError("standardizer fitted on a different width");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t d = 0; d < ds.dim; ++d) {
      auto& v = ds.features[i * ds.dim + d];
      v = (v - mean[d]) / scale[d];
    }
  }
}

namespace {

Dataset sample_blobs(const BlobSpec& spec, const std::vector<double>& means, std::size_t per_class,
                     std::uint64_t stream, const char* split) {
  Dataset ds;
  ds.dim = spec.dim;
  ds.classes = spec.classes;
  ds.split = split;
  ds.provenance = fmt::format("blobs(classes={},dim={},spread={},modes={},seed={})", spec.classes,
                              spec.dim, spec.spread, spec.modes_per_class, spec.seed);
  ds.features.reserve(spec.classes * per_class * spec.dim);
  std::mt19937_64 rng(mix_seed(spec.seed, stream));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t d = 0; d < spec.dim; ++d) {
        const std::size_t mode = c * spec.modes_per_class + i % spec.modes_per_class;
        ds.features.push_back(means[mode * spec.dim + d] + spec.spread * noise(rng));
      }
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

}  // namespace

DatasetPair gen_blobs(const BlobSpec& spec) {
  if (spec.classes == 0 || spec.train_per_class == 0 || spec.dim == 0 ||
      spec.modes_per_class == 0) {
    throw ValidationError("blob counts must be positive");
  }
  if (!(spec.spread >= 0.0)) throw ValidationError("blob spread must be >= 0");
  std::mt19937_64 rng(mix_seed(spec.seed, 100));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> means(spec.classes * spec.modes_per_class * spec.dim);
  for (auto& m : means) m = unit(rng);
  DatasetPair pair;
  pair.train = sample_blobs(spec, means, spec.train_per_class, 101, "train");
  pair.test = sample_blobs(spec, means, spec.test_per_class, 102, "test");
  return pair;
}

namespace {

template <typename T>
void put(std::vector<char>& buf, const T& v) {
  const auto* p = reinterpret_cast<const char*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

void put_string(std::vector<char>& buf, const std::string& s) {
  put(buf, static_cast<std::uint32_t>(s.size()));
  buf.insert(buf.end(), s.begin(), s.end());
}

void put_dataset(std::vector<char>& buf, const Dataset& ds) {
  put_string(buf, ds.split);
  put_string(buf, ds.provenance);
  put(buf, static_cast<std::uint64_t>(ds.size()));
  put(buf, static_cast<std::uint64_t>(ds.dim));
  put(buf, static_cast<std::uint64_t>(ds.classes));
  put(buf, static_cast<std::uint64_t>(ds.image_side));
  for (int y : ds.labels) put(buf, static_cast<std::int32_t>(y));
  const auto* p = reinterpret_cast<const char*>(ds.features.data());
  buf.insert(buf.end(), p, p + ds.features.size() * sizeof(double));
}

struct Cursor {
  const std::vector<char>& buf;
  std::size_t pos = 0;

  void read(void* out, std::size_t n) {
    if (buf.size() - pos < n) throw FormatError("dataset cache truncated", pos);
    std::memcpy(out, buf.data() + pos, n);
    pos += n;
  }
  template <typename T>
  T get() {
    T v;
    read(&v, sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (buf.size() - pos < n) throw FormatError("dataset cache truncated", pos);
    std::string s(buf.data() + pos, n);
    pos += n;
    return s;
  }
};

Dataset get_dataset(Cursor& c) {
  Dataset ds;
  ds.split = c.get_string();
  ds.provenance = c.get_string();
  const auto n = c.get<std::uint64_t>();
  ds.dim = c.get<std::uint64_t>();
  ds.classes = c.get<std::uint64_t>();
  ds.image_side = c.get<std::uint64_t>();
  if (n > c.buf.size() || ds.dim > c.buf.size()) throw FormatError("dataset cache sizes corrupt", c.pos);
  ds.labels.resize(n);
  for (auto& y : ds.labels) y = c.get<std::int32_t>();
  ds.features.resize(n * ds.dim);
  c.read(ds.features.data(), ds.features.size() * sizeof(double));
  ds.validate();
  return ds;
}

}  // namespace

void write_dataset_cache(const std::filesystem::path& path, const DatasetPair& pair) {
  std::vector<char> buf(kDatasetMagic, kDatasetMagic + sizeof(kDatasetMagic));
  put(buf, kDatasetVersion);
  put_dataset(buf, pair.train);
  put_dataset(buf, pair.test);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RunError("cannot write dataset cache: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw RunError("failed writing dataset cache: " + path.string());
}

DatasetPair read_dataset_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunError("cannot open dataset cache: " + path.string());
  const std::vector<char> buf(std::istreambuf_iterator<char>(in), {});
  Cursor c{buf};
  char magic[sizeof(kDatasetMagic)];
  c.read(magic, sizeof(magic));
  if (std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0) {
    throw FormatError("not a dataset cache (bad magic)", 0);
  }
  const auto version = c.get<std::uint32_t>();
  if (version != kDatasetVersion) {
    throw FormatError("unsupported dataset cache version " + std::to_string(version), 8);
  }
  DatasetPair pair;
  pair.train = get_dataset(c);
  pair.test = get_dataset(c);
  return pair;
}

void export_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RunError("cannot write " + path.string());
  out << "label";
  for (std::size_t d = 0; d < ds.dim; ++d) out << ",f" << d;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (double v : ds.row(i)) out << ',' << fmt::format("{}", v);
    out << '\n';
  }
}

std::vector<std::size_t> BatchPlan::permutation(std::size_t n) const {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(mix_seed(seed, streams::shuffle), epoch));
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

std::vector<std::vector<std::size_t>> BatchPlan::batches(std::size_t n) const {
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  const auto perm = permutation(n);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace ctkd::data
