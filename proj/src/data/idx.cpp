// SPDX-License-Identifier: Apache-2.0
#include "ctkd/data/idx.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "ctkd/errors.hpp"

namespace ctkd::data {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (bytes.size() < offset + 4) {
    throw FormatError(fmt::format("IDX truncated while reading {}", what), bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void check_magic(std::uint32_t got, std::uint32_t want) {
  if (got != want) {
    throw FormatError(fmt::format("bad IDX magic 0x{:08x}, expected 0x{:08x}", got, want), 0);
  }
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  check_magic(read_be32(bytes, 0, "magic"), kIdxImageMagic);
  const auto count = read_be32(bytes, 4, "image count");
  IdxImages img;
  img.rows = read_be32(bytes, 8, "row count");
  img.cols = read_be32(bytes, 12, "column count");
  const std::uint64_t need = std::uint64_t{count} * img.rows * img.cols;
  if (bytes.size() - 16 < need) {
    throw FormatError(fmt::format("IDX image payload truncated: {} of {} pixel bytes present",
                                  bytes.size() - 16, need),
                      bytes.size());
  }
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return img;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  check_magic(read_be32(bytes, 0, "magic"), kIdxLabelMagic);
  const auto count = read_be32(bytes, 4, "label count");
  if (bytes.size() - 8 < count) {
    throw FormatError(fmt::format("IDX label payload truncated: {} of {} label bytes present",
                                  bytes.size() - 8, count),
                      bytes.size());
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + count};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.count()));
  write_be32(out, images.rows);
  write_be32(out, images.cols);
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t classes) {
  const auto images = parse_idx_images(read_file_bytes(images_path));
  const auto labels = parse_idx_labels(read_file_bytes(labels_path));
  if (images.count() != labels.size()) {
    throw ValidationError(fmt::format("{} images but {} labels", images.count(), labels.size()));
  }
  Dataset ds;
  ds.dim = std::size_t{images.rows} * images.cols;
  ds.image_side = images.rows == images.cols ? images.rows : 0;
  ds.provenance = "idx:" + images_path.filename().string();
  ds.features.reserve(images.pixels.size());
  for (auto p : images.pixels) ds.features.push_back(static_cast<double>(p) / 255.0);
  ds.labels.assign(labels.begin(), labels.end());
  const int max_label = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  ds.classes = classes ? classes : static_cast<std::size_t>(max_label) + 1;
  ds.validate();
  return ds;
}

}  // namespace ctkd::data
