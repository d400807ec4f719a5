// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "ctkd/data/augment.hpp"
#include "ctkd/data/dataset.hpp"
#include "ctkd/data/idx.hpp"
#include "ctkd/errors.hpp"
#include "support.hpp"

using namespace ctkd;
using testkit::TempDir;

namespace {

data::BlobSpec small_blobs() {
  data::BlobSpec s;
  s.classes = 3;
  s.train_per_class = 10;
  s.test_per_class = 4;
  s.dim = 5;
  s.spread = 0.5;
  s.modes_per_class = 2;
  s.seed = 17;
  return s;
}

std::vector<std::uint8_t> bytes_of(const std::filesystem::path& p) {
  const auto s = testkit::slurp(p);
  return {s.begin(), s.end()};
}

}  // namespace

TEST(Blobs, ShapesLabelsAndDeterminism) {
  const auto a = data::gen_blobs(small_blobs());
  const auto b = data::gen_blobs(small_blobs());
  EXPECT_EQ(a.train.size(), 30u);
  EXPECT_EQ(a.test.size(), 12u);
  EXPECT_EQ(a.train.features.size(), 30u * 5);
  EXPECT_EQ(a.train.features, b.train.features);
  EXPECT_EQ(a.test.features, b.test.features);
  EXPECT_NE(a.train.features, a.test.features);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(std::count(a.train.labels.begin(), a.train.labels.end(), c), 10);
  auto other = small_blobs();
  other.seed = 18;
  EXPECT_NE(data::gen_blobs(other).train.features, a.train.features);
  EXPECT_NO_THROW(a.train.validate());
}

TEST(Blobs, ZeroSpreadCollapsesOntoModes) {
  auto spec = small_blobs();
  spec.spread = 0.0;
  const auto d = data::gen_blobs(spec);
  // Samples 0 and 2 of class 0 share mode 0; sample 1 uses mode 1.
  EXPECT_TRUE(std::equal(d.train.row(0).begin(), d.train.row(0).end(), d.train.row(2).begin()));
  EXPECT_FALSE(std::equal(d.train.row(0).begin(), d.train.row(0).end(), d.train.row(1).begin()));
  EXPECT_TRUE(std::equal(d.train.row(0).begin(), d.train.row(0).end(), d.test.row(0).begin()));
}

TEST(Blobs, RejectsBadSpec) {
  auto spec = small_blobs();
  spec.classes = 0;
  EXPECT_THROW(data::gen_blobs(spec), ValidationError);
  spec = small_blobs();
  spec.spread = -1.0;
  EXPECT_THROW(data::gen_blobs(spec), ValidationError);
}

TEST(Standardizer, CentresAndScalesTrainingSplit) {
  auto d = data::gen_blobs(small_blobs());
  const auto st = data::Standardizer::fit(d.train);
  st.apply(d.train);
  for (std::size_t j = 0; j < d.train.dim; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < d.train.size(); ++i) m += d.train.row(i)[j];
    m /= static_cast<double>(d.train.size());
    for (std::size_t i = 0; i < d.train.size(); ++i) v += std::pow(d.train.row(i)[j] - m, 2);
    v /= static_cast<double>(d.train.size());
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-12);
  }
  data::Dataset constant;
  constant.dim = 1;
  constant.classes = 1;
  constant.features = {3.0, 3.0};
  constant.labels = {0, 0};
  const auto cs = data::Standardizer::fit(constant);
  cs.apply(constant);
  EXPECT_EQ(constant.features[0], 0.0);
}

TEST(Dataset, ValidationCatchesInconsistencies) {
  auto d = data::gen_blobs(small_blobs()).train;
  d.labels[0] = 3;
  EXPECT_THROW(d.validate(), ValidationError);
  d.labels[0] = 0;
  d.features.pop_back();
  EXPECT_THROW(d.validate(), ValidationError);
}

TEST(Dataset, Gather) {
  const auto d = data::gen_blobs(small_blobs()).train;
  const std::vector<std::size_t> idx{29, 0};
  const auto x = d.gather(idx);
  EXPECT_EQ(x.shape(), (ad::Shape{2, 5}));
  EXPECT_EQ(x.at(0, 4), d.row(29)[4]);
  EXPECT_EQ(d.gather_labels(idx), (std::vector<int>{2, 0}));
}

TEST(DatasetCache, RoundTripIsBitExact) {
  TempDir dir("cache");
  const auto d = data::gen_blobs(small_blobs());
  data::write_dataset_cache(dir / "d.bin", d);
  const auto back = data::read_dataset_cache(dir / "d.bin");
  EXPECT_EQ(back.train.labels, d.train.labels);
  ASSERT_EQ(back.test.features.size(), d.test.features.size());
  EXPECT_EQ(std::memcmp(back.test.features.data(), d.test.features.data(),
                        d.test.features.size() * sizeof(double)),
            0);
  EXPECT_EQ(back.train.provenance, d.train.provenance);
  EXPECT_EQ(back.test.split, "test");
}

TEST(DatasetCache, RejectsCorruptFiles) {
  TempDir dir("cache_bad");
  data::write_dataset_cache(dir / "d.bin", data::gen_blobs(small_blobs()));
  auto bytes = testkit::slurp(dir / "d.bin");
  std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(data::read_dataset_cache(dir / "short.bin"), FormatError);
  bytes[0] = 'X';
  std::ofstream(dir / "magic.bin", std::ios::binary) << bytes;
  EXPECT_THROW(data::read_dataset_cache(dir / "magic.bin"), FormatError);
}

TEST(DatasetCsv, HeaderThenOneLinePerSample) {
  TempDir dir("csv");
  const auto d = data::gen_blobs(small_blobs()).test;
  data::export_csv(dir / "t.csv", d);
  const auto text = testkit::slurp(dir / "t.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), static_cast<long>(d.size() + 1));
  EXPECT_EQ(text.substr(0, 12), "label,f0,f1,");
  EXPECT_EQ(text.substr(text.find('\n') + 1, 2), "0,");
}

TEST(BatchPlan, PermutationPerEpoch) {
  const data::BatchPlan p0{8, 5, 0}, p0b{8, 5, 0}, p1{8, 5, 1};
  const auto a = p0.permutation(50);
  EXPECT_EQ(a, p0b.permutation(50));
  EXPECT_NE(a, p1.permutation(50));
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(50);
  std::iota(iota.begin(), iota.end(), 0);
  EXPECT_EQ(sorted, iota);

  const auto batches = p0.batches(50);
  ASSERT_EQ(batches.size(), 7u);
  EXPECT_EQ(batches.back().size(), 2u);
  std::set<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  EXPECT_EQ(seen.size(), 50u);
}

TEST(Idx, FixtureParsesToKnownValues) {
  const std::filesystem::path dir = CTKD_FIXTURE_DIR;
  const auto img = data::parse_idx_images(bytes_of(dir / "tiny-images.idx3-ubyte"));
  EXPECT_EQ(img.rows, 2u);
  EXPECT_EQ(img.cols, 3u);
  EXPECT_EQ(img.count(), 3u);
  EXPECT_EQ(img.pixels[1], 128);
  EXPECT_EQ(img.pixels[6], 255);
  const auto labels = data::parse_idx_labels(bytes_of(dir / "tiny-labels.idx1-ubyte"));
  EXPECT_EQ(labels, (std::vector<std::uint8_t>{2, 0, 1}));

  const auto ds = data::load_idx(dir / "tiny-images.idx3-ubyte", dir / "tiny-labels.idx1-ubyte");
  EXPECT_EQ(ds.dim, 6u);
  EXPECT_EQ(ds.classes, 3u);
  EXPECT_EQ(ds.image_side, 0u);
  EXPECT_DOUBLE_EQ(ds.row(0)[1], 128.0 / 255.0);
  EXPECT_EQ(ds.row(1)[0], 1.0);
}

TEST(Idx, EncodeParseRoundTrip) {
  data::IdxImages img{4, 4, {}};
  for (int i = 0; i < 48; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 5));
  const auto bytes = data::encode_idx_images(img);
  EXPECT_EQ(bytes.size(), 16u + 48);
  EXPECT_EQ(bytes[2], 0x08);
  EXPECT_EQ(bytes[3], 0x03);
  const auto back = data::parse_idx_images(bytes);
  EXPECT_EQ(back.pixels, img.pixels);
  const std::vector<std::uint8_t> labels{9, 8, 7};
  EXPECT_EQ(data::parse_idx_labels(data::encode_idx_labels(labels)), labels);
}

TEST(Idx, MalformedInputsRejected) {
  data::IdxImages img{2, 2, {1, 2, 3, 4}};
  auto bytes = data::encode_idx_images(img);
  auto bad = bytes;
  bad[3] = 0x01;
  try {
    data::parse_idx_images(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  bytes.pop_back();
  EXPECT_THROW(data::parse_idx_images(bytes), FormatError);
  EXPECT_THROW(data::parse_idx_labels(std::vector<std::uint8_t>{0, 0, 8}), FormatError);
  const auto label_bytes = data::encode_idx_labels(std::vector<std::uint8_t>{1});
  EXPECT_THROW(data::parse_idx_images(label_bytes), FormatError);
}

TEST(Idx, CountMismatchBetweenFiles) {
  TempDir dir("idx");
  const auto imgs = data::encode_idx_images({2, 2, {1, 2, 3, 4, 5, 6, 7, 8}});
  const auto labels = data::encode_idx_labels(std::vector<std::uint8_t>{1});
  std::ofstream(dir / "i", std::ios::binary).write(reinterpret_cast<const char*>(imgs.data()), imgs.size());
  std::ofstream(dir / "l", std::ios::binary).write(reinterpret_cast<const char*>(labels.data()), labels.size());
  EXPECT_THROW(data::load_idx(dir / "i", dir / "l"), ValidationError);
}

TEST(Augment, IdentityAndMirror) {
  const std::vector<double> img{1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_EQ(data::augment(img, 3, 0, 0.0, 1), img);
  EXPECT_EQ(data::augment(img, 3, 0, 1.0, 1), (std::vector<double>{3, 2, 1, 6, 5, 4, 9, 8, 7}));
}

TEST(Augment, ShiftsKeepPixelsAndAreSeeded) {
  std::vector<double> img(16);
  std::iota(img.begin(), img.end(), 1.0);
  std::vector<double> batch;
  for (int i = 0; i < 8; ++i) batch.insert(batch.end(), img.begin(), img.end());
  const auto a = data::augment(batch, 4, 1, 0.5, 77);
  EXPECT_EQ(a, data::augment(batch, 4, 1, 0.5, 77));
  EXPECT_NE(a, data::augment(batch, 4, 1, 0.5, 78));
  for (double v : a) EXPECT_TRUE(v == 0.0 || (v >= 1.0 && v <= 16.0));
  EXPECT_THROW(data::augment(batch, 5, 1, 0.5, 1), ShapeError);
  EXPECT_THROW(data::augment(batch, 4, 1, 1.5, 1), ValidationError);
}

TEST(Augment, DrawsStayInRange) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto d = data::draw_augmentation(rng, 2, 0.5);
    EXPECT_LE(d.dy, 4u);
    EXPECT_LE(d.dx, 4u);
  }
}
