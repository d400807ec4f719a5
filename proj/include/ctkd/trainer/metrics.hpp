// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace ctkd::trainer {

inline constexpr std::string_view kMetricsHeader =
    "epoch,ce_loss,kd_loss,train_acc,test_acc,tau_mean,tau_min,tau_max,lambda,seconds";

/// One completed epoch. Losses are sample-weighted means over the epoch's
/// batches; accuracies are fractions in [0, 1].
struct MetricsRecord {
  std::size_t epoch = 0;
  double ce_loss = 0.0;
  double kd_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double tau_mean = 0.0;
  double tau_min = 0.0;
  double tau_max = 0.0;
  double lambda = 0.0;
  double seconds = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

/// Shortest round-trip decimal form, so CSV values parse back bit-exactly.
std::string format_number(double v);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records);
/// Throws FormatError naming the offending column when the header differs.
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

}  // namespace ctkd::trainer
