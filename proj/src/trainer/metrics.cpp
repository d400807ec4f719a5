// SPDX-License-Identifier: Apache-2.0
#include "ctkd/trainer/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "ctkd/errors.hpp"

namespace ctkd::trainer {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::uint64_t offset, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("metrics column '" + column + "' holds non-numeric value '" + s + "'", offset);
  }
}

}  // namespace

std::string format_number(double v) { return fmt::format("{}", v); }

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records) {
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << format_number(r.ce_loss) << ',' << format_number(r.kd_loss) << ','
        << format_number(r.train_acc) << ',' << format_number(r.test_acc) << ','
        << format_number(r.tau_mean) << ',' << format_number(r.tau_min) << ','
        << format_number(r.tau_max) << ',' << format_number(r.lambda) << ','
        << format_number(r.seconds) << '\n';
  }
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RunError("cannot write metrics: " + path.string());
  write_metrics_csv(out, records);
  if (!out) throw RunError("failed writing metrics: " + path.string());
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RunError("cannot open metrics: " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto expected = split(std::string(kMetricsHeader));
  const auto header = split(line);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= header.size()) throw FormatError("metrics CSV is missing column '" + expected[i] + "'", 0);
    if (header[i] != expected[i]) {
      throw FormatError("metrics CSV column " + std::to_string(i) + " is '" + header[i] +
                            "', expected '" + expected[i] + "'",
                        0);
    }
  }
  if (header.size() != expected.size()) {
    throw FormatError("metrics CSV has unexpected extra column '" + header[expected.size()] + "'", 0);
  }
  std::vector<MetricsRecord> out;
  std::uint64_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != expected.size()) {
      throw FormatError("metrics row has " + std::to_string(cells.size()) + " cells", offset);
    }
    MetricsRecord r;
    r.epoch = static_cast<std::size_t>(parse_double(cells[0], offset, expected[0]));
    double* fields[] = {&r.ce_loss, &r.kd_loss, &r.train_acc, &r.test_acc, &r.tau_mean,
                        &r.tau_min, &r.tau_max, &r.lambda, &r.seconds};
    for (std::size_t i = 0; i < 9; ++i) *fields[i] = parse_double(cells[i + 1], offset, expected[i + 1]);
    out.push_back(r);
    offset += line.size() + 1;
  }
  return out;
}

}  // namespace ctkd::trainer
