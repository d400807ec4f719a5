// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctkd/trainer/metrics.hpp"

namespace ctkd::app {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ReferenceLine {
  std::string name;
  double y = 0.0;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<ReferenceLine> references;
};

/// Standalone SVG document. Legend entries follow series order, then
/// reference lines.
std::string render_svg(const LineChart& chart);

struct PlotRun {
  std::string name;
  std::vector<trainer::MetricsRecord> records;
};

/// Run name used when none is given: the CSV's parent directory, or the file
/// stem when the file sits in the working directory.
std::string default_run_name(const std::filesystem::path& csv);

/// kd_loss, tau and lambda charts. Runs whose tau never changes are drawn as
/// horizontal reference lines on the tau chart, as is every entry of
/// `reference_taus`.
LineChart loss_chart(std::span<const PlotRun> runs);
LineChart tau_chart(std::span<const PlotRun> runs, std::span<const double> reference_taus);
LineChart lambda_chart(std::span<const PlotRun> runs);

struct PlotOutputs {
  std::filesystem::path loss;
  std::filesystem::path tau;
  std::filesystem::path lambda;
  std::filesystem::path merged;
};

/// Writes loss.svg, tau.svg, lambda.svg and merged.csv (the metrics columns
/// prefixed by a run column) into out_dir.
PlotOutputs write_plots(std::span<const PlotRun> runs, const std::filesystem::path& out_dir,
                        std::span<const double> reference_taus = {});

}  // namespace ctkd::app
