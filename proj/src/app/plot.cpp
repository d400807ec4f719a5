// SPDX-License-Identifier: Apache-2.0
#include "ctkd/app/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "ctkd/errors.hpp"

namespace ctkd::app {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 180, kTop = 40, kBottom = 50;
constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finalize(bool pad) {
    if (lo > hi) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    if (pad) {
      const double m = 0.05 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

}  // namespace

std::string render_svg(const LineChart& chart) {
  Range xr, yr;
  for (const auto& s : chart.series) {
    for (double x : s.x) xr.add(x);
    for (double y : s.y) yr.add(y);
  }
  for (const auto& r : chart.references) yr.add(r.y);
  xr.finalize(false);
  yr.finalize(true);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{3}</text>\n",
      kWidth, kHeight, kLeft + pw / 2, escape_xml(chart.title));

  svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
                     kLeft, kTop, pw, ph);
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    svg += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"#444\"/>"
        "<text x=\"{0:.2f}\" y=\"{3}\" text-anchor=\"middle\">{4:.4g}</text>\n",
        px(xv), kTop + ph, kTop + ph + 5, kTop + ph + 19, xv);
    svg += fmt::format(
        "<line x1=\"{0}\" y1=\"{2:.2f}\" x2=\"{1}\" y2=\"{2:.2f}\" stroke=\"#ddd\"/>"
        "<text x=\"{3}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:.4g}</text>\n",
        kLeft, kLeft + pw, py(yv), kLeft - 6, py(yv) + 4, yv);
  }
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2,
                     kHeight - 10, escape_xml(chart.x_label));
  svg += fmt::format(
      "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
      kTop + ph / 2, escape_xml(chart.y_label));

  std::size_t entry = 0;
  auto legend = [&](const std::string& name, const char* color, bool dashed) {
    const double ly = kTop + 10 + 18 * static_cast<double>(entry++);
    const double lx = kLeft + pw + 14;
    svg += fmt::format(
        "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"2\"{4}/>"
        "<text class=\"legend\" x=\"{5}\" y=\"{6}\">{7}</text>\n",
        lx, lx + 22, ly, color, dashed ? " stroke-dasharray=\"6 4\"" : "", lx + 28, ly + 4,
        escape_xml(name));
  };

  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    const char* color = kPalette[i % kPalette.size()];
    std::string points;
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!std::isfinite(s.y[k])) continue;
      points += fmt::format("{:.2f},{:.2f} ", px(s.x[k]), py(s.y[k]));
    }
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color,
                       points);
    legend(s.name, color, false);
  }
  for (std::size_t i = 0; i < chart.references.size(); ++i) {
    const auto& r = chart.references[i];
    const char* color = kPalette[(chart.series.size() + i) % kPalette.size()];
    svg += fmt::format(
        "<line x1=\"{0}\" y1=\"{2:.2f}\" x2=\"{1}\" y2=\"{2:.2f}\" stroke=\"{3}\" stroke-width=\"1.5\" "
        "stroke-dasharray=\"6 4\"/>\n",
        kLeft, kLeft + pw, py(r.y), color);
    legend(r.name, color, true);
  }
  svg += "</svg>\n";
  return svg;
}

std::string default_run_name(const fs::path& csv) {
  const auto parent = csv.parent_path().filename().string();
  if (!parent.empty() && parent != "." && parent != "..") return parent;
  return csv.stem().string();
}

namespace {

template <typename F>
Series series_of(const PlotRun& run, F field) {
  Series s{run.name, {}, {}};
  for (const auto& r : run.records) {
    s.x.push_back(static_cast<double>(r.epoch));
    s.y.push_back(field(r));
  }
  return s;
}

bool constant_tau(const PlotRun& run) {
  if (run.records.empty()) return false;
  const double t = run.records.front().tau_mean;
  return std::all_of(run.records.begin(), run.records.end(), [t](const trainer::MetricsRecord& r) {
    return r.tau_mean == t && r.tau_min == t && r.tau_max == t;
  });
}

}  // namespace

LineChart loss_chart(std::span<const PlotRun> runs) {
  LineChart c{"Distillation loss", "epoch", "kd_loss", {}, {}};
  for (const auto& run : runs) c.series.push_back(series_of(run, [](const auto& r) { return r.kd_loss; }));
  return c;
}

LineChart tau_chart(std::span<const PlotRun> runs, std::span<const double> reference_taus) {
  LineChart c{"Temperature", "epoch", "tau (epoch mean)", {}, {}};
  for (const auto& run : runs) {
    if (constant_tau(run)) {
      c.references.push_back({run.name, run.records.front().tau_mean});
    } else {
      c.series.push_back(series_of(run, [](const auto& r) { return r.tau_mean; }));
    }
  }
  for (double t : reference_taus) {
    c.references.push_back({"tau=" + trainer::format_number(t), t});
  }
  return c;
}

LineChart lambda_chart(std::span<const PlotRun> runs) {
  LineChart c{"Curriculum lambda", "epoch", "lambda", {}, {}};
  for (const auto& run : runs) c.series.push_back(series_of(run, [](const auto& r) { return r.lambda; }));
  return c;
}

PlotOutputs write_plots(std::span<const PlotRun> runs, const fs::path& out_dir,
                        std::span<const double> reference_taus) {
  if (runs.empty()) throw ValidationError("plot needs at least one run");
  fs::create_directories(out_dir);
  PlotOutputs out{out_dir / "loss.svg", out_dir / "tau.svg", out_dir / "lambda.svg",
                  out_dir / "merged.csv"};
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
    if (!f) throw RunError("cannot write " + p.string());
  };
  write(out.loss, render_svg(loss_chart(runs)));
  write(out.tau, render_svg(tau_chart(runs, reference_taus)));
  write(out.lambda, render_svg(lambda_chart(runs)));

  std::ofstream merged(out.merged);
  merged << "run," << trainer::kMetricsHeader << '\n';
  for (const auto& run : runs) {
    for (const auto& r : run.records) {
      using trainer::format_number;
      merged << run.name << ',' << r.epoch << ',' << format_number(r.ce_loss) << ','
             << format_number(r.kd_loss) << ',' << format_number(r.train_acc) << ','
             << format_number(r.test_acc) << ',' << format_number(r.tau_mean) << ','
             << format_number(r.tau_min) << ',' << format_number(r.tau_max) << ','
             << format_number(r.lambda) << ',' << format_number(r.seconds) << '\n';
    }
  }
  if (!merged) throw RunError("cannot write " + out.merged.string());
  return out;
}

}  // namespace ctkd::app
