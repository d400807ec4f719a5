// SPDX-License-Identifier: Apache-2.0
// ctkd: data generation, teacher training, distillation, evaluation, tau
// sweeps and charts. Exit codes: 0 success, 2 config error, 3 runtime error.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctkd/app/config.hpp"
#include "ctkd/app/plot.hpp"
#include "ctkd/app/runner.hpp"
#include "ctkd/errors.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

int fail(int code, const std::string& kind, const std::string& message,
         const std::vector<std::string>& violations = {}) {
  nlohmann::json err = {{"error", kind}, {"message", message}};
  if (!violations.empty()) err["violations"] = violations;
  std::cerr << err.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace ctkd;

  CLI::App app{"Curriculum temperature knowledge distillation"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--seed", seed, "Run seed (overrides the config)");
  app.add_option("--out", out_dir, "Output directory (overrides the config)");

  auto* gen = app.add_subcommand("gen-data", "Generate or load the dataset and cache it");
  auto* teacher = app.add_subcommand("train-teacher", "Train the teacher with cross-entropy");
  auto* student = app.add_subcommand("train-student", "Train the student without distillation");
  auto* distill = app.add_subcommand("distill", "Distill the teacher into the student");
  auto* eval = app.add_subcommand("eval", "Test accuracy of a checkpoint");
  auto* sweep = app.add_subcommand("sweep", "Fixed-tau grid search plus a learned-tau row");
  auto* plot = app.add_subcommand("plot", "Charts from metrics CSVs");

  std::optional<double> tau_fixed;
  std::optional<std::string> strategy;
  for (auto* sub : {distill, sweep}) {
    sub->add_option("--tau-fixed", tau_fixed, "Use this fixed temperature");
    sub->add_option("--strategy", strategy, "Curriculum: cosine|linear|fixed|delayed");
  }
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint (default <out>/student.ckpt)");

  std::vector<std::string> csvs, names;
  std::vector<double> ref_taus;
  plot->add_option("csv", csvs, "metrics.csv files")->required();
  plot->add_option("--name", names, "Run names, one per CSV");
  plot->add_option("--ref-tau", ref_taus, "Fixed-tau reference lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kConfigExit, "usage", e.what());
  }

  try {
    app::ExperimentConfig cfg =
        config_path.empty() ? app::parse_config(nlohmann::json::object()) : app::load_config(config_path);
    app::apply_overrides(cfg, {seed, out_dir, tau_fixed, strategy});

    if (*gen) app::cmd_gen_data(cfg, std::cerr);
    if (*teacher) app::cmd_train_teacher(cfg, std::cerr);
    if (*student) app::cmd_train_student(cfg, std::cerr);
    if (*distill) app::cmd_distill(cfg, std::cerr);
    if (*eval) {
      const std::filesystem::path ckpt =
          checkpoint.empty() ? std::filesystem::path(cfg.output_dir) / "student.ckpt"
                             : std::filesystem::path(checkpoint);
      app::cmd_eval(cfg, ckpt, std::cout);
    }
    if (*sweep) app::cmd_sweep(cfg, std::cout);
    if (*plot) {
      if (!names.empty() && names.size() != csvs.size()) {
        throw ConfigError({"plot: --name must be given once per CSV"});
      }
      std::vector<app::PlotRun> runs;
      for (std::size_t i = 0; i < csvs.size(); ++i) {
        runs.push_back({names.empty() ? app::default_run_name(csvs[i]) : names[i],
                        trainer::read_metrics_csv(csvs[i])});
      }
      const auto out = app::write_plots(runs, cfg.output_dir, ref_taus);
      std::cout << out.loss.string() << '\n'
                << out.tau.string() << '\n'
                << out.lambda.string() << '\n'
                << out.merged.string() << '\n';
    }
  } catch (const ConfigError& e) {
    return fail(kConfigExit, "config", e.what(), e.violations());
  } catch (const ValidationError& e) {
    return fail(kConfigExit, "validation", e.what());
  } catch (const FormatError& e) {
    return fail(kRuntimeExit, "format", e.what());
  } catch (const std::exception& e) {
    return fail(kRuntimeExit, "runtime", e.what());
  }
  return 0;
}
