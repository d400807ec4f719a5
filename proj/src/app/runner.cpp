// SPDX-License-Identifier: Apache-2.0
#include "ctkd/app/runner.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ctkd/data/idx.hpp"
#include "ctkd/errors.hpp"

namespace ctkd::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path prepare_output(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RunError(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
  return dir;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw RunError("cannot write " + path.string());
}

json record_json(const trainer::MetricsRecord& r) {
  return {{"epoch", r.epoch},         {"ce_loss", r.ce_loss},   {"kd_loss", r.kd_loss},
          {"train_acc", r.train_acc}, {"test_acc", r.test_acc}, {"tau_mean", r.tau_mean},
          {"tau_min", r.tau_min},     {"tau_max", r.tau_max},   {"lambda", r.lambda}};
}

json summary_json(const std::string& command, const ExperimentConfig& cfg,
                  std::span<const trainer::MetricsRecord> metrics, const fs::path& checkpoint) {
  json s = {{"command", command},
            {"seed", cfg.seed},
            {"config_hash", config_hash(cfg)},
            {"epochs", metrics.size()},
            {"checkpoint", checkpoint.string()},
            {"config", to_json(cfg)}};
  s["final"] = metrics.empty() ? json(nullptr) : record_json(metrics.back());
  return s;
}

trainer::EpochCallback epoch_logger(std::ostream& log, const std::string& tag) {
  return [&log, tag](const trainer::MetricsRecord& r) {
    fmt::print(log, "[{}] epoch {} ce={:.4f} kd={:.4f} train_acc={:.4f} test_acc={:.4f} tau={:.3f} lambda={:.3f}\n",
               tag, r.epoch, r.ce_loss, r.kd_loss, r.train_acc, r.test_acc, r.tau_mean, r.lambda);
  };
}

void write_run(const fs::path& dir, const std::string& command, const ExperimentConfig& cfg,
               std::span<const trainer::MetricsRecord> metrics, const fs::path& checkpoint) {
  trainer::write_metrics_csv(dir / "metrics.csv", metrics);
  write_json(dir / "config.json", to_json(cfg));
  write_json(dir / "summary.json", summary_json(command, cfg, metrics, checkpoint));
}

models::Model load_teacher(const ExperimentConfig& cfg) {
  const auto path = cfg.teacher_checkpoint();
  if (!fs::exists(path)) throw RunError("teacher checkpoint not found: " + path.string());
  return models::unpack_model(models::read_checkpoint(path));
}

}  // namespace

data::DatasetPair load_dataset(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  if (d.kind == "cache") return data::read_dataset_cache(d.cache);
  if (d.kind == "idx") {
    data::DatasetPair pair{data::load_idx(d.train_images, d.train_labels),
                           data::load_idx(d.test_images, d.test_labels)};
    const auto classes = std::max(pair.train.classes, pair.test.classes);
    pair.train.classes = pair.test.classes = classes;
    pair.train.split = "train";
    pair.test.split = "test";
    return pair;
  }
  data::BlobSpec spec;
  spec.classes = d.classes;
  spec.train_per_class = d.train_per_class;
  spec.test_per_class = d.test_per_class;
  spec.dim = d.dim;
  spec.spread = d.spread;
  spec.modes_per_class = d.modes_per_class;
  spec.seed = d.seed;
  auto pair = data::gen_blobs(spec);
  const auto standardizer = data::Standardizer::fit(pair.train);
  standardizer.apply(pair.train);
  standardizer.apply(pair.test);
  return pair;
}

std::size_t class_count(const data::DatasetPair& data) {
  return std::max(data.train.classes, data.test.classes);
}

models::Checkpoint pack_student(const trainer::DistillResult& result) {
  models::Checkpoint ckpt;
  models::pack_model(ckpt, result.student);
  ckpt.meta["role"] = "student";
  if (result.temperature) {
    ckpt.meta["temperature"] = distill::to_json(result.temperature->spec());
    ckpt.add_group("temperature", result.temperature->parameters());
  }
  return ckpt;
}

std::optional<distill::TemperatureModule> unpack_temperature(const models::Checkpoint& ckpt) {
  if (!ckpt.meta.contains("temperature")) return std::nullopt;
  const auto spec = distill::temperature_spec_from_json(ckpt.meta.at("temperature"));
  return distill::TemperatureModule::from_parameters(spec, ckpt.group("temperature"));
}

void cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = prepare_output(cfg);
  const auto data = load_dataset(cfg);
  data::write_dataset_cache(dir / "dataset.bin", data);
  data::export_csv(dir / "train.csv", data.train);
  data::export_csv(dir / "test.csv", data.test);
  write_json(dir / "config.json", to_json(cfg));
  fmt::print(log, "wrote {} train / {} test samples ({} classes, dim {}) to {}\n", data.train.size(),
             data.test.size(), class_count(data), data.train.dim, dir.string());
}

void cmd_train_teacher(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = prepare_output(cfg);
  const auto data = load_dataset(cfg);
  const auto spec = cfg.teacher_spec(data.train.dim, class_count(data));
  const auto result = trainer::train_supervised(spec, data, cfg.train_settings(cfg.teacher.epochs),
                                                epoch_logger(log, "teacher"));
  models::Checkpoint ckpt;
  models::pack_model(ckpt, result.model);
  ckpt.meta["role"] = "teacher";
  const auto path = cfg.teacher_checkpoint();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  models::write_checkpoint(path, ckpt);
  write_run(dir, "train-teacher", cfg, result.metrics, path);
  fmt::print(log, "teacher test_acc {}\n", trainer::format_number(trainer::evaluate(result.model, data.test)));
}

void cmd_train_student(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = prepare_output(cfg);
  const auto data = load_dataset(cfg);
  const auto spec = cfg.student_spec(data.train.dim, class_count(data));
  const auto result = trainer::train_supervised(spec, data, cfg.train_settings(cfg.epochs),
                                                epoch_logger(log, "student"));
  models::Checkpoint ckpt;
  models::pack_model(ckpt, result.model);
  ckpt.meta["role"] = "student";
  const auto path = dir / "student.ckpt";
  models::write_checkpoint(path, ckpt);
  write_run(dir, "train-student", cfg, result.metrics, path);
}

void cmd_distill(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = prepare_output(cfg);
  const auto teacher = load_teacher(cfg);
  const auto data = load_dataset(cfg);
  const auto dc = cfg.distill_config(data.train.dim, class_count(data));
  const auto path = dir / "student.ckpt";
  try {
    const auto result = trainer::distill(teacher, data, dc, epoch_logger(log, "distill"));
    models::write_checkpoint(path, pack_student(result));
    write_run(dir, "distill", cfg, result.metrics, path);
  } catch (const trainer::NonFiniteLoss& e) {
    models::write_checkpoint(path, pack_student(*e.partial));
    write_run(dir, "distill", cfg, e.partial->metrics, path);
    write_json(dir / "diagnostics.json", {{"error", e.what()},
                                          {"epoch", e.epoch},
                                          {"batch", e.batch},
                                          {"completed_epochs", e.partial->metrics.size()},
                                          {"checkpoint", path.string()}});
    throw;
  }
}

double cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint, std::ostream& out) {
  if (!fs::exists(checkpoint)) throw RunError("checkpoint not found: " + checkpoint.string());
  const auto model = models::unpack_model(models::read_checkpoint(checkpoint));
  const auto data = load_dataset(cfg);
  const double acc = trainer::evaluate(model, data.test);
  fmt::print(out, "{}\n", trainer::format_number(acc));
  return acc;
}

void write_sweep_csv(const fs::path& path, std::span<const trainer::GridRow> rows,
                     std::span<const std::uint64_t> seeds) {
  std::ofstream out(path);
  out << "tau,mean";
  for (auto s : seeds) out << ",seed_" << s;
  out << '\n';
  for (const auto& row : rows) {
    out << row.label() << ',' << trainer::format_number(row.mean);
    for (double a : row.accuracies) out << ',' << trainer::format_number(a);
    out << '\n';
  }
  if (!out) throw RunError("cannot write " + path.string());
}

std::vector<trainer::GridRow> cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = prepare_output(cfg);
  const auto teacher = load_teacher(cfg);
  const auto data = load_dataset(cfg);
  const auto base = cfg.distill_config(data.train.dim, class_count(data));
  const auto rows = trainer::grid_search_tau(teacher, data, base, cfg.sweep.taus, cfg.sweep.seeds,
                                             cfg.sweep.include_learned);
  write_sweep_csv(dir / "sweep.csv", rows, cfg.sweep.seeds);
  write_json(dir / "config.json", to_json(cfg));
  fmt::print(log, "{:>8}  {:>8}\n", "tau", "mean_acc");
  for (const auto& row : rows) fmt::print(log, "{:>8}  {:>8.4f}\n", row.label(), row.mean);
  return rows;
}

}  // namespace ctkd::app
