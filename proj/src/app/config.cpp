// SPDX-License-Identifier: Apache-2.0
#include "ctkd/app/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <type_traits>

#include <fmt/format.h>

#include "ctkd/errors.hpp"
#include "ctkd/rng.hpp"

namespace ctkd::app {

using nlohmann::json;

namespace {

template <typename T>
constexpr const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  else if constexpr (std::is_same_v<T, std::string>) return "a string";
  else if constexpr (std::is_floating_point_v<T>) return "a number";
  else if constexpr (std::is_unsigned_v<T>) return "a non-negative integer";
  else return "an array";
}

template <typename T>
bool matches(const json& v) {
  if constexpr (std::is_same_v<T, bool>) return v.is_boolean();
  else if constexpr (std::is_same_v<T, std::string>) return v.is_string();
  else if constexpr (std::is_floating_point_v<T>) return v.is_number();
  else if constexpr (std::is_unsigned_v<T>) return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  else {
    if (!v.is_array()) return false;
    for (const auto& e : v) {
      if (!matches<typename T::value_type>(e)) return false;
    }
    return true;
  }
}

/// Reads one JSON object, remembering which keys were consumed so that the
/// rest can be reported as unknown.
class Section {
public:
  Section(const json* obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {
    if (obj_ && !obj_->is_object()) {
      errors_.push_back(path_ + ": expected an object");
      obj_ = nullptr;
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    known_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    const auto& v = obj_->at(key);
    if (!matches<T>(v)) {
      errors_.push_back(fmt::format("{}: must be {}", name(key), type_name<T>()));
      return;
    }
    out = v.get<T>();
  }

  Section child(const char* key) {
    known_.insert(key);
    const json* sub = obj_ && obj_->contains(key) ? &obj_->at(key) : nullptr;
    return Section(sub, name(key), errors_);
  }

  void finish() {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items()) {
      if (!known_.count(k)) errors_.push_back(fmt::format("{}: unknown key", name(k)));
    }
  }

private:
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> known_;
};

void read_net(Section s, NetConfig& net) {
  s.get("arch", net.arch);
  s.get("hidden", net.hidden);
  s.finish();
}

json net_json(const NetConfig& n) { return {{"arch", n.arch}, {"hidden", n.hidden}}; }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  Section root(&doc, "", errors);
  root.get("seed", cfg.seed);
  root.get("output_dir", cfg.output_dir);
  {
    auto s = root.child("dataset");
    auto& d = cfg.dataset;
    s.get("kind", d.kind);
    s.get("classes", d.classes);
    s.get("dim", d.dim);
    s.get("train_per_class", d.train_per_class);
    s.get("test_per_class", d.test_per_class);
    s.get("spread", d.spread);
    s.get("modes_per_class", d.modes_per_class);
    s.get("seed", d.seed);
    s.get("train_images", d.train_images);
    s.get("train_labels", d.train_labels);
    s.get("test_images", d.test_images);
    s.get("test_labels", d.test_labels);
    s.get("cache", d.cache);
    auto a = s.child("augment");
    a.get("enabled", d.augment.enabled);
    a.get("pad", d.augment.pad);
    a.get("flip_prob", d.augment.flip_prob);
    a.finish();
    s.finish();
  }
  {
    auto s = root.child("teacher");
    s.get("arch", cfg.teacher.net.arch);
    s.get("hidden", cfg.teacher.net.hidden);
    s.get("epochs", cfg.teacher.epochs);
    s.get("checkpoint", cfg.teacher.checkpoint);
    s.finish();
  }
  read_net(root.child("student"), cfg.student);
  {
    auto s = root.child("temperature");
    auto& t = cfg.temperature;
    s.get("mode", t.mode);
    s.get("tau_init", t.tau_init);
    s.get("tau_range", t.tau_range);
    s.get("global_init", t.global_init);
    s.get("inter_channels", t.inter_channels);
    s.get("fixed_tau", t.fixed_tau);
    s.finish();
  }
  {
    auto s = root.child("curriculum");
    auto& c = cfg.curriculum;
    s.get("strategy", c.strategy);
    s.get("lambda_min", c.lambda_min);
    s.get("lambda_max", c.lambda_max);
    s.get("e_loops", c.e_loops);
    s.get("fixed_lambda", c.fixed_lambda);
    s.get("delay_tau", c.delay_tau);
    s.finish();
  }
  {
    auto s = root.child("loss");
    s.get("alpha_ce", cfg.alpha_ce);
    s.get("alpha_kd", cfg.alpha_kd);
    s.finish();
  }
  {
    auto s = root.child("optimizer");
    auto& o = cfg.optimizer;
    s.get("lr", o.lr);
    s.get("momentum", o.momentum);
    s.get("weight_decay", o.weight_decay);
    s.get("milestones", o.milestones);
    s.get("decay", o.decay);
    s.finish();
  }
  {
    auto s = root.child("train");
    s.get("epochs", cfg.epochs);
    s.get("batch_size", cfg.batch_size);
    s.get("record_wall_clock", cfg.record_wall_clock);
    s.finish();
  }
  {
    auto s = root.child("sweep");
    s.get("taus", cfg.sweep.taus);
    s.get("seeds", cfg.sweep.seeds);
    s.get("include_learned", cfg.sweep.include_learned);
    s.finish();
  }
  root.finish();

  for (auto& e : validate(cfg)) errors.push_back(std::move(e));
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path.string()});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({fmt::format("{}: not valid JSON: {}", path.string(), e.what())});
  }
  return parse_config(doc);
}

std::vector<std::string> validate(const ExperimentConfig& cfg) {
  std::vector<std::string> v;
  auto need = [&v](bool ok, std::string msg) {
    if (!ok) v.push_back(std::move(msg));
  };
  const auto& d = cfg.dataset;
  need(d.kind == "blobs" || d.kind == "idx" || d.kind == "cache",
       "dataset.kind: must be blobs, idx or cache");
  if (d.kind == "blobs") {
    need(d.classes >= 2, "dataset.classes: must be >= 2");
    need(d.dim > 0, "dataset.dim: must be positive");
    need(d.train_per_class > 0, "dataset.train_per_class: must be positive");
    need(d.test_per_class > 0, "dataset.test_per_class: must be positive");
    need(d.spread >= 0.0, "dataset.spread: must be >= 0");
    need(d.modes_per_class > 0, "dataset.modes_per_class: must be positive");
  }
  if (d.kind == "idx") {
    need(!d.train_images.empty(), "dataset.train_images: required for idx datasets");
    need(!d.train_labels.empty(), "dataset.train_labels: required for idx datasets");
    need(!d.test_images.empty(), "dataset.test_images: required for idx datasets");
    need(!d.test_labels.empty(), "dataset.test_labels: required for idx datasets");
  }
  if (d.kind == "cache") need(!d.cache.empty(), "dataset.cache: required for cache datasets");
  need(d.augment.flip_prob >= 0.0 && d.augment.flip_prob <= 1.0,
       "dataset.augment.flip_prob: must be in [0, 1]");

  auto check_net = [&](const NetConfig& n, const std::string& where) {
    need(n.arch == "linear" || n.arch == "mlp" || n.arch == "small_cnn",
         where + ".arch: must be linear, mlp or small_cnn");
    if (n.arch != "mlp") need(n.hidden.empty(), where + ".hidden: only mlp takes hidden layers");
    for (auto h : n.hidden) need(h > 0, where + ".hidden: widths must be positive");
  };
  check_net(cfg.teacher.net, "teacher");
  check_net(cfg.student, "student");

  const auto& t = cfg.temperature;
  need(t.mode == "global" || t.mode == "instance" || t.mode == "fixed",
       "temperature.mode: must be global, instance or fixed");
  need(t.tau_init > 0.0, "temperature.tau_init: must be positive");
  need(t.tau_range > 0.0, "temperature.tau_range: must be positive");
  need(std::isfinite(t.global_init), "temperature.global_init: must be finite");
  need(t.inter_channels > 0, "temperature.inter_channels: must be positive");
  need(t.fixed_tau > 0.0, "temperature.fixed_tau: must be positive");

  const auto& c = cfg.curriculum;
  bool strategy_ok = true;
  try {
    curriculum::parse_strategy(c.strategy);
  } catch (const ValidationError&) {
    strategy_ok = false;
  }
  need(strategy_ok, "curriculum.strategy: must be cosine, linear, fixed or delayed");
  need(c.lambda_min >= 0.0, "curriculum.lambda_min: must be >= 0");
  need(c.lambda_min <= c.lambda_max, "curriculum.lambda_min: must not exceed lambda_max");
  need(c.e_loops > 0, "curriculum.e_loops: must be positive");
  need(c.fixed_lambda >= 0.0, "curriculum.fixed_lambda: must be >= 0");
  need(c.delay_tau > 0.0, "curriculum.delay_tau: must be positive");

  need(cfg.alpha_ce >= 0.0, "loss.alpha_ce: must be >= 0");
  need(cfg.alpha_kd >= 0.0, "loss.alpha_kd: must be >= 0");
  const auto& o = cfg.optimizer;
  need(o.lr > 0.0, "optimizer.lr: must be positive");
  need(o.momentum >= 0.0 && o.momentum < 1.0, "optimizer.momentum: must be in [0, 1)");
  need(o.weight_decay >= 0.0, "optimizer.weight_decay: must be >= 0");
  need(o.decay > 0.0, "optimizer.decay: must be positive");
  for (double m : o.milestones) {
    need(m > 0.0 && m < 1.0, "optimizer.milestones: entries must be fractions in (0, 1)");
  }
  need(cfg.batch_size > 0, "train.batch_size: must be positive");
  need(!cfg.sweep.taus.empty(), "sweep.taus: needs at least one value");
  for (double tau : cfg.sweep.taus) need(tau > 0.0, "sweep.taus: values must be positive");
  need(!cfg.sweep.seeds.empty(), "sweep.seeds: needs at least one seed");
  need(!cfg.output_dir.empty(), "output_dir: must not be empty");
  return v;
}

json to_json(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  const auto& t = cfg.temperature;
  const auto& c = cfg.curriculum;
  const auto& o = cfg.optimizer;
  return {
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
      {"dataset",
       {{"kind", d.kind},
        {"classes", d.classes},
        {"dim", d.dim},
        {"train_per_class", d.train_per_class},
        {"test_per_class", d.test_per_class},
        {"spread", d.spread},
        {"modes_per_class", d.modes_per_class},
        {"seed", d.seed},
        {"train_images", d.train_images},
        {"train_labels", d.train_labels},
        {"test_images", d.test_images},
        {"test_labels", d.test_labels},
        {"cache", d.cache},
        {"augment",
         {{"enabled", d.augment.enabled}, {"pad", d.augment.pad}, {"flip_prob", d.augment.flip_prob}}}}},
      {"teacher",
       {{"arch", cfg.teacher.net.arch},
        {"hidden", cfg.teacher.net.hidden},
        {"epochs", cfg.teacher.epochs},
        {"checkpoint", cfg.teacher.checkpoint}}},
      {"student", net_json(cfg.student)},
      {"temperature",
       {{"mode", t.mode},
        {"tau_init", t.tau_init},
        {"tau_range", t.tau_range},
        {"global_init", t.global_init},
        {"inter_channels", t.inter_channels},
        {"fixed_tau", t.fixed_tau}}},
      {"curriculum",
       {{"strategy", c.strategy},
        {"lambda_min", c.lambda_min},
        {"lambda_max", c.lambda_max},
        {"e_loops", c.e_loops},
        {"fixed_lambda", c.fixed_lambda},
        {"delay_tau", c.delay_tau}}},
      {"loss", {{"alpha_ce", cfg.alpha_ce}, {"alpha_kd", cfg.alpha_kd}}},
      {"optimizer",
       {{"lr", o.lr},
        {"momentum", o.momentum},
        {"weight_decay", o.weight_decay},
        {"milestones", o.milestones},
        {"decay", o.decay}}},
      {"train",
       {{"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"record_wall_clock", cfg.record_wall_clock}}},
      {"sweep",
       {{"taus", cfg.sweep.taus},
        {"seeds", cfg.sweep.seeds},
        {"include_learned", cfg.sweep.include_learned}}},
  };
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.tau_fixed) {
    cfg.temperature.mode = "fixed";
    cfg.temperature.fixed_tau = *o.tau_fixed;
  }
  if (o.strategy) cfg.curriculum.strategy = *o.strategy;
  auto errors = validate(cfg);
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

std::string config_hash(const ExperimentConfig& cfg) {
  return fmt::format("{:016x}", fnv1a(to_json(cfg).dump()));
}

std::filesystem::path ExperimentConfig::teacher_checkpoint() const {
  if (!teacher.checkpoint.empty()) return teacher.checkpoint;
  return std::filesystem::path(output_dir) / "teacher.ckpt";
}

std::size_t ExperimentConfig::input_dim() const { return dataset.dim; }

trainer::TrainSettings ExperimentConfig::train_settings(std::size_t n_epochs) const {
  trainer::TrainSettings s;
  s.epochs = n_epochs;
  s.batch_size = batch_size;
  s.optimizer = optimizer;
  s.seed = seed;
  s.augment = dataset.augment;
  s.record_wall_clock = record_wall_clock;
  return s;
}

namespace {

models::ModelSpec net_spec(const NetConfig& n, std::size_t input_dim, std::size_t classes,
                           std::uint64_t seed) {
  models::ModelSpec spec;
  spec.arch = models::parse_arch(n.arch);
  spec.input_dim = input_dim;
  spec.widths = n.hidden;
  spec.widths.push_back(classes);
  spec.classes = classes;
  spec.seed = seed;
  return spec;
}

}  // namespace

models::ModelSpec ExperimentConfig::teacher_spec(std::size_t in, std::size_t classes) const {
  return net_spec(teacher.net, in, classes, mix_seed(seed, streams::teacher_init));
}

models::ModelSpec ExperimentConfig::student_spec(std::size_t in, std::size_t classes) const {
  return net_spec(student, in, classes, mix_seed(seed, streams::student_init));
}

curriculum::CurriculumSchedule ExperimentConfig::schedule() const {
  const auto& c = curriculum;
  switch (curriculum::parse_strategy(c.strategy)) {
    case curriculum::Strategy::cosine:
      return curriculum::CurriculumSchedule::cosine(c.lambda_min, c.lambda_max, c.e_loops);
    case curriculum::Strategy::linear:
      return curriculum::CurriculumSchedule::linear(c.lambda_min, c.lambda_max, c.e_loops);
    case curriculum::Strategy::fixed_lambda:
      return curriculum::CurriculumSchedule::fixed(c.fixed_lambda);
    case curriculum::Strategy::delayed_fixed:
      return curriculum::CurriculumSchedule::delayed(c.fixed_lambda, c.e_loops, c.delay_tau);
  }
  return curriculum::CurriculumSchedule::cosine();
}

trainer::DistillConfig ExperimentConfig::distill_config(std::size_t in, std::size_t classes) const {
  trainer::DistillConfig dc;
  dc.student = student_spec(in, classes);
  if (temperature.mode == "fixed") {
    dc.fixed_tau = temperature.fixed_tau;
  } else {
    distill::TemperatureSpec ts;
    ts.kind = distill::parse_temperature_kind(temperature.mode);
    ts.tau_init = temperature.tau_init;
    ts.tau_range = temperature.tau_range;
    ts.global_init = temperature.global_init;
    ts.inter_channels = temperature.inter_channels;
    ts.classes = classes;
    dc.temperature = ts;
  }
  dc.curriculum = schedule();
  dc.alpha_ce = alpha_ce;
  dc.alpha_kd = alpha_kd;
  dc.train = train_settings(epochs);
  return dc.with_seed(seed);
}

}  // namespace ctkd::app
