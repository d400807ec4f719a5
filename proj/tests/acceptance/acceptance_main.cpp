// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ctkd/app/config.hpp"
#include "ctkd/app/runner.hpp"
#include "ctkd/autodiff/gradcheck.hpp"
#include "ctkd/autodiff/ops.hpp"
#include "ctkd/curriculum/schedule.hpp"
#include "ctkd/data/idx.hpp"
#include "ctkd/distill/grl.hpp"
#include "ctkd/distill/losses.hpp"
#include "ctkd/distill/temperature.hpp"
#include "ctkd/errors.hpp"
#include "ctkd/trainer/trainer.hpp"
#include "support.hpp"

using namespace ctkd;
using ad::Tensor;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string csv_of(std::span<const trainer::MetricsRecord> m) {
  std::ostringstream out;
  trainer::write_metrics_csv(out, m);
  return out.str();
}

// The desk-scale blobs task: 10 classes, 20 dims, 2000 train / 1000 test.
const app::ExperimentConfig& desk_config() {
  static const auto cfg = app::parse_config(json::object());
  return cfg;
}

const data::DatasetPair& desk_data() {
  static const auto data = app::load_dataset(desk_config());
  return data;
}

models::Model train_desk_teacher() {
  const auto& cfg = desk_config();
  const auto& d = desk_data();
  return trainer::train_supervised(cfg.teacher_spec(d.train.dim, app::class_count(d)), d,
                                   cfg.train_settings(cfg.teacher.epochs))
      .model;
}

const models::Model& desk_teacher() {
  static const auto teacher = train_desk_teacher();
  return teacher;
}

trainer::DistillConfig ctkd_config() {
  const auto& d = desk_data();
  return desk_config().distill_config(d.train.dim, app::class_count(d));
}

trainer::DistillConfig vanilla_config() {
  auto c = ctkd_config();
  c.temperature.reset();
  c.fixed_tau = 4.0;
  return c;
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

struct DeskRuns {
  double teacher_acc = 0.0;
  std::vector<double> base, vanilla, ctkd;
  std::vector<double> vanilla_kd, ctkd_kd;  // mean kd_loss over epochs 10..60 per seed
  std::vector<std::string> csvs;            // every metrics CSV, in run order
  double seconds = 0.0;
};

double late_kd(std::span<const trainer::MetricsRecord> m) {
  // Epochs 10 through 60 counted from 1, i.e. indices 9..59.
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : m) {
    if (r.epoch + 1 >= 10) {
      total += r.kd_loss;
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

DeskRuns run_desk(const models::Model& teacher) {
  const auto start = Clock::now();
  DeskRuns out;
  const auto& cfg = desk_config();
  const auto& d = desk_data();
  out.teacher_acc = trainer::evaluate(teacher, d.test);
  for (auto seed : kSeeds) {
    auto seeded = cfg;
    seeded.seed = seed;
    const auto base =
        trainer::train_supervised(seeded.student_spec(d.train.dim, app::class_count(d)), d,
                                  seeded.train_settings(seeded.epochs));
    out.base.push_back(base.metrics.back().test_acc);
    out.csvs.push_back(csv_of(base.metrics));

    const auto vanilla = trainer::distill(teacher, d, vanilla_config().with_seed(seed));
    out.vanilla.push_back(vanilla.metrics.back().test_acc);
    out.vanilla_kd.push_back(late_kd(vanilla.metrics));
    out.csvs.push_back(csv_of(vanilla.metrics));

    const auto ctkd = trainer::distill(teacher, d, ctkd_config().with_seed(seed));
    out.ctkd.push_back(ctkd.metrics.back().test_acc);
    out.ctkd_kd.push_back(late_kd(ctkd.metrics));
    out.csvs.push_back(csv_of(ctkd.metrics));
  }
  out.seconds = seconds_since(start);
  return out;
}

const DeskRuns& desk_runs() {
  static const auto runs = run_desk(desk_teacher());
  return runs;
}

// ---------------------------------------------------------------------------

Outcome gradient_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  double worst_s = 0.0, worst_tau = 0.0, worst_mlp = 0.0;
  constexpr int kCases = 24;
  // Step balancing truncation (h^2) against f64 rounding (1/h); a step moves a
  // pre-activation by at most 5 * kStep, far inside kKinkMargin.
  constexpr double kStep = 1e-4;
  constexpr double kKinkMargin = 1e-2;
  int redrawn = 0;
  for (int i = 0; i < kCases; ++i) {
    const std::size_t b = 1 + rng() % 8, c = 2 + rng() % 9;
    auto t = testkit::random_tensor({b, c}, rng, -5, 5, false);
    auto s = testkit::random_tensor({b, c}, rng, -5, 5);
    auto tau = testkit::random_tensor({1}, rng, 1.0, 21.0);
    auto kd = [&] { return distill::kd_loss(t, s, tau); };
    worst_s = std::max(worst_s, ad::finite_difference_check(kd, s, kStep));
    worst_tau = std::max(worst_tau, ad::finite_difference_check(kd, tau, kStep));

    // Central differences are meaningless across a relu kink, so redraw the
    // MLP until every hidden pre-activation sits well clear of zero.
    auto s_frozen = s.detach();
    for (;;) {
      distill::TemperatureSpec spec;
      spec.kind = distill::TemperatureKind::instance;
      spec.classes = c;
      spec.inter_channels = 32;
      spec.seed = rng();
      auto m = distill::TemperatureModule::build(spec);
      const auto pre = ad::add_bias(ad::matmul(ad::concat_rows(t, s_frozen), m.parameters()[0]),
                                    m.parameters()[1]);
      const auto v = pre.values();
      if (std::any_of(v.begin(), v.end(), [](double h) { return std::abs(h) < kKinkMargin; })) {
        ++redrawn;
        continue;
      }
      auto inst = [&] { return distill::kd_loss(t, s_frozen, m.predict(t, s_frozen)); };
      for (auto& p : m.parameters()) {
        worst_mlp = std::max(worst_mlp, ad::finite_difference_check(inst, p, kStep));
      }
      break;
    }
  }
  const double secs = seconds_since(start);
  const double worst = std::max({worst_s, worst_tau, worst_mlp});
  return {worst <= 1e-4 && secs < 10.0,
          fmt::format("{} cases (step {}, {} mlp draws near a relu kink redrawn), max rel err "
                      "student={:.2e} tau={:.2e} instance-mlp={:.2e}, {:.2f}s",
                      kCases, kStep, redrawn, worst_s, worst_tau, worst_mlp, secs)};
}

Outcome schedule_exactness() {
  const auto s = curriculum::CurriculumSchedule::cosine(0.0, 1.0, 10);
  bool ok = std::abs(s.lambda_at(0) - 0.0) <= 1e-12 && std::abs(s.lambda_at(5) - 0.5) <= 1e-12 &&
            std::abs(s.lambda_at(10) - 1.0) <= 1e-12 && std::abs(s.lambda_at(240) - 1.0) <= 1e-12;
  bool monotone = true;
  for (std::size_t e = 1; e <= 240; ++e) monotone = monotone && s.lambda_at(e) >= s.lambda_at(e - 1);
  return {ok && monotone, fmt::format("lambda(0)={} lambda(5)={} lambda(10)={} lambda(240)={} monotone={}",
                                      s.lambda_at(0), s.lambda_at(5), s.lambda_at(10), s.lambda_at(240),
                                      monotone)};
}

Outcome grl_contract() {
  std::mt19937_64 rng(7);
  bool forward_ok = true, backward_ok = true;
  int checked = 0;
  for (double lambda : {0.0, 0.5, 1.0, 10.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      auto x = testkit::random_tensor({4, 6}, rng, -10, 10);
      const auto a = testkit::random_tensor({4, 4}, rng, -1, 1, false);
      const auto w = testkit::random_tensor({4, 6}, rng, -1, 1, false);
      distill::GrlGate gate(lambda);
      const auto y = gate.apply(x);
      for (std::size_t i = 0; i < x.numel(); ++i) forward_ok = forward_ok && y.at(i) == x.at(i);

      // Linear graph: sum(w * (A @ x)).
      auto graph = [&](const Tensor& in) { return ad::sum(ad::mul(w, ad::matmul(a, in))); };
      graph(x).backward();
      const std::vector<double> plain(x.grad().begin(), x.grad().end());
      x.zero_grad();
      graph(gate.apply(x)).backward();
      for (std::size_t i = 0; i < plain.size(); ++i) {
        backward_ok = backward_ok && x.grad()[i] == -lambda * plain[i];
      }
      ++checked;
    }
  }
  return {forward_ok && backward_ok,
          fmt::format("{} graphs over lambda in {{0, 0.5, 1, 10}}: forward identical={}, backward exact={}",
                      checked, forward_ok, backward_ok)};
}

Outcome temperature_bounds() {
  const auto r = trainer::distill(desk_teacher(), desk_data(), ctkd_config().with_seed(1));
  bool inside = true;
  std::vector<double> means;
  for (const auto& m : r.metrics) {
    for (double t : {m.tau_mean, m.tau_min, m.tau_max}) inside = inside && t > 1.0 && t < 21.0;
    means.push_back(m.tau_mean);
  }
  const double mu = mean_of(means);
  double var = 0.0;
  for (double t : means) var += (t - mu) * (t - mu);
  const double sd = std::sqrt(var / static_cast<double>(means.size()));
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  return {inside && sd > 0.0, fmt::format("{} epochs, tau range [{:.4f}, {:.4f}], std across epochs {:.4f}",
                                          means.size(), *lo, *hi, sd)};
}

Outcome adversarial_ascent() {
  const auto& d = desk_data();
  std::mt19937_64 rng(99);
  int violations = 0, strict_needed = 0, strict_ok = 0, total = 0;
  double min_gain = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 50; ++i) {
    // A frozen, randomly initialized student and a random batch of 32 samples.
    const auto student = models::Model::build(models::linear_spec(d.train.dim, 10, rng()));
    std::vector<std::size_t> idx(32);
    for (auto& k : idx) k = rng() % d.train.size();
    const auto x = d.train.gather(idx);
    const auto t = desk_teacher().forward(x).detach();
    const auto s = student.forward(x).detach();

    for (auto kind : {distill::TemperatureKind::global, distill::TemperatureKind::instance}) {
      distill::TemperatureSpec spec;
      spec.kind = kind;
      spec.classes = 10;
      spec.global_init = std::uniform_real_distribution<double>(-4, 4)(rng);
      spec.seed = rng();
      auto module = distill::TemperatureModule::build(spec);
      trainer::SgdSettings sgd;
      sgd.lr = 1e-3;
      trainer::Sgd opt(sgd, 1);
      opt.add_group(module.parameters(), 0.0);
      distill::GrlGate gate(1.0);

      auto tau = module.predict(t, s);
      tau = Tensor::from(tau.shape(), {tau.values().begin(), tau.values().end()}, true);
      const auto probe = distill::kd_loss(t, s, tau);
      probe.backward();
      double tau_grad = 0.0;
      for (double g : tau.grad()) tau_grad = std::max(tau_grad, std::abs(g));

      const auto before = distill::kd_loss(t, s, gate.apply(module.predict(t, s)));
      opt.zero_grad();
      before.backward();
      opt.step();
      const double after = distill::kd_loss(t, s, module.predict(t, s)).item();
      const double gain = after - before.item();
      min_gain = std::min(min_gain, gain);
      ++total;
      if (after < before.item() - 1e-8) ++violations;
      if (tau_grad > 1e-6) {
        ++strict_needed;
        if (after > before.item()) ++strict_ok;
      }
    }
  }
  return {violations == 0 && strict_ok == strict_needed,
          fmt::format("{} steps (50 batches x global/instance): {} decreases, strict increase {}/{}, min gain {:.3e}",
                      total, violations, strict_ok, strict_needed, min_gain)};
}

struct Proc {
  int code;
  std::string err;
};

Proc run_cli(const std::string& exe, const std::string& args, const testkit::TempDir& dir) {
  const auto err = dir / "stderr.txt";
  const std::string cmd = exe + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testkit::slurp(err)};
}

Outcome vanilla_equivalence() {
  testkit::TempDir dir("acc_vanilla");
  std::ofstream(dir / "c.json") << json{{"output_dir", (dir / "teacher").string()},
                                        {"teacher", {{"checkpoint", (dir / "teacher.ckpt").string()}}}}
                                       .dump();
  const std::string cfg = "--config " + (dir / "c.json").string();
  if (run_cli(CTKD_CLI, cfg + " train-teacher", dir).code != 0) return {false, "teacher training failed"};
  const auto full = run_cli(CTKD_CLI, cfg + " --out " + (dir / "full").string() + " distill --tau-fixed 4", dir);
  const auto stripped =
      run_cli(CTKD_CLI_VANILLA, cfg + " --out " + (dir / "stripped").string() + " distill --tau-fixed 4", dir);
  if (full.code != 0 || stripped.code != 0) {
    return {false, fmt::format("distill exit codes {} / {}: {}{}", full.code, stripped.code, full.err, stripped.err)};
  }
  // The stripped build has no learnable temperature at all.
  const auto refused = run_cli(CTKD_CLI_VANILLA, cfg + " --out " + (dir / "refused").string() + " distill", dir);

  const auto a = testkit::slurp(dir / "full" / "metrics.csv");
  const auto b = testkit::slurp(dir / "stripped" / "metrics.csv");
  const bool same_csv = !a.empty() && a == b;
  const bool same_ckpt =
      testkit::slurp(dir / "full" / "student.ckpt") == testkit::slurp(dir / "stripped" / "student.ckpt");
  return {same_csv && same_ckpt && refused.code != 0,
          fmt::format("metrics.csv identical={} ({} bytes), student.ckpt identical={}, stripped build rejects "
                      "learned tau={}",
                      same_csv, a.size(), same_ckpt, refused.code != 0)};
}

Outcome desk_efficacy() {
  const auto& r = desk_runs();
  const double base = mean_of(r.base), van = mean_of(r.vanilla), ct = mean_of(r.ctkd);
  const double kd_v = mean_of(r.vanilla_kd), kd_c = mean_of(r.ctkd_kd);
  const bool teacher_ok = r.teacher_acc >= 0.95;
  const bool a = van > base && ct > base;
  const bool b = ct >= van - 0.005;
  const bool c = kd_c >= kd_v;
  const bool fast = r.seconds < 300.0;
  return {teacher_ok && a && b && c && fast,
          fmt::format("teacher {:.4f} (>=0.95: {}); means no-KD {:.4f}, vanilla {:.4f}, CTKD {:.4f}; "
                      "(a) both beat no-KD: {} (vanilla {}, CTKD {}); (b) CTKD >= vanilla-0.5pt: {}; "
                      "(c) kd_loss epochs 10-60 CTKD {:.4f} vs vanilla {:.4f}: {}; {:.1f}s",
                      r.teacher_acc, teacher_ok, base, van, ct, a, van > base, ct > base, b, kd_c, kd_v, c,
                      r.seconds)};
}

Outcome grid_search() {
  testkit::TempDir dir("acc_grid");
  const auto& cfg = desk_config();
  const auto rows = trainer::grid_search_tau(desk_teacher(), desk_data(), ctkd_config(), cfg.sweep.taus,
                                             std::vector<std::uint64_t>(std::begin(kSeeds), std::end(kSeeds)));
  app::write_sweep_csv(dir / "sweep.csv", rows, cfg.sweep.seeds);
  const auto text = testkit::slurp(dir / "sweep.csv");
  const auto lines = std::count(text.begin(), text.end(), '\n') - 1;
  double best_fixed = 0.0;
  std::string table;
  for (const auto& row : rows) {
    if (row.tau) best_fixed = std::max(best_fixed, row.mean);
    table += fmt::format("{}={:.4f} ", row.label(), row.mean);
  }
  const auto& learned = rows.back();
  const bool ok = rows.size() == 8 && lines == 8 && learned.label() == "learned" &&
                  learned.mean >= best_fixed - 0.01;
  return {ok, fmt::format("{} rows; {}; learned >= best fixed - 1pt: {}", lines, table,
                          learned.mean >= best_fixed - 0.01)};
}

Outcome determinism() {
  const auto& first = desk_runs();
  const auto second = run_desk(train_desk_teacher());
  std::size_t identical = 0;
  for (std::size_t i = 0; i < first.csvs.size(); ++i) identical += first.csvs[i] == second.csvs[i];
  return {identical == first.csvs.size() && !first.csvs.empty(),
          fmt::format("{}/{} metrics CSVs byte-identical on repeat", identical, first.csvs.size())};
}

Outcome idx_ingestion() {
  const std::filesystem::path dir = CTKD_FIXTURE_DIR;
  const auto img_raw = testkit::slurp(dir / "tiny-images.idx3-ubyte");
  const auto lbl_raw = testkit::slurp(dir / "tiny-labels.idx1-ubyte");
  const std::vector<std::uint8_t> img_bytes(img_raw.begin(), img_raw.end());
  const std::vector<std::uint8_t> lbl_bytes(lbl_raw.begin(), lbl_raw.end());

  const auto images = data::parse_idx_images(img_bytes);
  const auto labels = data::parse_idx_labels(lbl_bytes);
  const std::vector<std::uint8_t> expect_px{0, 128, 255, 1, 2, 3, 255, 254, 253, 10, 20, 30, 7, 0, 7, 0, 7, 0};
  const bool values = images.rows == 2 && images.cols == 3 && images.pixels == expect_px &&
                      labels == std::vector<std::uint8_t>{2, 0, 1};
  const bool round_trip =
      data::encode_idx_images(images) == img_bytes && data::encode_idx_labels(labels) == lbl_bytes;

  bool magic_rejected = false;
  auto bad = img_bytes;
  bad[2] = 0x09;
  try {
    data::parse_idx_images(bad);
  } catch (const FormatError& e) {
    magic_rejected = e.offset() == 0;
  }
  bool label_magic_rejected = false;
  try {
    data::parse_idx_labels(img_bytes);
  } catch (const FormatError&) {
    label_magic_rejected = true;
  }
  return {values && round_trip && magic_rejected && label_magic_rejected,
          fmt::format("fixture values={} byte round-trip={} bad image magic rejected={} wrong label magic "
                      "rejected={}",
                      values, round_trip, magic_rejected, label_magic_rejected)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"schedule exactness", schedule_exactness},
      {"gradient reversal contract", grl_contract},
      {"temperature bounds", temperature_bounds},
      {"local adversarial ascent", adversarial_ascent},
      {"vanilla equivalence", vanilla_equivalence},
      {"desk-scale efficacy", desk_efficacy},
      {"grid search harness", grid_search},
      {"determinism", determinism},
      {"idx ingestion", idx_ingestion},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << fmt::format("[{}] {:>2}. {}: {}", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail)
              << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failed, criteria.size()) << std::endl;
  return failed == 0 ? 0 : 1;
}
