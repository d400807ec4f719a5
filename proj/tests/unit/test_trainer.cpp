// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>


#include <gtest/gtest.h>

#include "ctkd/autodiff/ops.hpp"
#include "ctkd/data/dataset.hpp"
#include "ctkd/errors.hpp"
#include "ctkd/trainer/metrics.hpp"
#include "ctkd/trainer/optimizer.hpp"
#include "ctkd/trainer/trainer.hpp"
#include "support.hpp"

using namespace ctkd;
using ad::Tensor;
using testkit::TempDir;

namespace {

data::DatasetPair tiny_task() {
  data::BlobSpec s;
  s.classes = 3;
  s.train_per_class = 40;
  s.test_per_class = 20;
  s.dim = 4;
  s.spread = 0.6;
  s.seed = 5;
  auto d = data::gen_blobs(s);
  const auto st = data::Standardizer::fit(d.train);
  st.apply(d.train);
  st.apply(d.test);
  return d;
}

trainer::TrainSettings quick(std::size_t epochs, std::uint64_t seed = 1) {
  trainer::TrainSettings t;
  t.epochs = epochs;
  t.batch_size = 16;
  t.seed = seed;
  return t;
}

const models::Model& tiny_teacher() {
  static const auto teacher =
      trainer::train_supervised(models::mlp_spec(4, {16}, 3, 2), tiny_task(), quick(10)).model;
  return teacher;
}

trainer::DistillConfig learned_config(std::size_t epochs) {
  trainer::DistillConfig c;
  c.student = models::linear_spec(4, 3, 1);
  distill::TemperatureSpec t;
  t.classes = 3;
  c.temperature = t;
  c.curriculum = curriculum::CurriculumSchedule::cosine(0.0, 1.0, 3);
  c.train = quick(epochs);
  return c;
}

std::string csv_of(std::span<const trainer::MetricsRecord> m) {
  std::ostringstream out;
  trainer::write_metrics_csv(out, m);
  return out.str();
}

}  // namespace

TEST(SgdUpdate, DegenerateCases) {
  std::vector<double> theta{1.0, -2.0}, v{0.0, 0.0};
  const std::vector<double> g{0.5, 0.25};
  trainer::sgd_update(theta, g, v, 0.1, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(theta[0], 1.0 - 0.05);
  EXPECT_DOUBLE_EQ(theta[1], -2.0 - 0.025);

  std::vector<double> fixed{3.0}, v0{0.0};
  trainer::sgd_update(fixed, std::vector<double>{0.0}, v0, 0.1, 0.9, 0.0);
  EXPECT_EQ(fixed[0], 3.0);
}

TEST(SgdUpdate, TwoMomentumStepsMatchHandRecurrence) {
  const double lr = 0.05, m = 0.9, wd = 5e-4;
  std::vector<double> theta{0.3, -0.7}, v{0.0, 0.0};
  const std::vector<double> g1{0.2, -0.1}, g2{-0.4, 0.6};
  trainer::sgd_update(theta, g1, v, lr, m, wd);
  trainer::sgd_update(theta, g2, v, lr, m, wd);
  for (std::size_t i = 0; i < 2; ++i) {
    const double t0 = i == 0 ? 0.3 : -0.7;
    const double v1 = g1[i] + wd * t0;
    const double t1 = t0 - lr * v1;
    const double v2 = m * v1 + g2[i] + wd * t1;
    const double t2 = t1 - lr * v2;
    EXPECT_NEAR(theta[i], t2, 1e-12);
    EXPECT_NEAR(v[i], v2, 1e-12);
  }
}

TEST(LrSchedule, MilestonesAreFractionsOfTotal) {
  trainer::SgdSettings s;
  EXPECT_EQ(trainer::milestone_epochs(s, 240), (std::vector<std::size_t>{150, 180, 210}));
  EXPECT_DOUBLE_EQ(trainer::lr_at_epoch(s, 240, 149), 0.05);
  EXPECT_DOUBLE_EQ(trainer::lr_at_epoch(s, 240, 150), 0.005);
  EXPECT_NEAR(trainer::lr_at_epoch(s, 240, 239), 0.00005, 1e-18);
  EXPECT_EQ(trainer::milestone_epochs(s, 60), (std::vector<std::size_t>{38, 45, 53}));
  s.lr = 0.0;
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(Sgd, SkipsParametersWithoutGradient) {
  auto used = Tensor::from({1}, {1.0}, true);
  auto unused = Tensor::from({1}, {2.0}, true);
  trainer::Sgd opt({}, 10);
  opt.add_group({used, unused}, 0.1);
  ad::sum(ad::scale(used, 2.0)).backward();
  opt.step();
  EXPECT_NE(used.at(0), 1.0);
  EXPECT_EQ(unused.at(0), 2.0);
  opt.zero_grad();
  EXPECT_FALSE(used.has_grad());
}

TEST(Metrics, CsvRoundTripIsExact) {
  TempDir dir("metrics");
  std::vector<trainer::MetricsRecord> recs{{0, 0.1 + 0.2, 1.0 / 3.0, 0.5, 0.25, 11.0, 10.5, 11.5, 0.0, 0.0},
                                           {1, 1e-300, 2.0, 1.0, 0.75, 3.0, 3.0, 3.0, 1.0, 12.5}};
  trainer::write_metrics_csv(dir / "m.csv", recs);
  const auto text = testkit::slurp(dir / "m.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), trainer::kMetricsHeader);
  EXPECT_EQ(trainer::read_metrics_csv(dir / "m.csv"), recs);
}

TEST(Metrics, HeaderMismatchNamesColumn) {
  TempDir dir("metrics_bad");
  std::ofstream(dir / "m.csv") << "epoch,ce_loss,kd,train_acc,test_acc,tau_mean,tau_min,tau_max,lambda,seconds\n";
  try {
    trainer::read_metrics_csv(dir / "m.csv");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("kd_loss"), std::string::npos);
  }
  std::ofstream(dir / "n.csv") << trainer::kMetricsHeader << "\n0,1,2,x,4,5,6,7,8,9\n";
  EXPECT_THROW(trainer::read_metrics_csv(dir / "n.csv"), FormatError);
}

TEST(Evaluate, DegenerateModels) {
  // Bias-only linear model always predicting class 1.
  const auto spec = models::linear_spec(2, 2, 0);
  auto constant = models::Model::from_parameters(
      spec, {Tensor::zeros({2, 2}, true), Tensor::from({2}, {0.0, 1.0}, true)});
  data::Dataset one_class;
  one_class.dim = 2;
  one_class.classes = 2;
  one_class.features = {0.1, 0.2, -0.3, 0.4};
  one_class.labels = {1, 1};
  EXPECT_EQ(trainer::evaluate(constant, one_class), 1.0);

  // Perfect model on sign of the first feature, evaluated against swapped labels.
  auto perfect = models::Model::from_parameters(
      spec, {Tensor::from({2, 2}, {-1, 1, 0, 0}, true), Tensor::zeros({2}, true)});
  data::Dataset swapped;
  swapped.dim = 2;
  swapped.classes = 2;
  swapped.features = {1.0, 0.0, -1.0, 0.0};
  swapped.labels = {0, 1};
  EXPECT_EQ(trainer::evaluate(perfect, swapped), 0.0);
}

TEST(Evaluate, RandomInitNearChance) {
  data::BlobSpec s;  // balanced 10-class task
  s.classes = 10;
  s.dim = 20;
  s.seed = 7;
  const auto d = data::gen_blobs(s);
  const double acc = trainer::evaluate(models::Model::build(models::linear_spec(20, 10, 3)), d.test);
  EXPECT_GE(acc, 0.02);
  EXPECT_LE(acc, 0.25);
  EXPECT_EQ(acc, 0.16);
}

TEST(TrainSupervised, LearnsAndIsDeterministic) {
  const auto a = trainer::train_supervised(models::linear_spec(4, 3, 1), tiny_task(), quick(8));
  const auto b = trainer::train_supervised(models::linear_spec(4, 3, 1), tiny_task(), quick(8));
  ASSERT_EQ(a.metrics.size(), 8u);
  EXPECT_EQ(csv_of(a.metrics), csv_of(b.metrics));
  EXPECT_GE(a.metrics.back().test_acc, 0.8);
  for (const auto& r : a.metrics) {
    EXPECT_EQ(r.tau_mean, 1.0);
    EXPECT_EQ(r.lambda, 0.0);
    EXPECT_EQ(r.seconds, 0.0);
  }
}

TEST(TrainSupervised, ZeroEpochsReturnsInitialModel) {
  const auto spec = models::linear_spec(4, 3, 1);
  const auto r = trainer::train_supervised(spec, tiny_task(), quick(0));
  EXPECT_TRUE(r.metrics.empty());
  const auto init = models::Model::build(spec);
  EXPECT_EQ(trainer::evaluate(r.model, tiny_task().test), trainer::evaluate(init, tiny_task().test));
}

TEST(TrainSupervised, RejectsMismatchedData) {
  EXPECT_THROW(trainer::train_supervised(models::linear_spec(5, 3, 1), tiny_task(), quick(1)),
               ValidationError);
  EXPECT_THROW(trainer::train_supervised(models::linear_spec(4, 2, 1), tiny_task(), quick(1)),
               ValidationError);
}

TEST(Distill, ConfigNeedsExactlyOneTauSource) {
  auto c = learned_config(1);
  c.fixed_tau = 4.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c.temperature.reset();
  c.fixed_tau.reset();
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Distill, ClassMismatchRejected) {
  auto c = learned_config(1);
  c.student = models::linear_spec(4, 4, 1);
  c.temperature->classes = 4;
  EXPECT_THROW(trainer::distill(tiny_teacher(), tiny_task(), c), ValidationError);
}

TEST(Distill, LoggedLambdaFollowsSchedule) {
  const auto c = learned_config(6);
  const auto r = trainer::distill(tiny_teacher(), tiny_task(), c);
  ASSERT_EQ(r.metrics.size(), 6u);
  for (const auto& m : r.metrics) EXPECT_EQ(m.lambda, c.curriculum.lambda_at(m.epoch));
}

TEST(Distill, LearnedTauStaysInBoundsAndMoves) {
  const auto r = trainer::distill(tiny_teacher(), tiny_task(), learned_config(8));
  ASSERT_TRUE(r.temperature.has_value());
  for (const auto& m : r.metrics) {
    EXPECT_GT(m.tau_min, 1.0);
    EXPECT_LT(m.tau_max, 21.0);
    EXPECT_TRUE(std::isfinite(m.ce_loss));
    EXPECT_TRUE(std::isfinite(m.kd_loss));
  }
  EXPECT_NE(r.metrics.front().tau_mean, r.metrics.back().tau_mean);
}

TEST(Distill, ZeroLambdaFreezesTemperature) {
  auto c = learned_config(4);
  c.curriculum = curriculum::CurriculumSchedule::fixed(0.0);
  c.temperature->global_init = 0.37;
  const auto r = trainer::distill(tiny_teacher(), tiny_task(), c);
  EXPECT_EQ(r.temperature->parameters()[0].at(0), 0.37);
  for (const auto& m : r.metrics) EXPECT_EQ(m.tau_mean, r.metrics.front().tau_mean);
}

TEST(Distill, InstanceTemperatureRuns) {
  auto c = learned_config(3);
  c.temperature->kind = distill::TemperatureKind::instance;
  c.temperature->inter_channels = 8;
  const auto r = trainer::distill(tiny_teacher(), tiny_task(), c.with_seed(4));
  for (const auto& m : r.metrics) {
    EXPECT_GT(m.tau_min, 1.0);
    EXPECT_LT(m.tau_max, 21.0);
    EXPECT_LE(m.tau_min, m.tau_mean);
    EXPECT_LE(m.tau_mean, m.tau_max);
  }
}

TEST(Distill, DelayedStrategyUsesPlainTauFirst) {
  auto c = learned_config(5);
  c.curriculum = curriculum::CurriculumSchedule::delayed(1.0, 2, 3.0);
  const auto r = trainer::distill(tiny_teacher(), tiny_task(), c);
  EXPECT_EQ(r.metrics[0].tau_mean, 3.0);
  EXPECT_EQ(r.metrics[1].tau_max, 3.0);
  EXPECT_GT(r.metrics[2].tau_min, 1.0);
  EXPECT_NE(r.metrics[2].tau_mean, 3.0);
}

TEST(Distill, FixedTauIsDeterministic) {
  auto c = learned_config(4);
  c.temperature.reset();
  c.fixed_tau = 4.0;
  const auto a = trainer::distill(tiny_teacher(), tiny_task(), c);
  const auto b = trainer::distill(tiny_teacher(), tiny_task(), c);
  EXPECT_EQ(csv_of(a.metrics), csv_of(b.metrics));
  for (const auto& m : a.metrics) EXPECT_EQ(m.tau_mean, 4.0);
}

TEST(Distill, NonFiniteLossKeepsLastGoodState) {
  auto c = learned_config(3);
  c.train.optimizer.lr = 1e200;
  try {
    trainer::distill(tiny_teacher(), tiny_task(), c);
    FAIL() << "expected NonFiniteLoss";
  } catch (const trainer::NonFiniteLoss& e) {
    ASSERT_TRUE(e.partial);
    EXPECT_LE(e.partial->metrics.size(), 3u);
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST(GridSearch, SingleTauMatchesDirectRun) {
  auto c = learned_config(3);
  const std::vector<double> taus{2.0};
  const std::vector<std::uint64_t> seeds{9};
  const auto rows = trainer::grid_search_tau(tiny_teacher(), tiny_task(), c, taus, seeds, false);
  ASSERT_EQ(rows.size(), 1u);
  auto direct = c;
  direct.temperature.reset();
  direct.fixed_tau = 2.0;
  const auto r = trainer::distill(tiny_teacher(), tiny_task(), direct.with_seed(9));
  EXPECT_EQ(rows[0].mean, r.metrics.back().test_acc);
  EXPECT_EQ(rows[0].label(), "2");
}

TEST(GridSearch, LearnedRowLabel) {
  const std::vector<double> taus{1.0, 4.0};
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto rows = trainer::grid_search_tau(tiny_teacher(), tiny_task(), learned_config(2), taus, seeds);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows.back().label(), "learned");
  EXPECT_EQ(rows.back().accuracies.size(), 2u);
  EXPECT_THROW(trainer::grid_search_tau(tiny_teacher(), tiny_task(), learned_config(2), {}, seeds),
               ValidationError);
}
