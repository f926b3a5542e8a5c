// Learning behaviour on generated data whose labels follow a known OR rule
// over planted key features.
#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "mimtnet/baselines.hpp"
#include "mimtnet/harness.hpp"
#include "mimtnet/network.hpp"

namespace mimtnet {
namespace {

SyntheticData easy_data() {
  SyntheticSpec spec;
  spec.patients = 300;
  spec.features = 40;
  spec.tasks = 4;
  spec.keys_per_task = 1;
  spec.background_rate = 0.05;
  spec.label_flip_rate = 0.0;
  spec.seed = 21;
  return generate_synthetic(spec);
}

struct HeldOut {
  Dataset train, test;
};

HeldOut split_last(const Dataset& ds, std::size_t test_rows) {
  std::vector<std::size_t> a(ds.patients() - test_rows), b(test_rows);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), ds.patients() - test_rows);
  return {ds.subset(a), ds.subset(b)};
}

double slot_agreement(const BinaryMatrix& hard, const BinaryMatrix& truth) {
  std::size_t same = 0;
  for (std::size_t i = 0; i < truth.values().size(); ++i) same += hard.values()[i] == truth.values()[i];
  return static_cast<double>(same) / static_cast<double>(truth.values().size());
}

TEST(PlantedRecovery, TrainingLossFallsBelowFivePercent) {
  const auto data = easy_data();
  TrainConfig cfg;
  cfg.seed = 1;
  const auto model = train(data.dataset, cfg);
  const double first = model.epoch_loss.front(), last = model.epoch_loss.back();
  RecordProperty("loss_ratio", std::to_string(last / first));
  EXPECT_LT(last, 0.05 * first) << "epoch 1 " << first << ", final " << last;
}

TEST(PlantedRecovery, HeldOutPredictionsMatchOrRule) {
  const auto data = easy_data();
  const auto [tr, te] = split_last(data.dataset, 60);
  TrainConfig cfg;
  cfg.seed = 1;
  const auto pred = predict(train(tr, cfg), te.features);
  EXPECT_GE(slot_agreement(pred.hard, te.labels), 0.90);
}

TEST(PlantedRecovery, KeyProposalsHitPlantedKeys) {
  const auto data = easy_data();
  const auto [tr, te] = split_last(data.dataset, 60);
  TrainConfig cfg;
  cfg.seed = 1;
  const auto model = train(tr, cfg);
  const auto pred = predict(model, te.features);
  std::size_t tp = 0, hits = 0;
  for (std::size_t i = 0; i < te.patients(); ++i) {
    for (std::size_t t = 0; t < te.task_count(); ++t) {
      if (!(pred.hard(i, t) && te.labels(i, t))) continue;
      ++tp;
      const auto& chosen = model.proposal_set.proposals[pred.argmax_r(i, t)];
      const auto& keys = data.key_features[t];
      hits += std::ranges::any_of(chosen, [&](std::size_t f) {
        return std::ranges::binary_search(keys, f);
      });
    }
  }
  ASSERT_GT(tp, 0u) << "no true-positive predictions";
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(tp), 0.80)
      << hits << " of " << tp << " true positives";
}

TEST(PlantedRecovery, MlpHeldOutHamming) {
  const auto data = easy_data();
  const auto [tr, te] = split_last(data.dataset, 60);
  MlpConfig cfg;
  cfg.seed = 1;
  const auto probs = mlp_predict(mlp_train(tr, cfg), te.features);
  EXPECT_LT(1.0 - slot_agreement(threshold(probs), te.labels), 0.1);
}

TEST(PlantedRecovery, CrossValidatedMap) {
  const auto data = easy_data();
  ModelSpec spec;
  const auto r = run_cv(data.dataset, spec, 5, 1);
  ASSERT_TRUE(r.points[0].mean.map.has_value());
  EXPECT_GE(*r.points[0].mean.map, 0.95);
}

TEST(PlantedRecovery, MaxSizeSweepPeaksInside) {
  const auto data = generate_synthetic(SyntheticSpec{});
  ModelSpec spec;
  const std::vector<std::size_t> sizes{5, 10, 15, 20, 25};
  const auto r = sweep_max_size(data.dataset, spec, sizes, 5, 1);
  std::vector<double> maps;
  for (const auto& p : r.points) maps.push_back(p.mean.map.value_or(0.0));
  const auto best = std::ranges::max_element(maps) - maps.begin();
  std::string trace;
  for (double m : maps) trace += std::to_string(m) + " ";
  EXPECT_GT(best, 0) << trace;
  EXPECT_LT(best, static_cast<std::ptrdiff_t>(maps.size()) - 1) << trace;
}

TEST(PlantedRecovery, GenerationTimesPlateau) {
  const auto data = easy_data();
  ModelSpec spec;
  const auto r = sweep_generation_times(data.dataset, spec, {100, 500, 1000, 1500, 2000}, 5, 1);
  double best = 0.0;
  for (const auto& p : r.points) best = std::max(best, p.mean.map.value_or(0.0));
  const double at_2000 = r.point("mimtcnn", 2000.0).mean.map.value_or(0.0);
  EXPECT_LT(best - at_2000, 0.05);
}

}  // namespace
}  // namespace mimtnet
