#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairhead/baselines.hpp"
#include "fairhead/dataset.hpp"
#include "fairhead/flip.hpp"
#include "fairhead/rng.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace fairhead;

namespace {

ProbabilityMatrix probs_from(const std::vector<double>& p_fake) {
  ProbabilityMatrix probs;
  probs.rows = p_fake.size();
  probs.values.resize(2 * p_fake.size());
  for (std::size_t i = 0; i < p_fake.size(); ++i) {
    probs.values[2 * i] = 1.0 - p_fake[i];
    probs.values[2 * i + 1] = p_fake[i];
  }
  return probs;
}

GroupFeatureStats stats_with_scores(std::vector<double> sigma_hat) {
  GroupFeatureStats stats;
  stats.group_order = {"A", "B"};
  stats.features = sigma_hat.size();
  stats.group_means.assign(2 * sigma_hat.size(), 0.0);
  stats.sigma = sigma_hat;
  stats.sigma_hat = std::move(sigma_hat);
  return stats;
}

}  // namespace

TEST_CASE("default sweep walks a 1001 point grid ending exactly at one") {
  // well separated scores: everything between the classes is perfect, and the
  // tie rule must settle on the grid point nearest 0.5
  std::vector<double> p_fake;
  std::vector<int> truth;
  std::vector<std::string> group;
  for (int i = 0; i < 20; ++i) {
    const bool fake = i % 2 == 0;
    p_fake.push_back(fake ? 0.9 : 0.1);
    truth.push_back(fake ? 1 : 0);
    group.push_back(i % 4 < 2 ? "a" : "b");
  }
  const SweepResult result = threshold_sweep(probs_from(p_fake), truth, group, 0.001);
  REQUIRE(result.trace.size() == 1001);
  CHECK(result.trace.front().threshold == 0.0);
  CHECK(result.trace.back().threshold == 1.0);
  CHECK(std::is_sorted(result.trace.begin(), result.trace.end(),
                       [](const SweepPoint& a, const SweepPoint& b) {
                         return a.threshold < b.threshold;
                       }));
  CHECK(result.best_threshold == 0.5);
  CHECK(result.best_objective == 1.0);
}

TEST_CASE("coarse steps still cap the grid with one") {
  const std::vector<double> p_fake = {0.2, 0.8};
  const std::vector<int> truth = {0, 1};
  const std::vector<std::string> group = {"a", "a"};
  const SweepResult half = threshold_sweep(probs_from(p_fake), truth, group, 0.5);
  REQUIRE(half.trace.size() == 3);
  CHECK(half.trace[0].threshold == 0.0);
  CHECK(half.trace[1].threshold == 0.5);
  CHECK(half.trace[2].threshold == 1.0);

  const SweepResult unit = threshold_sweep(probs_from(p_fake), truth, group, 1.0);
  REQUIRE(unit.trace.size() == 2);
  CHECK(unit.trace[0].threshold == 0.0);
  CHECK(unit.trace[1].threshold == 1.0);

  CHECK_THROWS_AS(threshold_sweep(probs_from(p_fake), truth, group, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(threshold_sweep(probs_from(p_fake), truth, group, 1.5),
                  std::invalid_argument);
}

TEST_CASE("sweep agrees with an independent oracle on random scores") {
  Rng rng(41);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = 5 + rng.below(60);
    std::vector<double> p_fake(n);
    std::vector<int> truth(n);
    std::vector<std::string> group(n);
    for (std::size_t i = 0; i < n; ++i) {
      // quantized scores force plenty of exact objective ties
      p_fake[i] = static_cast<double>(rng.below(11)) / 10.0;
      truth[i] = static_cast<int>(rng.below(2));
      group[i] = rng.below(2) == 0 ? "a" : "b";
    }
    const double step = 0.01;
    const SweepResult got = threshold_sweep(probs_from(p_fake), truth, group, step);
    const oracle::SweepBest want = oracle::sweep(p_fake, truth, group, step);
    CHECK(got.best_threshold == want.threshold);
    CHECK(got.best_objective == want.objective);
    CHECK(got.trace.size() == want.grid_size);
  }
}

TEST_CASE("pruning zeroes the most group-dependent features first") {
  FinalLayer head = FinalLayer::zeros(3);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < 3; ++j) head.weight(c, j) = 1.0 + static_cast<double>(j);
  }
  const GroupFeatureStats stats = stats_with_scores({1.0, 0.4, 0.0});

  SUBCASE("a third of three features is one feature") {
    const FinalLayer pruned = bpfa_prune(head, stats, PruneConfig{1.0 / 3.0});
    CHECK(pruned.weight(0, 0) == 0.0);
    CHECK(pruned.weight(1, 0) == 0.0);
    CHECK(pruned.weight(0, 1) == head.weight(0, 1));
    CHECK(pruned.weight(0, 2) == head.weight(0, 2));
    CHECK(pruned.metadata.at("method") == "bpfa");
  }
  SUBCASE("fraction zero is a weight no-op") {
    const FinalLayer pruned = bpfa_prune(head, stats, PruneConfig{0.0});
    CHECK(pruned.weights == head.weights);
  }
  SUBCASE("fraction one clears everything") {
    const FinalLayer pruned = bpfa_prune(head, stats, PruneConfig{1.0});
    CHECK(std::all_of(pruned.weights.begin(), pruned.weights.end(),
                      [](double w) { return w == 0.0; }));
    CHECK(pruned.bias == head.bias);
  }
  SUBCASE("fractions outside the unit interval are rejected") {
    CHECK_THROWS_AS(bpfa_prune(head, stats, PruneConfig{-0.1}), std::invalid_argument);
    CHECK_THROWS_AS(bpfa_prune(head, stats, PruneConfig{1.1}), std::invalid_argument);
  }
}

TEST_CASE("pruning ties keep the lower-indexed feature") {
  FinalLayer head = FinalLayer::zeros(2);
  head.weight(0, 0) = 1.0;
  head.weight(0, 1) = 2.0;
  head.weight(1, 0) = 3.0;
  head.weight(1, 1) = 4.0;
  const FinalLayer pruned = bpfa_prune(head, stats_with_scores({0.5, 0.5}), PruneConfig{0.5});
  CHECK(pruned.weight(0, 0) == 1.0);
  CHECK(pruned.weight(1, 0) == 3.0);
  CHECK(pruned.weight(0, 1) == 0.0);
  CHECK(pruned.weight(1, 1) == 0.0);
}

TEST_CASE("prune sparsity matches the requested share on random widths") {
  Rng rng(42);
  for (int round = 0; round < 100; ++round) {
    const std::size_t d = 1 + rng.below(40);
    const FinalLayer head = testutil::random_head(rng, d, 1.0);
    GroupFeatureStats stats;
    stats.group_order = {"A", "B"};
    stats.features = d;
    stats.group_means.assign(2 * d, 0.0);
    stats.sigma.resize(d);
    stats.sigma_hat.resize(d);
    for (std::size_t j = 0; j < d; ++j) stats.sigma_hat[j] = rng.uniform();
    const double fraction = rng.uniform();
    const FinalLayer pruned = bpfa_prune(head, stats, PruneConfig{fraction});
    const auto want =
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(d)));
    std::size_t zeroed = 0;
    for (std::size_t j = 0; j < d; ++j) {
      if (pruned.weight(0, j) == 0.0 && pruned.weight(1, j) == 0.0) ++zeroed;
    }
    CHECK(zeroed == want);  // random nonzero weights, so zero columns are the pruned ones
  }
}

TEST_CASE("soft confusion reduces to hard counts on certain probabilities") {
  const std::vector<double> p_fake = {1.0, 0.0, 1.0, 0.0};
  const std::vector<int> truth = {1, 1, 0, 0};
  const std::vector<std::string> group = {"a", "a", "a", "a"};
  const SoftConfusion soft = soft_confusion(probs_from(p_fake), truth, group);
  const SoftCounts& c = soft.by_group.at("a");
  CHECK(c.tp == 1.0);
  CHECK(c.fn == 1.0);
  CHECK(c.fp == 1.0);
  CHECK(c.tn == 1.0);
}

TEST_CASE("soft confusion splits one positive between tp and fn") {
  const SoftConfusion soft = soft_confusion(probs_from({0.7}), std::vector<int>{1},
                                            std::vector<std::string>{"a"});
  const SoftCounts& c = soft.by_group.at("a");
  CHECK(c.tp == 0.7);
  CHECK(c.fn == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(c.tp + c.fn == 1.0);  // complement form makes this exact, not approximate
  CHECK(c.fp == 0.0);
  CHECK(c.tn == 0.0);
}

TEST_CASE("soft counts conserve group totals exactly on random data") {
  Rng rng(43);
  for (int round = 0; round < 100; ++round) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<double> p_fake(n);
    std::vector<int> truth(n);
    std::vector<std::string> group(n);
    std::map<std::string, std::pair<double, double>> want;  // pos, neg per group
    for (std::size_t i = 0; i < n; ++i) {
      p_fake[i] = rng.uniform();
      truth[i] = static_cast<int>(rng.below(2));
      group[i] = std::string(1, static_cast<char>('a' + rng.below(3)));
      (truth[i] == 1 ? want[group[i]].first : want[group[i]].second) += 1.0;
    }
    const SoftConfusion soft = soft_confusion(probs_from(p_fake), truth, group);
    for (const auto& [token, counts] : soft.by_group) {
      CHECK(counts.tp + counts.fn == want.at(token).first);
      CHECK(counts.fp + counts.tn == want.at(token).second);
      CHECK(counts.tp >= 0.0);
      CHECK(counts.fn >= 0.0);
      CHECK(counts.fp >= 0.0);
      CHECK(counts.tn >= 0.0);
    }
  }
}

TEST_CASE("the fairness penalty vanishes for perfect soft rates") {
  CHECK(fairness_penalty(1.0, 1.0, 2.0) == 0.0);
  CHECK(fairness_penalty(0.0, 0.0, 2.0) == 2.0);
  CHECK(fairness_penalty(0.5, 0.5, 1.0) == 0.0625);
  CHECK(fairness_penalty(0.3, 0.8, 1.0) ==
        doctest::Approx(0.49 * 0.04).epsilon(1e-15));
}

TEST_CASE("penalized loss skips the penalty when no group defines both rates") {
  Rng rng(44);
  ActivationDataset ds = testutil::random_dataset(rng, 12, 3, 2);
  std::fill(ds.labels.begin(), ds.labels.end(), 1);  // positives only, FPP undefined
  std::vector<std::size_t> batch(ds.rows);
  std::iota(batch.begin(), batch.end(), std::size_t{0});
  const FinalLayer head = testutil::random_head(rng, 3, 1.0);
  const double with_lambda = penalized_loss(head, ds, batch, 5.0, 0.0);
  const double without = penalized_loss(head, ds, batch, 0.0, 0.0);
  CHECK(with_lambda == without);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(45);
  const ActivationDataset ds = testutil::random_dataset(rng, 24, 3, 2);
  std::vector<std::size_t> batch(ds.rows);
  std::iota(batch.begin(), batch.end(), std::size_t{0});

  for (const auto& [lambda, l2] : std::vector<std::pair<double, double>>{
           {0.0, 0.0}, {1.0, 0.0}, {0.0, 0.01}, {2.5, 0.001}}) {
    CAPTURE(lambda);
    CAPTURE(l2);
    const FinalLayer head = testutil::random_head(rng, 3, 0.8);
    HeadGradient grad;
    const double loss = loss_and_gradient(head, ds, batch, lambda, l2, grad);
    CHECK(loss == penalized_loss(head, ds, batch, lambda, l2));
    const HeadGradient fd = oracle::fd_gradient(head, ds, batch, lambda, l2, 1e-6);
    for (std::size_t j = 0; j < grad.weights.size(); ++j) {
      CHECK(grad.weights[j] == doctest::Approx(fd.weights[j]).epsilon(5e-5));
    }
    CHECK(grad.bias[0] == doctest::Approx(fd.bias[0]).epsilon(5e-5));
    CHECK(grad.bias[1] == doctest::Approx(fd.bias[1]).epsilon(5e-5));
  }
}

TEST_CASE("one full-batch step from zero equals minus the learning rate times the gradient") {
  Rng rng(46);
  const ActivationDataset ds = testutil::random_dataset(rng, 30, 4, 2);
  TrainConfig cfg;
  cfg.lambda = 1.5;
  cfg.epochs = 1;
  cfg.batch_size = ds.rows;
  cfg.learning_rate = 0.2;
  cfg.seed = 9;
  const FinalLayer trained = retrain_head(ds, cfg);

  const std::vector<std::size_t> order = Rng(cfg.seed).permutation(ds.rows);
  HeadGradient grad;
  loss_and_gradient(FinalLayer::zeros(ds.cols), ds, order, cfg.lambda, 0.0, grad);
  for (std::size_t j = 0; j < trained.weights.size(); ++j) {
    CHECK(trained.weights[j] == -cfg.learning_rate * grad.weights[j]);
  }
  CHECK(trained.bias[0] == -cfg.learning_rate * grad.bias[0]);
  CHECK(trained.bias[1] == -cfg.learning_rate * grad.bias[1]);
  CHECK(trained.metadata.at("method") == "in-process");
  CHECK(trained.metadata.at("lambda") == 1.5);
}

TEST_CASE("plain retraining follows a naive cross-entropy descent oracle") {
  Rng rng(47);
  const ActivationDataset ds = testutil::random_dataset(rng, 40, 3, 2);
  TrainConfig cfg;
  cfg.lambda = 0.0;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.1;
  cfg.seed = 12;
  const FinalLayer trained = retrain_head(ds, cfg);

  // replay the same schedule with independent softmax and gradient arithmetic
  const std::size_t d = ds.cols;
  std::vector<double> w(2 * d, 0.0);
  std::array<double, 2> b{0.0, 0.0};
  Rng schedule(cfg.seed);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = schedule.permutation(ds.rows);
    for (std::size_t start = 0; start < ds.rows; start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, ds.rows);
      std::vector<double> gw(2 * d, 0.0);
      std::array<double, 2> gb{0.0, 0.0};
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t t = start; t < stop; ++t) {
        const std::size_t i = order[t];
        const auto x = ds.row(i);
        double z0 = b[0];
        double z1 = b[1];
        for (std::size_t j = 0; j < d; ++j) {
          z0 += w[j] * static_cast<double>(x[j]);
          z1 += w[d + j] * static_cast<double>(x[j]);
        }
        const double p1 = 1.0 / (1.0 + std::exp(z0 - z1));
        const double p0 = 1.0 - p1;
        const double dz0 = (p0 - (ds.labels[i] == 0 ? 1.0 : 0.0)) * inv;
        const double dz1 = (p1 - (ds.labels[i] == 1 ? 1.0 : 0.0)) * inv;
        for (std::size_t j = 0; j < d; ++j) {
          gw[j] += dz0 * static_cast<double>(x[j]);
          gw[d + j] += dz1 * static_cast<double>(x[j]);
        }
        gb[0] += dz0;
        gb[1] += dz1;
      }
      for (std::size_t j = 0; j < 2 * d; ++j) w[j] -= cfg.learning_rate * gw[j];
      b[0] -= cfg.learning_rate * gb[0];
      b[1] -= cfg.learning_rate * gb[1];
    }
  }
  for (std::size_t j = 0; j < 2 * d; ++j) {
    CHECK(trained.weights[j] == doctest::Approx(w[j]).epsilon(1e-10));
  }
  CHECK(trained.bias[0] == doctest::Approx(b[0]).epsilon(1e-10));
  CHECK(trained.bias[1] == doctest::Approx(b[1]).epsilon(1e-10));
}

TEST_CASE("retraining separates an easy synthetic dataset") {
  SynthConfig synth;
  synth.n_per_group_per_class = 50;
  synth.groups = {"A", "B"};
  synth.d = 8;
  synth.signal_features = {0, 1};
  synth.biased_features = {};
  synth.signal_magnitude = 2.0;
  synth.noise_std = 0.5;
  synth.seed = 77;
  const ActivationDataset ds = synth_generate(synth);

  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.5;
  cfg.seed = 3;
  const FinalLayer trained = retrain_head(ds, cfg);
  const std::vector<int> pred = predict(forward(trained, ds), 0.5);
  std::size_t right = 0;
  for (std::size_t i = 0; i < ds.rows; ++i) {
    if (pred[i] == ds.labels[i]) ++right;
  }
  CHECK(right == ds.rows);  // margin is 8 noise stds, this must be exact
}

TEST_CASE("training configuration is validated") {
  Rng rng(48);
  const ActivationDataset ds = testutil::random_dataset(rng, 8, 2, 2);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(retrain_head(ds, cfg), std::invalid_argument);
  cfg.epochs = 1;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(retrain_head(ds, cfg), std::invalid_argument);
  cfg.batch_size = 8;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(retrain_head(ds, cfg), std::invalid_argument);
  cfg.learning_rate = 0.1;
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(retrain_head(ds, cfg), std::invalid_argument);
  cfg.lambda = 0.0;
  cfg.l2 = -0.5;
  CHECK_THROWS_AS(retrain_head(ds, cfg), std::invalid_argument);
}
