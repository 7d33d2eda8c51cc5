#include "fairhead/evaluate.hpp"

#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

#include "fairhead/baselines.hpp"
#include "fairhead/flip.hpp"
#include "fairhead/io.hpp"
#include "fairhead/rng.hpp"

namespace fairhead {

namespace {

constexpr std::size_t kMethodCount = 6;

enum SeedStream : std::uint64_t {
  kUndersampleStream = 1,
  kPreProcessStream = 2,
  kInProcessStream = 3,
};

void run_fold(const ActivationDataset& ds, const FinalLayer& head, const EvaluateConfig& cfg,
              const FoldPlan& plan, std::size_t fold, std::vector<FairnessReport>& reports,
              std::vector<double>& tuned_thresholds) {
  const std::vector<std::size_t> test_idx = fold_members(plan, fold);
  const std::vector<std::size_t> train_idx = fold_complement(plan, fold);
  const ActivationDataset test = subset(ds, test_idx);
  const ActivationDataset train = subset(ds, train_idx);
  const int fold_id = static_cast<int>(fold);

  FairnessReport* slot = reports.data() + fold * kMethodCount;

  slot[0] = build_report(head, test, 0.5, "baseline");

  TrainConfig base_train;
  base_train.lambda = 0.0;
  base_train.epochs = cfg.epochs;
  base_train.batch_size = cfg.batch_size;
  base_train.learning_rate = cfg.learning_rate;
  base_train.l2 = cfg.l2;

  {
    const ActivationDataset balanced =
        undersample(train, mix_seed(cfg.seed, fold * 8 + kUndersampleStream));
    TrainConfig tc = base_train;
    tc.seed = mix_seed(cfg.seed, fold * 8 + kPreProcessStream);
    const FinalLayer retrained = retrain_head(balanced, tc);
    slot[1] = build_report(retrained, test, 0.5, "pre-process");
  }
  {
    TrainConfig tc = base_train;
    tc.lambda = cfg.lambda;
    tc.seed = mix_seed(cfg.seed, fold * 8 + kInProcessStream);
    const FinalLayer retrained = retrain_head(train, tc);
    slot[2] = build_report(retrained, test, 0.5, "in-process");
  }
  {
    const ProbabilityMatrix train_probs = forward(head, train);
    const SweepResult sweep =
        threshold_sweep(train_probs, train.labels, train.groups, cfg.step);
    tuned_thresholds[fold] = sweep.best_threshold;
    slot[3] = build_report(head, test, sweep.best_threshold, "threshold");
  }
  const GroupFeatureStats stats = compute_group_stats(train);
  {
    const FinalLayer pruned = bpfa_prune(head, stats, PruneConfig{cfg.fraction});
    slot[4] = build_report(pruned, test, 0.5, "bpfa");
  }
  {
    const FinalLayer flipped = apply_flip(head, stats, FlipConfig{cfg.alpha});
    slot[5] = build_report(flipped, test, 0.5, "fair-flip");
  }

  for (std::size_t m = 0; m < kMethodCount; ++m) slot[m].fold = fold_id;
}

}  // namespace

EvaluateResult evaluate_all(const ActivationDataset& ds, const FinalLayer& head,
                            const EvaluateConfig& cfg) {
  validate_dataset(ds);
  validate_head(head);
  if (cfg.folds < 2) throw std::invalid_argument("folds must be >= 2");

  EvaluateResult result;
  result.plan = kfold_split(ds, cfg.folds, cfg.seed);
  result.reports.resize(cfg.folds * kMethodCount);
  result.tuned_thresholds.assign(cfg.folds, 0.5);

  const std::size_t workers = std::min(thread_cap(), cfg.folds);
  if (workers <= 1) {
    for (std::size_t fold = 0; fold < cfg.folds; ++fold) {
      run_fold(ds, head, cfg, result.plan, fold, result.reports, result.tuned_thresholds);
    }
  } else {
    std::vector<std::exception_ptr> errors(cfg.folds);
    for (std::size_t wave = 0; wave < cfg.folds; wave += workers) {
      const std::size_t stop = std::min(wave + workers, cfg.folds);
      std::vector<std::thread> pool;
      pool.reserve(stop - wave);
      for (std::size_t fold = wave; fold < stop; ++fold) {
        pool.emplace_back([&, fold] {
          try {
            run_fold(ds, head, cfg, result.plan, fold, result.reports,
                     result.tuned_thresholds);
          } catch (...) {
            errors[fold] = std::current_exception();
          }
        });
      }
      for (std::thread& t : pool) t.join();
    }
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return result;
}

}  // namespace fairhead
