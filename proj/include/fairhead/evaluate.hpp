#pragma once

#include <cstdint>
#include <vector>

#include "fairhead/dataset.hpp"
#include "fairhead/head.hpp"
#include "fairhead/metrics.hpp"

namespace fairhead {

struct EvaluateConfig {
  std::size_t folds = 5;
  std::uint64_t seed = 7;
  double alpha = 0.25;
  double step = 0.001;
  double fraction = 0.1;
  double lambda = 1.0;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double learning_rate = 0.1;
  double l2 = 0.0;
};

struct EvaluateResult {
  // Fold-major, methods in canonical order within each fold:
  // baseline, pre-process, in-process, threshold, bpfa, fair-flip.
  std::vector<FairnessReport> reports;
  FoldPlan plan;
  std::vector<double> tuned_thresholds;  // one per fold
};

// Runs all six methods over a stratified k-fold split. Per fold, the held-out
// fold is the test set and everything else trains/calibrates: undersampling
// and retraining for the data baselines, the tuned threshold from the
// training probabilities, group stats for pruning and reweighting. Folds may
// run on parallel workers (capped by FAIRHEAD_THREADS); outputs land in
// per-fold slots so the result does not depend on the worker count.
EvaluateResult evaluate_all(const ActivationDataset& ds, const FinalLayer& head,
                            const EvaluateConfig& cfg);

}  // namespace fairhead
