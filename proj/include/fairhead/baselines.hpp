#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fairhead/dataset.hpp"
#include "fairhead/flip.hpp"
#include "fairhead/head.hpp"
#include "fairhead/metrics.hpp"

namespace fairhead {

struct TrainConfig {
  double lambda = 0.0;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  double l2 = 0.0;  // weight decay on weights only, never the bias
};

struct PruneConfig {
  double fraction = 0.0;  // share of features to zero, rounded up
};

struct SweepPoint {
  double threshold = 0.0;
  double objective = 0.0;
};

struct SweepResult {
  double best_threshold = 0.0;
  double best_objective = 0.0;
  std::vector<SweepPoint> trace;  // one entry per grid point, ascending
};

// Exhaustive scan of the inclusive grid {0, step, 2*step, ...} capped with
// 1.0, maximizing the fairness objective. Ties go to the threshold closest
// to 0.5, then to the smaller threshold.
SweepResult threshold_sweep(const ProbabilityMatrix& probs, std::span<const int> truth,
                            std::span<const std::string> group, double step = 0.001);

// Zeroes the outgoing weights of the ceil(fraction * d) features with the
// highest sigma_hat. On ties the lower-indexed feature survives.
FinalLayer bpfa_prune(const FinalLayer& head, const GroupFeatureStats& stats,
                      const PruneConfig& cfg);

struct SoftCounts {
  double tp = 0.0;
  double fp = 0.0;
  double tn = 0.0;
  double fn = 0.0;
};

// Probability-weighted confusion: soft TP sums P(fake) over positives, soft
// FP over negatives; TN and FN are the count complements, which keeps
// tp + fn equal to the group's positive count exactly.
struct SoftConfusion {
  std::map<std::string, SoftCounts> by_group;
};

SoftConfusion soft_confusion(const ProbabilityMatrix& probs, std::span<const int> truth,
                             std::span<const std::string> group);

// lambda * (1 - worst_tpp)^2 * (1 - worst_fpp)^2
double fairness_penalty(double worst_tpp, double worst_fpp, double lambda);

// Mean cross-entropy over the batch, plus the fairness penalty on the
// batch's worst-group soft rates, plus l2/2 * sum of squared weights.
// Groups lacking positives (for TPP) or negatives (for FPP) are skipped;
// if no group qualifies on either side the penalty term is zero.
double penalized_loss(const FinalLayer& head, const ActivationDataset& ds,
                      std::span<const std::size_t> batch, double lambda, double l2);

struct HeadGradient {
  std::vector<double> weights;  // kClassCount * features
  std::array<double, kClassCount> bias{};
};

// Analytic gradient of penalized_loss; returns the loss value.
double loss_and_gradient(const FinalLayer& head, const ActivationDataset& ds,
                         std::span<const std::size_t> batch, double lambda, double l2,
                         HeadGradient& grad);

// Deterministic mini-batch gradient descent from zero-initialized weights:
// epochs * ceil(N / batch_size) steps, one fresh shuffle per epoch drawn
// from the seed.
FinalLayer retrain_head(const ActivationDataset& ds, const TrainConfig& cfg);

}  // namespace fairhead
