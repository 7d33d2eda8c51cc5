#include "fairhead/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "fairhead/rng.hpp"

namespace fairhead {

namespace {

std::vector<double> threshold_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) {
    throw std::invalid_argument("step must lie in (0, 1]");
  }
  std::vector<double> grid;
  for (std::size_t i = 0;; ++i) {
    const double t = static_cast<double>(i) * step;
    if (t >= 1.0) break;
    grid.push_back(t);
  }
  grid.push_back(1.0);
  return grid;
}

// Per-sample probabilities and batch bookkeeping shared by the loss and the
// gradient path.
struct BatchForward {
  std::vector<double> p_fake;    // one per batch row
  double mean_ce = 0.0;
  // Worst-group soft rates; defined flags are false when no group qualifies.
  bool tpp_defined = false;
  bool fpp_defined = false;
  double worst_tpp = 0.0;
  double worst_fpp = 0.0;
  std::string worst_tpp_group;
  std::string worst_fpp_group;
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> group_counts;  // pos, neg
};

BatchForward batch_forward(const FinalLayer& head, const ActivationDataset& ds,
                           std::span<const std::size_t> batch) {
  BatchForward fwd;
  fwd.p_fake.resize(batch.size());
  const double* w0 = head.weights.data();
  const double* w1 = head.weights.data() + head.features;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  std::map<std::string, std::pair<double, double>> soft;  // sum p over positives, negatives
  double ce = 0.0;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const std::size_t i = batch[t];
    const auto x = ds.row(i);
    double z0 = head.bias[0];
    double z1 = head.bias[1];
    for (std::size_t j = 0; j < head.features; ++j) {
      const double xv = static_cast<double>(x[j]);
      z0 += w0[j] * xv;
      z1 += w1[j] * xv;
    }
    const double m = z0 > z1 ? z0 : z1;
    const double e0 = std::exp(z0 - m);
    const double e1 = std::exp(z1 - m);
    const double sum = e0 + e1;
    const double p1 = e1 / sum;
    fwd.p_fake[t] = p1;
    const double p_true = ds.labels[i] == 1 ? p1 : e0 / sum;
    ce -= std::log(p_true);

    auto& counts = fwd.group_counts[ds.groups[i]];
    auto& sums = soft[ds.groups[i]];
    if (ds.labels[i] == 1) {
      ++counts.first;
      sums.first += p1;
    } else {
      ++counts.second;
      sums.second += p1;
    }
  }
  fwd.mean_ce = ce * inv_b;

  for (const auto& [token, counts] : fwd.group_counts) {
    const auto& sums = soft[token];
    if (counts.first > 0) {
      const double tpp = sums.first / static_cast<double>(counts.first);
      if (!fwd.tpp_defined || tpp < fwd.worst_tpp) {
        fwd.tpp_defined = true;
        fwd.worst_tpp = tpp;
        fwd.worst_tpp_group = token;
      }
    }
    if (counts.second > 0) {
      const double fpp = sums.second / static_cast<double>(counts.second);
      if (!fwd.fpp_defined || fpp < fwd.worst_fpp) {
        fwd.fpp_defined = true;
        fwd.worst_fpp = fpp;
        fwd.worst_fpp_group = token;
      }
    }
  }
  return fwd;
}

double l2_term(const FinalLayer& head, double l2) {
  if (l2 == 0.0) return 0.0;
  double sq = 0.0;
  for (const double w : head.weights) sq += w * w;
  return 0.5 * l2 * sq;
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw std::invalid_argument("learning_rate must be positive and finite");
  }
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
    throw std::invalid_argument("lambda must be >= 0 and finite");
  }
  if (!(cfg.l2 >= 0.0) || !std::isfinite(cfg.l2)) {
    throw std::invalid_argument("l2 must be >= 0 and finite");
  }
}

}  // namespace

SweepResult threshold_sweep(const ProbabilityMatrix& probs, std::span<const int> truth,
                            std::span<const std::string> group, double step) {
  if (probs.rows != truth.size() || probs.rows != group.size()) {
    throw std::invalid_argument("probability, truth, and group spans must have equal length");
  }
  if (probs.rows == 0) throw std::invalid_argument("sweep needs at least one sample");
  const std::vector<double> grid = threshold_grid(step);

  std::vector<int> pred(probs.rows);
  SweepResult result;
  result.trace.reserve(grid.size());
  double best_distance = std::numeric_limits<double>::infinity();
  bool first = true;
  for (const double t : grid) {
    for (std::size_t i = 0; i < probs.rows; ++i) {
      pred[i] = probs.p_fake(i) >= t ? 1 : 0;
    }
    const double objective = fairness_objective(group_metrics(confusion_by_group(pred, truth, group)));
    result.trace.push_back(SweepPoint{t, objective});
    const double distance = std::abs(t - 0.5);
    const bool better =
        first || objective > result.best_objective ||
        (objective == result.best_objective &&
         (distance < best_distance || (distance == best_distance && t < result.best_threshold)));
    if (better) {
      first = false;
      result.best_objective = objective;
      result.best_threshold = t;
      best_distance = distance;
    }
  }
  return result;
}

FinalLayer bpfa_prune(const FinalLayer& head, const GroupFeatureStats& stats,
                      const PruneConfig& cfg) {
  validate_head(head);
  if (head.features != stats.features) {
    throw std::invalid_argument("dimension mismatch between head and stats");
  }
  if (stats.sigma_hat.size() != stats.features) {
    throw std::invalid_argument("stats are missing sigma_hat");
  }
  if (!(cfg.fraction >= 0.0 && cfg.fraction <= 1.0)) {
    throw std::invalid_argument("fraction must lie in [0, 1]");
  }
  const std::size_t d = head.features;
  std::size_t k = static_cast<std::size_t>(
      std::ceil(cfg.fraction * static_cast<double>(d)));
  k = std::min(k, d);

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&stats](std::size_t a, std::size_t b) {
    if (stats.sigma_hat[a] != stats.sigma_hat[b]) {
      return stats.sigma_hat[a] > stats.sigma_hat[b];
    }
    return a > b;  // tie: higher index pruned first, lower index survives longest
  });

  FinalLayer out = head;
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t c = 0; c < kClassCount; ++c) {
      out.weight(c, order[t]) = 0.0;
    }
  }
  nlohmann::json meta;
  meta["method"] = "bpfa";
  meta["fraction"] = cfg.fraction;
  if (!head.metadata.empty()) meta["origin"] = head.metadata;
  out.metadata = meta;
  return out;
}

SoftConfusion soft_confusion(const ProbabilityMatrix& probs, std::span<const int> truth,
                             std::span<const std::string> group) {
  if (probs.rows != truth.size() || probs.rows != group.size()) {
    throw std::invalid_argument("probability, truth, and group spans must have equal length");
  }
  if (probs.rows == 0) throw std::invalid_argument("soft confusion needs at least one sample");
  SoftConfusion out;
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> counts;  // pos, neg
  for (std::size_t i = 0; i < probs.rows; ++i) {
    SoftCounts& soft = out.by_group[group[i]];
    auto& c = counts[group[i]];
    if (truth[i] == 1) {
      soft.tp += probs.p_fake(i);
      ++c.first;
    } else {
      soft.fp += probs.p_fake(i);
      ++c.second;
    }
  }
  for (auto& [token, soft] : out.by_group) {
    const auto& c = counts[token];
    soft.fn = static_cast<double>(c.first) - soft.tp;
    soft.tn = static_cast<double>(c.second) - soft.fp;
  }
  return out;
}

double fairness_penalty(double worst_tpp, double worst_fpp, double lambda) {
  const double t = 1.0 - worst_tpp;
  const double f = 1.0 - worst_fpp;
  return lambda * t * t * f * f;
}

double penalized_loss(const FinalLayer& head, const ActivationDataset& ds,
                      std::span<const std::size_t> batch, double lambda, double l2) {
  if (batch.empty()) throw std::invalid_argument("batch must not be empty");
  const BatchForward fwd = batch_forward(head, ds, batch);
  double loss = fwd.mean_ce;
  if (lambda != 0.0 && fwd.tpp_defined && fwd.fpp_defined) {
    loss += fairness_penalty(fwd.worst_tpp, fwd.worst_fpp, lambda);
  }
  return loss + l2_term(head, l2);
}

double loss_and_gradient(const FinalLayer& head, const ActivationDataset& ds,
                         std::span<const std::size_t> batch, double lambda, double l2,
                         HeadGradient& grad) {
  if (batch.empty()) throw std::invalid_argument("batch must not be empty");
  const std::size_t d = head.features;
  grad.weights.assign(kClassCount * d, 0.0);
  grad.bias = {0.0, 0.0};

  const BatchForward fwd = batch_forward(head, ds, batch);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  double loss = fwd.mean_ce;
  const bool penalize = lambda != 0.0 && fwd.tpp_defined && fwd.fpp_defined;
  double d_tpp = 0.0;
  double d_fpp = 0.0;
  if (penalize) {
    const double t = 1.0 - fwd.worst_tpp;
    const double f = 1.0 - fwd.worst_fpp;
    loss += lambda * t * t * f * f;
    d_tpp = -2.0 * lambda * t * f * f;
    d_fpp = -2.0 * lambda * t * t * f;
  }

  double* gw0 = grad.weights.data();
  double* gw1 = grad.weights.data() + d;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const std::size_t i = batch[t];
    const double p1 = fwd.p_fake[t];
    const double p0 = 1.0 - p1;
    const int y = ds.labels[i];

    // d(mean CE)/dz, for z = (logit_authentic, logit_fake)
    double dz0 = (p0 - (y == 0 ? 1.0 : 0.0)) * inv_b;
    double dz1 = (p1 - (y == 1 ? 1.0 : 0.0)) * inv_b;

    if (penalize) {
      double dp1 = 0.0;  // d(penalty)/d p1 for this sample
      if (y == 1 && ds.groups[i] == fwd.worst_tpp_group) {
        dp1 += d_tpp / static_cast<double>(fwd.group_counts.at(ds.groups[i]).first);
      }
      if (y == 0 && ds.groups[i] == fwd.worst_fpp_group) {
        dp1 += d_fpp / static_cast<double>(fwd.group_counts.at(ds.groups[i]).second);
      }
      if (dp1 != 0.0) {
        const double jac = p1 * p0;  // dp1/dz1 = -dp1/dz0
        dz1 += dp1 * jac;
        dz0 -= dp1 * jac;
      }
    }

    const auto x = ds.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double xv = static_cast<double>(x[j]);
      gw0[j] += dz0 * xv;
      gw1[j] += dz1 * xv;
    }
    grad.bias[0] += dz0;
    grad.bias[1] += dz1;
  }

  if (l2 != 0.0) {
    double sq = 0.0;
    for (std::size_t j = 0; j < grad.weights.size(); ++j) {
      grad.weights[j] += l2 * head.weights[j];
      sq += head.weights[j] * head.weights[j];
    }
    loss += 0.5 * l2 * sq;
  }
  return loss;
}

FinalLayer retrain_head(const ActivationDataset& ds, const TrainConfig& cfg) {
  validate_dataset(ds);
  validate_train_config(cfg);

  FinalLayer head = FinalLayer::zeros(ds.cols);
  Rng rng(cfg.seed);
  HeadGradient grad;
  std::size_t step_index = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = rng.permutation(ds.rows);
    for (std::size_t start = 0; start < ds.rows; start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, ds.rows);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const double loss = loss_and_gradient(head, ds, batch, cfg.lambda, cfg.l2, grad);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("non-finite loss encountered at step " +
                                 std::to_string(step_index));
      }
      for (std::size_t j = 0; j < head.weights.size(); ++j) {
        head.weights[j] -= cfg.learning_rate * grad.weights[j];
      }
      head.bias[0] -= cfg.learning_rate * grad.bias[0];
      head.bias[1] -= cfg.learning_rate * grad.bias[1];
      ++step_index;
    }
  }

  nlohmann::json meta;
  meta["method"] = "in-process";
  meta["lambda"] = cfg.lambda;
  meta["epochs"] = cfg.epochs;
  meta["batch_size"] = cfg.batch_size;
  meta["learning_rate"] = cfg.learning_rate;
  meta["seed"] = cfg.seed;
  meta["l2"] = cfg.l2;
  head.metadata = meta;
  return head;
}

}  // namespace fairhead
