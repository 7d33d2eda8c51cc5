#include "fairhead/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace fairhead {

namespace {

constexpr std::size_t kTinyGroup = 10;

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

template <class Getter>
std::vector<std::optional<double>> collect(const GroupMetrics& metrics, Getter get) {
  std::vector<std::optional<double>> out;
  out.reserve(metrics.by_group.size());
  for (const auto& [token, rates] : metrics.by_group) out.push_back(get(rates));
  return out;
}

}  // namespace

ConfusionByGroup confusion_by_group(std::span<const int> pred, std::span<const int> truth,
                                    std::span<const std::string> group) {
  if (pred.size() != truth.size() || pred.size() != group.size()) {
    throw std::invalid_argument("prediction, truth, and group spans must have equal length");
  }
  if (pred.empty()) throw std::invalid_argument("confusion needs at least one sample");
  ConfusionByGroup out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] != 0 && pred[i] != 1) throw std::invalid_argument("prediction must be 0 or 1");
    if (truth[i] != 0 && truth[i] != 1) throw std::invalid_argument("label must be 0 or 1");
    GroupCounts& counts = out.by_group[group[i]];
    if (truth[i] == 1) {
      pred[i] == 1 ? ++counts.tp : ++counts.fn;
    } else {
      pred[i] == 1 ? ++counts.fp : ++counts.tn;
    }
  }
  for (const auto& [token, counts] : out.by_group) {
    out.overall.tp += counts.tp;
    out.overall.fp += counts.fp;
    out.overall.tn += counts.tn;
    out.overall.fn += counts.fn;
  }
  return out;
}

GroupMetrics group_metrics(const ConfusionByGroup& confusion) {
  GroupMetrics out;
  for (const auto& [token, c] : confusion.by_group) {
    GroupRates rates;
    rates.tpp = ratio(c.tp, c.tp + c.fn);
    rates.fpp = ratio(c.fp, c.fp + c.tn);
    rates.ppv = ratio(c.tp, c.tp + c.fp);
    rates.npv = ratio(c.tn, c.tn + c.fn);
    out.by_group[token] = rates;
  }
  return out;
}

double parity(std::span<const std::optional<double>> values, std::vector<std::string>* warnings,
              std::string_view metric_name) {
  std::vector<double> defined;
  defined.reserve(values.size());
  for (const auto& v : values) {
    if (v) defined.push_back(*v);
  }
  if (defined.size() < 2) {
    if (warnings) {
      std::string name = metric_name.empty() ? "rate" : std::string(metric_name);
      warnings->push_back(name + " parity is degenerate: fewer than two groups define it");
    }
    return 1.0;
  }
  const auto [mn, mx] = std::minmax_element(defined.begin(), defined.end());
  if (*mx == 0.0) return 1.0;
  return *mn / *mx;
}

double fairness_objective(const GroupMetrics& metrics) {
  if (metrics.by_group.empty()) throw std::invalid_argument("objective needs at least one group");
  const auto tpp = collect(metrics, [](const GroupRates& r) { return r.tpp; });
  const auto fpp = collect(metrics, [](const GroupRates& r) { return r.fpp; });
  const auto ppv = collect(metrics, [](const GroupRates& r) { return r.ppv; });
  const auto npv = collect(metrics, [](const GroupRates& r) { return r.npv; });

  const double tpp_par = parity(tpp);
  const double fpp_par = parity(fpp);
  const double ppv_par = parity(ppv);
  const double npv_par = parity(npv);

  double worst_fpp_margin = 1.0;  // 1 - max defined FPP; 1 when no group defines FPP
  bool any_fpp = false;
  double max_fpp = 0.0;
  for (const auto& v : fpp) {
    if (v) {
      max_fpp = any_fpp ? std::max(max_fpp, *v) : *v;
      any_fpp = true;
    }
  }
  if (any_fpp) worst_fpp_margin = 1.0 - max_fpp;

  double objective = tpp_par * tpp_par;
  objective *= fpp_par * fpp_par;
  objective *= worst_fpp_margin * worst_fpp_margin;
  objective *= ppv_par * ppv_par;
  objective *= npv_par * npv_par;
  return objective;
}

OverallScores overall_scores(std::span<const int> pred, std::span<const int> truth,
                             std::vector<std::string>* warnings) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("prediction and truth spans must have equal length");
  }
  if (pred.empty()) throw std::invalid_argument("scores need at least one sample");
  std::int64_t correct = 0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == truth[i]) ++correct;
    if (truth[i] == 1 && pred[i] == 1) ++tp;
    if (truth[i] == 0 && pred[i] == 1) ++fp;
    if (truth[i] == 1 && pred[i] == 0) ++fn;
  }
  OverallScores scores;
  scores.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
  const std::int64_t denom = 2 * tp + fp + fn;
  if (denom == 0) {
    scores.f1 = 0.0;
    if (warnings) {
      warnings->push_back("F1 is degenerate: no positives in truth or predictions; defined as 0");
    }
  } else {
    scores.f1 = static_cast<double>(2 * tp) / static_cast<double>(denom);
  }
  return scores;
}

FairnessReport build_report_from_predictions(std::span<const int> pred,
                                             std::span<const int> truth,
                                             std::span<const std::string> group,
                                             double threshold, std::string_view method) {
  FairnessReport report;
  report.method = std::string(method);
  report.threshold = threshold;

  const ConfusionByGroup confusion = confusion_by_group(pred, truth, group);
  report.groups = group_metrics(confusion);

  for (const auto& [token, counts] : confusion.by_group) {
    if (static_cast<std::size_t>(counts.total()) < kTinyGroup) {
      report.warnings.push_back("group " + token + " has only " +
                                std::to_string(counts.total()) + " samples");
    }
  }
  for (const auto& [token, rates] : report.groups.by_group) {
    if (!rates.tpp) report.warnings.push_back("TPP undefined for group " + token);
    if (!rates.fpp) report.warnings.push_back("FPP undefined for group " + token);
    if (!rates.ppv) report.warnings.push_back("PPV undefined for group " + token);
    if (!rates.npv) report.warnings.push_back("NPV undefined for group " + token);
  }

  const auto tpp = collect(report.groups, [](const GroupRates& r) { return r.tpp; });
  const auto fpp = collect(report.groups, [](const GroupRates& r) { return r.fpp; });
  const auto ppv = collect(report.groups, [](const GroupRates& r) { return r.ppv; });
  const auto npv = collect(report.groups, [](const GroupRates& r) { return r.npv; });
  report.tpp_parity = parity(tpp, &report.warnings, "TPP");
  report.fpp_parity = parity(fpp, &report.warnings, "FPP");
  report.ppv_parity = parity(ppv, &report.warnings, "PPV");
  report.npv_parity = parity(npv, &report.warnings, "NPV");
  report.objective = fairness_objective(report.groups);

  const OverallScores scores = overall_scores(pred, truth, &report.warnings);
  report.accuracy = scores.accuracy;
  report.f1 = scores.f1;
  return report;
}

FairnessReport build_report(const FinalLayer& head, const ActivationDataset& ds,
                            double threshold, std::string_view method) {
  const ProbabilityMatrix probs = forward(head, ds);
  const std::vector<int> pred = predict(probs, threshold);
  return build_report_from_predictions(pred, ds.labels, ds.groups, threshold, method);
}

}  // namespace fairhead
