#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairhead/dataset.hpp"
#include "fairhead/head.hpp"

namespace fairhead {

struct GroupCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
};

struct ConfusionByGroup {
  std::map<std::string, GroupCounts> by_group;
  GroupCounts overall;
};

ConfusionByGroup confusion_by_group(std::span<const int> pred, std::span<const int> truth,
                                    std::span<const std::string> group);

// One rate per group; nullopt marks an empty denominator.
struct GroupRates {
  std::optional<double> tpp;  // TP / (TP + FN)
  std::optional<double> fpp;  // FP / (FP + TN)
  std::optional<double> ppv;  // TP / (TP + FP)
  std::optional<double> npv;  // TN / (TN + FN)
};

struct GroupMetrics {
  std::map<std::string, GroupRates> by_group;
};

GroupMetrics group_metrics(const ConfusionByGroup& confusion);

// min/max over the defined group values. Fewer than two defined values, or
// all defined values zero, count as perfectly equal (1.0); the former also
// emits a warning when a sink is provided.
double parity(std::span<const std::optional<double>> values,
              std::vector<std::string>* warnings = nullptr, std::string_view metric_name = {});

// Product, in this order, of: TPP parity squared, FPP parity squared,
// (1 - max defined FPP) squared, PPV parity squared, NPV parity squared.
// The factor order is fixed so independent evaluations agree bit-for-bit.
double fairness_objective(const GroupMetrics& metrics);

struct OverallScores {
  double accuracy = 0.0;
  double f1 = 0.0;
};

// F1 with no positives anywhere (truth and predictions) is defined as 0 and
// warned about rather than left undefined.
OverallScores overall_scores(std::span<const int> pred, std::span<const int> truth,
                             std::vector<std::string>* warnings = nullptr);

struct FairnessReport {
  std::string method;
  int fold = -1;
  double threshold = 0.5;
  double accuracy = 0.0;
  double f1 = 0.0;
  GroupMetrics groups;
  double tpp_parity = 1.0;
  double fpp_parity = 1.0;
  double ppv_parity = 1.0;
  double npv_parity = 1.0;
  double objective = 1.0;
  std::vector<std::string> warnings;
};

FairnessReport build_report(const FinalLayer& head, const ActivationDataset& ds,
                            double threshold, std::string_view method);

// Report assembled from already-computed predictions.
FairnessReport build_report_from_predictions(std::span<const int> pred,
                                             std::span<const int> truth,
                                             std::span<const std::string> group,
                                             double threshold, std::string_view method);

}  // namespace fairhead
