#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "fairhead/dataset.hpp"

namespace fairhead {

inline constexpr std::size_t kClassCount = 2;  // index 0 = authentic, 1 = fake
inline constexpr std::size_t kFakeClass = 1;

// Final dense layer of the detector: logits = weights x activation + bias.
struct FinalLayer {
  std::size_t features = 0;
  std::vector<double> weights;  // kClassCount * features, row-major
  std::array<double, kClassCount> bias{};
  nlohmann::json metadata = nlohmann::json::object();

  double weight(std::size_t cls, std::size_t feature) const {
    return weights[cls * features + feature];
  }
  double& weight(std::size_t cls, std::size_t feature) {
    return weights[cls * features + feature];
  }

  static FinalLayer zeros(std::size_t features) {
    FinalLayer head;
    head.features = features;
    head.weights.assign(kClassCount * features, 0.0);
    return head;
  }
};

void validate_head(const FinalLayer& head);

struct ProbabilityMatrix {
  std::size_t rows = 0;
  std::vector<double> values;  // rows * kClassCount

  double p_fake(std::size_t i) const { return values[i * kClassCount + kFakeClass]; }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * kClassCount, kClassCount};
  }
};

// Numerically stable softmax over the two logits, computed in double.
ProbabilityMatrix forward(const FinalLayer& head, const ActivationDataset& ds);

// Label 1 iff P(fake) >= threshold; threshold must lie in [0, 1].
std::vector<int> predict(const ProbabilityMatrix& probs, double threshold);

FinalLayer load_head(const std::filesystem::path& file);
// Weights and bias are written with 17 significant digits so the decimal
// form round-trips the doubles exactly.
void save_head(const FinalLayer& head, const std::filesystem::path& file);

}  // namespace fairhead
