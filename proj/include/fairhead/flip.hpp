#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "fairhead/dataset.hpp"
#include "fairhead/head.hpp"

namespace fairhead {

// Per-feature variability of the group-conditional activation means.
// sigma is the population standard deviation of the per-group means
// (groups weighted equally); sigma_hat is its min-max normalization over
// features, so the most group-dependent feature scores 1 and the least
// scores 0. All features tying makes sigma_hat all zero.
struct GroupFeatureStats {
  std::vector<std::string> group_order;  // sorted group tokens
  std::size_t features = 0;
  std::vector<double> group_means;  // group_order.size() * features, row-major
  std::vector<double> sigma;        // features
  std::vector<double> sigma_hat;    // features
};

struct FlipConfig {
  double alpha = 0.25;
};

// Single pass over the rows; means only, sigma/sigma_hat left empty.
GroupFeatureStats group_feature_means(const ActivationDataset& ds);
GroupFeatureStats between_group_std(GroupFeatureStats stats);
GroupFeatureStats normalize_variability(GroupFeatureStats stats);

// The three stages above composed.
GroupFeatureStats compute_group_stats(const ActivationDataset& ds);

// Scales feature i's weights (both classes) by 1 + alpha - sigma_hat[i];
// bias is left untouched.
FinalLayer apply_flip(const FinalLayer& head, const GroupFeatureStats& stats,
                      const FlipConfig& cfg);

std::uint64_t stats_digest(const GroupFeatureStats& stats);

struct AlphaSweepRow {
  double alpha = 0.0;
  double accuracy = 0.0;
  double tpp_parity = 0.0;
  double fpp_parity = 0.0;
  double ppv_parity = 0.0;
  double npv_parity = 0.0;
};

// Stats come from `calib` (computed once), each row reports the flipped head
// on `eval` at threshold 0.5. Grid order is preserved.
std::vector<AlphaSweepRow> alpha_sweep(const FinalLayer& head, const ActivationDataset& calib,
                                       const ActivationDataset& eval,
                                       const std::vector<double>& grid);

void save_stats(const GroupFeatureStats& stats, const std::filesystem::path& file);
GroupFeatureStats load_stats(const std::filesystem::path& file);

std::string alpha_sweep_csv(const std::vector<AlphaSweepRow>& rows);

}  // namespace fairhead
