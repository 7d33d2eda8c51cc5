#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fairhead {

// Penultimate-layer activations with one label and one protected-group token
// per row. Activations are stored as binary32, exactly as serialized;
// arithmetic downstream happens in double.
struct ActivationDataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> activations;  // rows * cols, row-major
  std::vector<int> labels;         // 1 = fake, 0 = authentic
  std::vector<std::string> groups;
  std::vector<std::string> ids;    // optional: empty, or one per row

  std::span<const float> row(std::size_t i) const {
    return {activations.data() + i * cols, cols};
  }
};

// Throws std::invalid_argument when a structural invariant is violated
// (shape mismatch, bad label, empty group token, non-finite activation).
void validate_dataset(const ActivationDataset& ds);

// Synthetic corpus: per feature, a sample gets group_index * bias_magnitude
// if the feature is biased, +/- signal_magnitude by class if it carries
// signal, plus N(0, noise_std^2) noise. Biased features are independent of
// the label by construction.
struct SynthConfig {
  std::size_t n_per_group_per_class = 0;
  std::vector<std::string> groups;
  std::size_t d = 0;
  std::vector<std::size_t> biased_features;
  std::vector<std::size_t> signal_features;
  bool allow_overlap = false;  // permit biased and signal sets to intersect
  double bias_magnitude = 0.0;
  double signal_magnitude = 0.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;  // fold index per sample
  std::uint64_t seed = 0;
  bool thin_cells = false;  // some (label x group) cell had fewer than k rows
};

// Bundle layout: <dir>/activations.bin + <dir>/samples.csv.
ActivationDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const ActivationDataset& ds, const std::filesystem::path& dir);

ActivationDataset synth_generate(const SynthConfig& cfg);
// Records the generator parameters next to a saved bundle as synth.json.
void save_synth_provenance(const SynthConfig& cfg, const std::filesystem::path& dir);

// Equalizes group sizes to the minimum group count by sampling without
// replacement; row order of the survivors is preserved.
ActivationDataset undersample(const ActivationDataset& ds, std::uint64_t seed);

// Stratified k-fold assignment over (label x group) cells.
FoldPlan kfold_split(const ActivationDataset& ds, std::size_t k, std::uint64_t seed);

ActivationDataset subset(const ActivationDataset& ds, std::span<const std::size_t> indices);
std::vector<std::size_t> fold_members(const FoldPlan& plan, std::size_t fold);
std::vector<std::size_t> fold_complement(const FoldPlan& plan, std::size_t fold);

}  // namespace fairhead
