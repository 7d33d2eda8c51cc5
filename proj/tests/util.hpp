#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fairhead/dataset.hpp"
#include "fairhead/head.hpp"
#include "fairhead/rng.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("fairhead-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline fairhead::ActivationDataset make_dataset(const std::vector<std::vector<float>>& rows,
                                                const std::vector<int>& labels,
                                                const std::vector<std::string>& groups) {
  fairhead::ActivationDataset ds;
  ds.rows = rows.size();
  ds.cols = rows.empty() ? 0 : rows[0].size();
  for (const auto& row : rows) {
    ds.activations.insert(ds.activations.end(), row.begin(), row.end());
  }
  ds.labels = labels;
  ds.groups = groups;
  return ds;
}

inline fairhead::ActivationDataset random_dataset(fairhead::Rng& rng, std::size_t rows,
                                                  std::size_t cols, std::size_t n_groups) {
  fairhead::ActivationDataset ds;
  ds.rows = rows;
  ds.cols = cols;
  ds.activations.reserve(rows * cols);
  ds.labels.reserve(rows);
  ds.groups.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      ds.activations.push_back(static_cast<float>(rng.normal()));
    }
    ds.labels.push_back(static_cast<int>(rng.below(2)));
    ds.groups.push_back(std::string(1, static_cast<char>('a' + rng.below(n_groups))));
  }
  return ds;
}

inline fairhead::FinalLayer random_head(fairhead::Rng& rng, std::size_t features,
                                        double scale = 1.0) {
  fairhead::FinalLayer head = fairhead::FinalLayer::zeros(features);
  for (double& w : head.weights) w = scale * rng.normal();
  head.bias[0] = scale * rng.normal();
  head.bias[1] = scale * rng.normal();
  return head;
}

}  // namespace testutil
