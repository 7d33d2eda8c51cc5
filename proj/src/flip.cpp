#include "fairhead/flip.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "fairhead/io.hpp"
#include "fairhead/metrics.hpp"

namespace fairhead {

namespace {

void validate_stats(const GroupFeatureStats& stats) {
  if (stats.group_order.empty()) throw std::invalid_argument("stats have no groups");
  if (stats.features == 0) throw std::invalid_argument("stats have no features");
  if (stats.group_means.size() != stats.group_order.size() * stats.features) {
    throw std::invalid_argument("group mean matrix shape mismatch");
  }
  for (const double v : stats.group_means) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite group mean");
  }
}

void require_complete(const GroupFeatureStats& stats) {
  if (stats.sigma.size() != stats.features || stats.sigma_hat.size() != stats.features) {
    throw std::invalid_argument("stats are missing sigma or sigma_hat");
  }
}

}  // namespace

GroupFeatureStats group_feature_means(const ActivationDataset& ds) {
  validate_dataset(ds);
  const std::size_t d = ds.cols;

  std::map<std::string, std::size_t> slot_of;
  std::vector<std::size_t> counts;
  std::vector<std::vector<double>> sums;
  std::vector<std::size_t> row_slot(ds.rows);
  for (std::size_t i = 0; i < ds.rows; ++i) {
    auto [it, inserted] = slot_of.try_emplace(ds.groups[i], counts.size());
    if (inserted) {
      counts.push_back(0);
      sums.emplace_back(d, 0.0);
    }
    row_slot[i] = it->second;
  }
  for (std::size_t i = 0; i < ds.rows; ++i) {
    ++counts[row_slot[i]];
    double* acc = sums[row_slot[i]].data();
    const auto x = ds.row(i);
    for (std::size_t j = 0; j < d; ++j) acc[j] += static_cast<double>(x[j]);
  }

  GroupFeatureStats stats;
  stats.features = d;
  stats.group_order.reserve(slot_of.size());
  stats.group_means.resize(slot_of.size() * d);
  std::size_t out_index = 0;
  for (const auto& [token, slot] : slot_of) {  // map iterates in sorted token order
    stats.group_order.push_back(token);
    const double inv = 1.0 / static_cast<double>(counts[slot]);
    for (std::size_t j = 0; j < d; ++j) {
      stats.group_means[out_index * d + j] = sums[slot][j] * inv;
    }
    ++out_index;
  }
  return stats;
}

GroupFeatureStats between_group_std(GroupFeatureStats stats) {
  validate_stats(stats);
  const std::size_t g = stats.group_order.size();
  const std::size_t d = stats.features;
  stats.sigma.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t a = 0; a < g; ++a) mean += stats.group_means[a * d + j];
    mean /= static_cast<double>(g);
    double var = 0.0;
    for (std::size_t a = 0; a < g; ++a) {
      const double delta = stats.group_means[a * d + j] - mean;
      var += delta * delta;
    }
    var /= static_cast<double>(g);
    stats.sigma[j] = std::sqrt(var);
  }
  return stats;
}

GroupFeatureStats normalize_variability(GroupFeatureStats stats) {
  validate_stats(stats);
  if (stats.sigma.size() != stats.features) {
    throw std::invalid_argument("sigma must be computed before normalization");
  }
  const auto [mn_it, mx_it] = std::minmax_element(stats.sigma.begin(), stats.sigma.end());
  const double mn = *mn_it;
  const double mx = *mx_it;
  stats.sigma_hat.assign(stats.features, 0.0);
  if (mx > mn) {
    const double span = mx - mn;
    for (std::size_t j = 0; j < stats.features; ++j) {
      stats.sigma_hat[j] = (stats.sigma[j] - mn) / span;
    }
  }
  return stats;
}

GroupFeatureStats compute_group_stats(const ActivationDataset& ds) {
  return normalize_variability(between_group_std(group_feature_means(ds)));
}

FinalLayer apply_flip(const FinalLayer& head, const GroupFeatureStats& stats,
                      const FlipConfig& cfg) {
  validate_head(head);
  validate_stats(stats);
  require_complete(stats);
  if (head.features != stats.features) {
    throw std::invalid_argument("dimension mismatch between head and stats");
  }
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha)) {
    throw std::invalid_argument("alpha must be finite and >= 0");
  }
  FinalLayer out = head;
  for (std::size_t j = 0; j < head.features; ++j) {
    const double multiplier = 1.0 + cfg.alpha - stats.sigma_hat[j];
    for (std::size_t c = 0; c < kClassCount; ++c) {
      out.weight(c, j) = head.weight(c, j) * multiplier;
    }
  }
  nlohmann::json meta;
  meta["method"] = "fair-flip";
  meta["alpha"] = cfg.alpha;
  meta["stats_digest"] = to_hex(stats_digest(stats));
  if (!head.metadata.empty()) meta["origin"] = head.metadata;
  out.metadata = meta;
  return out;
}

std::uint64_t stats_digest(const GroupFeatureStats& stats) {
  std::string blob;
  for (const std::string& g : stats.group_order) {
    blob += g;
    blob += '\0';
  }
  const auto append_doubles = [&blob](const std::vector<double>& values) {
    for (const double v : values) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int shift = 0; shift < 64; shift += 8) {
        blob.push_back(static_cast<char>((bits >> shift) & 0xff));
      }
    }
  };
  append_doubles(stats.group_means);
  append_doubles(stats.sigma);
  append_doubles(stats.sigma_hat);
  return fnv1a64(blob);
}

std::vector<AlphaSweepRow> alpha_sweep(const FinalLayer& head, const ActivationDataset& calib,
                                       const ActivationDataset& eval,
                                       const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("alpha grid must not be empty");
  for (const double a : grid) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw std::invalid_argument("alpha must be finite and >= 0");
    }
  }
  const GroupFeatureStats stats = compute_group_stats(calib);
  std::vector<AlphaSweepRow> rows;
  rows.reserve(grid.size());
  for (const double a : grid) {
    const FinalLayer flipped = apply_flip(head, stats, FlipConfig{a});
    const FairnessReport report = build_report(flipped, eval, 0.5, "fair-flip");
    AlphaSweepRow row;
    row.alpha = a;
    row.accuracy = report.accuracy;
    row.tpp_parity = report.tpp_parity;
    row.fpp_parity = report.fpp_parity;
    row.ppv_parity = report.ppv_parity;
    row.npv_parity = report.npv_parity;
    rows.push_back(row);
  }
  return rows;
}

void save_stats(const GroupFeatureStats& stats, const std::filesystem::path& file) {
  validate_stats(stats);
  require_complete(stats);
  std::string out = "{\n  \"groups\": [";
  for (std::size_t a = 0; a < stats.group_order.size(); ++a) {
    if (a) out += ", ";
    out += nlohmann::json(stats.group_order[a]).dump();
  }
  out += "],\n  \"features\": " + std::to_string(stats.features) + ",\n";
  out += "  \"group_means\": [\n";
  for (std::size_t a = 0; a < stats.group_order.size(); ++a) {
    out += "    [";
    for (std::size_t j = 0; j < stats.features; ++j) {
      if (j) out += ", ";
      out += format_g17(stats.group_means[a * stats.features + j]);
    }
    out += a + 1 < stats.group_order.size() ? "],\n" : "]\n";
  }
  out += "  ],\n";
  const auto emit_vector = [&out, &stats](const char* name, const std::vector<double>& values,
                                          bool trailing_comma) {
    out += "  \"";
    out += name;
    out += "\": [";
    for (std::size_t j = 0; j < stats.features; ++j) {
      if (j) out += ", ";
      out += format_g17(values[j]);
    }
    out += trailing_comma ? "],\n" : "]\n";
  };
  emit_vector("sigma", stats.sigma, true);
  emit_vector("sigma_hat", stats.sigma_hat, false);
  out += "}\n";
  atomic_write_file(file, out);
}

GroupFeatureStats load_stats(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("cannot parse " + file.string() + ": " + e.what());
  }
  GroupFeatureStats stats;
  try {
    stats.group_order = j.at("groups").get<std::vector<std::string>>();
    stats.features = j.at("features").get<std::size_t>();
    const auto& means = j.at("group_means");
    if (!means.is_array() || means.size() != stats.group_order.size()) {
      throw std::runtime_error("group_means must hold one row per group");
    }
    stats.group_means.reserve(stats.group_order.size() * stats.features);
    for (const auto& row : means) {
      if (!row.is_array() || row.size() != stats.features) {
        throw std::runtime_error("group_means row length mismatch");
      }
      for (const auto& v : row) stats.group_means.push_back(v.get<double>());
    }
    stats.sigma = j.at("sigma").get<std::vector<double>>();
    stats.sigma_hat = j.at("sigma_hat").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid stats in " + file.string() + ": " + e.what());
  }
  validate_stats(stats);
  require_complete(stats);
  return stats;
}

std::string alpha_sweep_csv(const std::vector<AlphaSweepRow>& rows) {
  std::string out = "alpha,accuracy,tpp_parity,fpp_parity,ppv_parity,npv_parity\n";
  for (const AlphaSweepRow& row : rows) {
    out += format_g17(row.alpha) + "," + format_g17(row.accuracy) + "," +
           format_g17(row.tpp_parity) + "," + format_g17(row.fpp_parity) + "," +
           format_g17(row.ppv_parity) + "," + format_g17(row.npv_parity) + "\n";
  }
  return out;
}

}  // namespace fairhead
