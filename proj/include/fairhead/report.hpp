#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

#include "fairhead/metrics.hpp"

namespace fairhead {

nlohmann::json report_to_json(const FairnessReport& report);

// JSON array with one object per (method, fold) pair, keys sorted, so two
// identical runs serialize to identical bytes.
void write_report_json(std::span<const FairnessReport> reports,
                       const std::filesystem::path& file);

// Markdown table mirroring the published layout: one block of rows per
// metric, one column per method, per-fold values plus an Avg (Std) row with
// four decimals. The Std uses the sample standard deviation.
std::string report_markdown(std::span<const FairnessReport> reports);
void write_report_markdown(std::span<const FairnessReport> reports,
                           const std::filesystem::path& file);

}  // namespace fairhead
