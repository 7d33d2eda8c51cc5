#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

namespace fairhead {

struct FixtureCell {
  double avg = 0.0;
  double stddev = 0.0;
};

// Published five-fold averages for the six methods on the reference corpus,
// stored verbatim. The four parity columns are single published numbers per
// method; they are kept as-is rather than re-derived.
struct PublishedFixture {
  // method -> metric -> cell. Methods: baseline, pre-process, in-process,
  // threshold, bpfa, fair-flip. Metrics: accuracy, f1, tpp, fpp, ppv, npv.
  std::map<std::string, std::map<std::string, FixtureCell>> cells;
};

const PublishedFixture& published_fixture();

PublishedFixture fixture_from_json(const nlohmann::json& j);
nlohmann::json fixture_to_json(const PublishedFixture& fixture);
PublishedFixture load_fixture(const std::filesystem::path& file);

// Headline claims the stored table must reproduce: the FPP-parity gain of
// fair-flip over baseline, and the relative accuracy cost.
inline constexpr double kClaimedFppGain = 0.30;       // up to 30 percent
inline constexpr double kFppGainTolerance = 0.015;    // +/- 1.5 points
inline constexpr double kClaimedAccuracyDrop = 0.0025;  // 0.25 percent
inline constexpr double kAccuracyDropTolerance = 0.001;  // +/- 0.1 points

struct FixtureCheck {
  double fpp_gain = 0.0;       // relative FPP-parity gain, baseline -> fair-flip
  double accuracy_drop = 0.0;  // relative accuracy loss, baseline -> fair-flip
  bool pass = false;
  std::string detail;          // human-readable expected-vs-actual lines
};

FixtureCheck run_fixture_check(const PublishedFixture& fixture);

}  // namespace fairhead
