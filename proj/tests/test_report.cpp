#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "fairhead/fixture.hpp"
#include "fairhead/io.hpp"
#include "fairhead/report.hpp"
#include "util.hpp"

using namespace fairhead;
using testutil::TempDir;

namespace {

FairnessReport stub_report(const std::string& method, int fold, double accuracy) {
  FairnessReport r;
  r.method = method;
  r.fold = fold;
  r.accuracy = accuracy;
  r.f1 = accuracy;
  r.groups.by_group["a"] = GroupRates{0.9, 0.1, 0.8, 0.7};
  r.groups.by_group["b"] = GroupRates{0.8, 0.2, 0.9, 0.6};
  r.tpp_parity = 0.9;
  r.fpp_parity = 0.5;
  r.ppv_parity = 0.8;
  r.npv_parity = 0.7;
  r.objective = 0.1;
  return r;
}

}  // namespace

TEST_CASE("json serialization writes nulls for undefined rates") {
  FairnessReport r = stub_report("baseline", 0, 0.9);
  r.groups.by_group["a"].fpp.reset();
  r.warnings = {"FPP undefined for group a"};
  const nlohmann::json j = report_to_json(r);
  CHECK(j.at("method") == "baseline");
  CHECK(j.at("fold") == 0);
  CHECK(j.at("groups").at("a").at("fpp").is_null());
  CHECK(j.at("groups").at("a").at("tpp") == 0.9);
  CHECK(j.at("groups").at("b").at("fpp") == 0.2);
  CHECK(j.at("warnings").size() == 1);
  CHECK(j.at("objective") == 0.1);
}

TEST_CASE("report files are written with identical bytes across runs") {
  TempDir dir("report");
  const std::vector<FairnessReport> reports = {stub_report("baseline", 0, 0.91),
                                               stub_report("fair-flip", 0, 0.90)};
  const auto a = dir.path() / "a.json";
  const auto b = dir.path() / "b.json";
  write_report_json(reports, a);
  write_report_json(reports, b);
  const std::string bytes_a = read_file(a);
  CHECK(bytes_a == read_file(b));
  CHECK(bytes_a.find("\"accuracy\"") != std::string::npos);
  CHECK(bytes_a.back() == '\n');
  // keys come out sorted, so the serialization is order-independent
  CHECK(bytes_a.find("\"accuracy\"") < bytes_a.find("\"method\""));
}

TEST_CASE("markdown mirrors the published table layout") {
  std::vector<FairnessReport> reports;
  for (int fold = 0; fold < 2; ++fold) {
    reports.push_back(stub_report("fair-flip", fold, fold == 0 ? 0.8 : 0.9));
    reports.push_back(stub_report("baseline", fold, fold == 0 ? 0.7 : 0.8));
  }
  const std::string md = report_markdown(reports);

  // canonical column order regardless of insertion order
  CHECK(md.find("| Metric | Fold | Baseline | Fair-FLIP |") != std::string::npos);
  CHECK(md.find("| Accuracy | 1 |") != std::string::npos);
  CHECK(md.find("| | 2 |") != std::string::npos);

  // sample standard deviation: values 0.7/0.8 -> 0.75 (0.0707)
  CHECK(md.find("| | Avg (Std) | 0.7500 (0.0707) | 0.8500 (0.0707) |") != std::string::npos);

  // one block per metric
  for (const char* label : {"Accuracy", "F1-Score", "TPP Parity", "FPP Parity",
                            "PPV Parity", "NPV Parity"}) {
    CHECK(md.find(std::string("| ") + label + " | 1 |") != std::string::npos);
  }
}

TEST_CASE("markdown handles foldless reports and missing cells") {
  std::vector<FairnessReport> reports = {stub_report("baseline", -1, 0.9),
                                         stub_report("custom", -1, 0.8)};
  const std::string md = report_markdown(reports);
  CHECK(md.find("| Metric | Fold | Baseline | custom |") != std::string::npos);
  CHECK(md.find("| Accuracy | - |") != std::string::npos);
  CHECK(md.find("(0.0000)") != std::string::npos);  // single value, zero spread

  std::vector<FairnessReport> sparse = {stub_report("baseline", 0, 0.9),
                                        stub_report("fair-flip", 1, 0.8)};
  const std::string sparse_md = report_markdown(sparse);
  CHECK(sparse_md.find("| Accuracy | 1 | 0.9000 | - |") != std::string::npos);
  CHECK(sparse_md.find("| | 2 | - | 0.8000 |") != std::string::npos);
}

TEST_CASE("the stored reference table carries the published numbers") {
  const PublishedFixture& fixture = published_fixture();
  CHECK(fixture.cells.at("baseline").at("accuracy").avg == 0.8731);
  CHECK(fixture.cells.at("baseline").at("accuracy").stddev == 0.0148);
  CHECK(fixture.cells.at("baseline").at("fpp").avg == 0.5171);
  CHECK(fixture.cells.at("fair-flip").at("fpp").avg == 0.6737);
  CHECK(fixture.cells.at("fair-flip").at("accuracy").avg == 0.8708);
  CHECK(fixture.cells.size() == 6);
  for (const auto& [method, metrics] : fixture.cells) {
    CHECK(metrics.size() == 6);
  }
}

TEST_CASE("fixture json round-trips and rejects missing cells") {
  const PublishedFixture& fixture = published_fixture();
  const nlohmann::json j = fixture_to_json(fixture);
  const PublishedFixture back = fixture_from_json(j);
  REQUIRE(back.cells.size() == fixture.cells.size());
  for (const auto& [method, metrics] : fixture.cells) {
    for (const auto& [metric, cell] : metrics) {
      CHECK(back.cells.at(method).at(metric).avg == cell.avg);
      CHECK(back.cells.at(method).at(metric).stddev == cell.stddev);
    }
  }

  nlohmann::json broken = j;
  broken.erase("bpfa");
  CHECK_THROWS_WITH_AS(fixture_from_json(broken), doctest::Contains("missing method"),
                       std::runtime_error);
  broken = j;
  broken["baseline"].erase("fpp");
  CHECK_THROWS_WITH_AS(fixture_from_json(broken), doctest::Contains("missing"),
                       std::runtime_error);
}

TEST_CASE("the reference table reproduces its own headline claims") {
  const FixtureCheck check = run_fixture_check(published_fixture());
  CHECK(check.pass);
  CHECK(check.fpp_gain == doctest::Approx(0.30284).epsilon(1e-3));
  CHECK(check.accuracy_drop == doctest::Approx(0.00263).epsilon(1e-2));
  CHECK(check.detail.find("ok") != std::string::npos);
  CHECK(check.detail.find("MISMATCH") == std::string::npos);
}

TEST_CASE("a tampered reference table fails the claim check") {
  PublishedFixture fixture = published_fixture();
  fixture.cells["fair-flip"]["fpp"].avg = 0.5200;  // barely above baseline
  const FixtureCheck check = run_fixture_check(fixture);
  CHECK_FALSE(check.pass);
  CHECK(check.detail.find("MISMATCH") != std::string::npos);
}
