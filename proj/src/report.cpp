#include "fairhead/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "fairhead/io.hpp"

namespace fairhead {

namespace {

const char* const kCanonical[] = {"baseline", "pre-process", "in-process",
                                  "threshold", "bpfa", "fair-flip"};

std::string display_name(const std::string& method) {
  if (method == "baseline") return "Baseline";
  if (method == "pre-process") return "Pre-Process";
  if (method == "in-process") return "In-Process";
  if (method == "threshold") return "Threshold";
  if (method == "bpfa") return "BPFA";
  if (method == "fair-flip") return "Fair-FLIP";
  return method;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return std::string(buf);
}

struct MetricColumn {
  const char* label;
  double (*get)(const FairnessReport&);
};

const MetricColumn kMetricRows[] = {
    {"Accuracy", [](const FairnessReport& r) { return r.accuracy; }},
    {"F1-Score", [](const FairnessReport& r) { return r.f1; }},
    {"TPP Parity", [](const FairnessReport& r) { return r.tpp_parity; }},
    {"FPP Parity", [](const FairnessReport& r) { return r.fpp_parity; }},
    {"PPV Parity", [](const FairnessReport& r) { return r.ppv_parity; }},
    {"NPV Parity", [](const FairnessReport& r) { return r.npv_parity; }},
};

}  // namespace

nlohmann::json report_to_json(const FairnessReport& report) {
  nlohmann::json j;
  j["method"] = report.method;
  j["fold"] = report.fold;
  j["threshold"] = report.threshold;
  j["accuracy"] = report.accuracy;
  j["f1"] = report.f1;
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& [token, rates] : report.groups.by_group) {
    nlohmann::json g;
    const auto put = [&g](const char* name, const std::optional<double>& v) {
      if (v) {
        g[name] = *v;
      } else {
        g[name] = nullptr;
      }
    };
    put("tpp", rates.tpp);
    put("fpp", rates.fpp);
    put("ppv", rates.ppv);
    put("npv", rates.npv);
    groups[token] = g;
  }
  j["groups"] = groups;
  j["tpp_parity"] = report.tpp_parity;
  j["fpp_parity"] = report.fpp_parity;
  j["ppv_parity"] = report.ppv_parity;
  j["npv_parity"] = report.npv_parity;
  j["objective"] = report.objective;
  j["warnings"] = report.warnings;
  return j;
}

void write_report_json(std::span<const FairnessReport> reports,
                       const std::filesystem::path& file) {
  nlohmann::json arr = nlohmann::json::array();
  for (const FairnessReport& r : reports) arr.push_back(report_to_json(r));
  atomic_write_file(file, arr.dump(2) + "\n");
}

std::string report_markdown(std::span<const FairnessReport> reports) {
  std::vector<std::string> methods;
  for (const char* m : kCanonical) {
    for (const FairnessReport& r : reports) {
      if (r.method == m) {
        methods.push_back(m);
        break;
      }
    }
  }
  for (const FairnessReport& r : reports) {  // tolerate non-canonical labels
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  std::set<int> fold_set;
  for (const FairnessReport& r : reports) fold_set.insert(r.fold);
  const std::vector<int> folds(fold_set.begin(), fold_set.end());

  const auto find_report = [&reports](const std::string& method,
                                      int fold) -> const FairnessReport* {
    for (const FairnessReport& r : reports) {
      if (r.method == method && r.fold == fold) return &r;
    }
    return nullptr;
  };

  std::string out = "# Fairness evaluation report\n\n";
  out += "| Metric | Fold |";
  for (const std::string& m : methods) out += " " + display_name(m) + " |";
  out += "\n|---|---|";
  for (std::size_t i = 0; i < methods.size(); ++i) out += "---|";
  out += "\n";

  for (const MetricColumn& metric : kMetricRows) {
    bool first_row = true;
    for (const int fold : folds) {
      out += first_row ? "| " + std::string(metric.label) + " | " : "| | ";
      out += fold < 0 ? std::string("-") : std::to_string(fold + 1);
      out += " |";
      for (const std::string& m : methods) {
        const FairnessReport* r = find_report(m, fold);
        out += r ? " " + fixed4(metric.get(*r)) + " |" : " - |";
      }
      out += "\n";
      first_row = false;
    }
    out += "| | Avg (Std) |";
    for (const std::string& m : methods) {
      std::vector<double> values;
      for (const int fold : folds) {
        if (const FairnessReport* r = find_report(m, fold)) values.push_back(metric.get(*r));
      }
      if (values.empty()) {
        out += " - |";
        continue;
      }
      double mean = 0.0;
      for (const double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (const double v : values) var += (v - mean) * (v - mean);
      const double stddev =
          values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
      out += " " + fixed4(mean) + " (" + fixed4(stddev) + ") |";
    }
    out += "\n";
  }
  return out;
}

void write_report_markdown(std::span<const FairnessReport> reports,
                           const std::filesystem::path& file) {
  atomic_write_file(file, report_markdown(reports));
}

}  // namespace fairhead
