#include "fairhead/head.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fairhead/io.hpp"

namespace fairhead {

void validate_head(const FinalLayer& head) {
  if (head.features == 0) throw std::invalid_argument("head must have at least one feature");
  if (head.weights.size() != kClassCount * head.features) {
    throw std::invalid_argument("weight matrix shape mismatch");
  }
  for (const double w : head.weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("non-finite weight");
  }
  for (const double b : head.bias) {
    if (!std::isfinite(b)) throw std::invalid_argument("non-finite bias");
  }
  if (!head.metadata.is_object()) {
    throw std::invalid_argument("metadata must be a JSON object");
  }
}

ProbabilityMatrix forward(const FinalLayer& head, const ActivationDataset& ds) {
  validate_head(head);
  validate_dataset(ds);
  if (head.features != ds.cols) {
    throw std::invalid_argument("dimension mismatch: head expects " +
                                std::to_string(head.features) + " features, dataset has " +
                                std::to_string(ds.cols));
  }
  ProbabilityMatrix probs;
  probs.rows = ds.rows;
  probs.values.resize(ds.rows * kClassCount);
  const double* w0 = head.weights.data();
  const double* w1 = head.weights.data() + head.features;
  for (std::size_t i = 0; i < ds.rows; ++i) {
    const auto x = ds.row(i);
    double z0 = head.bias[0];
    double z1 = head.bias[1];
    for (std::size_t j = 0; j < head.features; ++j) {
      const double xv = static_cast<double>(x[j]);
      z0 += w0[j] * xv;
      z1 += w1[j] * xv;
    }
    const double m = z0 > z1 ? z0 : z1;
    const double e0 = std::exp(z0 - m);
    const double e1 = std::exp(z1 - m);
    const double sum = e0 + e1;
    probs.values[i * kClassCount] = e0 / sum;
    probs.values[i * kClassCount + 1] = e1 / sum;
  }
  return probs;
}

std::vector<int> predict(const ProbabilityMatrix& probs, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("threshold must lie in [0, 1]");
  }
  std::vector<int> labels(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    labels[i] = probs.p_fake(i) >= threshold ? 1 : 0;
  }
  return labels;
}

FinalLayer load_head(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("cannot parse " + file.string() + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("head file must hold a JSON object");
  if (!j.contains("classes") || !j["classes"].is_number_integer() ||
      j["classes"].get<int>() != static_cast<int>(kClassCount)) {
    throw std::runtime_error("head file must declare classes = 2");
  }
  if (!j.contains("features") || !j["features"].is_number_integer() ||
      j["features"].get<long long>() < 1) {
    throw std::runtime_error("head file must declare features >= 1");
  }
  FinalLayer head;
  head.features = j["features"].get<std::size_t>();
  const auto& weights = j.at("weights");
  if (!weights.is_array() || weights.size() != kClassCount) {
    throw std::runtime_error("weights must hold one row per class");
  }
  head.weights.reserve(kClassCount * head.features);
  for (const auto& row : weights) {
    if (!row.is_array() || row.size() != head.features) {
      throw std::runtime_error("weight row length does not match declared features");
    }
    for (const auto& v : row) {
      if (!v.is_number()) throw std::runtime_error("weight entries must be numbers");
      head.weights.push_back(v.get<double>());
    }
  }
  const auto& bias = j.at("bias");
  if (!bias.is_array() || bias.size() != kClassCount) {
    throw std::runtime_error("bias must hold exactly one value per class");
  }
  for (std::size_t c = 0; c < kClassCount; ++c) {
    if (!bias[c].is_number()) throw std::runtime_error("bias entries must be numbers");
    head.bias[c] = bias[c].get<double>();
  }
  if (j.contains("metadata")) {
    if (!j["metadata"].is_object()) throw std::runtime_error("metadata must be a JSON object");
    head.metadata = j["metadata"];
  }
  try {
    validate_head(head);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("invalid head in " + file.string() + ": " + e.what());
  }
  return head;
}

void save_head(const FinalLayer& head, const std::filesystem::path& file) {
  validate_head(head);
  std::string out = "{\n";
  out += "  \"classes\": 2,\n";
  out += "  \"features\": " + std::to_string(head.features) + ",\n";
  out += "  \"weights\": [\n";
  for (std::size_t c = 0; c < kClassCount; ++c) {
    out += "    [";
    for (std::size_t jx = 0; jx < head.features; ++jx) {
      if (jx) out += ", ";
      out += format_g17(head.weight(c, jx));
    }
    out += c + 1 < kClassCount ? "],\n" : "]\n";
  }
  out += "  ],\n";
  out += "  \"bias\": [" + format_g17(head.bias[0]) + ", " + format_g17(head.bias[1]) + "]";
  if (!head.metadata.empty()) {
    out += ",\n  \"metadata\": " + head.metadata.dump();
  }
  out += "\n}\n";
  atomic_write_file(file, out);
}

}  // namespace fairhead
