#include "fairhead/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "fairhead/io.hpp"
#include "fairhead/rng.hpp"

namespace fairhead {

namespace {

constexpr char kMagic[4] = {'F', 'F', 'A', '1'};
constexpr std::size_t kHeaderSize = 16;

std::uint32_t read_u32le(const char* p) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(p[0])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24;
}

void append_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void check_token(const std::string& token, const char* what) {
  for (const char c : token) {
    if (c == ',' || c == '\n' || c == '\r') {
      throw std::invalid_argument(std::string(what) + " contains a reserved character: " + token);
    }
  }
}

}  // namespace

void validate_dataset(const ActivationDataset& ds) {
  if (ds.rows == 0) throw std::invalid_argument("empty dataset: N must be >= 1");
  if (ds.cols == 0) throw std::invalid_argument("empty dataset: d must be >= 1");
  if (ds.activations.size() != ds.rows * ds.cols) {
    throw std::invalid_argument("activation buffer size does not match N*d");
  }
  if (ds.labels.size() != ds.rows) {
    throw std::invalid_argument("label count does not match N");
  }
  if (ds.groups.size() != ds.rows) {
    throw std::invalid_argument("group count does not match N");
  }
  if (!ds.ids.empty() && ds.ids.size() != ds.rows) {
    throw std::invalid_argument("id count does not match N");
  }
  for (const int label : ds.labels) {
    if (label != 0 && label != 1) {
      throw std::invalid_argument("label must be 0 or 1");
    }
  }
  for (const std::string& g : ds.groups) {
    if (g.empty()) throw std::invalid_argument("empty group token");
  }
  for (const float a : ds.activations) {
    if (!std::isfinite(a)) throw std::invalid_argument("non-finite activation");
  }
}

ActivationDataset load_dataset(const std::filesystem::path& dir) {
  const auto bin_path = dir / "activations.bin";
  const auto csv_path = dir / "samples.csv";
  const std::string bin = read_file(bin_path);

  if (bin.size() < kHeaderSize) {
    throw std::runtime_error("truncated header in " + bin_path.string());
  }
  if (std::memcmp(bin.data(), kMagic, 4) != 0) {
    throw std::runtime_error("magic mismatch in " + bin_path.string());
  }
  for (std::size_t i = 12; i < 16; ++i) {
    if (bin[i] != 0) {
      throw std::runtime_error("version mismatch in " + bin_path.string() +
                               ": reserved header bytes must be zero");
    }
  }
  const std::uint32_t n = read_u32le(bin.data() + 4);
  const std::uint32_t d = read_u32le(bin.data() + 8);
  if (n == 0 || d == 0) {
    throw std::runtime_error("empty dataset declared by " + bin_path.string());
  }
  const std::size_t expected = kHeaderSize + 4ull * n * d;
  if (bin.size() != expected) {
    throw std::runtime_error("payload size mismatch in " + bin_path.string() + ": expected " +
                             std::to_string(expected) + " bytes, found " +
                             std::to_string(bin.size()));
  }

  ActivationDataset ds;
  ds.rows = n;
  ds.cols = d;
  ds.activations.resize(static_cast<std::size_t>(n) * d);
  for (std::size_t i = 0; i < ds.activations.size(); ++i) {
    ds.activations[i] = std::bit_cast<float>(read_u32le(bin.data() + kHeaderSize + 4 * i));
  }

  const std::string csv = read_file(csv_path);
  std::istringstream lines(csv);
  std::string line;
  if (!std::getline(lines, line)) {
    throw std::runtime_error("missing header row in " + csv_path.string());
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,label,group") {
    throw std::runtime_error("unexpected header row in " + csv_path.string() + ": " + line);
  }
  ds.labels.reserve(n);
  ds.groups.reserve(n);
  ds.ids.reserve(n);
  std::size_t row = 0;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && lines.peek() == EOF) break;  // trailing newline
    const auto first = line.find(',');
    const auto second = first == std::string::npos ? std::string::npos : line.find(',', first + 1);
    if (first == std::string::npos || second == std::string::npos ||
        line.find(',', second + 1) != std::string::npos) {
      throw std::runtime_error("malformed row " + std::to_string(row + 2) + " in " +
                               csv_path.string());
    }
    const std::string label = line.substr(first + 1, second - first - 1);
    if (label != "0" && label != "1") {
      throw std::runtime_error("label must be 0 or 1 (row " + std::to_string(row + 2) + " of " +
                               csv_path.string() + ")");
    }
    if (row >= n) {
      throw std::runtime_error("row count mismatch: " + bin_path.string() + " declares " +
                               std::to_string(n) + " rows but " + csv_path.string() +
                               " has more");
    }
    ds.ids.push_back(line.substr(0, first));
    ds.labels.push_back(label == "1" ? 1 : 0);
    ds.groups.push_back(line.substr(second + 1));
    ++row;
  }
  if (row != n) {
    throw std::runtime_error("row count mismatch: " + bin_path.string() + " declares " +
                             std::to_string(n) + " rows but " + csv_path.string() + " has " +
                             std::to_string(row));
  }
  const bool any_id = std::any_of(ds.ids.begin(), ds.ids.end(),
                                  [](const std::string& s) { return !s.empty(); });
  if (!any_id) ds.ids.clear();

  validate_dataset(ds);
  return ds;
}

void save_dataset(const ActivationDataset& ds, const std::filesystem::path& dir) {
  validate_dataset(ds);
  for (const std::string& g : ds.groups) check_token(g, "group token");
  for (const std::string& id : ds.ids) check_token(id, "id");

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  std::string bin;
  bin.reserve(kHeaderSize + 4 * ds.activations.size());
  bin.append(kMagic, 4);
  append_u32le(bin, static_cast<std::uint32_t>(ds.rows));
  append_u32le(bin, static_cast<std::uint32_t>(ds.cols));
  append_u32le(bin, 0);
  for (const float a : ds.activations) {
    append_u32le(bin, std::bit_cast<std::uint32_t>(a));
  }
  atomic_write_file(dir / "activations.bin", bin);

  std::string csv = "id,label,group\n";
  for (std::size_t i = 0; i < ds.rows; ++i) {
    if (!ds.ids.empty()) csv += ds.ids[i];
    csv += ',';
    csv += ds.labels[i] ? '1' : '0';
    csv += ',';
    csv += ds.groups[i];
    csv += '\n';
  }
  atomic_write_file(dir / "samples.csv", csv);
}

ActivationDataset synth_generate(const SynthConfig& cfg) {
  if (cfg.n_per_group_per_class == 0) {
    throw std::invalid_argument("empty group: n_per_group_per_class must be >= 1");
  }
  if (cfg.groups.size() < 2) {
    throw std::invalid_argument("synthetic corpus needs at least 2 groups");
  }
  if (cfg.d == 0) throw std::invalid_argument("d must be >= 1");
  {
    std::set<std::string> unique(cfg.groups.begin(), cfg.groups.end());
    if (unique.size() != cfg.groups.size()) {
      throw std::invalid_argument("duplicate group token");
    }
  }
  for (const std::string& g : cfg.groups) {
    if (g.empty()) throw std::invalid_argument("empty group token");
  }
  for (const std::size_t j : cfg.biased_features) {
    if (j >= cfg.d) throw std::invalid_argument("biased feature index out of range");
  }
  for (const std::size_t j : cfg.signal_features) {
    if (j >= cfg.d) throw std::invalid_argument("signal feature index out of range");
  }
  if (!cfg.allow_overlap) {
    const std::set<std::size_t> biased(cfg.biased_features.begin(), cfg.biased_features.end());
    for (const std::size_t j : cfg.signal_features) {
      if (biased.count(j)) {
        throw std::invalid_argument(
            "biased and signal features overlap; set allow_overlap to permit this");
      }
    }
  }
  if (!(cfg.noise_std > 0.0) || !std::isfinite(cfg.noise_std)) {
    throw std::invalid_argument("noise_std must be positive and finite");
  }
  if (!std::isfinite(cfg.bias_magnitude) || !std::isfinite(cfg.signal_magnitude)) {
    throw std::invalid_argument("magnitudes must be finite");
  }

  std::vector<char> is_biased(cfg.d, 0);
  std::vector<char> is_signal(cfg.d, 0);
  for (const std::size_t j : cfg.biased_features) is_biased[j] = 1;
  for (const std::size_t j : cfg.signal_features) is_signal[j] = 1;

  const std::size_t n_rows = cfg.groups.size() * 2 * cfg.n_per_group_per_class;
  ActivationDataset ds;
  ds.rows = n_rows;
  ds.cols = cfg.d;
  ds.activations.reserve(n_rows * cfg.d);
  ds.labels.reserve(n_rows);
  ds.groups.reserve(n_rows);
  ds.ids.reserve(n_rows);

  Rng rng(cfg.seed);
  for (std::size_t gi = 0; gi < cfg.groups.size(); ++gi) {
    const double group_offset = static_cast<double>(gi) * cfg.bias_magnitude;
    for (int y = 0; y <= 1; ++y) {
      const double class_offset = y == 1 ? cfg.signal_magnitude : -cfg.signal_magnitude;
      for (std::size_t s = 0; s < cfg.n_per_group_per_class; ++s) {
        for (std::size_t j = 0; j < cfg.d; ++j) {
          double v = cfg.noise_std * rng.normal();
          if (is_biased[j]) v += group_offset;
          if (is_signal[j]) v += class_offset;
          ds.activations.push_back(static_cast<float>(v));
        }
        ds.labels.push_back(y);
        ds.groups.push_back(cfg.groups[gi]);
        ds.ids.push_back(cfg.groups[gi] + "-" + std::to_string(y) + "-" + std::to_string(s));
      }
    }
  }
  validate_dataset(ds);
  return ds;
}

void save_synth_provenance(const SynthConfig& cfg, const std::filesystem::path& dir) {
  nlohmann::json j;
  j["n_per_group_per_class"] = cfg.n_per_group_per_class;
  j["groups"] = cfg.groups;
  j["d"] = cfg.d;
  j["biased_features"] = cfg.biased_features;
  j["signal_features"] = cfg.signal_features;
  j["allow_overlap"] = cfg.allow_overlap;
  j["bias_magnitude"] = cfg.bias_magnitude;
  j["signal_magnitude"] = cfg.signal_magnitude;
  j["noise_std"] = cfg.noise_std;
  j["seed"] = cfg.seed;
  atomic_write_file(dir / "synth.json", j.dump(2) + "\n");
}

ActivationDataset undersample(const ActivationDataset& ds, std::uint64_t seed) {
  validate_dataset(ds);
  std::map<std::string, std::vector<std::size_t>> by_group;
  for (std::size_t i = 0; i < ds.rows; ++i) by_group[ds.groups[i]].push_back(i);

  std::size_t min_count = ds.rows;
  for (const auto& [token, members] : by_group) {
    min_count = std::min(min_count, members.size());
  }

  Rng rng(seed);
  std::vector<std::size_t> keep;
  keep.reserve(min_count * by_group.size());
  for (const auto& [token, members] : by_group) {
    std::vector<std::size_t> pool = members;
    rng.shuffle(pool);
    keep.insert(keep.end(), pool.begin(), pool.begin() + min_count);
  }
  std::sort(keep.begin(), keep.end());
  return subset(ds, keep);
}

FoldPlan kfold_split(const ActivationDataset& ds, std::size_t k, std::uint64_t seed) {
  validate_dataset(ds);
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  if (k > ds.rows) throw std::invalid_argument("k > N");

  std::map<std::pair<std::string, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < ds.rows; ++i) {
    cells[{ds.groups[i], ds.labels[i]}].push_back(i);
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(ds.rows, 0);

  Rng rng(seed);
  std::size_t offset = 0;
  for (auto& [key, members] : cells) {
    if (members.size() < k) plan.thin_cells = true;
    rng.shuffle(members);
    for (std::size_t t = 0; t < members.size(); ++t) {
      plan.assignments[members[t]] = (offset + t) % k;
    }
    offset = (offset + members.size()) % k;
  }
  return plan;
}

ActivationDataset subset(const ActivationDataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("subset needs at least one row");
  ActivationDataset out;
  out.rows = indices.size();
  out.cols = ds.cols;
  out.activations.reserve(out.rows * out.cols);
  out.labels.reserve(out.rows);
  out.groups.reserve(out.rows);
  if (!ds.ids.empty()) out.ids.reserve(out.rows);
  for (const std::size_t i : indices) {
    if (i >= ds.rows) throw std::invalid_argument("subset index out of range");
    const auto r = ds.row(i);
    out.activations.insert(out.activations.end(), r.begin(), r.end());
    out.labels.push_back(ds.labels[i]);
    out.groups.push_back(ds.groups[i]);
    if (!ds.ids.empty()) out.ids.push_back(ds.ids[i]);
  }
  return out;
}

std::vector<std::size_t> fold_members(const FoldPlan& plan, std::size_t fold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
    if (plan.assignments[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> fold_complement(const FoldPlan& plan, std::size_t fold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
    if (plan.assignments[i] != fold) out.push_back(i);
  }
  return out;
}

}  // namespace fairhead
