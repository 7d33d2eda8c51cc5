#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairhead/baselines.hpp"
#include "fairhead/dataset.hpp"
#include "fairhead/evaluate.hpp"
#include "fairhead/fixture.hpp"
#include "fairhead/flip.hpp"
#include "fairhead/head.hpp"
#include "fairhead/io.hpp"
#include "fairhead/manifest.hpp"
#include "fairhead/metrics.hpp"
#include "fairhead/report.hpp"
#include "fairhead/version.hpp"

namespace fs = std::filesystem;
using namespace fairhead;

namespace {

std::vector<fs::path> dataset_files(const fs::path& dir) {
  return {dir / "activations.bin", dir / "samples.csv"};
}

std::string num(double v) { return format_g17(v); }

// console echoes only; manifests and traces keep full precision
std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return std::string(buf);
}

void emit_manifest(const std::string& command, const std::map<std::string, std::string>& flags,
                   const std::map<std::string, std::string>& seeds,
                   const std::vector<fs::path>& inputs, const fs::path& produced) {
  const RunManifest manifest = make_manifest(command, flags, seeds, inputs);
  write_manifest(manifest, manifest_path_for(produced));
}

// metrics/threshold accept either a file target or a directory target.
fs::path resolve_output_file(const fs::path& out, const char* default_name) {
  if (out.extension() == ".json" || out.extension() == ".csv") {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    return out;
  }
  fs::create_directories(out);
  return out / default_name;
}

void print_report_summary(const FairnessReport& r) {
  std::printf("method:      %s\n", r.method.c_str());
  std::printf("threshold:   %.4f\n", r.threshold);
  std::printf("accuracy:    %.4f\n", r.accuracy);
  std::printf("f1:          %.4f\n", r.f1);
  std::printf("tpp parity:  %.4f\n", r.tpp_parity);
  std::printf("fpp parity:  %.4f\n", r.fpp_parity);
  std::printf("ppv parity:  %.4f\n", r.ppv_parity);
  std::printf("npv parity:  %.4f\n", r.npv_parity);
  std::printf("objective:   %.6f\n", r.objective);
  for (const std::string& w : r.warnings) {
    std::printf("warning: %s\n", w.c_str());
  }
}

struct SynthArgs {
  std::string out;
  SynthConfig cfg;
};

struct DataHeadArgs {
  std::string data;
  std::string head;
};

int run_synth(const SynthArgs& args) {
  const ActivationDataset ds = synth_generate(args.cfg);
  save_dataset(ds, args.out);
  save_synth_provenance(args.cfg, args.out);

  std::map<std::string, std::string> flags;
  flags["out"] = args.out;
  flags["n-per-group"] = std::to_string(args.cfg.n_per_group_per_class);
  std::string groups;
  for (const auto& g : args.cfg.groups) {
    if (!groups.empty()) groups += ",";
    groups += g;
  }
  flags["groups"] = groups;
  flags["features"] = std::to_string(args.cfg.d);
  flags["bias-magnitude"] = num(args.cfg.bias_magnitude);
  flags["signal-magnitude"] = num(args.cfg.signal_magnitude);
  flags["noise-std"] = num(args.cfg.noise_std);
  emit_manifest("synth", flags, {{"seed", std::to_string(args.cfg.seed)}}, {}, args.out);

  std::printf("wrote %s (%zu rows, %zu features, %zu groups)\n", args.out.c_str(), ds.rows,
              ds.cols, args.cfg.groups.size());
  return 0;
}

int run_rebalance(const std::string& data, const std::string& out, std::uint64_t seed) {
  const ActivationDataset ds = load_dataset(data);
  const ActivationDataset balanced = undersample(ds, seed);
  save_dataset(balanced, out);
  emit_manifest("rebalance", {{"data", data}, {"out", out}},
                {{"seed", std::to_string(seed)}}, dataset_files(data), out);
  std::printf("wrote %s (%zu of %zu rows kept)\n", out.c_str(), balanced.rows, ds.rows);
  return 0;
}

int run_metrics(const DataHeadArgs& io, double threshold, const std::string& out) {
  const ActivationDataset ds = load_dataset(io.data);
  const FinalLayer head = load_head(io.head);
  const FairnessReport report = build_report(head, ds, threshold, "eval");
  print_report_summary(report);
  if (!out.empty()) {
    const fs::path file = resolve_output_file(out, "report.json");
    const FairnessReport reports[] = {report};
    write_report_json(reports, file);
    std::vector<fs::path> inputs = dataset_files(io.data);
    inputs.push_back(io.head);
    emit_manifest("metrics",
                  {{"data", io.data}, {"head", io.head}, {"threshold", num(threshold)},
                   {"out", out}},
                  {}, inputs, file);
    std::printf("wrote %s\n", file.string().c_str());
  }
  return 0;
}

int run_flip(const DataHeadArgs& io, double alpha, const std::string& out,
             const std::string& stats_out) {
  const ActivationDataset ds = load_dataset(io.data);
  const FinalLayer head = load_head(io.head);
  const GroupFeatureStats stats = compute_group_stats(ds);
  const FinalLayer flipped = apply_flip(head, stats, FlipConfig{alpha});
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_head(flipped, out);
  if (!stats_out.empty()) save_stats(stats, stats_out);

  std::vector<fs::path> inputs = dataset_files(io.data);
  inputs.push_back(io.head);
  emit_manifest("flip",
                {{"data", io.data}, {"head", io.head}, {"alpha", num(alpha)}, {"out", out}},
                {}, inputs, out);
  std::printf("wrote %s (alpha %s)\n", out.c_str(), short_num(alpha).c_str());
  return 0;
}

int run_alpha_sweep(const DataHeadArgs& io, const std::string& eval_data, double alpha_min,
                    double alpha_max, double alpha_step, const std::string& out) {
  if (!(alpha_step > 0.0)) throw std::invalid_argument("alpha-step must be positive");
  if (alpha_max < alpha_min) throw std::invalid_argument("alpha-max must be >= alpha-min");
  const ActivationDataset calib = load_dataset(io.data);
  const ActivationDataset eval_ds = eval_data.empty() ? calib : load_dataset(eval_data);
  const FinalLayer head = load_head(io.head);

  std::vector<double> grid;
  for (std::size_t i = 0;; ++i) {
    double a = alpha_min + static_cast<double>(i) * alpha_step;
    if (a > alpha_max + 1e-12) break;
    grid.push_back(std::min(a, alpha_max));
  }
  const std::vector<AlphaSweepRow> rows = alpha_sweep(head, calib, eval_ds, grid);

  const fs::path file = resolve_output_file(out, "alpha_sweep.csv");
  atomic_write_file(file, alpha_sweep_csv(rows));
  std::vector<fs::path> inputs = dataset_files(io.data);
  if (!eval_data.empty()) {
    const auto extra = dataset_files(eval_data);
    inputs.insert(inputs.end(), extra.begin(), extra.end());
  }
  inputs.push_back(io.head);
  emit_manifest("alpha-sweep",
                {{"data", io.data},
                 {"eval-data", eval_data},
                 {"head", io.head},
                 {"alpha-min", num(alpha_min)},
                 {"alpha-max", num(alpha_max)},
                 {"alpha-step", num(alpha_step)},
                 {"out", out}},
                {}, inputs, file);
  std::printf("wrote %s (%zu rows)\n", file.string().c_str(), rows.size());
  return 0;
}

int run_threshold(const DataHeadArgs& io, double step, const std::string& out) {
  const ActivationDataset ds = load_dataset(io.data);
  const FinalLayer head = load_head(io.head);
  const ProbabilityMatrix probs = forward(head, ds);
  const SweepResult sweep = threshold_sweep(probs, ds.labels, ds.groups, step);
  std::printf("best threshold: %s\n", num(sweep.best_threshold).c_str());
  std::printf("best objective: %s\n", num(sweep.best_objective).c_str());
  if (!out.empty()) {
    std::string csv = "threshold,objective\n";
    for (const SweepPoint& p : sweep.trace) {
      csv += num(p.threshold) + "," + num(p.objective) + "\n";
    }
    const fs::path file = resolve_output_file(out, "threshold_trace.csv");
    atomic_write_file(file, csv);
    std::vector<fs::path> inputs = dataset_files(io.data);
    inputs.push_back(io.head);
    emit_manifest("threshold",
                  {{"data", io.data}, {"head", io.head}, {"step", num(step)}, {"out", out}},
                  {}, inputs, file);
    std::printf("wrote %s (%zu rows)\n", file.string().c_str(), sweep.trace.size());
  }
  return 0;
}

int run_prune(const DataHeadArgs& io, double fraction, const std::string& out) {
  const ActivationDataset ds = load_dataset(io.data);
  const FinalLayer head = load_head(io.head);
  const GroupFeatureStats stats = compute_group_stats(ds);
  const FinalLayer pruned = bpfa_prune(head, stats, PruneConfig{fraction});
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_head(pruned, out);
  std::vector<fs::path> inputs = dataset_files(io.data);
  inputs.push_back(io.head);
  emit_manifest("prune",
                {{"data", io.data}, {"head", io.head}, {"fraction", num(fraction)},
                 {"out", out}},
                {}, inputs, out);
  std::printf("wrote %s (fraction %s)\n", out.c_str(), short_num(fraction).c_str());
  return 0;
}

int run_retrain(const std::string& data, const TrainConfig& cfg, const std::string& out) {
  const ActivationDataset ds = load_dataset(data);
  const FinalLayer head = retrain_head(ds, cfg);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_head(head, out);
  emit_manifest("retrain",
                {{"data", data},
                 {"lambda", num(cfg.lambda)},
                 {"epochs", std::to_string(cfg.epochs)},
                 {"batch", std::to_string(cfg.batch_size)},
                 {"lr", num(cfg.learning_rate)},
                 {"l2", num(cfg.l2)},
                 {"out", out}},
                {{"seed", std::to_string(cfg.seed)}}, dataset_files(data), out);
  std::printf("wrote %s (lambda %s, %zu epochs)\n", out.c_str(),
              short_num(cfg.lambda).c_str(), cfg.epochs);
  return 0;
}

int run_evaluate(const DataHeadArgs& io, const EvaluateConfig& cfg, const std::string& out) {
  const ActivationDataset ds = load_dataset(io.data);
  const FinalLayer head = load_head(io.head);
  const EvaluateResult result = evaluate_all(ds, head, cfg);

  fs::create_directories(out);
  const fs::path json_file = fs::path(out) / "report.json";
  const fs::path md_file = fs::path(out) / "report.md";
  write_report_json(result.reports, json_file);
  write_report_markdown(result.reports, md_file);

  std::vector<fs::path> inputs = dataset_files(io.data);
  inputs.push_back(io.head);
  emit_manifest("evaluate",
                {{"data", io.data},
                 {"head", io.head},
                 {"folds", std::to_string(cfg.folds)},
                 {"alpha", num(cfg.alpha)},
                 {"step", num(cfg.step)},
                 {"fraction", num(cfg.fraction)},
                 {"lambda", num(cfg.lambda)},
                 {"epochs", std::to_string(cfg.epochs)},
                 {"batch", std::to_string(cfg.batch_size)},
                 {"lr", num(cfg.learning_rate)},
                 {"l2", num(cfg.l2)},
                 {"out", out}},
                {{"seed", std::to_string(cfg.seed)}}, inputs, out);

  const char* const methods[] = {"baseline", "pre-process", "in-process",
                                 "threshold", "bpfa", "fair-flip"};
  std::printf("%-12s  %-8s  %-10s  %-9s\n", "method", "accuracy", "fpp-parity", "objective");
  for (const char* m : methods) {
    double acc = 0.0;
    double fpp = 0.0;
    double obj = 0.0;
    std::size_t n = 0;
    for (const FairnessReport& r : result.reports) {
      if (r.method == m) {
        acc += r.accuracy;
        fpp += r.fpp_parity;
        obj += r.objective;
        ++n;
      }
    }
    if (n == 0) continue;
    std::printf("%-12s  %8.4f  %10.4f  %9.6f\n", m, acc / static_cast<double>(n),
                fpp / static_cast<double>(n), obj / static_cast<double>(n));
  }
  std::printf("wrote %s\n", json_file.string().c_str());
  std::printf("wrote %s\n", md_file.string().c_str());
  return 0;
}

int run_fixture_check(const std::string& fixture_path) {
  const PublishedFixture fixture =
      fixture_path.empty() ? published_fixture() : load_fixture(fixture_path);
  const FixtureCheck check = run_fixture_check(fixture);
  std::fputs(check.detail.c_str(), stdout);
  if (!check.pass) {
    std::fputs("stored table does not reproduce the headline claims\n", stderr);
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"post-processing fairness toolkit for binary classifier heads"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // synth
  SynthArgs synth;
  synth.cfg.n_per_group_per_class = 100;
  synth.cfg.groups = {"A", "B"};
  synth.cfg.d = 16;
  synth.cfg.bias_magnitude = 4.0;
  synth.cfg.signal_magnitude = 1.0;
  synth.cfg.noise_std = 1.0;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic activation bundle");
  synth_cmd->add_option("--out", synth.out, "output bundle directory")->required();
  synth_cmd->add_option("--n-per-group", synth.cfg.n_per_group_per_class,
                        "samples per (group, class) cell");
  synth_cmd->add_option("--groups", synth.cfg.groups, "group tokens")->delimiter(',');
  synth_cmd->add_option("--features", synth.cfg.d, "feature count");
  synth_cmd->add_option("--biased", synth.cfg.biased_features, "biased feature indices")
      ->delimiter(',');
  synth_cmd->add_option("--signal", synth.cfg.signal_features, "signal feature indices")
      ->delimiter(',');
  synth_cmd->add_flag("--allow-overlap", synth.cfg.allow_overlap,
                      "permit biased and signal features to overlap");
  synth_cmd->add_option("--bias-magnitude", synth.cfg.bias_magnitude, "group offset step");
  synth_cmd->add_option("--signal-magnitude", synth.cfg.signal_magnitude, "class offset");
  synth_cmd->add_option("--noise-std", synth.cfg.noise_std, "noise standard deviation");
  synth_cmd->add_option("--seed", synth.cfg.seed, "generator seed");

  // rebalance
  std::string rb_data;
  std::string rb_out;
  std::uint64_t rb_seed = 0;
  CLI::App* rebalance_cmd =
      app.add_subcommand("rebalance", "undersample groups to the minimum group size");
  rebalance_cmd->add_option("--data", rb_data, "input bundle directory")->required();
  rebalance_cmd->add_option("--out", rb_out, "output bundle directory")->required();
  rebalance_cmd->add_option("--seed", rb_seed, "sampling seed");

  // metrics
  DataHeadArgs metrics_io;
  double metrics_threshold = 0.5;
  std::string metrics_out;
  CLI::App* metrics_cmd =
      app.add_subcommand("metrics", "evaluate a head and report subgroup fairness");
  metrics_cmd->add_option("--data", metrics_io.data, "bundle directory")->required();
  metrics_cmd->add_option("--head", metrics_io.head, "head JSON file")->required();
  metrics_cmd->add_option("--threshold", metrics_threshold, "decision threshold");
  metrics_cmd->add_option("--out", metrics_out, "report destination (file or directory)");

  // flip
  DataHeadArgs flip_io;
  double flip_alpha = 0.25;
  std::string flip_out;
  std::string flip_stats_out;
  CLI::App* flip_cmd =
      app.add_subcommand("flip", "reweight head features by group variability");
  flip_cmd->add_option("--data", flip_io.data, "calibration bundle directory")->required();
  flip_cmd->add_option("--head", flip_io.head, "head JSON file")->required();
  flip_cmd->add_option("--alpha", flip_alpha, "reweighting strength");
  flip_cmd->add_option("--out", flip_out, "output head JSON file")->required();
  flip_cmd->add_option("--stats-out", flip_stats_out, "also write the group stats JSON");

  // alpha-sweep
  DataHeadArgs sweep_io;
  std::string sweep_eval_data;
  double sweep_alpha_min = 0.0;
  double sweep_alpha_max = 1.0;
  double sweep_alpha_step = 0.05;
  std::string sweep_out;
  CLI::App* sweep_cmd =
      app.add_subcommand("alpha-sweep", "report fairness and accuracy across alphas");
  sweep_cmd->add_option("--data", sweep_io.data, "calibration bundle directory")->required();
  sweep_cmd->add_option("--eval-data", sweep_eval_data,
                        "evaluation bundle directory (defaults to --data)");
  sweep_cmd->add_option("--head", sweep_io.head, "head JSON file")->required();
  sweep_cmd->add_option("--alpha-min", sweep_alpha_min, "grid start");
  sweep_cmd->add_option("--alpha-max", sweep_alpha_max, "grid end");
  sweep_cmd->add_option("--alpha-step", sweep_alpha_step, "grid step");
  sweep_cmd->add_option("--out", sweep_out, "output CSV (file or directory)")->required();

  // threshold
  DataHeadArgs thr_io;
  double thr_step = 0.001;
  std::string thr_out;
  CLI::App* thr_cmd =
      app.add_subcommand("threshold", "sweep decision thresholds for the fairness objective");
  thr_cmd->add_option("--data", thr_io.data, "bundle directory")->required();
  thr_cmd->add_option("--head", thr_io.head, "head JSON file")->required();
  thr_cmd->add_option("--step", thr_step, "grid step");
  thr_cmd->add_option("--out", thr_out, "trace CSV destination (file or directory)");

  // prune
  DataHeadArgs prune_io;
  double prune_fraction = 0.1;
  std::string prune_out;
  CLI::App* prune_cmd =
      app.add_subcommand("prune", "zero the most group-dependent feature weights");
  prune_cmd->add_option("--data", prune_io.data, "calibration bundle directory")->required();
  prune_cmd->add_option("--head", prune_io.head, "head JSON file")->required();
  prune_cmd->add_option("--fraction", prune_fraction, "share of features to prune");
  prune_cmd->add_option("--out", prune_out, "output head JSON file")->required();

  // retrain
  std::string retrain_data;
  std::string retrain_out;
  TrainConfig retrain_cfg;
  retrain_cfg.lambda = 1.0;
  retrain_cfg.epochs = 50;
  retrain_cfg.batch_size = 64;
  retrain_cfg.learning_rate = 0.1;
  CLI::App* retrain_cmd =
      app.add_subcommand("retrain", "train a fresh head with a fairness penalty");
  retrain_cmd->add_option("--data", retrain_data, "training bundle directory")->required();
  retrain_cmd->add_option("--lambda", retrain_cfg.lambda, "penalty weight");
  retrain_cmd->add_option("--epochs", retrain_cfg.epochs, "training epochs");
  retrain_cmd->add_option("--batch", retrain_cfg.batch_size, "mini-batch size");
  retrain_cmd->add_option("--lr", retrain_cfg.learning_rate, "learning rate");
  retrain_cmd->add_option("--l2", retrain_cfg.l2, "weight decay");
  retrain_cmd->add_option("--seed", retrain_cfg.seed, "shuffle seed");
  retrain_cmd->add_option("--out", retrain_out, "output head JSON file")->required();

  // evaluate
  DataHeadArgs eval_io;
  EvaluateConfig eval_cfg;
  std::string eval_out;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "run every method over a stratified k-fold split");
  eval_cmd->add_option("--data", eval_io.data, "bundle directory")->required();
  eval_cmd->add_option("--head", eval_io.head, "baseline head JSON file")->required();
  eval_cmd->add_option("--folds", eval_cfg.folds, "fold count");
  eval_cmd->add_option("--seed", eval_cfg.seed, "fold and training seed");
  eval_cmd->add_option("--alpha", eval_cfg.alpha, "reweighting strength");
  eval_cmd->add_option("--step", eval_cfg.step, "threshold grid step");
  eval_cmd->add_option("--fraction", eval_cfg.fraction, "pruning fraction");
  eval_cmd->add_option("--lambda", eval_cfg.lambda, "penalty weight");
  eval_cmd->add_option("--epochs", eval_cfg.epochs, "training epochs");
  eval_cmd->add_option("--batch", eval_cfg.batch_size, "mini-batch size");
  eval_cmd->add_option("--lr", eval_cfg.learning_rate, "learning rate");
  eval_cmd->add_option("--l2", eval_cfg.l2, "weight decay");
  eval_cmd->add_option("--out", eval_out, "output report directory")->required();

  // fixture-check
  std::string fixture_path;
  CLI::App* fixture_cmd = app.add_subcommand(
      "fixture-check", "verify the stored result table reproduces the headline claims");
  fixture_cmd->add_option("--fixture", fixture_path, "fixture JSON (defaults to built-in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*rebalance_cmd) return run_rebalance(rb_data, rb_out, rb_seed);
    if (*metrics_cmd) return run_metrics(metrics_io, metrics_threshold, metrics_out);
    if (*flip_cmd) return run_flip(flip_io, flip_alpha, flip_out, flip_stats_out);
    if (*sweep_cmd) {
      return run_alpha_sweep(sweep_io, sweep_eval_data, sweep_alpha_min, sweep_alpha_max,
                             sweep_alpha_step, sweep_out);
    }
    if (*thr_cmd) return run_threshold(thr_io, thr_step, thr_out);
    if (*prune_cmd) return run_prune(prune_io, prune_fraction, prune_out);
    if (*retrain_cmd) return run_retrain(retrain_data, retrain_cfg, retrain_out);
    if (*eval_cmd) return run_evaluate(eval_io, eval_cfg, eval_out);
    if (*fixture_cmd) return run_fixture_check(fixture_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "error: no command selected\n";
  return 1;
}
