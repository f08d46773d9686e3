#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "idbla/dataset.hpp"

namespace idbla {

// Flat bag of everything the subcommands can consume. Each subcommand reads
// its own slice; the manifest written next to the outputs records exactly
// that slice, and feeding the manifest back through --config reproduces the
// run.
struct RunConfig {
  std::string subcommand;

  // File plumbing.
  std::string labels_path;
  std::string truth_path;
  std::string pred_path;
  std::string out_dir = ".";
  std::string config_path;

  // Synthetic generator (synth). Vector-valued knobs travel as comma lists;
  // an empty string keeps the generator default. Scalar defaults are taken
  // from SynthConfig itself so the two cannot drift apart.
  int items = SynthConfig{}.num_items;
  int workers = SynthConfig{}.num_workers;
  int classes = SynthConfig{}.num_classes;
  std::string class_probs;
  std::string level_probs;
  std::string level_shifts;
  double skill_mean = SynthConfig{}.skill_mean;
  double skill_concentration = SynthConfig{}.skill_concentration;
  double participation_low = SynthConfig{}.participation_low;
  double participation_high = SynthConfig{}.participation_high;
  double heavy_participation_low = SynthConfig{}.heavy_participation_low;
  double heavy_participation_high = SynthConfig{}.heavy_participation_high;

  // Inference (aggregate, select-h).
  std::string method = "idbla";  // mv | dsem | idbla | fidbla | cvi
  std::string init = "glad";     // glad | random
  int classes_override = 0;      // 0 = infer from the labels file
  int levels = 4;
  double omega = 1.0;
  double gamma_alpha = 1.0;
  double gamma_beta = 1.0;
  double psi = 1.0;
  double nu = 0.1;
  double delta = 0.8;
  double ability_scale = 4.0;
  int samples = 500;
  int burnin = 200;
  double tol = -1.0;  // negative = per-method default (dsem 1e-6, cvi 1e-4)
  int max_iters = 200;
  std::uint64_t seed = 1;
  int repeat = 1;
  bool evaluate = false;

  // Level-count candidates (select-h), comma list.
  std::string candidates = "2,3,4";
};

// key=value lines, keys matching the long flag names plus `subcommand`.
// Blank lines and lines starting with # are skipped.
std::vector<std::pair<std::string, std::string>> read_manifest(const std::string& path);

// Generate a synthetic dataset: labels.csv, truth.csv, manifest.txt.
void cmd_synth(const RunConfig& cfg, std::ostream& out);

// Run one aggregation method `repeat` times (seeds seed..seed+repeat-1).
// Writes pred_r<r>.csv per run, posterior_r<r>.csv and (for cvi) trace files
// for the model-based methods, runs.csv, summary.csv, manifest.txt.
void cmd_aggregate(const RunConfig& cfg, std::ostream& out);

// Score a prediction file against a truth file: report.csv, manifest.txt.
void cmd_evaluate(const RunConfig& cfg, std::ostream& out);

// Fit every candidate level count and report the likelihood table:
// table.csv, manifest.txt.
void cmd_select_h(const RunConfig& cfg, std::ostream& out);

// Parse args (without argv[0]) and dispatch. Returns the process exit code:
// 0 success, 1 usage error, 2 data error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace idbla
