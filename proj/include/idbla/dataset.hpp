#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "idbla/common.hpp"

namespace idbla {

// One observed label. `index` is the worker when stored per item and the item
// when stored per worker. Class labels are 0-based in memory ({1..C} in files).
struct Observation {
  int index;
  int label;
  bool operator==(const Observation&) const = default;
};

// Sparse item x worker label table with both adjacency directions.
// A missing (item, worker) pair means the worker did not label the item.
class LabelSet {
 public:
  LabelSet() = default;

  // records: (item, worker, label), all 0-based, at most one per (item, worker).
  static LabelSet from_records(int num_items, int num_workers, int num_classes,
                               const std::vector<std::tuple<int, int, int>>& records);

  int num_items() const { return num_items_; }
  int num_workers() const { return num_workers_; }
  int num_classes() const { return num_classes_; }
  std::size_t num_labels() const { return num_labels_; }

  // Sorted by worker index.
  const std::vector<Observation>& labels_of_item(int i) const { return by_item_[i]; }
  // Sorted by item index.
  const std::vector<Observation>& labels_of_worker(int k) const { return by_worker_[k]; }

  // Original identifiers in first-appearance order; index == dense id.
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const std::vector<std::string>& worker_ids() const { return worker_ids_; }
  // Returns -1 when the id is unknown.
  int item_index(const std::string& id) const;
  int worker_index(const std::string& id) const;

  bool operator==(const LabelSet& other) const {
    return num_items_ == other.num_items_ && num_workers_ == other.num_workers_ &&
           num_classes_ == other.num_classes_ && by_item_ == other.by_item_ &&
           item_ids_ == other.item_ids_ && worker_ids_ == other.worker_ids_;
  }

 private:
  friend LabelSet parse_labels(std::istream&, int);
  friend struct SynthBuilder;

  void add_label(int item, int worker, int label);
  void set_default_ids();
  void finalize();

  int num_items_ = 0;
  int num_workers_ = 0;
  int num_classes_ = 0;
  std::size_t num_labels_ = 0;
  std::vector<std::vector<Observation>> by_item_;
  std::vector<std::vector<Observation>> by_worker_;
  std::vector<std::string> item_ids_;
  std::vector<std::string> worker_ids_;
  std::unordered_map<std::string, int> item_index_;
  std::unordered_map<std::string, int> worker_index_;
};

// Possibly partial ground truth, indexed like the LabelSet it was parsed against.
struct TruthMap {
  std::vector<int> labels;  // 0-based class, -1 = unknown
  int known = 0;

  bool has(int item) const { return item >= 0 && item < static_cast<int>(labels.size()) && labels[item] >= 0; }
  int at(int item) const { return labels[item]; }
};

// CSV with header `item,worker,label`; labels 1..C. Throws DataError on
// duplicates (both line numbers), bad labels (line number) or an empty stream.
// C is the maximum observed label unless num_classes_override > 0.
LabelSet parse_labels(std::istream& in, int num_classes_override = 0);

struct TruthParse {
  TruthMap truth;
  std::vector<std::string> warnings;  // unknown item ids, skipped
};

// CSV with header `item,label`, joined onto the LabelSet's item re-indexing.
TruthParse parse_ground_truth(std::istream& in, const LabelSet& labels);

void write_labels(std::ostream& out, const LabelSet& labels);
void write_truth(std::ostream& out, const LabelSet& labels, const TruthMap& truth);

// Synthetic benchmark generator. Each worker draws a base correct rate from a
// Beta distribution (or takes an explicit one); each item gets a latent
// difficulty level whose shift is added to the correct rate. A worker's
// confusion row puts the effective rate on the diagonal and spreads the rest
// uniformly over the wrong classes.
struct SynthConfig {
  int num_items = 1000;
  int num_workers = 100;
  int num_classes = 5;
  std::vector<double> class_probs = {0.18, 0.27, 0.45, 0.05, 0.05};

  // Difficulty structure; level_probs.size() is the number of true levels.
  // Shifts are listed easiest first (level 1 easiest, last level hardest).
  std::vector<double> level_probs = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::vector<double> level_shifts = {0.25, 0.0, -0.20};

  // Worker skill: Beta(mean * conc, (1-mean) * conc), clamped to [1/C, 0.99].
  // The low concentration spreads workers from near-chance to near-perfect;
  // that heterogeneity is what separates model-based aggregation from
  // majority vote on this benchmark.
  double skill_mean = 0.42;
  double skill_concentration = 1.5;
  // Explicit base correct rates; overrides the Beta draw when non-empty and is
  // clamped to [1/C, 1] so deterministic workers stay exact.
  std::vector<double> worker_correct_rates;

  // Participation: uniform in [low, high] for all workers except one heavy
  // worker drawn from [heavy_low, heavy_high].
  double participation_low = 0.03;
  double participation_high = 0.19;
  double heavy_participation_low = 0.70;
  double heavy_participation_high = 0.78;
  std::vector<double> participation;  // explicit override when non-empty

  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthData {
  LabelSet labels;
  TruthMap truth;
  std::vector<int> item_levels;        // 0-based generator level per item
  std::vector<double> worker_rates;    // base correct rates actually used
  std::vector<double> participation;   // participation actually used
  // Expected labeling accuracy per worker under the level mixture.
  std::vector<double> expected_worker_accuracy;
};

SynthData generate_synthetic(const SynthConfig& cfg);

}  // namespace idbla
