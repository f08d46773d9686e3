#include "idbla/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace idbla {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

bool parse_int(const std::string& s, int& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && !s.empty();
}

}  // namespace

void LabelSet::add_label(int item, int worker, int label) {
  by_item_[item].push_back({worker, label});
  by_worker_[worker].push_back({item, label});
  ++num_labels_;
}

void LabelSet::set_default_ids() {
  item_ids_.resize(num_items_);
  worker_ids_.resize(num_workers_);
  for (int i = 0; i < num_items_; ++i) item_ids_[i] = std::to_string(i + 1);
  for (int k = 0; k < num_workers_; ++k) worker_ids_[k] = "w" + std::to_string(k + 1);
  item_index_.clear();
  worker_index_.clear();
  for (int i = 0; i < num_items_; ++i) item_index_[item_ids_[i]] = i;
  for (int k = 0; k < num_workers_; ++k) worker_index_[worker_ids_[k]] = k;
}

void LabelSet::finalize() {
  for (auto& obs : by_item_)
    std::sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) { return a.index < b.index; });
  for (auto& obs : by_worker_)
    std::sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) { return a.index < b.index; });
}

int LabelSet::item_index(const std::string& id) const {
  auto it = item_index_.find(id);
  return it == item_index_.end() ? -1 : it->second;
}

int LabelSet::worker_index(const std::string& id) const {
  auto it = worker_index_.find(id);
  return it == worker_index_.end() ? -1 : it->second;
}

LabelSet LabelSet::from_records(int num_items, int num_workers, int num_classes,
                                const std::vector<std::tuple<int, int, int>>& records) {
  if (num_items <= 0 || num_workers <= 0 || num_classes <= 0)
    throw DataError("LabelSet: dimensions must be positive");
  LabelSet ls;
  ls.num_items_ = num_items;
  ls.num_workers_ = num_workers;
  ls.num_classes_ = num_classes;
  ls.by_item_.resize(num_items);
  ls.by_worker_.resize(num_workers);
  std::vector<std::vector<bool>> seen(num_items, std::vector<bool>(num_workers, false));
  for (const auto& [i, k, c] : records) {
    if (i < 0 || i >= num_items) throw DataError("LabelSet: item index out of range");
    if (k < 0 || k >= num_workers) throw DataError("LabelSet: worker index out of range");
    if (c < 0 || c >= num_classes) throw DataError("LabelSet: label out of range");
    if (seen[i][k]) throw DataError("LabelSet: duplicate (item, worker) record");
    seen[i][k] = true;
    ls.add_label(i, k, c);
  }
  ls.set_default_ids();
  ls.finalize();
  return ls;
}

LabelSet parse_labels(std::istream& in, int num_classes_override) {
  LabelSet ls;
  std::string line;
  if (!std::getline(in, line)) throw DataError("label file: empty stream");
  // First line is the item,worker,label header.
  struct Raw {
    int item, worker, label;
  };
  std::vector<Raw> raws;
  std::unordered_map<std::string, int> first_line;  // "item\x1fworker" -> line no
  int line_no = 1;
  int max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 3)
      throw DataError("label file line " + std::to_string(line_no) + ": expected 3 fields, got " +
                      std::to_string(fields.size()));
    const std::string& item_id = fields[0];
    const std::string& worker_id = fields[1];
    int label = 0;
    if (!parse_int(fields[2], label))
      throw DataError("label file line " + std::to_string(line_no) + ": label '" + fields[2] +
                      "' is not an integer");
    if (label <= 0)
      throw DataError("label file line " + std::to_string(line_no) + ": label out of range (" +
                      std::to_string(label) + " < 1)");
    std::string key = item_id + '\x1f' + worker_id;
    auto [it, inserted] = first_line.emplace(key, line_no);
    if (!inserted)
      throw DataError("label file line " + std::to_string(line_no) + ": duplicate record for (" + item_id +
                      ", " + worker_id + "), first seen at line " + std::to_string(it->second));

    int i;
    auto found_i = ls.item_index_.find(item_id);
    if (found_i == ls.item_index_.end()) {
      i = static_cast<int>(ls.item_ids_.size());
      ls.item_index_.emplace(item_id, i);
      ls.item_ids_.push_back(item_id);
    } else {
      i = found_i->second;
    }
    int k;
    auto found_k = ls.worker_index_.find(worker_id);
    if (found_k == ls.worker_index_.end()) {
      k = static_cast<int>(ls.worker_ids_.size());
      ls.worker_index_.emplace(worker_id, k);
      ls.worker_ids_.push_back(worker_id);
    } else {
      k = found_k->second;
    }
    max_label = std::max(max_label, label);
    raws.push_back({i, k, label - 1});
  }
  if (raws.empty()) throw DataError("label file: no records");

  ls.num_items_ = static_cast<int>(ls.item_ids_.size());
  ls.num_workers_ = static_cast<int>(ls.worker_ids_.size());
  ls.num_classes_ = num_classes_override > 0 ? num_classes_override : max_label;
  if (max_label > ls.num_classes_)
    throw DataError("label file: observed label " + std::to_string(max_label) + " exceeds the class count " +
                    std::to_string(ls.num_classes_));
  ls.by_item_.resize(ls.num_items_);
  ls.by_worker_.resize(ls.num_workers_);
  for (const auto& r : raws) ls.add_label(r.item, r.worker, r.label);
  ls.finalize();
  return ls;
}

TruthParse parse_ground_truth(std::istream& in, const LabelSet& labels) {
  TruthParse out;
  out.truth.labels.assign(labels.num_items(), -1);
  std::string line;
  if (!std::getline(in, line)) throw DataError("truth file: empty stream");
  int line_no = 1;
  std::unordered_map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 2)
      throw DataError("truth file line " + std::to_string(line_no) + ": expected 2 fields, got " +
                      std::to_string(fields.size()));
    const std::string& item_id = fields[0];
    int label = 0;
    if (!parse_int(fields[1], label) || label <= 0 || label > labels.num_classes())
      throw DataError("truth file line " + std::to_string(line_no) + ": label '" + fields[1] +
                      "' out of range 1.." + std::to_string(labels.num_classes()));
    auto [it, inserted] = seen.emplace(item_id, line_no);
    if (!inserted)
      throw DataError("truth file line " + std::to_string(line_no) + ": duplicate item '" + item_id +
                      "', first seen at line " + std::to_string(it->second));
    int i = labels.item_index(item_id);
    if (i < 0) {
      out.warnings.push_back("truth file line " + std::to_string(line_no) + ": unknown item '" + item_id +
                             "', skipped");
      continue;
    }
    out.truth.labels[i] = label - 1;
    ++out.truth.known;
  }
  return out;
}

void write_labels(std::ostream& out, const LabelSet& labels) {
  out << "item,worker,label\n";
  for (int i = 0; i < labels.num_items(); ++i)
    for (const auto& obs : labels.labels_of_item(i))
      out << labels.item_ids()[i] << ',' << labels.worker_ids()[obs.index] << ',' << obs.label + 1 << '\n';
}

void write_truth(std::ostream& out, const LabelSet& labels, const TruthMap& truth) {
  out << "item,label\n";
  for (int i = 0; i < labels.num_items(); ++i)
    if (truth.has(i)) out << labels.item_ids()[i] << ',' << truth.at(i) + 1 << '\n';
}

void SynthConfig::validate() const {
  if (num_items <= 0 || num_workers <= 0 || num_classes < 2)
    throw std::invalid_argument("SynthConfig: need items > 0, workers > 0, classes >= 2");
  if (static_cast<int>(class_probs.size()) != num_classes)
    throw std::invalid_argument("SynthConfig: class_probs size must equal num_classes");
  double s = 0.0;
  for (double p : class_probs) {
    if (p < 0.0) throw std::invalid_argument("SynthConfig: negative class probability");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("SynthConfig: class_probs must sum to 1");
  if (level_probs.empty() || level_probs.size() != level_shifts.size())
    throw std::invalid_argument("SynthConfig: level_probs and level_shifts must be non-empty and equal-sized");
  double ls = 0.0;
  for (double p : level_probs) {
    if (p < 0.0) throw std::invalid_argument("SynthConfig: negative level probability");
    ls += p;
  }
  if (std::abs(ls - 1.0) > 1e-12) throw std::invalid_argument("SynthConfig: level_probs must sum to 1");
  if (!worker_correct_rates.empty() && static_cast<int>(worker_correct_rates.size()) != num_workers)
    throw std::invalid_argument("SynthConfig: worker_correct_rates size must equal num_workers");
  for (double r : worker_correct_rates)
    if (r < 0.0 || r > 1.0) throw std::invalid_argument("SynthConfig: correct rates must lie in [0,1]");
  if (!participation.empty() && static_cast<int>(participation.size()) != num_workers)
    throw std::invalid_argument("SynthConfig: participation size must equal num_workers");
  for (double p : participation)
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("SynthConfig: participation must lie in [0,1]");
  if (skill_mean <= 0.0 || skill_mean >= 1.0 || skill_concentration <= 0.0)
    throw std::invalid_argument("SynthConfig: skill_mean in (0,1), skill_concentration > 0");
  auto bad_range = [](double lo, double hi) { return lo < 0.0 || hi > 1.0 || lo > hi; };
  if (bad_range(participation_low, participation_high) ||
      bad_range(heavy_participation_low, heavy_participation_high))
    throw std::invalid_argument("SynthConfig: participation ranges must satisfy 0 <= low <= high <= 1");
}

// Friend hook so the generator can fill a LabelSet directly.
struct SynthBuilder {
  static LabelSet make(int num_items, int num_workers, int num_classes) {
    LabelSet ls;
    ls.num_items_ = num_items;
    ls.num_workers_ = num_workers;
    ls.num_classes_ = num_classes;
    ls.by_item_.resize(num_items);
    ls.by_worker_.resize(num_workers);
    return ls;
  }
  static void add(LabelSet& ls, int item, int worker, int label) { ls.add_label(item, worker, label); }
  static void finish(LabelSet& ls) {
    ls.set_default_ids();
    ls.finalize();
  }
};

SynthData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int I = cfg.num_items, K = cfg.num_workers, C = cfg.num_classes;
  const int num_levels = static_cast<int>(cfg.level_probs.size());
  const double floor_rate = 1.0 / C;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SynthData out;
  out.labels = SynthBuilder::make(I, K, C);

  // Worker base rates. Drawn rates are kept strictly below 1 so every worker
  // stays noisy; explicit rates may be exactly 1.
  const bool explicit_rates = !cfg.worker_correct_rates.empty();
  out.worker_rates.resize(K);
  if (explicit_rates) {
    out.worker_rates = cfg.worker_correct_rates;
  } else {
    const double a = cfg.skill_mean * cfg.skill_concentration;
    const double b = (1.0 - cfg.skill_mean) * cfg.skill_concentration;
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    for (int k = 0; k < K; ++k) {
      double x = ga(rng), y = gb(rng);
      double r = (x + y) > 0.0 ? x / (x + y) : cfg.skill_mean;
      out.worker_rates[k] = std::clamp(r, floor_rate, 0.99);
    }
  }

  // Participation: one heavy worker, the rest light.
  out.participation.resize(K);
  if (!cfg.participation.empty()) {
    out.participation = cfg.participation;
  } else {
    std::uniform_int_distribution<int> pick(0, K - 1);
    int heavy = pick(rng);
    for (int k = 0; k < K; ++k) {
      if (k == heavy)
        out.participation[k] = cfg.heavy_participation_low +
                               (cfg.heavy_participation_high - cfg.heavy_participation_low) * unif(rng);
      else
        out.participation[k] =
            cfg.participation_low + (cfg.participation_high - cfg.participation_low) * unif(rng);
    }
  }

  const double cap = explicit_rates ? 1.0 : 0.99;
  auto effective_rate = [&](int k, int level) {
    return std::clamp(out.worker_rates[k] + cfg.level_shifts[level], floor_rate, cap);
  };

  out.expected_worker_accuracy.resize(K);
  for (int k = 0; k < K; ++k) {
    double acc = 0.0;
    for (int h = 0; h < num_levels; ++h) acc += cfg.level_probs[h] * effective_rate(k, h);
    out.expected_worker_accuracy[k] = acc;
  }

  out.truth.labels.resize(I);
  out.truth.known = I;
  out.item_levels.resize(I);
  for (int i = 0; i < I; ++i) {
    out.truth.labels[i] = draw_discrete(cfg.class_probs, rng);
    out.item_levels[i] = draw_discrete(cfg.level_probs, rng);
  }

  for (int i = 0; i < I; ++i) {
    const int t = out.truth.labels[i];
    const int level = out.item_levels[i];
    for (int k = 0; k < K; ++k) {
      if (unif(rng) >= out.participation[k]) continue;
      const double p_correct = effective_rate(k, level);
      int label;
      if (unif(rng) < p_correct) {
        label = t;
      } else {
        // Uniform over the C-1 wrong classes.
        int offset = static_cast<int>(unif(rng) * (C - 1));
        if (offset >= C - 1) offset = C - 2;
        label = offset >= t ? offset + 1 : offset;
      }
      SynthBuilder::add(out.labels, i, k, label);
    }
  }
  SynthBuilder::finish(out.labels);
  return out;
}

}  // namespace idbla
