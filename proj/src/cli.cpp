#include "idbla/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <variant>

#include "CLI11.hpp"
#include "idbla/baselines.hpp"
#include "idbla/cvi.hpp"
#include "idbla/dataset.hpp"
#include "idbla/eval.hpp"
#include "idbla/gibbs.hpp"
#include "idbla/init_predict.hpp"

namespace idbla {
namespace {

namespace fs = std::filesystem;

// Report values: fixed 6 decimals, diff-friendly.
std::string fixed6(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Trace values span many decades; 6-decimal mantissa keeps them readable
// without flattening the tail of a convergence curve to zero.
std::string sci6(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

// Manifest values must survive a write/read round trip exactly, so they use
// the shortest form that parses back to the same double.
std::string roundtrip(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) parts.push_back(item);
  return parts;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw std::invalid_argument(what + ": not a number: '" + s + "'");
  return v;
}

long long parse_integer(const std::string& s, const std::string& what) {
  long long v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw std::invalid_argument(what + ": not an integer: '" + s + "'");
  return v;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const std::string& part : split_list(s)) out.push_back(parse_double(part, what));
  if (out.empty()) throw std::invalid_argument(what + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const std::string& part : split_list(s))
    out.push_back(static_cast<int>(parse_integer(part, what)));
  if (out.empty()) throw std::invalid_argument(what + ": empty list");
  return out;
}

fs::path ensure_out_dir(const std::string& dir) {
  const fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create output directory " + p.string() + ": " + ec.message());
  return p;
}

// Full content lands via a temp file and a rename, so a failed run never
// leaves a truncated report behind.
void write_text_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp.string() + " into place: " + ec.message());
}

// One declared field: the long option name doubles as the manifest key.
struct FieldRef {
  std::string name;
  std::string help;
  std::variant<int*, double*, std::uint64_t*, bool*, std::string*> ref;
};

std::vector<FieldRef> fields_for(RunConfig& c, const std::string& sub) {
  if (sub == "synth") {
    return {
        {"out", "output directory", &c.out_dir},
        {"items", "number of items", &c.items},
        {"workers", "number of workers", &c.workers},
        {"classes", "number of classes", &c.classes},
        {"class-probs", "comma list of class probabilities", &c.class_probs},
        {"level-probs", "comma list of difficulty level probabilities", &c.level_probs},
        {"level-shifts", "comma list of per-level accuracy shifts, easiest first", &c.level_shifts},
        {"skill-mean", "mean of the worker skill distribution", &c.skill_mean},
        {"skill-concentration", "concentration of the worker skill distribution",
         &c.skill_concentration},
        {"participation-low", "lower bound of per-worker labeling probability",
         &c.participation_low},
        {"participation-high", "upper bound of per-worker labeling probability",
         &c.participation_high},
        {"heavy-participation-low", "lower bound for the single heavy worker",
         &c.heavy_participation_low},
        {"heavy-participation-high", "upper bound for the single heavy worker",
         &c.heavy_participation_high},
        {"seed", "generator seed", &c.seed},
    };
  }
  if (sub == "aggregate") {
    return {
        {"labels", "labels file (item,worker,label)", &c.labels_path},
        {"truth", "ground truth file (item,label)", &c.truth_path},
        {"out", "output directory", &c.out_dir},
        {"method", "mv | dsem | idbla | fidbla | cvi", &c.method},
        {"init", "starting point: glad | random", &c.init},
        {"classes", "class count override; 0 infers from the labels file", &c.classes_override},
        {"levels", "number of difficulty levels", &c.levels},
        {"omega", "confusion row prior concentration", &c.omega},
        {"gamma-alpha", "class proportion prior", &c.gamma_alpha},
        {"gamma-beta", "level proportion prior", &c.gamma_beta},
        {"psi", "free-level concentration in the pinned variant", &c.psi},
        {"nu", "easy pinned level off-diagonal mass", &c.nu},
        {"delta", "hard pinned level off-diagonal mass", &c.delta},
        {"ability-scale", "worker agreement to ability multiplier", &c.ability_scale},
        {"samples", "recorded sampler sweeps", &c.samples},
        {"burnin", "discarded sampler sweeps", &c.burnin},
        {"tol", "convergence tolerance; -1 uses the method default", &c.tol},
        {"max-iters", "iteration cap for dsem and cvi", &c.max_iters},
        {"seed", "base seed; run r uses seed+r", &c.seed},
        {"repeat", "number of runs", &c.repeat},
        {"evaluate", "require a truth file and report error rates", &c.evaluate},
    };
  }
  if (sub == "evaluate") {
    return {
        {"pred", "prediction file (item,label)", &c.pred_path},
        {"truth", "ground truth file (item,label)", &c.truth_path},
        {"out", "output directory", &c.out_dir},
    };
  }
  if (sub == "select-h") {
    return {
        {"labels", "labels file (item,worker,label)", &c.labels_path},
        {"out", "output directory", &c.out_dir},
        {"method", "idbla | fidbla | cvi", &c.method},
        {"candidates", "comma list of level counts to try", &c.candidates},
        {"classes", "class count override; 0 infers from the labels file", &c.classes_override},
        {"omega", "confusion row prior concentration", &c.omega},
        {"gamma-alpha", "class proportion prior", &c.gamma_alpha},
        {"gamma-beta", "level proportion prior", &c.gamma_beta},
        {"psi", "free-level concentration in the pinned variant", &c.psi},
        {"nu", "easy pinned level off-diagonal mass", &c.nu},
        {"delta", "hard pinned level off-diagonal mass", &c.delta},
        {"ability-scale", "worker agreement to ability multiplier", &c.ability_scale},
        {"samples", "recorded sampler sweeps per candidate", &c.samples},
        {"burnin", "discarded sampler sweeps per candidate", &c.burnin},
        {"seed", "base seed; candidate j uses seed+j", &c.seed},
    };
  }
  throw std::logic_error("fields_for: unknown subcommand " + sub);
}

void register_fields(CLI::App* sub, RunConfig& cfg) {
  for (FieldRef f : fields_for(cfg, sub->get_name())) {
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, bool>) {
            sub->add_flag("--" + f.name, *p, f.help);
          } else {
            sub->add_option("--" + f.name, *p, f.help);
          }
        },
        f.ref);
  }
  sub->add_option("--config", cfg.config_path,
                  "manifest file of key=value pairs; flags override its values");
}

std::string manifest_text(const RunConfig& cfg) {
  // fields_for takes a mutable reference; the copy keeps this const.
  RunConfig copy = cfg;
  std::ostringstream out;
  out << "subcommand=" << cfg.subcommand << "\n";
  for (const FieldRef& f : fields_for(copy, cfg.subcommand)) {
    out << f.name << '=';
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double>) {
            out << roundtrip(*p);
          } else if constexpr (std::is_same_v<T, bool>) {
            out << (*p ? 1 : 0);
          } else {
            out << *p;
          }
        },
        f.ref);
    out << "\n";
  }
  return out.str();
}

void apply_manifest(RunConfig& cfg, const std::string& sub,
                    const std::vector<std::pair<std::string, std::string>>& kvs) {
  std::vector<FieldRef> fields = fields_for(cfg, sub);
  for (const auto& [key, value] : kvs) {
    if (key == "subcommand") {
      if (value != sub)
        throw std::invalid_argument("manifest is for subcommand '" + value + "', not '" + sub +
                                    "'");
      continue;
    }
    const auto it = std::find_if(fields.begin(), fields.end(),
                                 [&](const FieldRef& f) { return f.name == key; });
    if (it == fields.end())
      throw std::invalid_argument("unknown manifest key '" + key + "' for subcommand '" + sub +
                                  "'");
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, int>) {
            *p = static_cast<int>(parse_integer(value, key));
          } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            *p = static_cast<std::uint64_t>(parse_integer(value, key));
          } else if constexpr (std::is_same_v<T, double>) {
            *p = parse_double(value, key);
          } else if constexpr (std::is_same_v<T, bool>) {
            if (value == "1" || value == "true")
              *p = true;
            else if (value == "0" || value == "false")
              *p = false;
            else
              throw std::invalid_argument("manifest key '" + key + "' wants 0/1, got '" + value +
                                          "'");
          } else {
            *p = value;
          }
        },
        it->ref);
  }
}

std::string config_path_from(const std::vector<std::string>& args) {
  for (std::size_t j = 0; j < args.size(); ++j) {
    if (args[j] == "--config" && j + 1 < args.size()) return args[j + 1];
    if (args[j].rfind("--config=", 0) == 0) return args[j].substr(9);
  }
  return {};
}

std::string first_positional(const std::vector<std::string>& args) {
  for (const std::string& a : args)
    if (!a.empty() && a[0] != '-') return a;
  return {};
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < m.cols(); ++c)
      if (m(i, c) > m(i, best)) best = c;
    out[i] = best;
  }
  return out;
}

LabelSet load_labels(const std::string& path, int classes_override) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels file: " + path);
  return parse_labels(in, classes_override);
}

Hyperparams hyper_from(const RunConfig& cfg) {
  Hyperparams h;
  h.omega = cfg.omega;
  h.gamma_alpha = cfg.gamma_alpha;
  h.gamma_beta = cfg.gamma_beta;
  h.psi = cfg.psi;
  h.nu = cfg.nu;
  h.delta = cfg.delta;
  h.num_levels = cfg.levels;
  return h;
}

// item,label rows in file order; labels 1-based in the file, kept that way
// here and shifted by the caller.
std::vector<std::pair<std::string, int>> parse_label_pairs(const std::string& path,
                                                           const std::string& what) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + what + " file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(what + " file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "item,label")
    throw DataError(what + " file needs header 'item,label', got '" + line + "'");

  std::vector<std::pair<std::string, int>> rows;
  std::unordered_map<std::string, int> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0)
      throw DataError(what + " file line " + std::to_string(line_no) + ": expected 'item,label'");
    const std::string id = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    long long label = 0;
    try {
      label = parse_integer(value, "label");
    } catch (const std::invalid_argument&) {
      throw DataError(what + " file line " + std::to_string(line_no) + ": bad label '" + value +
                      "'");
    }
    if (label < 1)
      throw DataError(what + " file line " + std::to_string(line_no) +
                      ": labels start at 1, got " + value);
    const auto [it, inserted] = seen.emplace(id, line_no);
    if (!inserted)
      throw DataError(what + " file line " + std::to_string(line_no) + ": item '" + id +
                      "' repeats line " + std::to_string(it->second));
    rows.emplace_back(id, static_cast<int>(label));
  }
  if (rows.empty()) throw DataError(what + " file has no rows: " + path);
  return rows;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : xs) s += x;
  return s / xs.size();
}

double stddev_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (xs.size() == 1) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / (xs.size() - 1));
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> kvs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw DataError("config file line " + std::to_string(line_no) + ": expected key=value");
    kvs.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return kvs;
}

void cmd_synth(const RunConfig& cfg, std::ostream& out) {
  SynthConfig g;
  g.num_items = cfg.items;
  g.num_workers = cfg.workers;
  g.num_classes = cfg.classes;
  if (!cfg.class_probs.empty()) {
    g.class_probs = parse_double_list(cfg.class_probs, "class-probs");
  } else if (static_cast<int>(g.class_probs.size()) != cfg.classes) {
    g.class_probs.assign(cfg.classes, 1.0 / cfg.classes);
  }
  if (!cfg.level_probs.empty()) g.level_probs = parse_double_list(cfg.level_probs, "level-probs");
  if (!cfg.level_shifts.empty())
    g.level_shifts = parse_double_list(cfg.level_shifts, "level-shifts");
  g.skill_mean = cfg.skill_mean;
  g.skill_concentration = cfg.skill_concentration;
  g.participation_low = cfg.participation_low;
  g.participation_high = cfg.participation_high;
  g.heavy_participation_low = cfg.heavy_participation_low;
  g.heavy_participation_high = cfg.heavy_participation_high;
  g.seed = cfg.seed;
  g.validate();

  const SynthData data = generate_synthetic(g);
  const fs::path dir = ensure_out_dir(cfg.out_dir);

  std::ostringstream labels_csv;
  write_labels(labels_csv, data.labels);
  std::ostringstream truth_csv;
  write_truth(truth_csv, data.labels, data.truth);

  write_text_file(dir / "labels.csv", labels_csv.str());
  write_text_file(dir / "truth.csv", truth_csv.str());
  write_text_file(dir / "manifest.txt", manifest_text(cfg));
  out << "wrote " << data.labels.num_items() << " items, " << data.labels.num_workers()
      << " workers, " << data.labels.num_labels() << " labels to " << dir.string() << "\n";
}

void cmd_aggregate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.labels_path.empty()) throw std::invalid_argument("aggregate: --labels is required");
  const std::string& m = cfg.method;
  if (m != "mv" && m != "dsem" && m != "idbla" && m != "fidbla" && m != "cvi")
    throw std::invalid_argument("aggregate: unknown method '" + m + "'");
  if (cfg.init != "glad" && cfg.init != "random")
    throw std::invalid_argument("aggregate: unknown init '" + cfg.init + "'");
  if (cfg.repeat < 1) throw std::invalid_argument("aggregate: --repeat must be at least 1");
  if (cfg.evaluate && cfg.truth_path.empty())
    throw std::invalid_argument("aggregate: --evaluate needs --truth");
  if (cfg.max_iters < 1) throw std::invalid_argument("aggregate: --max-iters must be at least 1");
  if ((m == "idbla" || m == "fidbla") && (cfg.samples < 1 || cfg.burnin < 0))
    throw std::invalid_argument("aggregate: need --samples >= 1 and --burnin >= 0");

  // One --tol flag serves both iterative methods; the defaults differ.
  RunConfig run = cfg;
  if (run.tol < 0.0) run.tol = (m == "cvi") ? 1e-4 : 1e-6;

  const bool model_method = m == "idbla" || m == "fidbla" || m == "cvi";
  const ModelKind model = m == "fidbla" ? ModelKind::fixed_idbla : ModelKind::idbla;
  const Hyperparams hyper = hyper_from(run);
  if (model_method) hyper.validate(model);

  const LabelSet labels = load_labels(run.labels_path, run.classes_override);

  const bool have_truth = !run.truth_path.empty();
  TruthMap truth;
  if (have_truth) {
    std::ifstream tin(run.truth_path);
    if (!tin) throw DataError("cannot open truth file: " + run.truth_path);
    TruthParse parsed = parse_ground_truth(tin, labels);
    for (const std::string& w : parsed.warnings) out << "warning: " << w << "\n";
    truth = std::move(parsed.truth);
  }

  const fs::path dir = ensure_out_dir(run.out_dir);
  std::ostringstream runs_csv;
  runs_csv << "run,seed,error_rate,nll\n";
  std::vector<double> errors, nlls;

  for (int r = 0; r < run.repeat; ++r) {
    const std::uint64_t run_seed = run.seed + static_cast<std::uint64_t>(r);
    std::vector<int> pred;
    double nll = std::numeric_limits<double>::quiet_NaN();

    if (m == "mv") {
      pred = majority_vote(labels, run_seed);
    } else if (m == "dsem") {
      const DsState fit = ds_em(labels, majority_vote(labels, run_seed), run.max_iters, run.tol);
      pred = argmax_rows(fit.posterior);
      nll = nll_confusion(labels, fit.phi, pred);
    } else {
      const InitResult init =
          run.init == "glad" ? glad_init(labels, run.levels, run.ability_scale, run_seed)
                             : random_init(labels, run.levels, run_seed);
      std::ostringstream post_csv;
      post_csv << "item,t_hat,q_hat";
      for (int c = 0; c < labels.num_classes(); ++c) post_csv << ",p_" << c + 1;
      post_csv << "\n";

      if (m == "cvi") {
        CviOptions opt;
        opt.max_iters = run.max_iters;
        opt.tol = run.tol;
        const CviResult fit = run_cvi(labels, init, hyper, opt);
        pred = fit.t_hat;
        const ConfusionTensor pi =
            posterior_mean_confusion(labels, fit.t_hat, fit.q_hat, run.levels, run.omega);
        nll = nll_idbla(labels, pi, fit.t_hat, fit.q_hat);
        for (int i = 0; i < labels.num_items(); ++i) {
          post_csv << labels.item_ids()[i] << ',' << fit.t_hat[i] + 1 << ',' << fit.q_hat[i] + 1;
          for (int c = 0; c < labels.num_classes(); ++c)
            post_csv << ',' << fixed6(fit.state.lambda(i, c));
          post_csv << "\n";
        }
        std::ostringstream trace_csv;
        trace_csv << "iteration,max_change\n";
        for (std::size_t it = 0; it < fit.max_change_trace.size(); ++it)
          trace_csv << it + 1 << ',' << sci6(fit.max_change_trace[it]) << "\n";
        write_text_file(dir / ("trace_r" + std::to_string(r) + ".csv"), trace_csv.str());
      } else {
        const PosteriorSummary fit =
            run_gibbs(model, labels, init, hyper, run.samples, run.burnin, run_seed);
        pred = fit.t_hat;
        nll = nll_idbla(labels, fit.mean_pi, fit.t_hat, fit.q_hat);
        for (int i = 0; i < labels.num_items(); ++i) {
          post_csv << labels.item_ids()[i] << ',' << fit.t_hat[i] + 1 << ',' << fit.q_hat[i] + 1;
          for (int c = 0; c < labels.num_classes(); ++c)
            post_csv << ',' << fixed6(fit.t_marginal(i, c));
          post_csv << "\n";
        }
      }
      write_text_file(dir / ("posterior_r" + std::to_string(r) + ".csv"), post_csv.str());
    }

    std::ostringstream pred_csv;
    pred_csv << "item,label\n";
    for (int i = 0; i < labels.num_items(); ++i)
      pred_csv << labels.item_ids()[i] << ',' << pred[i] + 1 << "\n";
    write_text_file(dir / ("pred_r" + std::to_string(r) + ".csv"), pred_csv.str());

    double err = std::numeric_limits<double>::quiet_NaN();
    if (have_truth) {
      err = error_rate(pred, truth);
      errors.push_back(err);
    }
    if (std::isfinite(nll)) nlls.push_back(nll);
    runs_csv << r << ',' << run_seed << ',' << fixed6(err) << ',' << fixed6(nll) << "\n";
    out << "run " << r << " seed " << run_seed << " error " << fixed6(err) << " nll "
        << fixed6(nll) << "\n";
  }

  std::ostringstream summary_csv;
  summary_csv << "runs,mean_error_rate,stddev_error_rate,mean_nll\n";
  summary_csv << run.repeat << ',' << fixed6(mean_of(errors)) << ',' << fixed6(stddev_of(errors))
              << ',' << fixed6(mean_of(nlls)) << "\n";

  write_text_file(dir / "runs.csv", runs_csv.str());
  write_text_file(dir / "summary.csv", summary_csv.str());
  write_text_file(dir / "manifest.txt", manifest_text(run));
  out << "mean error " << fixed6(mean_of(errors)) << " (stddev " << fixed6(stddev_of(errors))
      << "), mean nll " << fixed6(mean_of(nlls)) << "\n";
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.pred_path.empty() || cfg.truth_path.empty())
    throw std::invalid_argument("evaluate: --pred and --truth are required");

  const auto pred_rows = parse_label_pairs(cfg.pred_path, "prediction");
  const auto truth_rows = parse_label_pairs(cfg.truth_path, "truth");

  std::unordered_map<std::string, int> index;
  std::vector<int> predicted;
  for (const auto& [id, label] : pred_rows) {
    index.emplace(id, static_cast<int>(predicted.size()));
    predicted.push_back(label - 1);
  }
  TruthMap truth;
  truth.labels.assign(predicted.size(), -1);
  for (const auto& [id, label] : truth_rows) {
    const auto it = index.find(id);
    if (it == index.end()) throw DataError("truth item '" + id + "' has no prediction");
    truth.labels[it->second] = label - 1;
    ++truth.known;
  }

  const double err = error_rate(predicted, truth);
  const fs::path dir = ensure_out_dir(cfg.out_dir);

  std::ostringstream report;
  report << "items,evaluated,error_rate,accuracy\n";
  report << pred_rows.size() << ',' << truth.known << ',' << fixed6(err) << ','
         << fixed6(1.0 - err) << "\n";
  write_text_file(dir / "report.csv", report.str());
  write_text_file(dir / "manifest.txt", manifest_text(cfg));

  out << std::left << std::setw(12) << "items" << pred_rows.size() << "\n"
      << std::setw(12) << "evaluated" << truth.known << "\n"
      << std::setw(12) << "error_rate" << fixed6(err) << "\n"
      << std::setw(12) << "accuracy" << fixed6(1.0 - err) << "\n";
}

void cmd_select_h(const RunConfig& cfg, std::ostream& out) {
  if (cfg.labels_path.empty()) throw std::invalid_argument("select-h: --labels is required");
  SelectMethod method;
  if (cfg.method == "idbla")
    method = SelectMethod::idbla;
  else if (cfg.method == "fidbla")
    method = SelectMethod::fixed_idbla;
  else if (cfg.method == "cvi")
    method = SelectMethod::cvi;
  else
    throw std::invalid_argument("select-h: method must be idbla, fidbla or cvi, got '" +
                                cfg.method + "'");
  const std::vector<int> candidates = parse_int_list(cfg.candidates, "candidates");

  const LabelSet labels = load_labels(cfg.labels_path, cfg.classes_override);
  const SelectResult result = select_H(labels, candidates, method, hyper_from(cfg), cfg.samples,
                                       cfg.burnin, cfg.seed, cfg.ability_scale);

  const fs::path dir = ensure_out_dir(cfg.out_dir);
  std::ostringstream table;
  table << "levels,nll,chosen\n";
  for (const SelectRow& row : result.table)
    table << row.num_levels << ',' << fixed6(row.nll) << ','
          << (row.num_levels == result.chosen ? 1 : 0) << "\n";
  write_text_file(dir / "table.csv", table.str());
  write_text_file(dir / "manifest.txt", manifest_text(cfg));

  out << std::left << std::setw(8) << "levels" << std::setw(16) << "nll" << "chosen\n";
  for (const SelectRow& row : result.table)
    out << std::left << std::setw(8) << row.num_levels << std::setw(16) << fixed6(row.nll)
        << (row.num_levels == result.chosen ? 1 : 0) << "\n";
  out << "chosen levels: " << result.chosen << "\n";
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"crowdsourced label aggregation"};
  app.require_subcommand(1);
  register_fields(app.add_subcommand("synth", "generate a synthetic labeling dataset"), cfg);
  register_fields(app.add_subcommand("aggregate", "infer true labels from crowd labels"), cfg);
  register_fields(app.add_subcommand("evaluate", "score predictions against ground truth"), cfg);
  register_fields(app.add_subcommand("select-h", "compare difficulty level counts by likelihood"),
                  cfg);

  try {
    // Manifest values become the new defaults; explicit flags still win
    // because they are parsed afterwards.
    const std::string config_path = config_path_from(args);
    if (!config_path.empty()) {
      const std::string sub = first_positional(args);
      if (sub.empty()) throw std::invalid_argument("--config needs an explicit subcommand");
      apply_manifest(cfg, sub, read_manifest(config_path));
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 1;
    }

    cfg.subcommand = app.get_subcommands().front()->get_name();
    if (cfg.subcommand == "synth")
      cmd_synth(cfg, out);
    else if (cfg.subcommand == "aggregate")
      cmd_aggregate(cfg, out);
    else if (cfg.subcommand == "evaluate")
      cmd_evaluate(cfg, out);
    else
      cmd_select_h(cfg, out);
    return 0;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace idbla
