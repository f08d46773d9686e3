#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <stdexcept>

#include "idbla/baselines.hpp"
#include "idbla/common.hpp"
#include "idbla/cvi.hpp"
#include "idbla/dataset.hpp"
#include "idbla/eval.hpp"
#include "idbla/gibbs.hpp"
#include "idbla/init_predict.hpp"

namespace py = pybind11;
using namespace idbla;

namespace {

void check_row(const Matrix& m, int r) {
  if (r < 0 || r >= m.rows()) throw std::out_of_range("row out of range");
}

void check_cell(const Matrix& m, int r, int c) {
  check_row(m, r);
  if (c < 0 || c >= m.cols()) throw std::out_of_range("column out of range");
}

Matrix matrix_from_list(const std::vector<std::vector<double>>& rows) {
  const int R = static_cast<int>(rows.size());
  const int C = R > 0 ? static_cast<int>(rows[0].size()) : 0;
  Matrix m(R, C);
  for (int r = 0; r < R; ++r) {
    if (static_cast<int>(rows[r].size()) != C)
      throw std::invalid_argument("Matrix.from_list: ragged rows");
    for (int c = 0; c < C; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

std::vector<std::vector<double>> matrix_to_list(const Matrix& m) {
  std::vector<std::vector<double>> out(m.rows());
  for (int r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

std::vector<std::pair<int, int>> obs_pairs(const std::vector<Observation>& obs) {
  std::vector<std::pair<int, int>> out;
  out.reserve(obs.size());
  for (const auto& o : obs) out.emplace_back(o.index, o.label);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Crowd label aggregation: confusion-matrix models with per-item difficulty.";
  m.attr("__version__") = "0.1.0";

  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

  py::class_<Matrix>(m, "Matrix", "Dense row-major matrix of doubles.")
      .def(py::init<>())
      .def(py::init<int, int, double>(), py::arg("rows"), py::arg("cols"), py::arg("fill") = 0.0)
      .def_property_readonly("rows", &Matrix::rows)
      .def_property_readonly("cols", &Matrix::cols)
      .def("__getitem__",
           [](const Matrix& m, std::pair<int, int> rc) {
             check_cell(m, rc.first, rc.second);
             return m(rc.first, rc.second);
           })
      .def("__setitem__",
           [](Matrix& m, std::pair<int, int> rc, double v) {
             check_cell(m, rc.first, rc.second);
             m(rc.first, rc.second) = v;
           })
      .def("row",
           [](const Matrix& m, int r) {
             check_row(m, r);
             return std::vector<double>(m.row(r).begin(), m.row(r).end());
           },
           py::arg("r"))
      .def("to_list", &matrix_to_list)
      .def_static("from_list", &matrix_from_list, py::arg("rows"))
      .def(py::self == py::self)
      .def("__repr__", [](const Matrix& m) {
        return "Matrix(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
      });

  py::class_<ConfusionTensor>(m, "ConfusionTensor",
                              "Per (worker, level) stack of square confusion matrices.")
      .def(py::init<>())
      .def(py::init<int, int, int>(), py::arg("num_workers"), py::arg("num_levels"),
           py::arg("num_classes"))
      .def_property_readonly("num_workers", &ConfusionTensor::num_workers)
      .def_property_readonly("num_levels", &ConfusionTensor::num_levels)
      .def("at",
           [](const ConfusionTensor& t, int k, int h) -> Matrix {
             if (k < 0 || k >= t.num_workers()) throw std::out_of_range("worker out of range");
             if (h < 0 || h >= t.num_levels()) throw std::out_of_range("level out of range");
             return t.at(k, h);
           },
           py::arg("worker"), py::arg("level"), "Copy of one confusion matrix.")
      .def("set_at",
           [](ConfusionTensor& t, int k, int h, const Matrix& m) {
             if (k < 0 || k >= t.num_workers()) throw std::out_of_range("worker out of range");
             if (h < 0 || h >= t.num_levels()) throw std::out_of_range("level out of range");
             t.at(k, h) = m;
           },
           py::arg("worker"), py::arg("level"), py::arg("matrix"))
      .def(py::self == py::self);

  py::class_<LabelSet>(m, "LabelSet",
                       "Sparse item x worker label table. Items, workers and classes are "
                       "0-based in memory; CSV files use 1-based class labels.")
      .def(py::init<>())
      .def_static("from_records", &LabelSet::from_records, py::arg("num_items"),
                  py::arg("num_workers"), py::arg("num_classes"), py::arg("records"),
                  "records: (item, worker, label) triples, all 0-based, at most one per "
                  "(item, worker) pair.")
      .def_property_readonly("num_items", &LabelSet::num_items)
      .def_property_readonly("num_workers", &LabelSet::num_workers)
      .def_property_readonly("num_classes", &LabelSet::num_classes)
      .def_property_readonly("num_labels", &LabelSet::num_labels)
      .def("labels_of_item",
           [](const LabelSet& ls, int i) {
             if (i < 0 || i >= ls.num_items()) throw std::out_of_range("item out of range");
             return obs_pairs(ls.labels_of_item(i));
           },
           py::arg("item"), "List of (worker, label) pairs, sorted by worker.")
      .def("labels_of_worker",
           [](const LabelSet& ls, int k) {
             if (k < 0 || k >= ls.num_workers()) throw std::out_of_range("worker out of range");
             return obs_pairs(ls.labels_of_worker(k));
           },
           py::arg("worker"), "List of (item, label) pairs, sorted by item.")
      .def_property_readonly("item_ids", &LabelSet::item_ids)
      .def_property_readonly("worker_ids", &LabelSet::worker_ids)
      .def("item_index", &LabelSet::item_index, py::arg("id"), "-1 when the id is unknown.")
      .def("worker_index", &LabelSet::worker_index, py::arg("id"))
      .def(py::self == py::self)
      .def("__repr__", [](const LabelSet& ls) {
        return "LabelSet(items=" + std::to_string(ls.num_items()) +
               ", workers=" + std::to_string(ls.num_workers()) +
               ", classes=" + std::to_string(ls.num_classes()) +
               ", labels=" + std::to_string(ls.num_labels()) + ")";
      });

  py::class_<TruthMap>(m, "TruthMap", "Possibly partial ground truth; -1 marks unknown items.")
      .def(py::init<>())
      .def(py::init([](const std::vector<int>& labels) {
             TruthMap t;
             t.labels = labels;
             for (int v : labels)
               if (v >= 0) ++t.known;
             return t;
           }),
           py::arg("labels"))
      .def_readonly("labels", &TruthMap::labels)
      .def_readonly("known", &TruthMap::known)
      .def("has", &TruthMap::has, py::arg("item"))
      .def("at",
           [](const TruthMap& t, int i) {
             if (!t.has(i)) throw std::out_of_range("no truth for item");
             return t.at(i);
           },
           py::arg("item"));

  m.def(
      "parse_labels_text",
      [](const std::string& text, int num_classes_override) {
        std::istringstream in(text);
        return parse_labels(in, num_classes_override);
      },
      py::arg("text"), py::arg("num_classes_override") = 0,
      "Parse `item,worker,label` CSV text (labels 1..C) into a LabelSet.");

  m.def(
      "parse_truth_text",
      [](const std::string& text, const LabelSet& labels) {
        std::istringstream in(text);
        TruthParse p = parse_ground_truth(in, labels);
        return std::make_pair(p.truth, p.warnings);
      },
      py::arg("text"), py::arg("labels"),
      "Parse `item,label` CSV text against a LabelSet's item ids. Returns "
      "(truth, warnings); unknown ids are skipped with a warning.");

  m.def(
      "labels_to_csv",
      [](const LabelSet& labels) {
        std::ostringstream out;
        write_labels(out, labels);
        return out.str();
      },
      py::arg("labels"));

  m.def(
      "truth_to_csv",
      [](const LabelSet& labels, const TruthMap& truth) {
        std::ostringstream out;
        write_truth(out, labels, truth);
        return out.str();
      },
      py::arg("labels"), py::arg("truth"));

  py::class_<SynthConfig>(m, "SynthConfig",
                          "Synthetic benchmark settings. class_probs must have one entry per "
                          "class and level_probs/level_shifts must be the same length; "
                          "generate_synthetic validates.")
      .def(py::init<>())
      .def_readwrite("num_items", &SynthConfig::num_items)
      .def_readwrite("num_workers", &SynthConfig::num_workers)
      .def_readwrite("num_classes", &SynthConfig::num_classes)
      .def_readwrite("class_probs", &SynthConfig::class_probs)
      .def_readwrite("level_probs", &SynthConfig::level_probs)
      .def_readwrite("level_shifts", &SynthConfig::level_shifts)
      .def_readwrite("skill_mean", &SynthConfig::skill_mean)
      .def_readwrite("skill_concentration", &SynthConfig::skill_concentration)
      .def_readwrite("worker_correct_rates", &SynthConfig::worker_correct_rates)
      .def_readwrite("participation_low", &SynthConfig::participation_low)
      .def_readwrite("participation_high", &SynthConfig::participation_high)
      .def_readwrite("heavy_participation_low", &SynthConfig::heavy_participation_low)
      .def_readwrite("heavy_participation_high", &SynthConfig::heavy_participation_high)
      .def_readwrite("participation", &SynthConfig::participation)
      .def_readwrite("seed", &SynthConfig::seed)
      .def("validate", &SynthConfig::validate);

  py::class_<SynthData>(m, "SynthData")
      .def_readonly("labels", &SynthData::labels)
      .def_readonly("truth", &SynthData::truth)
      .def_readonly("item_levels", &SynthData::item_levels)
      .def_readonly("worker_rates", &SynthData::worker_rates)
      .def_readonly("participation", &SynthData::participation)
      .def_readonly("expected_worker_accuracy", &SynthData::expected_worker_accuracy);

  m.def("generate_synthetic", &generate_synthetic, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());

  py::enum_<ModelKind>(m, "ModelKind")
      .value("idbla", ModelKind::idbla)
      .value("fixed_idbla", ModelKind::fixed_idbla);

  py::class_<Hyperparams>(m, "Hyperparams")
      .def(py::init<>())
      .def_readwrite("omega", &Hyperparams::omega)
      .def_readwrite("gamma_alpha", &Hyperparams::gamma_alpha)
      .def_readwrite("gamma_beta", &Hyperparams::gamma_beta)
      .def_readwrite("psi", &Hyperparams::psi)
      .def_readwrite("nu", &Hyperparams::nu)
      .def_readwrite("delta", &Hyperparams::delta)
      .def_readwrite("num_levels", &Hyperparams::num_levels)
      .def("validate", &Hyperparams::validate, py::arg("model"));

  m.def("fixed_pi_matrices", &fixed_pi_matrices, py::arg("nu"), py::arg("delta"),
        py::arg("num_classes"),
        "(easy, hard) confusion matrices with pinned diagonals 1-nu and 1-delta.");

  py::class_<InitResult>(m, "InitResult", "Preliminary hard labels, worker rates and levels.")
      .def(py::init<>())
      .def_readwrite("hard_labels", &InitResult::hard_labels)
      .def_readwrite("correct_rates", &InitResult::correct_rates)
      .def_readwrite("abilities", &InitResult::abilities)
      .def_readwrite("epsilons", &InitResult::epsilons)
      .def_readwrite("levels", &InitResult::levels)
      .def_property(
          "fit_converged",
          [](const InitResult& r) {
            return std::vector<bool>(r.fit_converged.begin(), r.fit_converged.end());
          },
          [](InitResult& r, const std::vector<bool>& v) {
            r.fit_converged.assign(v.begin(), v.end());
          });

  m.def(
      "glad_init",
      [](const LabelSet& labels, int num_levels, double ability_scale, std::uint64_t seed) {
        return glad_init(labels, num_levels, ability_scale, seed);
      },
      py::arg("labels"), py::arg("num_levels"), py::arg("ability_scale") = 4.0,
      py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>(),
      "Majority vote, per-item difficulty fit, quantile level split.");

  m.def("random_init", &random_init, py::arg("labels"), py::arg("num_levels"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>(),
        "Uniform-random labels and levels; the ablation baseline.");

  m.def("worker_correct_rates", &worker_correct_rates, py::arg("labels"), py::arg("hard_labels"),
        "Agreement rate of each worker with the hard labels.");

  m.def("assign_levels", &assign_levels, py::arg("epsilons"), py::arg("num_levels"),
        "Equal-frequency split of items by difficulty; level 0 easiest.");

  m.def("majority_vote", &majority_vote, py::arg("labels"), py::arg("seed") = 1,
        "Per-item modal label; ties broken at random with the seed.");

  py::class_<DsState>(m, "DsState")
      .def_readonly("phi", &DsState::phi)
      .def_readonly("class_priors", &DsState::class_priors)
      .def_readonly("posterior", &DsState::posterior)
      .def_readonly("log_likelihood_trace", &DsState::log_likelihood_trace)
      .def_readonly("iterations", &DsState::iterations)
      .def_readonly("converged", &DsState::converged);

  m.def("ds_em", &ds_em, py::arg("labels"), py::arg("init_labels"), py::arg("max_iters") = 200,
        py::arg("tol") = 1e-6, py::call_guard<py::gil_scoped_release>(),
        "Confusion-matrix EM from hard initial labels.");

  py::class_<PosteriorSummary>(m, "PosteriorSummary",
                               "Averaged post-burn-in samples from one or more chains.")
      .def(py::init<>())
      .def_readonly("t_marginal", &PosteriorSummary::t_marginal)
      .def_readonly("q_marginal", &PosteriorSummary::q_marginal)
      .def_readonly("mean_pi", &PosteriorSummary::mean_pi)
      .def_readonly("mean_alpha", &PosteriorSummary::mean_alpha)
      .def_readonly("mean_beta", &PosteriorSummary::mean_beta)
      .def_readonly("t_hat", &PosteriorSummary::t_hat)
      .def_readonly("q_hat", &PosteriorSummary::q_hat)
      .def_readonly("num_samples", &PosteriorSummary::num_samples);

  m.def("run_gibbs", &run_gibbs, py::arg("model"), py::arg("labels"), py::arg("init"),
        py::arg("hyper"), py::arg("num_samples"), py::arg("burn_in"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>(),
        "Collapsed Gibbs chain from the given starting point; deterministic per seed.");

  m.def("merge_summaries", &merge_summaries, py::arg("chains"),
        "Equal-weight average of per-chain marginals and parameter means.");

  py::class_<VariationalState>(m, "VariationalState")
      .def(py::init<>())
      .def_readwrite("lambda_", &VariationalState::lambda)
      .def_readwrite("rho", &VariationalState::rho);

  py::class_<CviResult>(m, "CviResult")
      .def_readonly("state", &CviResult::state)
      .def_readonly("max_change_trace", &CviResult::max_change_trace)
      .def_readonly("iterations", &CviResult::iterations)
      .def_readonly("converged", &CviResult::converged)
      .def_readonly("t_hat", &CviResult::t_hat)
      .def_readonly("q_hat", &CviResult::q_hat);

  m.def(
      "run_cvi",
      [](const LabelSet& labels, const InitResult& init, const Hyperparams& hyper, int max_iters,
         double tol, std::optional<VariationalState> warm_start) {
        CviOptions opts;
        opts.max_iters = max_iters;
        opts.tol = tol;
        if (warm_start) opts.warm_start = &*warm_start;
        return run_cvi(labels, init, hyper, opts);
      },
      py::arg("labels"), py::arg("init"), py::arg("hyper"), py::arg("max_iters") = 200,
      py::arg("tol") = 1e-4, py::arg("warm_start") = std::nullopt,
      py::call_guard<py::gil_scoped_release>(),
      "Coordinate ascent on the collapsed variational objective.");

  m.def("error_rate", &error_rate, py::arg("predicted"), py::arg("truth"),
        "Fraction of items with known truth whose prediction disagrees with it.");

  m.def("nll_idbla", &nll_idbla, py::arg("labels"), py::arg("pi"), py::arg("T"), py::arg("Q"),
        "Negative log likelihood under per-level confusion matrices and hard assignments.");

  m.def("nll_confusion", &nll_confusion, py::arg("labels"), py::arg("phi"), py::arg("T"),
        "Level-free variant: one confusion matrix per worker.");

  m.def("posterior_mean_confusion", &posterior_mean_confusion, py::arg("labels"), py::arg("T"),
        py::arg("Q"), py::arg("num_levels"), py::arg("omega"),
        "Smoothed confusion rows (count + omega) / (total + C * omega).");

  m.def("difficulty_quality", &difficulty_quality, py::arg("labels"), py::arg("truth"),
        py::arg("q_hat"), py::arg("num_levels"),
        "Mean labeling error per predicted level; None for empty levels.");

  py::enum_<SelectMethod>(m, "SelectMethod")
      .value("idbla", SelectMethod::idbla)
      .value("fixed_idbla", SelectMethod::fixed_idbla)
      .value("cvi", SelectMethod::cvi);

  py::class_<SelectRow>(m, "SelectRow")
      .def_readonly("num_levels", &SelectRow::num_levels)
      .def_readonly("nll", &SelectRow::nll);

  py::class_<SelectResult>(m, "SelectResult")
      .def_readonly("chosen", &SelectResult::chosen)
      .def_readonly("table", &SelectResult::table);

  m.def("select_H", &select_H, py::arg("labels"), py::arg("candidates"), py::arg("method"),
        py::arg("base"), py::arg("num_samples"), py::arg("burn_in"), py::arg("seed"),
        py::arg("ability_scale") = 4.0, py::call_guard<py::gil_scoped_release>(),
        "Score candidate level counts by plug-in likelihood; smallest wins.");
}
