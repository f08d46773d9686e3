#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "idbla/dataset.hpp"
#include "idbla/gibbs.hpp"

namespace idbla {

// Aggregate filled by the evaluate command; the individual metrics below are
// usable on their own.
struct EvalReport {
  double error_rate = 0.0;
  double nll = 0.0;
  // Mean per-item labeling error within each predicted level; empty levels
  // carry no value instead of a zero.
  std::vector<std::optional<double>> level_error;
  int items_evaluated = 0;
};

// Fraction of items with known truth whose prediction disagrees with it.
// `predicted` must cover the truth's item universe.
double error_rate(const std::vector<int>& predicted, const TruthMap& truth);

// Negative log likelihood of the observed labels under fixed parameters and
// hard assignments: -sum over confusion cells of count * log(cell). A zero
// (or negative) cell that is actually observed is an inconsistent state.
double nll_idbla(const LabelSet& labels, const ConfusionTensor& pi, const std::vector<int>& T,
                 const std::vector<int>& Q);

// Level-free variant: one confusion matrix per worker.
double nll_confusion(const LabelSet& labels, const std::vector<Matrix>& phi,
                     const std::vector<int>& T);

// Dirichlet posterior mean of every confusion row given hard assignments:
// (count + omega) / (row total + C * omega). Strictly positive for omega > 0,
// so it composes with the likelihood calls above.
ConfusionTensor posterior_mean_confusion(const LabelSet& labels, const std::vector<int>& T,
                                         const std::vector<int>& Q, int num_levels, double omega);

// Mean labeling error of the items assigned to each level. An item's labeling
// error is the fraction of its labels that differ from its ground truth;
// items without truth or without labels are skipped, and a level that ends up
// with no items yields an empty optional.
std::vector<std::optional<double>> difficulty_quality(const LabelSet& labels, const TruthMap& truth,
                                                      const std::vector<int>& q_hat, int num_levels);

// Which inference backs the likelihood table of select_H.
enum class SelectMethod { idbla, fixed_idbla, cvi };

struct SelectRow {
  int num_levels = 0;
  double nll = 0.0;
};

struct SelectResult {
  int chosen = 0;  // candidate with the smallest NLL; ties keep the earliest candidate
  std::vector<SelectRow> table;
};

// Fits each candidate level count and scores it with the plug-in likelihood:
// posterior-mean confusion matrices and most-probable hard assignments fed to
// nll_idbla. Candidate j runs with seed + j so the table is reproducible.
SelectResult select_H(const LabelSet& labels, const std::vector<int>& candidates,
                      SelectMethod method, const Hyperparams& base, int num_samples, int burn_in,
                      std::uint64_t seed, double ability_scale = 4.0);

}  // namespace idbla
