#pragma once

#include <cstdint>
#include <vector>

#include "idbla/common.hpp"
#include "idbla/dataset.hpp"

namespace idbla {

// Smoothing added to every count-ratio estimate in the M-step; keeps the
// confusion cells strictly positive on sparse data.
inline constexpr double kDsSmoothing = 0.01;

// Dawid-Skene model state: one confusion matrix per worker, class priors and
// the per-item posterior over true labels.
struct DsState {
  std::vector<Matrix> phi;          // per worker, C x C, rows over observed labels
  std::vector<double> class_priors; // p_t
  Matrix posterior;                 // I x C
  // Smoothed objective per iteration: observed-data log likelihood plus the
  // pseudo-count term the M-step maximizes. Non-decreasing by construction.
  std::vector<double> log_likelihood_trace;
  int iterations = 0;
  bool converged = false;
};

// Per-item modal label; ties broken uniformly at random with the given seed.
// Throws if any item has no labels.
std::vector<int> majority_vote(const LabelSet& labels, std::uint64_t seed);

// Posterior over true labels given confusion matrices and priors, in log space.
// Items without labels get the prior.
Matrix ds_e_step(const LabelSet& labels, const std::vector<Matrix>& phi, const std::vector<double>& priors);

// Maximum-likelihood confusion matrices and priors from soft counts, with
// additive smoothing on the confusion cells.
void ds_m_step(const LabelSet& labels, const Matrix& posterior, std::vector<Matrix>& phi,
               std::vector<double>& priors, double smoothing = kDsSmoothing);

// Observed-data log likelihood sum_i log sum_t p_t prod_k phi.
double ds_log_likelihood(const LabelSet& labels, const std::vector<Matrix>& phi,
                         const std::vector<double>& priors);

// EM from a hard initial labeling (normally majority vote). Stops when the
// relative improvement of the traced objective drops below tol.
DsState ds_em(const LabelSet& labels, const std::vector<int>& init_labels, int max_iters = 200,
              double tol = 1e-6);

}  // namespace idbla
