#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "idbla/common.hpp"
#include "idbla/dataset.hpp"
#include "idbla/init_predict.hpp"

// Difficulty-aware confusion model and its Gibbs sampler.
//
// Notation used throughout this header and the sampler:
//   T_i   true class of item i            alpha  class proportions
//   Q_i   difficulty level of item i      beta   level proportions
//   pi[k][h]  C x C confusion matrix of worker k at difficulty level h,
//             row = true class, column = observed label
// Counts over the current (T, Q) assignment:
//   n_t(t)        items with T_i = t
//   n_q(h)        items with Q_i = h
//   n_l(k,h,t,c)  labels c given by worker k to items with T_i = t, Q_i = h
//
// Two model variants share the machinery. The full model gives every (k,h)
// slice a Dirichlet(omega) prior. The fixed variant pins the top two levels to
// known worker-independent matrices (near-diagonal "easy", noisy "hard") and
// gives the remaining free slices a Dirichlet(psi) prior.

namespace idbla {

enum class ModelKind { idbla, fixed_idbla };

struct Hyperparams {
  double omega = 1.0;        // Dirichlet concentration for confusion rows
  double gamma_alpha = 1.0;  // class proportion prior
  double gamma_beta = 1.0;   // level proportion prior
  double psi = 1.0;          // free-slice concentration in the fixed variant
  double nu = 0.1;           // easy fixed level: off-diagonal mass
  double delta = 0.8;        // hard fixed level: off-diagonal mass
  int num_levels = 4;        // H

  // The fixed variant needs H >= 3: two pinned levels plus at least one free.
  void validate(ModelKind model) const;
};

// easy: diagonal 1-nu, off-diagonal nu/(C-1); hard: same with delta.
std::pair<Matrix, Matrix> fixed_pi_matrices(double nu, double delta, int num_classes);

// K x H stack of C x C matrices.
class ConfusionTensor {
 public:
  ConfusionTensor() = default;
  ConfusionTensor(int num_workers, int num_levels, int num_classes)
      : K_(num_workers), H_(num_levels), slices_(static_cast<std::size_t>(num_workers) * num_levels,
                                                 Matrix(num_classes, num_classes)) {}

  int num_workers() const { return K_; }
  int num_levels() const { return H_; }

  Matrix& at(int k, int h) { return slices_[static_cast<std::size_t>(k) * H_ + h]; }
  const Matrix& at(int k, int h) const { return slices_[static_cast<std::size_t>(k) * H_ + h]; }

  bool operator==(const ConfusionTensor&) const = default;

 private:
  int K_ = 0;
  int H_ = 0;
  std::vector<Matrix> slices_;
};

struct LatentState {
  std::vector<int> T;         // per item, 0-based class
  std::vector<int> Q;         // per item, 0-based level
  std::vector<double> alpha;  // C
  std::vector<double> beta;   // H
  ConfusionTensor pi;
};

// Label/class/level counts for the current assignment, maintained
// incrementally as items are resampled.
struct CountCache {
  ConfusionTensor n_l;        // counts, stored as exact small integers
  std::vector<double> n_t;    // C
  std::vector<double> n_q;    // H

  static CountCache build(const LabelSet& labels, const std::vector<int>& T, const std::vector<int>& Q,
                          int num_levels);

  // Shift item i's contributions out of or into the counts, under the
  // assignment (t, h) for that item.
  void remove_item(const LabelSet& labels, int i, int t, int h);
  void add_item(const LabelSet& labels, int i, int t, int h);

  bool operator==(const CountCache&) const = default;
};

struct PosteriorSummary {
  Matrix t_marginal;               // I x C, post-burn-in sample frequencies
  Matrix q_marginal;               // I x H
  ConfusionTensor mean_pi;
  std::vector<double> mean_alpha;  // C
  std::vector<double> mean_beta;   // H
  std::vector<int> t_hat;          // marginal argmax, ties to smallest class
  std::vector<int> q_hat;
  int num_samples = 0;
};

// Systematic-scan sampler over one chain. Sweep order: every T_i in item
// order, every Q_i, every free confusion row, alpha, beta. All updates keep
// the count cache in sync via remove/sample/add.
class GibbsSampler {
 public:
  GibbsSampler(ModelKind model, const LabelSet& labels, const InitResult& init, const Hyperparams& hyper,
               std::uint64_t seed);

  // One conditional draw each; exposed for direct distribution checks.
  int sample_T_i(int i);
  int sample_Q_i(int i);
  // Draws into state and also returns the row. Requesting a pinned slice of
  // the fixed variant is an error.
  std::vector<double> sample_pi_row(int k, int h, int t);
  void sample_alpha();
  void sample_beta();

  void sweep();

  bool is_fixed_level(int h) const {
    return model_ == ModelKind::fixed_idbla && h >= hyper_.num_levels - 2;
  }

  const LatentState& state() const { return state_; }
  // Deliberate override point: diagnostics and tests pin parameters to known
  // values before drawing. The cache is not touched; call sites that change T
  // or Q through this must rebuild it themselves.
  LatentState& mutable_state() { return state_; }
  const CountCache& cache() const { return cache_; }
  const Hyperparams& hyper() const { return hyper_; }

 private:
  ModelKind model_;
  const LabelSet& labels_;
  Hyperparams hyper_;
  LatentState state_;
  CountCache cache_;
  Rng rng_;
  std::vector<double> logw_;  // scratch
};

// Runs burn_in + num_samples sweeps from the given starting point and
// averages the post-burn-in samples. Deterministic given the seed.
PosteriorSummary run_gibbs(ModelKind model, const LabelSet& labels, const InitResult& init,
                           const Hyperparams& hyper, int num_samples, int burn_in, std::uint64_t seed);

// Equal-weight average of per-chain marginals and parameter means; hard
// estimates recomputed from the merged marginals.
PosteriorSummary merge_summaries(const std::vector<PosteriorSummary>& chains);

}  // namespace idbla
