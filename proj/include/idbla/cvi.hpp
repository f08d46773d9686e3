#pragma once

#include <cstdint>
#include <vector>

#include "idbla/common.hpp"
#include "idbla/dataset.hpp"
#include "idbla/gibbs.hpp"
#include "idbla/init_predict.hpp"

// Collapsed variational inference for the difficulty-aware confusion model.
// The confusion matrices and the class/level proportions are integrated out
// analytically; coordinate ascent runs on a factorized posterior
// q(T_i) = lambda_i, q(Q_i) = rho_i. Expectations of log(count + offset)
// terms are handled with a second-order Gaussian approximation around the
// count's mean, treating each count as a sum of independent Bernoullis.

namespace idbla {

struct VariationalState {
  Matrix lambda;  // I x C, row i = q(T_i)
  Matrix rho;     // I x H, row i = q(Q_i)
};

struct MomentPair {
  double mean = 0.0;
  double variance = 0.0;
};

// Which coordinate update the moments serve. The rho update takes
// expectations with the item's own class random (Bernoulli weights
// (lambda_j . lambda_i) rho_{j,h}); the lambda update mirrors the roles
// (weights (rho_j . rho_i) lambda_{j,t}).
enum class UpdateKind { rho, lambda };

// Moments of the leave-one-out counts around item i for worker k, level h,
// class t. Variances follow the independent-Bernoulli convention: each term
// contributes w(1-w) and terms are summed.
struct ExpectedCounts {
  MomentPair label_match;  // labels equal to the one k gave i, at (h, t)
  MomentPair label_row;    // all labels by k, at (h, t)
  MomentPair level_count;  // items at level h (excluding i)
  MomentPair class_count;  // items of class t (excluding i)
};

// Requires k to have labeled item i.
ExpectedCounts count_moments(const LabelSet& labels, int i, int k, int h, int t, UpdateKind kind,
                             const Matrix& lambda, const Matrix& rho);

// Log of the collapsed posterior over a complete hard assignment, with all
// Dirichlet integrals written out via log-gamma. Constant offsets are kept,
// so differences of two calls are exact log probability ratios.
double collapsed_joint(const LabelSet& labels, const std::vector<int>& T, const std::vector<int>& Q,
                       const Hyperparams& hyper);

// Unnormalized leave-one-out conditional weights under hard assignments.
double collapsed_conditional_T(int i, int t, const LabelSet& labels, const std::vector<int>& T,
                               const std::vector<int>& Q, const Hyperparams& hyper);
double collapsed_conditional_Q(int i, int h, const LabelSet& labels, const std::vector<int>& T,
                               const std::vector<int>& Q, const Hyperparams& hyper);

// Second-order approximation of E[log(N + offset)] for a variable with the
// given mean and variance: log(mean+offset) - variance / (2 (mean+offset)^2).
double gaussian_log_expectation(double mean, double variance, double offset);

// One coordinate update each; both return the new normalized row without
// touching the state.
std::vector<double> update_rho_row(int i, const Matrix& lambda, const Matrix& rho, const LabelSet& labels,
                                   const Hyperparams& hyper);
std::vector<double> update_lambda_row(int i, const Matrix& lambda, const Matrix& rho,
                                      const LabelSet& labels, const Hyperparams& hyper);

struct CviOptions {
  int max_iters = 200;
  double tol = 1e-4;
  // Resume from an existing state instead of the softened init.
  const VariationalState* warm_start = nullptr;
};

struct CviResult {
  VariationalState state;
  std::vector<double> max_change_trace;  // per sweep
  int iterations = 0;
  bool converged = false;
  std::vector<int> t_hat;  // row argmax, ties to smallest index
  std::vector<int> q_hat;
};

// Coordinate ascent from a softened hard init (0.9 point mass + 0.1 uniform),
// sweeping items in index order, lambda_i then rho_i. Stops when the largest
// absolute entry change in a sweep drops below tol.
CviResult run_cvi(const LabelSet& labels, const InitResult& init, const Hyperparams& hyper,
                  const CviOptions& options = {});

}  // namespace idbla
