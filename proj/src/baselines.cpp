#include "idbla/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace idbla {

std::vector<int> majority_vote(const LabelSet& labels, std::uint64_t seed) {
  const int I = labels.num_items(), C = labels.num_classes();
  Rng rng(seed);
  std::vector<int> result(I, -1);
  std::vector<int> counts(C);
  std::vector<int> modes;
  for (int i = 0; i < I; ++i) {
    const auto& obs = labels.labels_of_item(i);
    if (obs.empty()) throw DataError("majority_vote: item " + labels.item_ids()[i] + " has no labels");
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& o : obs) ++counts[o.label];
    int best = *std::max_element(counts.begin(), counts.end());
    modes.clear();
    for (int c = 0; c < C; ++c)
      if (counts[c] == best) modes.push_back(c);
    if (modes.size() == 1) {
      result[i] = modes[0];
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, modes.size() - 1);
      result[i] = modes[pick(rng)];
    }
  }
  return result;
}

Matrix ds_e_step(const LabelSet& labels, const std::vector<Matrix>& phi, const std::vector<double>& priors) {
  const int I = labels.num_items(), C = labels.num_classes();
  Matrix posterior(I, C);
  std::vector<double> logw(C);
  for (int i = 0; i < I; ++i) {
    for (int t = 0; t < C; ++t) logw[t] = std::log(priors[t]);
    for (const auto& o : labels.labels_of_item(i))
      for (int t = 0; t < C; ++t) logw[t] += std::log(phi[o.index](t, o.label));
    softmax_in_place(logw);
    for (int t = 0; t < C; ++t) posterior(i, t) = logw[t];
  }
  return posterior;
}

void ds_m_step(const LabelSet& labels, const Matrix& posterior, std::vector<Matrix>& phi,
               std::vector<double>& priors, double smoothing) {
  const int I = labels.num_items(), K = labels.num_workers(), C = labels.num_classes();
  phi.assign(K, Matrix(C, C, smoothing));
  for (int i = 0; i < I; ++i)
    for (const auto& o : labels.labels_of_item(i))
      for (int t = 0; t < C; ++t) phi[o.index](t, o.label) += posterior(i, t);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < C; ++t) normalize_in_place(phi[k].row(t));

  priors.assign(C, 0.0);
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < C; ++t) priors[t] += posterior(i, t);
  for (double& p : priors) p /= I;
}

double ds_log_likelihood(const LabelSet& labels, const std::vector<Matrix>& phi,
                         const std::vector<double>& priors) {
  const int I = labels.num_items(), C = labels.num_classes();
  double total = 0.0;
  std::vector<double> logw(C);
  for (int i = 0; i < I; ++i) {
    for (int t = 0; t < C; ++t) logw[t] = std::log(priors[t]);
    for (const auto& o : labels.labels_of_item(i))
      for (int t = 0; t < C; ++t) logw[t] += std::log(phi[o.index](t, o.label));
    total += log_sum_exp(logw);
  }
  return total;
}

DsState ds_em(const LabelSet& labels, const std::vector<int>& init_labels, int max_iters, double tol) {
  const int I = labels.num_items(), C = labels.num_classes();
  if (static_cast<int>(init_labels.size()) != I)
    throw std::invalid_argument("ds_em: init_labels size must equal num_items");
  DsState state;
  state.posterior = Matrix(I, C);
  for (int i = 0; i < I; ++i) {
    if (init_labels[i] < 0 || init_labels[i] >= C) throw std::invalid_argument("ds_em: init label out of range");
    state.posterior(i, init_labels[i]) = 1.0;
  }
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    ds_m_step(labels, state.posterior, state.phi, state.class_priors);
    // Trace the objective the smoothed M-step actually maximizes: the data
    // log likelihood plus the pseudo-count term. The data term alone can dip
    // on small instances where the smoothing mass rivals the real counts.
    double penalty = 0.0;
    for (const Matrix& phi : state.phi)
      for (double cell : phi.data()) penalty += std::log(cell);
    double ll = ds_log_likelihood(labels, state.phi, state.class_priors) + kDsSmoothing * penalty;
    state.posterior = ds_e_step(labels, state.phi, state.class_priors);
    state.log_likelihood_trace.push_back(ll);
    state.iterations = iter + 1;
    if (iter > 0 && std::abs(ll - prev_ll) < tol * std::abs(prev_ll)) {
      state.converged = true;
      break;
    }
    prev_ll = ll;
  }
  return state;
}

}  // namespace idbla
