#include "idbla/gibbs.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace idbla {

void Hyperparams::validate(ModelKind model) const {
  if (omega <= 0.0 || gamma_alpha <= 0.0 || gamma_beta <= 0.0 || psi <= 0.0)
    throw std::invalid_argument("Hyperparams: concentrations must be positive");
  if (nu <= 0.0 || nu >= 1.0 || delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("Hyperparams: nu and delta must lie in (0,1)");
  if (num_levels < 1) throw std::invalid_argument("Hyperparams: need at least one level");
  if (model == ModelKind::fixed_idbla && num_levels < 3)
    throw std::invalid_argument("Hyperparams: the fixed variant needs at least 3 levels");
}

std::pair<Matrix, Matrix> fixed_pi_matrices(double nu, double delta, int num_classes) {
  const int C = num_classes;
  if (C < 2) throw std::invalid_argument("fixed_pi_matrices: need at least 2 classes");
  Matrix easy(C, C, nu / (C - 1)), hard(C, C, delta / (C - 1));
  for (int t = 0; t < C; ++t) {
    easy(t, t) = 1.0 - nu;
    hard(t, t) = 1.0 - delta;
  }
  return {easy, hard};
}

CountCache CountCache::build(const LabelSet& labels, const std::vector<int>& T, const std::vector<int>& Q,
                             int num_levels) {
  CountCache cache;
  cache.n_l = ConfusionTensor(labels.num_workers(), num_levels, labels.num_classes());
  cache.n_t.assign(labels.num_classes(), 0.0);
  cache.n_q.assign(num_levels, 0.0);
  for (int i = 0; i < labels.num_items(); ++i) cache.add_item(labels, i, T[i], Q[i]);
  return cache;
}

void CountCache::remove_item(const LabelSet& labels, int i, int t, int h) {
  n_t[t] -= 1.0;
  n_q[h] -= 1.0;
  for (const auto& o : labels.labels_of_item(i)) n_l.at(o.index, h)(t, o.label) -= 1.0;
}

void CountCache::add_item(const LabelSet& labels, int i, int t, int h) {
  n_t[t] += 1.0;
  n_q[h] += 1.0;
  for (const auto& o : labels.labels_of_item(i)) n_l.at(o.index, h)(t, o.label) += 1.0;
}

GibbsSampler::GibbsSampler(ModelKind model, const LabelSet& labels, const InitResult& init,
                           const Hyperparams& hyper, std::uint64_t seed)
    : model_(model), labels_(labels), hyper_(hyper), rng_(seed) {
  hyper_.validate(model_);
  const int I = labels_.num_items(), K = labels_.num_workers(), C = labels_.num_classes();
  const int H = hyper_.num_levels;
  if (static_cast<int>(init.hard_labels.size()) != I || static_cast<int>(init.levels.size()) != I)
    throw std::invalid_argument("GibbsSampler: init sizes do not match the label set");
  for (int i = 0; i < I; ++i) {
    if (init.hard_labels[i] < 0 || init.hard_labels[i] >= C)
      throw std::invalid_argument("GibbsSampler: init class out of range");
    if (init.levels[i] < 0 || init.levels[i] >= H)
      throw std::invalid_argument("GibbsSampler: init level out of range");
  }

  state_.T = init.hard_labels;
  state_.Q = init.levels;
  cache_ = CountCache::build(labels_, state_.T, state_.Q, H);

  // Starting proportions are the raw assignment frequencies.
  state_.alpha.assign(C, 0.0);
  for (int t = 0; t < C; ++t) state_.alpha[t] = cache_.n_t[t] / I;
  state_.beta.assign(H, 0.0);
  for (int h = 0; h < H; ++h) state_.beta[h] = cache_.n_q[h] / I;

  // Starting confusion slices are add-one smoothed count ratios; a slice the
  // data never touches falls back to uniform rows. Pinned slices of the fixed
  // variant are exact from the start.
  state_.pi = ConfusionTensor(K, H, C);
  auto [easy, hard] = fixed_pi_matrices(hyper_.nu, hyper_.delta, C);
  for (int k = 0; k < K; ++k)
    for (int h = 0; h < H; ++h) {
      if (is_fixed_level(h)) {
        state_.pi.at(k, h) = (h == H - 2) ? easy : hard;
        continue;
      }
      Matrix& slice = state_.pi.at(k, h);
      const Matrix& counts = cache_.n_l.at(k, h);
      for (int t = 0; t < C; ++t) {
        double row_total = 0.0;
        for (int c = 0; c < C; ++c) row_total += counts(t, c);
        for (int c = 0; c < C; ++c) slice(t, c) = (counts(t, c) + 1.0) / (row_total + C);
      }
    }
}

int GibbsSampler::sample_T_i(int i) {
  const int C = labels_.num_classes();
  const int h = state_.Q[i];
  cache_.remove_item(labels_, i, state_.T[i], h);
  logw_.assign(C, 0.0);
  for (int t = 0; t < C; ++t) {
    double lw = std::log(state_.alpha[t]);
    for (const auto& o : labels_.labels_of_item(i)) lw += std::log(state_.pi.at(o.index, h)(t, o.label));
    logw_[t] = lw;
  }
  if (!std::isfinite(log_sum_exp(logw_)))
    throw std::logic_error("sample_T_i: all log-weights diverged");
  softmax_in_place(logw_);
  const int t_new = draw_discrete(logw_, rng_);
  state_.T[i] = t_new;
  cache_.add_item(labels_, i, t_new, h);
  return t_new;
}

int GibbsSampler::sample_Q_i(int i) {
  const int H = hyper_.num_levels;
  const int t = state_.T[i];
  cache_.remove_item(labels_, i, t, state_.Q[i]);
  logw_.assign(H, 0.0);
  for (int h = 0; h < H; ++h) {
    double lw = std::log(state_.beta[h]);
    for (const auto& o : labels_.labels_of_item(i)) lw += std::log(state_.pi.at(o.index, h)(t, o.label));
    logw_[h] = lw;
  }
  if (!std::isfinite(log_sum_exp(logw_)))
    throw std::logic_error("sample_Q_i: all log-weights diverged");
  softmax_in_place(logw_);
  const int h_new = draw_discrete(logw_, rng_);
  state_.Q[i] = h_new;
  cache_.add_item(labels_, i, t, h_new);
  return h_new;
}

std::vector<double> GibbsSampler::sample_pi_row(int k, int h, int t) {
  if (is_fixed_level(h))
    throw std::logic_error("sample_pi_row: level " + std::to_string(h + 1) + " is a fixed level");
  const int C = labels_.num_classes();
  const double conc = model_ == ModelKind::fixed_idbla ? hyper_.psi : hyper_.omega;
  std::vector<double> concentration(C);
  const Matrix& counts = cache_.n_l.at(k, h);
  for (int c = 0; c < C; ++c) concentration[c] = counts(t, c) + conc;
  std::vector<double> row = draw_dirichlet(concentration, rng_);
  auto dest = state_.pi.at(k, h).row(t);
  for (int c = 0; c < C; ++c) dest[c] = row[c];
  return row;
}

void GibbsSampler::sample_alpha() {
  const int C = labels_.num_classes();
  std::vector<double> concentration(C);
  for (int t = 0; t < C; ++t) concentration[t] = cache_.n_t[t] + hyper_.gamma_alpha;
  state_.alpha = draw_dirichlet(concentration, rng_);
}

void GibbsSampler::sample_beta() {
  const int H = hyper_.num_levels;
  std::vector<double> concentration(H);
  for (int h = 0; h < H; ++h) concentration[h] = cache_.n_q[h] + hyper_.gamma_beta;
  state_.beta = draw_dirichlet(concentration, rng_);
}

void GibbsSampler::sweep() {
  const int I = labels_.num_items(), K = labels_.num_workers(), C = labels_.num_classes();
  for (int i = 0; i < I; ++i) sample_T_i(i);
  for (int i = 0; i < I; ++i) sample_Q_i(i);
  for (int k = 0; k < K; ++k)
    for (int h = 0; h < hyper_.num_levels; ++h) {
      if (is_fixed_level(h)) continue;
      for (int t = 0; t < C; ++t) sample_pi_row(k, h, t);
    }
  sample_alpha();
  sample_beta();
}

PosteriorSummary run_gibbs(ModelKind model, const LabelSet& labels, const InitResult& init,
                           const Hyperparams& hyper, int num_samples, int burn_in, std::uint64_t seed) {
  if (num_samples < 1) throw std::invalid_argument("run_gibbs: need at least one sample");
  if (burn_in < 0) throw std::invalid_argument("run_gibbs: negative burn-in");
  GibbsSampler sampler(model, labels, init, hyper, seed);

  const int I = labels.num_items(), K = labels.num_workers(), C = labels.num_classes();
  const int H = hyper.num_levels;
  PosteriorSummary s;
  s.t_marginal = Matrix(I, C);
  s.q_marginal = Matrix(I, H);
  s.mean_pi = ConfusionTensor(K, H, C);
  s.mean_alpha.assign(C, 0.0);
  s.mean_beta.assign(H, 0.0);
  s.num_samples = num_samples;

  for (int it = 0; it < burn_in + num_samples; ++it) {
    sampler.sweep();
    if (it < burn_in) continue;
    const LatentState& st = sampler.state();
    for (int i = 0; i < I; ++i) {
      s.t_marginal(i, st.T[i]) += 1.0;
      s.q_marginal(i, st.Q[i]) += 1.0;
    }
    for (int k = 0; k < K; ++k)
      for (int h = 0; h < H; ++h) {
        auto& acc = s.mean_pi.at(k, h).data();
        const auto& cur = st.pi.at(k, h).data();
        for (std::size_t j = 0; j < cur.size(); ++j) acc[j] += cur[j];
      }
    for (int t = 0; t < C; ++t) s.mean_alpha[t] += st.alpha[t];
    for (int h = 0; h < H; ++h) s.mean_beta[h] += st.beta[h];
  }

  const double inv = 1.0 / num_samples;
  for (double& x : s.t_marginal.data()) x *= inv;
  for (double& x : s.q_marginal.data()) x *= inv;
  for (int k = 0; k < K; ++k)
    for (int h = 0; h < H; ++h)
      for (double& x : s.mean_pi.at(k, h).data()) x *= inv;
  if (model == ModelKind::fixed_idbla) {
    // Averaging a pinned slice only reintroduces rounding; keep it exact.
    auto [easy, hard] = fixed_pi_matrices(hyper.nu, hyper.delta, C);
    for (int k = 0; k < K; ++k) {
      s.mean_pi.at(k, H - 2) = easy;
      s.mean_pi.at(k, H - 1) = hard;
    }
  }
  for (double& x : s.mean_alpha) x *= inv;
  for (double& x : s.mean_beta) x *= inv;

  s.t_hat.resize(I);
  s.q_hat.resize(I);
  for (int i = 0; i < I; ++i) {
    s.t_hat[i] = argmax_smallest_index(s.t_marginal.row(i));
    s.q_hat[i] = argmax_smallest_index(s.q_marginal.row(i));
  }
  return s;
}

PosteriorSummary merge_summaries(const std::vector<PosteriorSummary>& chains) {
  if (chains.empty()) throw std::invalid_argument("merge_summaries: no chains");
  PosteriorSummary merged = chains[0];
  const double w = 1.0 / chains.size();
  auto scale_into = [w](std::vector<double>& acc, const std::vector<double>& add, bool first) {
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] = (first ? 0.0 : acc[j]) + w * add[j];
  };
  merged.num_samples = 0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const PosteriorSummary& chain = chains[c];
    if (chain.t_marginal.rows() != merged.t_marginal.rows() ||
        chain.t_marginal.cols() != merged.t_marginal.cols() ||
        chain.q_marginal.cols() != merged.q_marginal.cols())
      throw std::invalid_argument("merge_summaries: chain shapes differ");
    scale_into(merged.t_marginal.data(), chain.t_marginal.data(), c == 0);
    scale_into(merged.q_marginal.data(), chain.q_marginal.data(), c == 0);
    for (int k = 0; k < merged.mean_pi.num_workers(); ++k)
      for (int h = 0; h < merged.mean_pi.num_levels(); ++h)
        scale_into(merged.mean_pi.at(k, h).data(), chain.mean_pi.at(k, h).data(), c == 0);
    scale_into(merged.mean_alpha, chain.mean_alpha, c == 0);
    scale_into(merged.mean_beta, chain.mean_beta, c == 0);
    merged.num_samples += chain.num_samples;
  }
  for (int i = 0; i < merged.t_marginal.rows(); ++i) {
    merged.t_hat[i] = argmax_smallest_index(merged.t_marginal.row(i));
    merged.q_hat[i] = argmax_smallest_index(merged.q_marginal.row(i));
  }
  return merged;
}

}  // namespace idbla
