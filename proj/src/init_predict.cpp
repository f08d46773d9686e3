#include "idbla/init_predict.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "idbla/baselines.hpp"

namespace idbla {

std::vector<double> worker_correct_rates(const LabelSet& labels, const std::vector<int>& hard_labels) {
  const int K = labels.num_workers();
  std::vector<double> rates(K, 1.0 / labels.num_classes());
  for (int k = 0; k < K; ++k) {
    const auto& obs = labels.labels_of_worker(k);
    if (obs.empty()) continue;
    int agree = 0;
    for (const Observation& o : obs)
      if (o.label == hard_labels[o.index]) ++agree;
    rates[k] = static_cast<double>(agree) / obs.size();
  }
  return rates;
}

double label_correct_prob(double ability, double epsilon, int num_classes) {
  return 1.0 / (1.0 + (num_classes - 1) * std::exp(-ability * epsilon));
}

ValueGrad difficulty_objective(const LabelSet& labels, int item, const std::vector<int>& hard_labels,
                               const std::vector<double>& abilities, double epsilon) {
  const int C = labels.num_classes();
  double value = 0.0, grad = 0.0;
  for (const Observation& o : labels.labels_of_item(item)) {
    const double a = abilities[o.index];
    const double p = label_correct_prob(a, epsilon, C);
    if (o.label == hard_labels[item]) {
      value += std::log(p);
      grad += a * (1.0 - p);
    } else {
      value += std::log((1.0 - p) / (C - 1));
      grad -= a * p;
    }
  }
  return {value, grad};
}

DifficultyFit fit_difficulties(const LabelSet& labels, const std::vector<int>& hard_labels,
                               const std::vector<double>& abilities, const DifficultyFitOptions& options) {
  const int I = labels.num_items();
  DifficultyFit fit;
  fit.epsilons.assign(I, 0.0);
  fit.converged.assign(I, 0);
  for (int i = 0; i < I; ++i) {
    // Concave objective: a boundary with the gradient pointing outward is the
    // exact maximizer, no iteration needed.
    if (difficulty_objective(labels, i, hard_labels, abilities, 0.0).gradient <= 0.0) {
      fit.epsilons[i] = 0.0;
      fit.converged[i] = 1;
      continue;
    }
    if (difficulty_objective(labels, i, hard_labels, abilities, options.epsilon_max).gradient >= 0.0) {
      fit.epsilons[i] = options.epsilon_max;
      fit.converged[i] = 1;
      continue;
    }
    double eps = 1.0;
    double lr = options.learning_rate;
    ValueGrad cur = difficulty_objective(labels, i, hard_labels, abilities, eps);
    for (int iter = 0; iter < options.max_iters; ++iter) {
      if (std::abs(cur.gradient) < options.gradient_tol) {
        fit.converged[i] = 1;
        break;
      }
      double next = std::clamp(eps + lr * cur.gradient, 0.0, options.epsilon_max);
      ValueGrad cand = difficulty_objective(labels, i, hard_labels, abilities, next);
      if (cand.value >= cur.value) {
        eps = next;
        cur = cand;
        lr *= 1.5;
      } else {
        lr *= 0.5;
        if (lr < 1e-12) {
          fit.converged[i] = 1;
          break;
        }
      }
    }
    fit.epsilons[i] = eps;
  }
  return fit;
}

std::vector<int> assign_levels(const std::vector<double>& epsilons, int num_levels) {
  const int I = static_cast<int>(epsilons.size());
  if (num_levels < 1) throw DataError("assign_levels: need at least one level");
  if (num_levels > I) throw DataError("assign_levels: more levels than items");
  // Sort easiest first (largest epsilon); ties by item index keep the split
  // deterministic.
  std::vector<int> order(I);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return epsilons[a] > epsilons[b]; });
  // First I mod H groups get the extra item.
  std::vector<int> levels(I);
  const int base = I / num_levels, extra = I % num_levels;
  int pos = 0;
  for (int h = 0; h < num_levels; ++h) {
    const int size = base + (h < extra ? 1 : 0);
    for (int j = 0; j < size; ++j) levels[order[pos++]] = h;
  }
  return levels;
}

InitResult glad_init(const LabelSet& labels, int num_levels, double ability_scale, std::uint64_t seed,
                     const DifficultyFitOptions& options) {
  InitResult r;
  r.hard_labels = majority_vote(labels, seed);
  r.correct_rates = worker_correct_rates(labels, r.hard_labels);
  r.abilities.resize(r.correct_rates.size());
  for (std::size_t k = 0; k < r.correct_rates.size(); ++k)
    r.abilities[k] = ability_scale * r.correct_rates[k];
  DifficultyFit fit = fit_difficulties(labels, r.hard_labels, r.abilities, options);
  r.epsilons = std::move(fit.epsilons);
  r.fit_converged = std::move(fit.converged);
  r.levels = assign_levels(r.epsilons, num_levels);
  return r;
}

InitResult random_init(const LabelSet& labels, int num_levels, std::uint64_t seed) {
  Rng rng(seed);
  InitResult r;
  r.hard_labels.resize(labels.num_items());
  r.levels.resize(labels.num_items());
  std::uniform_int_distribution<int> pick_class(0, labels.num_classes() - 1);
  std::uniform_int_distribution<int> pick_level(0, num_levels - 1);
  for (int i = 0; i < labels.num_items(); ++i) r.hard_labels[i] = pick_class(rng);
  for (int i = 0; i < labels.num_items(); ++i) r.levels[i] = pick_level(rng);
  return r;
}

}  // namespace idbla
