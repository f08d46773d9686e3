#pragma once

#include <cstdint>
#include <vector>

#include "idbla/common.hpp"
#include "idbla/dataset.hpp"

namespace idbla {

// Preliminary prediction of true labels and item difficulties, used to seed
// the samplers and the variational optimizer. Pipeline: majority vote for the
// labels, per-worker correct rates, a logistic item-difficulty fit, and a
// quantile split of the fitted difficulties into levels.
struct InitResult {
  std::vector<int> hard_labels;       // T0, 0-based classes
  std::vector<double> correct_rates;  // R_k in [0,1]
  std::vector<double> abilities;      // ability_scale * R_k
  std::vector<double> epsilons;       // >= 0; difficulty is 1/epsilon
  std::vector<int> levels;            // Q0, 0-based in {0..H-1}; level H-1 hardest
  std::vector<std::uint8_t> fit_converged;  // per item
};

struct DifficultyFitOptions {
  double learning_rate = 0.1;
  int max_iters = 500;
  double epsilon_max = 1e3;
  // Gradients below this stop the ascent. The accept test compares objective
  // values, whose rounding noise floors the reachable gradient near 1e-8.
  double gradient_tol = 1e-7;
};

// Agreement rate of each worker with the hard labels; 1/C for workers with no
// labels.
std::vector<double> worker_correct_rates(const LabelSet& labels, const std::vector<int>& hard_labels);

// Probability that a worker of the given ability labels an item of the given
// easiness correctly: 1 / (1 + (C-1) exp(-ability * epsilon)). Ranges from 1/C
// (epsilon = 0, arbitrary guess) toward 1 as epsilon grows.
double label_correct_prob(double ability, double epsilon, int num_classes);

struct ValueGrad {
  double value;
  double gradient;
};

// Per-item log likelihood of the observed labels and its derivative in
// epsilon. Wrong labels share the complement mass uniformly.
ValueGrad difficulty_objective(const LabelSet& labels, int item, const std::vector<int>& hard_labels,
                               const std::vector<double>& abilities, double epsilon);

struct DifficultyFit {
  std::vector<double> epsilons;
  std::vector<std::uint8_t> converged;
};

// Independent 1-D maximizations of the per-item objective over [0, epsilon_max],
// projected gradient ascent with backtracking. The objective is concave in
// epsilon, so a boundary with nonnegative inward slope is the exact maximizer.
DifficultyFit fit_difficulties(const LabelSet& labels, const std::vector<int>& hard_labels,
                               const std::vector<double>& abilities,
                               const DifficultyFitOptions& options = {});

// Equal-frequency split of items by difficulty 1/epsilon into num_levels
// groups; level 0 easiest, level num_levels-1 most difficult. Group sizes
// differ by at most one; ties broken by item index.
std::vector<int> assign_levels(const std::vector<double>& epsilons, int num_levels);

// Full preliminary-prediction pipeline. The seed feeds the majority-vote
// tie-break only.
InitResult glad_init(const LabelSet& labels, int num_levels, double ability_scale, std::uint64_t seed,
                     const DifficultyFitOptions& options = {});

// Uniform-random labels and levels; the ablation baseline.
InitResult random_init(const LabelSet& labels, int num_levels, std::uint64_t seed);

}  // namespace idbla
