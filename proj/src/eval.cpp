#include "idbla/eval.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "idbla/cvi.hpp"
#include "idbla/init_predict.hpp"

namespace idbla {

double error_rate(const std::vector<int>& predicted, const TruthMap& truth) {
  if (predicted.size() != truth.labels.size()) {
    throw std::invalid_argument("error_rate: prediction and truth cover different item sets");
  }
  if (truth.known == 0) throw DataError("error_rate: ground truth has no known items");
  int wrong = 0, seen = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!truth.has(static_cast<int>(i))) continue;
    if (predicted[i] < 0) {
      throw std::invalid_argument("error_rate: no prediction for item " + std::to_string(i));
    }
    ++seen;
    if (predicted[i] != truth.at(static_cast<int>(i))) ++wrong;
  }
  return static_cast<double>(wrong) / seen;
}

double nll_idbla(const LabelSet& labels, const ConfusionTensor& pi, const std::vector<int>& T,
                 const std::vector<int>& Q) {
  const int I = labels.num_items();
  const int C = labels.num_classes();
  const int H = pi.num_levels();
  if (static_cast<int>(T.size()) != I || static_cast<int>(Q.size()) != I) {
    throw std::invalid_argument("nll_idbla: assignment length does not match the label set");
  }
  if (pi.num_workers() != labels.num_workers()) {
    throw std::invalid_argument("nll_idbla: confusion tensor worker count mismatch");
  }
  for (int i = 0; i < I; ++i) {
    if (T[i] < 0 || T[i] >= C || Q[i] < 0 || Q[i] >= H) {
      throw std::invalid_argument("nll_idbla: assignment out of range at item " + std::to_string(i));
    }
  }

  const CountCache counts = CountCache::build(labels, T, Q, H);
  double nll = 0.0;
  for (int k = 0; k < labels.num_workers(); ++k) {
    for (int h = 0; h < H; ++h) {
      const Matrix& n = counts.n_l.at(k, h);
      const Matrix& p = pi.at(k, h);
      for (int t = 0; t < C; ++t) {
        for (int c = 0; c < C; ++c) {
          if (n(t, c) == 0.0) continue;
          if (!(p(t, c) > 0.0)) {
            throw std::domain_error("nll_idbla: observed cell with zero probability (worker " +
                                    std::to_string(k) + ", level " + std::to_string(h) + ")");
          }
          nll -= n(t, c) * std::log(p(t, c));
        }
      }
    }
  }
  return nll;
}

double nll_confusion(const LabelSet& labels, const std::vector<Matrix>& phi,
                     const std::vector<int>& T) {
  const int I = labels.num_items();
  const int C = labels.num_classes();
  if (static_cast<int>(T.size()) != I) {
    throw std::invalid_argument("nll_confusion: assignment length does not match the label set");
  }
  if (static_cast<int>(phi.size()) != labels.num_workers()) {
    throw std::invalid_argument("nll_confusion: one confusion matrix per worker required");
  }
  for (int i = 0; i < I; ++i) {
    if (T[i] < 0 || T[i] >= C) {
      throw std::invalid_argument("nll_confusion: assignment out of range at item " +
                                  std::to_string(i));
    }
  }

  double nll = 0.0;
  for (int k = 0; k < labels.num_workers(); ++k) {
    Matrix n(C, C);
    for (const Observation& obs : labels.labels_of_worker(k)) n(T[obs.index], obs.label) += 1.0;
    for (int t = 0; t < C; ++t) {
      for (int c = 0; c < C; ++c) {
        if (n(t, c) == 0.0) continue;
        if (!(phi[k](t, c) > 0.0)) {
          throw std::domain_error("nll_confusion: observed cell with zero probability (worker " +
                                  std::to_string(k) + ")");
        }
        nll -= n(t, c) * std::log(phi[k](t, c));
      }
    }
  }
  return nll;
}

ConfusionTensor posterior_mean_confusion(const LabelSet& labels, const std::vector<int>& T,
                                         const std::vector<int>& Q, int num_levels, double omega) {
  if (num_levels < 1) throw std::invalid_argument("posterior_mean_confusion: num_levels < 1");
  if (omega <= 0.0) throw std::invalid_argument("posterior_mean_confusion: omega must be positive");
  const int C = labels.num_classes();
  const CountCache counts = CountCache::build(labels, T, Q, num_levels);
  ConfusionTensor pi(labels.num_workers(), num_levels, C);
  for (int k = 0; k < labels.num_workers(); ++k) {
    for (int h = 0; h < num_levels; ++h) {
      const Matrix& n = counts.n_l.at(k, h);
      Matrix& p = pi.at(k, h);
      for (int t = 0; t < C; ++t) {
        double row = 0.0;
        for (int c = 0; c < C; ++c) row += n(t, c);
        for (int c = 0; c < C; ++c) p(t, c) = (n(t, c) + omega) / (row + C * omega);
      }
    }
  }
  return pi;
}

std::vector<std::optional<double>> difficulty_quality(const LabelSet& labels, const TruthMap& truth,
                                                      const std::vector<int>& q_hat,
                                                      int num_levels) {
  const int I = labels.num_items();
  if (static_cast<int>(q_hat.size()) != I) {
    throw std::invalid_argument("difficulty_quality: level assignment length mismatch");
  }
  if (static_cast<int>(truth.labels.size()) != I) {
    throw std::invalid_argument("difficulty_quality: truth covers a different item set");
  }
  if (num_levels < 1) throw std::invalid_argument("difficulty_quality: num_levels must be positive");

  std::vector<double> sum(num_levels, 0.0);
  std::vector<int> count(num_levels, 0);
  for (int i = 0; i < I; ++i) {
    if (q_hat[i] < 0 || q_hat[i] >= num_levels) {
      throw std::invalid_argument("difficulty_quality: level out of range at item " +
                                  std::to_string(i));
    }
    if (!truth.has(i)) continue;
    const auto& obs = labels.labels_of_item(i);
    if (obs.empty()) continue;
    int wrong = 0;
    for (const Observation& o : obs)
      if (o.label != truth.at(i)) ++wrong;
    sum[q_hat[i]] += static_cast<double>(wrong) / obs.size();
    count[q_hat[i]] += 1;
  }

  std::vector<std::optional<double>> out(num_levels);
  for (int h = 0; h < num_levels; ++h)
    if (count[h] > 0) out[h] = sum[h] / count[h];
  return out;
}

SelectResult select_H(const LabelSet& labels, const std::vector<int>& candidates,
                      SelectMethod method, const Hyperparams& base, int num_samples, int burn_in,
                      std::uint64_t seed, double ability_scale) {
  if (candidates.empty()) throw std::invalid_argument("select_H: no candidate level counts");
  for (int h : candidates) {
    if (h < 1) throw std::invalid_argument("select_H: candidate level counts must be positive");
    if (method == SelectMethod::fixed_idbla && h < 3) {
      throw std::invalid_argument("select_H: the fixed variant needs at least 3 levels");
    }
  }
  SelectResult result;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    Hyperparams hyper = base;
    hyper.num_levels = candidates[j];
    const std::uint64_t run_seed = seed + j;
    const InitResult init = glad_init(labels, hyper.num_levels, ability_scale, run_seed);

    double nll = 0.0;
    if (method == SelectMethod::cvi) {
      hyper.validate(ModelKind::idbla);
      const CviResult fit = run_cvi(labels, init, hyper);
      const ConfusionTensor pi =
          posterior_mean_confusion(labels, fit.t_hat, fit.q_hat, hyper.num_levels, hyper.omega);
      nll = nll_idbla(labels, pi, fit.t_hat, fit.q_hat);
    } else {
      const ModelKind model =
          method == SelectMethod::idbla ? ModelKind::idbla : ModelKind::fixed_idbla;
      const PosteriorSummary summary =
          run_gibbs(model, labels, init, hyper, num_samples, burn_in, run_seed);
      nll = nll_idbla(labels, summary.mean_pi, summary.t_hat, summary.q_hat);
    }
    result.table.push_back({hyper.num_levels, nll});
  }

  result.chosen = result.table.front().num_levels;
  double best = result.table.front().nll;
  for (const SelectRow& row : result.table) {
    if (row.nll < best) {
      best = row.nll;
      result.chosen = row.num_levels;
    }
  }
  return result;
}

}  // namespace idbla
