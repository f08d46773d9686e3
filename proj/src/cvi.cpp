#include "idbla/cvi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace idbla {

namespace {

void check_state_shape(const VariationalState& state, int num_items, int num_classes, int num_levels) {
  if (static_cast<int>(state.lambda.rows()) != num_items ||
      static_cast<int>(state.lambda.cols()) != num_classes ||
      static_cast<int>(state.rho.rows()) != num_items ||
      static_cast<int>(state.rho.cols()) != num_levels) {
    throw std::invalid_argument("variational state shape does not match the label set");
  }
  for (int i = 0; i < num_items; ++i) {
    if (!is_probability_vector(state.lambda.row(i)) || !is_probability_vector(state.rho.row(i))) {
      throw std::invalid_argument("variational state row " + std::to_string(i) +
                                  " is not a probability vector");
    }
  }
}

void check_query(const LabelSet& labels, int i, int h, int t, int num_levels) {
  if (i < 0 || i >= labels.num_items()) throw std::invalid_argument("item index out of range");
  if (h < 0 || h >= num_levels) throw std::invalid_argument("level index out of range");
  if (t < 0 || t >= labels.num_classes()) throw std::invalid_argument("class index out of range");
}

int label_given(const LabelSet& labels, int k, int i) {
  for (const Observation& obs : labels.labels_of_worker(k)) {
    if (obs.index == i) return obs.label;
  }
  return -1;
}

}  // namespace

ExpectedCounts count_moments(const LabelSet& labels, int i, int k, int h, int t, UpdateKind kind,
                             const Matrix& lambda, const Matrix& rho) {
  check_query(labels, i, h, t, static_cast<int>(rho.cols()));
  if (k < 0 || k >= labels.num_workers()) throw std::invalid_argument("worker index out of range");
  const int own_label = label_given(labels, k, i);
  if (own_label < 0) {
    throw std::invalid_argument("count_moments: worker " + std::to_string(k) +
                                " did not label item " + std::to_string(i));
  }

  ExpectedCounts out;
  for (int j = 0; j < labels.num_items(); ++j) {
    if (j == i) continue;
    out.level_count.mean += rho(j, h);
    out.level_count.variance += rho(j, h) * (1.0 - rho(j, h));
    out.class_count.mean += lambda(j, t);
    out.class_count.variance += lambda(j, t) * (1.0 - lambda(j, t));
  }

  for (const Observation& obs : labels.labels_of_worker(k)) {
    const int j = obs.index;
    if (j == i) continue;
    double w = 0.0;
    if (kind == UpdateKind::rho) {
      // P(T_j = T_i, Q_j = h) with T_i ~ lambda_i
      double dot = 0.0;
      for (int c = 0; c < labels.num_classes(); ++c) dot += lambda(j, c) * lambda(i, c);
      w = dot * rho(j, h);
    } else {
      // P(Q_j = Q_i, T_j = t) with Q_i ~ rho_i
      double dot = 0.0;
      for (int l = 0; l < static_cast<int>(rho.cols()); ++l) dot += rho(j, l) * rho(i, l);
      w = dot * lambda(j, t);
    }
    out.label_row.mean += w;
    out.label_row.variance += w * (1.0 - w);
    if (obs.label == own_label) {
      out.label_match.mean += w;
      out.label_match.variance += w * (1.0 - w);
    }
  }
  return out;
}

double collapsed_joint(const LabelSet& labels, const std::vector<int>& T, const std::vector<int>& Q,
                       const Hyperparams& hyper) {
  hyper.validate(ModelKind::idbla);
  const int I = labels.num_items();
  const int C = labels.num_classes();
  const int K = labels.num_workers();
  const int H = hyper.num_levels;
  if (static_cast<int>(T.size()) != I || static_cast<int>(Q.size()) != I) {
    throw std::invalid_argument("assignment length does not match the label set");
  }
  for (int i = 0; i < I; ++i) {
    if (T[i] < 0 || T[i] >= C || Q[i] < 0 || Q[i] >= H) {
      throw std::invalid_argument("assignment entry out of range at item " + std::to_string(i));
    }
  }

  const CountCache counts = CountCache::build(labels, T, Q, H);
  double log_p = -std::lgamma(I + C * hyper.gamma_alpha) - std::lgamma(I + H * hyper.gamma_beta);
  for (int c = 0; c < C; ++c) log_p += std::lgamma(counts.n_t[c] + hyper.gamma_alpha);
  for (int h = 0; h < H; ++h) log_p += std::lgamma(counts.n_q[h] + hyper.gamma_beta);
  for (int k = 0; k < K; ++k) {
    for (int h = 0; h < H; ++h) {
      const Matrix& slice = counts.n_l.at(k, h);
      for (int t = 0; t < C; ++t) {
        double row_total = 0.0;
        for (int c = 0; c < C; ++c) {
          row_total += slice(t, c);
          log_p += std::lgamma(slice(t, c) + hyper.omega);
        }
        log_p -= std::lgamma(row_total + C * hyper.omega);
      }
    }
  }
  return log_p;
}

namespace {

// Shared tail of the two conditionals: the label-count ratio product around
// item i at a fixed (level, class) pair, with i's contribution removed.
double label_ratio_product(const LabelSet& labels, const CountCache& counts, int i, int h, int t,
                           double omega) {
  double product = 1.0;
  const int C = labels.num_classes();
  for (const Observation& obs : labels.labels_of_item(i)) {
    const Matrix& slice = counts.n_l.at(obs.index, h);
    double row_total = 0.0;
    for (int c = 0; c < C; ++c) row_total += slice(t, c);
    product *= (slice(t, obs.label) + omega) / (row_total + C * omega);
  }
  return product;
}

}  // namespace

double collapsed_conditional_T(int i, int t, const LabelSet& labels, const std::vector<int>& T,
                               const std::vector<int>& Q, const Hyperparams& hyper) {
  hyper.validate(ModelKind::idbla);
  if (static_cast<int>(T.size()) != labels.num_items() || T.size() != Q.size()) {
    throw std::invalid_argument("assignment length does not match the label set");
  }
  if (i < 0 || i >= labels.num_items()) throw std::invalid_argument("item index out of range");
  check_query(labels, i, Q[i], t, hyper.num_levels);
  CountCache counts = CountCache::build(labels, T, Q, hyper.num_levels);
  counts.remove_item(labels, i, T[i], Q[i]);
  return (counts.n_t[t] + hyper.gamma_alpha) * label_ratio_product(labels, counts, i, Q[i], t, hyper.omega);
}

double collapsed_conditional_Q(int i, int h, const LabelSet& labels, const std::vector<int>& T,
                               const std::vector<int>& Q, const Hyperparams& hyper) {
  hyper.validate(ModelKind::idbla);
  if (static_cast<int>(T.size()) != labels.num_items() || T.size() != Q.size()) {
    throw std::invalid_argument("assignment length does not match the label set");
  }
  if (i < 0 || i >= labels.num_items()) throw std::invalid_argument("item index out of range");
  check_query(labels, i, h, T[i], hyper.num_levels);
  CountCache counts = CountCache::build(labels, T, Q, hyper.num_levels);
  counts.remove_item(labels, i, T[i], Q[i]);
  return (counts.n_q[h] + hyper.gamma_beta) * label_ratio_product(labels, counts, i, h, T[i], hyper.omega);
}

double gaussian_log_expectation(double mean, double variance, double offset) {
  const double shifted = mean + offset;
  if (!(shifted > 0.0)) {
    throw std::domain_error("gaussian_log_expectation: mean + offset must be positive");
  }
  if (variance < 0.0) {
    throw std::domain_error("gaussian_log_expectation: variance must be nonnegative");
  }
  return std::log(shifted) - variance / (2.0 * shifted * shifted);
}

std::vector<double> update_rho_row(int i, const Matrix& lambda, const Matrix& rho, const LabelSet& labels,
                                   const Hyperparams& hyper) {
  const int I = labels.num_items();
  const int C = labels.num_classes();
  const int H = hyper.num_levels;
  if (i < 0 || i >= I) throw std::invalid_argument("item index out of range");
  if (H == 1) return {1.0};

  std::vector<double> logw(H, 0.0);
  {
    std::vector<double> mean(H, 0.0), var(H, 0.0);
    for (int j = 0; j < I; ++j) {
      if (j == i) continue;
      for (int h = 0; h < H; ++h) {
        mean[h] += rho(j, h);
        var[h] += rho(j, h) * (1.0 - rho(j, h));
      }
    }
    for (int h = 0; h < H; ++h) logw[h] = gaussian_log_expectation(mean[h], var[h], hyper.gamma_beta);
  }

  std::vector<double> match_mean(H), match_var(H), row_mean(H), row_var(H);
  for (const Observation& own : labels.labels_of_item(i)) {
    const int k = own.index;
    std::fill(match_mean.begin(), match_mean.end(), 0.0);
    std::fill(match_var.begin(), match_var.end(), 0.0);
    std::fill(row_mean.begin(), row_mean.end(), 0.0);
    std::fill(row_var.begin(), row_var.end(), 0.0);
    for (const Observation& obs : labels.labels_of_worker(k)) {
      const int j = obs.index;
      if (j == i) continue;
      double dot = 0.0;
      for (int c = 0; c < C; ++c) dot += lambda(j, c) * lambda(i, c);
      for (int h = 0; h < H; ++h) {
        const double w = dot * rho(j, h);
        row_mean[h] += w;
        row_var[h] += w * (1.0 - w);
        if (obs.label == own.label) {
          match_mean[h] += w;
          match_var[h] += w * (1.0 - w);
        }
      }
    }
    for (int h = 0; h < H; ++h) {
      logw[h] += gaussian_log_expectation(match_mean[h], match_var[h], hyper.omega);
      logw[h] -= gaussian_log_expectation(row_mean[h], row_var[h], C * hyper.omega);
    }
  }

  softmax_in_place(logw);
  return logw;
}

std::vector<double> update_lambda_row(int i, const Matrix& lambda, const Matrix& rho,
                                      const LabelSet& labels, const Hyperparams& hyper) {
  const int I = labels.num_items();
  const int C = labels.num_classes();
  const int H = hyper.num_levels;
  if (i < 0 || i >= I) throw std::invalid_argument("item index out of range");
  if (C == 1) return {1.0};

  std::vector<double> logw(C, 0.0);
  {
    std::vector<double> mean(C, 0.0), var(C, 0.0);
    for (int j = 0; j < I; ++j) {
      if (j == i) continue;
      for (int t = 0; t < C; ++t) {
        mean[t] += lambda(j, t);
        var[t] += lambda(j, t) * (1.0 - lambda(j, t));
      }
    }
    for (int t = 0; t < C; ++t) logw[t] = gaussian_log_expectation(mean[t], var[t], hyper.gamma_alpha);
  }

  std::vector<double> match_mean(C), match_var(C), row_mean(C), row_var(C);
  for (const Observation& own : labels.labels_of_item(i)) {
    const int k = own.index;
    std::fill(match_mean.begin(), match_mean.end(), 0.0);
    std::fill(match_var.begin(), match_var.end(), 0.0);
    std::fill(row_mean.begin(), row_mean.end(), 0.0);
    std::fill(row_var.begin(), row_var.end(), 0.0);
    for (const Observation& obs : labels.labels_of_worker(k)) {
      const int j = obs.index;
      if (j == i) continue;
      double dot = 0.0;
      for (int h = 0; h < H; ++h) dot += rho(j, h) * rho(i, h);
      for (int t = 0; t < C; ++t) {
        const double w = dot * lambda(j, t);
        row_mean[t] += w;
        row_var[t] += w * (1.0 - w);
        if (obs.label == own.label) {
          match_mean[t] += w;
          match_var[t] += w * (1.0 - w);
        }
      }
    }
    for (int t = 0; t < C; ++t) {
      logw[t] += gaussian_log_expectation(match_mean[t], match_var[t], hyper.omega);
      logw[t] -= gaussian_log_expectation(row_mean[t], row_var[t], C * hyper.omega);
    }
  }

  softmax_in_place(logw);
  return logw;
}

CviResult run_cvi(const LabelSet& labels, const InitResult& init, const Hyperparams& hyper,
                  const CviOptions& options) {
  hyper.validate(ModelKind::idbla);
  if (options.max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  if (options.tol < 0.0) throw std::invalid_argument("tol must be nonnegative");
  const int I = labels.num_items();
  const int C = labels.num_classes();
  const int H = hyper.num_levels;

  CviResult result;
  if (options.warm_start != nullptr) {
    check_state_shape(*options.warm_start, I, C, H);
    result.state = *options.warm_start;
  } else {
    if (static_cast<int>(init.hard_labels.size()) != I || static_cast<int>(init.levels.size()) != I) {
      throw std::invalid_argument("init assignment length does not match the label set");
    }
    result.state.lambda = Matrix(I, C, 0.1 / C);
    result.state.rho = Matrix(I, H, 0.1 / H);
    for (int i = 0; i < I; ++i) {
      const int t0 = init.hard_labels[i];
      const int h0 = init.levels[i];
      if (t0 < 0 || t0 >= C || h0 < 0 || h0 >= H) {
        throw std::invalid_argument("init assignment out of range at item " + std::to_string(i));
      }
      result.state.lambda(i, t0) += 0.9;
      result.state.rho(i, h0) += 0.9;
    }
  }

  Matrix& lambda = result.state.lambda;
  Matrix& rho = result.state.rho;
  for (int sweep = 0; sweep < options.max_iters; ++sweep) {
    double max_change = 0.0;
    for (int i = 0; i < I; ++i) {
      const std::vector<double> lrow = update_lambda_row(i, lambda, rho, labels, hyper);
      for (int t = 0; t < C; ++t) {
        max_change = std::max(max_change, std::abs(lrow[t] - lambda(i, t)));
        lambda(i, t) = lrow[t];
      }
      const std::vector<double> rrow = update_rho_row(i, lambda, rho, labels, hyper);
      for (int h = 0; h < H; ++h) {
        max_change = std::max(max_change, std::abs(rrow[h] - rho(i, h)));
        rho(i, h) = rrow[h];
      }
    }
    result.max_change_trace.push_back(max_change);
    result.iterations = sweep + 1;
    if (max_change < options.tol) {
      result.converged = true;
      break;
    }
  }

  result.t_hat.resize(I);
  result.q_hat.resize(I);
  for (int i = 0; i < I; ++i) {
    result.t_hat[i] = argmax_smallest_index(lambda.row(i));
    result.q_hat[i] = argmax_smallest_index(rho.row(i));
  }
  return result;
}

}  // namespace idbla
