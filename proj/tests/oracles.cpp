#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace oracle {

double em_log_likelihood(const std::vector<std::vector<int>>& dense, int num_classes,
                         const std::vector<std::vector<std::vector<double>>>& phi,
                         const std::vector<double>& priors) {
  const int I = static_cast<int>(dense.size());
  const int K = static_cast<int>(phi.size());
  double total = 0.0;
  for (int i = 0; i < I; ++i) {
    std::vector<double> logterm(num_classes);
    for (int t = 0; t < num_classes; ++t) {
      double lt = std::log(priors[t]);
      for (int k = 0; k < K; ++k)
        if (dense[i][k] >= 0) lt += std::log(phi[k][t][dense[i][k]]);
      logterm[t] = lt;
    }
    double m = -std::numeric_limits<double>::infinity();
    for (double x : logterm)
      if (x > m) m = x;
    double s = 0.0;
    for (double x : logterm) s += std::exp(x - m);
    total += m + std::log(s);
  }
  return total;
}

EmResult em_reference(const std::vector<std::vector<int>>& dense, int num_classes,
                      const std::vector<int>& init, int iters, double smoothing) {
  const int I = static_cast<int>(dense.size());
  const int K = I > 0 ? static_cast<int>(dense[0].size()) : 0;
  const int C = num_classes;

  EmResult r;
  r.posterior.assign(I, std::vector<double>(C, 0.0));
  for (int i = 0; i < I; ++i) r.posterior[i][init[i]] = 1.0;

  for (int iter = 0; iter < iters; ++iter) {
    // M-step.
    r.phi.assign(K, std::vector<std::vector<double>>(C, std::vector<double>(C, smoothing)));
    for (int i = 0; i < I; ++i)
      for (int k = 0; k < K; ++k)
        if (dense[i][k] >= 0)
          for (int t = 0; t < C; ++t) r.phi[k][t][dense[i][k]] += r.posterior[i][t];
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < C; ++t) {
        double row = 0.0;
        for (int l = 0; l < C; ++l) row += r.phi[k][t][l];
        for (int l = 0; l < C; ++l) r.phi[k][t][l] /= row;
      }
    r.priors.assign(C, 0.0);
    for (int i = 0; i < I; ++i)
      for (int t = 0; t < C; ++t) r.priors[t] += r.posterior[i][t];
    for (int t = 0; t < C; ++t) r.priors[t] /= I;

    double penalty = 0.0;
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < C; ++t)
        for (int l = 0; l < C; ++l) penalty += std::log(r.phi[k][t][l]);
    r.ll_trace.push_back(em_log_likelihood(dense, C, r.phi, r.priors) + smoothing * penalty);

    // E-step.
    for (int i = 0; i < I; ++i) {
      std::vector<double> logw(C);
      for (int t = 0; t < C; ++t) {
        logw[t] = std::log(r.priors[t]);
        for (int k = 0; k < K; ++k)
          if (dense[i][k] >= 0) logw[t] += std::log(r.phi[k][t][dense[i][k]]);
      }
      double m = -std::numeric_limits<double>::infinity();
      for (double x : logw)
        if (x > m) m = x;
      double s = 0.0;
      for (int t = 0; t < C; ++t) s += std::exp(logw[t] - m);
      for (int t = 0; t < C; ++t) r.posterior[i][t] = std::exp(logw[t] - m) / s;
    }
  }
  return r;
}

namespace {

std::vector<double> joint_probs_impl(const std::vector<std::vector<int>>& dense, int num_classes,
                                     int num_levels, double omega, double gamma_alpha,
                                     double gamma_beta, bool fixed, double free_conc,
                                     double easy_offdiag, double hard_offdiag) {
  const int I = static_cast<int>(dense.size());
  const int K = static_cast<int>(dense[0].size());
  const int C = num_classes, H = num_levels;

  long long states_t = 1, states_q = 1;
  for (int i = 0; i < I; ++i) {
    states_t *= C;
    states_q *= H;
  }

  // Pinned confusion values for the fixed variant.
  auto pinned = [&](int h, int t, int c) {
    const double off = (h == H - 2) ? easy_offdiag : hard_offdiag;
    return t == c ? 1.0 - off : off / (C - 1);
  };

  std::vector<int> T(I), Q(I);
  auto decode = [&](long long s, int radix, std::vector<int>& out) {
    for (int i = 0; i < I; ++i) {
      out[i] = static_cast<int>(s % radix);
      s /= radix;
    }
  };

  auto log_weight = [&]() {
    std::vector<double> n_t(C, 0.0), n_q(H, 0.0);
    std::vector<double> n_l(static_cast<std::size_t>(K) * H * C * C, 0.0);
    auto cell = [&](int k, int h, int t, int c) -> double& {
      return n_l[((static_cast<std::size_t>(k) * H + h) * C + t) * C + c];
    };
    for (int i = 0; i < I; ++i) {
      n_t[T[i]] += 1.0;
      n_q[Q[i]] += 1.0;
      for (int k = 0; k < K; ++k)
        if (dense[i][k] >= 0) cell(k, Q[i], T[i], dense[i][k]) += 1.0;
    }
    double lw = 0.0;
    for (int c = 0; c < C; ++c) lw += std::lgamma(n_t[c] + gamma_alpha);
    for (int h = 0; h < H; ++h) lw += std::lgamma(n_q[h] + gamma_beta);
    for (int k = 0; k < K; ++k)
      for (int h = 0; h < H; ++h) {
        const bool pin = fixed && h >= H - 2;
        const double conc = fixed ? free_conc : omega;
        for (int t = 0; t < C; ++t) {
          if (pin) {
            for (int c = 0; c < C; ++c) {
              const double n = cell(k, h, t, c);
              if (n > 0.0) lw += n * std::log(pinned(h, t, c));
            }
          } else {
            double row = 0.0;
            for (int c = 0; c < C; ++c) {
              lw += std::lgamma(cell(k, h, t, c) + conc);
              row += cell(k, h, t, c);
            }
            lw -= std::lgamma(row + C * conc);
          }
        }
      }
    return lw;
  };

  // Two passes: max for stability, then normalized accumulation.
  std::vector<double> logws(states_t * states_q);
  double max_lw = -std::numeric_limits<double>::infinity();
  for (long long st = 0; st < states_t; ++st) {
    decode(st, C, T);
    for (long long sq = 0; sq < states_q; ++sq) {
      decode(sq, H, Q);
      const double lw = log_weight();
      logws[sq * states_t + st] = lw;
      max_lw = std::max(max_lw, lw);
    }
  }
  double total = 0.0;
  for (double& lw : logws) {
    lw = std::exp(lw - max_lw);
    total += lw;
  }
  for (double& lw : logws) lw /= total;
  return logws;
}

}  // namespace

std::vector<double> enumerate_joint_probs(const std::vector<std::vector<int>>& dense, int num_classes,
                                          int num_levels, double omega, double gamma_alpha,
                                          double gamma_beta, bool fixed, double free_conc,
                                          double easy_offdiag, double hard_offdiag) {
  return joint_probs_impl(dense, num_classes, num_levels, omega, gamma_alpha, gamma_beta, fixed,
                          free_conc, easy_offdiag, hard_offdiag);
}

JointMarginals enumerate_joint(const std::vector<std::vector<int>>& dense, int num_classes,
                               int num_levels, double omega, double gamma_alpha, double gamma_beta,
                               bool fixed, double free_conc, double easy_offdiag,
                               double hard_offdiag) {
  const int I = static_cast<int>(dense.size());
  const int C = num_classes, H = num_levels;
  long long states_t = 1, states_q = 1;
  for (int i = 0; i < I; ++i) {
    states_t *= C;
    states_q *= H;
  }
  const std::vector<double> probs = joint_probs_impl(dense, num_classes, num_levels, omega,
                                                     gamma_alpha, gamma_beta, fixed, free_conc,
                                                     easy_offdiag, hard_offdiag);

  JointMarginals m;
  m.t_marginal.assign(I, std::vector<double>(C, 0.0));
  m.q_marginal.assign(I, std::vector<double>(H, 0.0));
  for (long long st = 0; st < states_t; ++st) {
    for (long long sq = 0; sq < states_q; ++sq) {
      const double w = probs[sq * states_t + st];
      long long rt = st, rq = sq;
      for (int i = 0; i < I; ++i) {
        m.t_marginal[i][static_cast<int>(rt % C)] += w;
        m.q_marginal[i][static_cast<int>(rq % H)] += w;
        rt /= C;
        rq /= H;
      }
    }
  }
  return m;
}

std::vector<std::vector<double>> enumerate_confusion_priors(const std::vector<std::vector<int>>& dense,
                                                            int num_classes, double omega,
                                                            double gamma_alpha) {
  const int I = static_cast<int>(dense.size());
  const int K = static_cast<int>(dense[0].size());
  const int C = num_classes;
  long long states = 1;
  for (int i = 0; i < I; ++i) states *= C;

  std::vector<int> T(I);
  std::vector<double> logws(states);
  double max_lw = -std::numeric_limits<double>::infinity();
  for (long long s = 0; s < states; ++s) {
    long long rest = s;
    for (int i = 0; i < I; ++i) {
      T[i] = static_cast<int>(rest % C);
      rest /= C;
    }
    std::vector<double> n_t(C, 0.0);
    std::vector<double> m_l(static_cast<std::size_t>(K) * C * C, 0.0);
    for (int i = 0; i < I; ++i) {
      n_t[T[i]] += 1.0;
      for (int k = 0; k < K; ++k)
        if (dense[i][k] >= 0) m_l[(static_cast<std::size_t>(k) * C + T[i]) * C + dense[i][k]] += 1.0;
    }
    double lw = 0.0;
    for (int c = 0; c < C; ++c) lw += std::lgamma(n_t[c] + gamma_alpha);
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < C; ++t) {
        double row = 0.0;
        for (int c = 0; c < C; ++c) {
          const double n = m_l[(static_cast<std::size_t>(k) * C + t) * C + c];
          lw += std::lgamma(n + omega);
          row += n;
        }
        lw -= std::lgamma(row + C * omega);
      }
    logws[s] = lw;
    max_lw = std::max(max_lw, lw);
  }

  std::vector<std::vector<double>> marginal(I, std::vector<double>(C, 0.0));
  double total = 0.0;
  for (long long s = 0; s < states; ++s) {
    long long rest = s;
    for (int i = 0; i < I; ++i) {
      T[i] = static_cast<int>(rest % C);
      rest /= C;
    }
    const double w = std::exp(logws[s] - max_lw);
    total += w;
    for (int i = 0; i < I; ++i) marginal[i][T[i]] += w;
  }
  for (int i = 0; i < I; ++i)
    for (double& x : marginal[i]) x /= total;
  return marginal;
}

std::vector<double> mc_collapsed_joint(const std::vector<std::vector<int>>& dense, int num_classes,
                                       int num_levels, double omega, double gamma_alpha,
                                       double gamma_beta, int num_samples, unsigned seed) {
  const int I = static_cast<int>(dense.size());
  const int K = static_cast<int>(dense[0].size());
  const int C = num_classes, H = num_levels;

  long long states_t = 1, states_q = 1;
  for (int i = 0; i < I; ++i) {
    states_t *= C;
    states_q *= H;
  }
  const long long assignments = states_t * states_q;

  std::mt19937_64 rng(seed);
  auto draw_simplex = [&](int dim, double conc, std::vector<double>& out) {
    out.resize(dim);
    std::gamma_distribution<double> g(conc, 1.0);
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
      out[d] = g(rng);
      s += out[d];
    }
    for (int d = 0; d < dim; ++d) out[d] /= s;
  };

  std::vector<double> sums(assignments, 0.0);
  std::vector<double> alpha, beta, row;
  std::vector<double> pi(static_cast<std::size_t>(K) * H * C * C);
  std::vector<int> T(I), Q(I);
  for (int s = 0; s < num_samples; ++s) {
    draw_simplex(C, gamma_alpha, alpha);
    draw_simplex(H, gamma_beta, beta);
    for (int k = 0; k < K; ++k)
      for (int h = 0; h < H; ++h)
        for (int t = 0; t < C; ++t) {
          draw_simplex(C, omega, row);
          for (int c = 0; c < C; ++c)
            pi[((static_cast<std::size_t>(k) * H + h) * C + t) * C + c] = row[c];
        }
    for (long long a = 0; a < assignments; ++a) {
      long long rest_t = a % states_t, rest_q = a / states_t;
      for (int i = 0; i < I; ++i) {
        T[i] = static_cast<int>(rest_t % C);
        rest_t /= C;
        Q[i] = static_cast<int>(rest_q % H);
        rest_q /= H;
      }
      double lik = 1.0;
      for (int i = 0; i < I; ++i) {
        lik *= alpha[T[i]] * beta[Q[i]];
        for (int k = 0; k < K; ++k)
          if (dense[i][k] >= 0)
            lik *= pi[((static_cast<std::size_t>(k) * H + Q[i]) * C + T[i]) * C + dense[i][k]];
      }
      sums[a] += lik;
    }
  }
  double total = 0.0;
  for (double x : sums) total += x;
  for (double& x : sums) x /= total;
  return sums;
}

Moments enum_level_count(const std::vector<std::vector<double>>& rho, int i, int h) {
  const int I = static_cast<int>(rho.size());
  const int H = static_cast<int>(rho[0].size());
  std::vector<int> others;
  for (int j = 0; j < I; ++j)
    if (j != i) others.push_back(j);
  long long states = 1;
  for (std::size_t n = 0; n < others.size(); ++n) states *= H;

  double e1 = 0.0, e2 = 0.0;
  for (long long s = 0; s < states; ++s) {
    long long rest = s;
    double w = 1.0;
    int count = 0;
    for (int j : others) {
      const int q = static_cast<int>(rest % H);
      rest /= H;
      w *= rho[j][q];
      if (q == h) ++count;
    }
    e1 += w * count;
    e2 += w * count * count;
  }
  return {e1, e2 - e1 * e1};
}

Moments enum_class_count(const std::vector<std::vector<double>>& lambda, int i, int t) {
  const int I = static_cast<int>(lambda.size());
  const int C = static_cast<int>(lambda[0].size());
  std::vector<int> others;
  for (int j = 0; j < I; ++j)
    if (j != i) others.push_back(j);
  long long states = 1;
  for (std::size_t n = 0; n < others.size(); ++n) states *= C;

  double e1 = 0.0, e2 = 0.0;
  for (long long s = 0; s < states; ++s) {
    long long rest = s;
    double w = 1.0;
    int count = 0;
    for (int j : others) {
      const int c = static_cast<int>(rest % C);
      rest /= C;
      w *= lambda[j][c];
      if (c == t) ++count;
    }
    e1 += w * count;
    e2 += w * count * count;
  }
  return {e1, e2 - e1 * e1};
}

Moments enum_label_count(const std::vector<std::vector<int>>& dense,
                         const std::vector<std::vector<double>>& lambda,
                         const std::vector<std::vector<double>>& rho, int i, int k, int h, int t,
                         bool rho_update, bool match_only) {
  const int I = static_cast<int>(dense.size());
  const int C = static_cast<int>(lambda[0].size());
  const int H = static_cast<int>(rho[0].size());

  Moments out;
  for (int j = 0; j < I; ++j) {
    if (j == i || dense[j][k] < 0) continue;
    if (match_only && dense[j][k] != dense[i][k]) continue;
    // Exact Bernoulli moments for this item's indicator, then summed as if
    // independent across items.
    double mean_j = 0.0;
    if (rho_update) {
      for (int a = 0; a < C; ++a)
        for (int b = 0; b < C; ++b)
          for (int c = 0; c < H; ++c)
            if (b == a && c == h) mean_j += lambda[i][a] * lambda[j][b] * rho[j][c];
    } else {
      for (int a = 0; a < H; ++a)
        for (int b = 0; b < H; ++b)
          for (int c = 0; c < C; ++c)
            if (b == a && c == t) mean_j += rho[i][a] * rho[j][b] * lambda[j][c];
    }
    out.mean += mean_j;
    out.variance += mean_j * (1.0 - mean_j);
  }
  return out;
}

std::vector<double> expected_log_conditional_Q(const std::vector<std::vector<int>>& dense,
                                               const std::vector<std::vector<double>>& lambda,
                                               const std::vector<std::vector<double>>& rho, int i,
                                               double omega, double gamma_beta) {
  const int I = static_cast<int>(dense.size());
  const int K = static_cast<int>(dense[0].size());
  const int C = static_cast<int>(lambda[0].size());
  const int H = static_cast<int>(rho[0].size());

  std::vector<int> others;
  for (int j = 0; j < I; ++j)
    if (j != i) others.push_back(j);
  long long states_t = 1, states_q = 1;
  for (int j = 0; j < I; ++j) states_t *= C;
  for (std::size_t n = 0; n < others.size(); ++n) states_q *= H;

  std::vector<double> expected(H, 0.0);
  std::vector<int> T(I), Q(I, -1);
  for (long long st = 0; st < states_t; ++st) {
    long long rest = st;
    double wt = 1.0;
    for (int j = 0; j < I; ++j) {
      T[j] = static_cast<int>(rest % C);
      rest /= C;
      wt *= lambda[j][T[j]];
    }
    for (long long sq = 0; sq < states_q; ++sq) {
      long long rq = sq;
      double w = wt;
      for (int j : others) {
        Q[j] = static_cast<int>(rq % H);
        rq /= H;
        w *= rho[j][Q[j]];
      }
      if (w == 0.0) continue;
      for (int h = 0; h < H; ++h) {
        // Leave-one-out counts for this configuration.
        double n_q = 0.0;
        for (int j : others)
          if (Q[j] == h) n_q += 1.0;
        double log_p = std::log(n_q + gamma_beta);
        for (int k = 0; k < K; ++k) {
          if (dense[i][k] < 0) continue;
          double n_match = 0.0, n_row = 0.0;
          for (int j : others) {
            if (dense[j][k] < 0 || Q[j] != h || T[j] != T[i]) continue;
            n_row += 1.0;
            if (dense[j][k] == dense[i][k]) n_match += 1.0;
          }
          log_p += std::log(n_match + omega) - std::log(n_row + C * omega);
        }
        expected[h] += w * log_p;
      }
    }
  }
  return expected;
}

std::vector<double> expected_log_conditional_T(const std::vector<std::vector<int>>& dense,
                                               const std::vector<std::vector<double>>& lambda,
                                               const std::vector<std::vector<double>>& rho, int i,
                                               double omega, double gamma_alpha) {
  const int I = static_cast<int>(dense.size());
  const int K = static_cast<int>(dense[0].size());
  const int C = static_cast<int>(lambda[0].size());
  const int H = static_cast<int>(rho[0].size());

  std::vector<int> others;
  for (int j = 0; j < I; ++j)
    if (j != i) others.push_back(j);
  long long states_t = 1, states_q = 1;
  for (std::size_t n = 0; n < others.size(); ++n) states_t *= C;
  for (int j = 0; j < I; ++j) states_q *= H;

  std::vector<double> expected(C, 0.0);
  std::vector<int> T(I, -1), Q(I);
  for (long long sq = 0; sq < states_q; ++sq) {
    long long rest = sq;
    double wq = 1.0;
    for (int j = 0; j < I; ++j) {
      Q[j] = static_cast<int>(rest % H);
      rest /= H;
      wq *= rho[j][Q[j]];
    }
    if (wq == 0.0) continue;
    for (long long st = 0; st < states_t; ++st) {
      long long rt = st;
      double w = wq;
      for (int j : others) {
        T[j] = static_cast<int>(rt % C);
        rt /= C;
        w *= lambda[j][T[j]];
      }
      if (w == 0.0) continue;
      for (int t = 0; t < C; ++t) {
        double n_t = 0.0;
        for (int j : others)
          if (T[j] == t) n_t += 1.0;
        double log_p = std::log(n_t + gamma_alpha);
        for (int k = 0; k < K; ++k) {
          if (dense[i][k] < 0) continue;
          double n_match = 0.0, n_row = 0.0;
          for (int j : others) {
            if (dense[j][k] < 0 || Q[j] != Q[i] || T[j] != t) continue;
            n_row += 1.0;
            if (dense[j][k] == dense[i][k]) n_match += 1.0;
          }
          log_p += std::log(n_match + omega) - std::log(n_row + C * omega);
        }
        expected[t] += w * log_p;
      }
    }
  }
  return expected;
}

double poisson_binomial_log_expectation(const std::vector<double>& probs, double offset) {
  std::vector<double> pmf(1, 1.0);
  for (double p : probs) {
    std::vector<double> next(pmf.size() + 1, 0.0);
    for (std::size_t m = 0; m < pmf.size(); ++m) {
      next[m] += pmf[m] * (1.0 - p);
      next[m + 1] += pmf[m] * p;
    }
    pmf = std::move(next);
  }
  double e = 0.0;
  for (std::size_t m = 0; m < pmf.size(); ++m) e += pmf[m] * std::log(m + offset);
  return e;
}

}  // namespace oracle
