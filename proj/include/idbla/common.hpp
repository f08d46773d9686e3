#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace idbla {

using Rng = std::mt19937_64;

// Row-major dense matrix of doubles. Rows are the unit of access everywhere
// (probability rows, per-item marginals), so only row views are exposed.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative shape");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::span<double> row(int r) { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int r) const { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// exp-normalizes log weights in place.
inline void softmax_in_place(std::span<double> logw) {
  double lse = log_sum_exp(logw);
  for (double& x : logw) x = std::exp(x - lse);
}

inline void normalize_in_place(std::span<double> w) {
  double s = 0.0;
  for (double x : w) s += x;
  if (s <= 0.0) throw std::domain_error("normalize_in_place: nonpositive total");
  for (double& x : w) x /= s;
}

inline bool is_probability_vector(std::span<const double> v, double tol = 1e-9) {
  double s = 0.0;
  for (double x : v) {
    if (x < 0.0) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

// Draws an index from a normalized probability vector.
inline int draw_discrete(std::span<const double> probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  int last = 0;
  for (int c = 0; c < static_cast<int>(probs.size()); ++c) {
    acc += probs[c];
    last = c;
    if (u < acc) return c;
  }
  return last;  // u landed in rounding slack
}

// Dirichlet draw via normalized per-coordinate Gamma variates.
inline std::vector<double> draw_dirichlet(std::span<const double> concentration, Rng& rng) {
  std::vector<double> out(concentration.size());
  double total = 0.0;
  for (std::size_t c = 0; c < concentration.size(); ++c) {
    if (concentration[c] <= 0.0) throw std::invalid_argument("draw_dirichlet: concentration must be positive");
    std::gamma_distribution<double> gamma(concentration[c], 1.0);
    out[c] = gamma(rng);
    total += out[c];
  }
  if (total <= 0.0) {
    // All gamma draws underflowed; fall back to the argmax of the concentration.
    std::size_t best = 0;
    for (std::size_t c = 1; c < out.size(); ++c)
      if (concentration[c] > concentration[best]) best = c;
    std::fill(out.begin(), out.end(), 0.0);
    out[best] = 1.0;
    return out;
  }
  for (double& x : out) x /= total;
  return out;
}

inline int argmax_smallest_index(std::span<const double> v) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(v.size()); ++c)
    if (v[c] > v[best]) best = c;
  return best;
}

// Raised by ingestion and CLI file handling; maps to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace idbla
