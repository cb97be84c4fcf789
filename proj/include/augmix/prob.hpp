#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace augmix {

/// Probability vector over K classes: entries >= 0, summing to 1 within 1e-9.
struct Posterior {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
};

inline void validate_posterior(const Posterior& p) {
  if (p.probs.empty()) throw std::invalid_argument("empty posterior");
  double sum = 0.0;
  for (const double v : p.probs) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("posterior entry negative or non-finite");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("posterior does not sum to 1: " +
                                std::to_string(sum));
}

/// Max-shifted softmax: probs_i = exp(l_i - max) / sum_j exp(l_j - max).
inline Posterior softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of empty logits");
  double max_logit = logits[0];
  for (const double l : logits) {
    if (!std::isfinite(l))
      throw std::invalid_argument("softmax logit is not finite");
    max_logit = std::max(max_logit, l);
  }
  Posterior p;
  p.probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p.probs[i] = std::exp(logits[i] - max_logit);
    sum += p.probs[i];
  }
  for (double& v : p.probs) v /= sum;
  return p;
}

/// KL[p || q] = sum_i p_i ln(p_i/q_i), with 0 ln 0 := 0. Errors where the
/// support condition p_i > 0, q_i = 0 is violated.
inline double kl(const Posterior& p, const Posterior& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("KL dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] <= 0.0) continue;
    if (q.probs[i] <= 0.0)
      throw std::domain_error("undefined KL: p has mass where q has none");
    sum += p.probs[i] * std::log(p.probs[i] / q.probs[i]);
  }
  return std::max(sum, 0.0);
}

namespace detail {

// Sum in ascending order so the result is invariant, bit for bit, under any
// permutation of the inputs. n is at most 4 here.
inline double sorted_sum(std::array<double, 4>& values, std::size_t n) {
  std::sort(values.begin(), values.begin() + n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += values[i];
  return sum;
}

}  // namespace detail

/// Jensen-Shannon divergence of 2 to 4 posteriors:
///   M = mean of the inputs, JSD = (1/n) sum_i KL[p_i || M].
/// Natural-log convention, so the value is bounded by min(ln n, ln K).
/// Mixture entries are floored at 1e-12 inside the logarithm only.
inline double jsd(const std::vector<Posterior>& posteriors) {
  const std::size_t n = posteriors.size();
  if (n < 2 || n > 4)
    throw std::invalid_argument("jsd takes 2 to 4 posteriors, got " +
                                std::to_string(n));
  const std::size_t dim = posteriors[0].size();
  bool all_equal = true;
  for (const Posterior& p : posteriors) {
    if (p.size() != dim)
      throw std::invalid_argument("jsd posterior dimension mismatch");
    all_equal = all_equal && p.probs == posteriors[0].probs;
  }
  if (all_equal) return 0.0;  // M == p_i, exact zero

  std::vector<double> mixture(dim);
  std::array<double, 4> scratch{};
  for (std::size_t c = 0; c < dim; ++c) {
    for (std::size_t i = 0; i < n; ++i) scratch[i] = posteriors[i].probs[c];
    mixture[c] = detail::sorted_sum(scratch, n) / static_cast<double>(n);
  }

  std::array<double, 4> divergences{};
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double p = posteriors[i].probs[c];
      if (p <= 0.0) continue;
      sum += p * std::log(p / std::max(mixture[c], 1e-12));
    }
    divergences[i] = std::max(sum, 0.0);
  }
  return detail::sorted_sum(divergences, n) / static_cast<double>(n);
}

/// Decomposed training loss: total = ce + lambda * jsd(views).
struct LossValue {
  double total = 0.0;
  double ce_part = 0.0;
  double jsd_part = 0.0;
  double lambda = 0.0;
};

/// Combine a classification loss with the consistency term. `views` holds
/// the posterior of the clean input first, then the augmented views.
inline LossValue augmix_loss(double ce, const std::vector<Posterior>& views,
                             double lambda) {
  if (ce < 0.0) throw std::invalid_argument("augmix_loss: ce must be >= 0");
  if (lambda < 0.0)
    throw std::invalid_argument("augmix_loss: lambda must be >= 0");
  LossValue loss;
  loss.ce_part = ce;
  loss.jsd_part = jsd(views);
  loss.lambda = lambda;
  loss.total = ce + lambda * loss.jsd_part;
  return loss;
}

}  // namespace augmix
