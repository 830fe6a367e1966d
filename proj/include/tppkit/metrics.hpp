#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tppkit/autodiff.hpp"
#include "tppkit/errors.hpp"

namespace tpp {

struct MapeResult {
  double value = 0.0;
  int excluded = 0;  // events with zero true value
  int used = 0;
};

// 100 * mean(|pred - truth| / truth), skipping truth == 0 with a counter.
inline MapeResult mape(const VecD& pred, const VecD& truth) {
  if (pred.size() != truth.size()) throw ConfigError("mape: size mismatch");
  if (pred.size() == 0) throw EmptyEval("mape: no events");
  MapeResult r;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (truth(i) == 0.0) {
      ++r.excluded;
      continue;
    }
    acc += std::abs(pred(i) - truth(i)) / std::abs(truth(i));
    ++r.used;
  }
  if (r.used == 0) throw EmptyEval("mape: every event had zero true value");
  r.value = 100.0 * acc / r.used;
  return r;
}

// Empirical CRPS from a sample set: mean |x - t| - (1/(2 S^2)) sum |x_i - x_j|.
// The pairwise term uses the sorted O(S log S) identity.
inline double crps_empirical(VecD samples, double truth) {
  const Eigen::Index S = samples.size();
  if (S < 2) throw ConfigError("crps needs at least 2 samples");
  double first = 0.0;
  for (Eigen::Index i = 0; i < S; ++i) first += std::abs(samples(i) - truth);
  first /= static_cast<double>(S);
  std::sort(samples.data(), samples.data() + S);
  double pair = 0.0;  // sum over i<j of (x_j - x_i), doubled below
  for (Eigen::Index j = 0; j < S; ++j)
    pair += (2.0 * static_cast<double>(j) - static_cast<double>(S) + 1.0) * samples(j);
  return first - pair / (static_cast<double>(S) * static_cast<double>(S));
}

// Fraction of samples at or below t, clipped away from {0, 1} so the
// rescaled-time transform stays finite.
inline double empirical_cdf_clipped(const VecD& samples, double t) {
  const Eigen::Index S = samples.size();
  if (S < 1) throw ConfigError("empirical cdf needs samples");
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < S; ++i)
    if (samples(i) <= t) ++count;
  const double lo = 1.0 / static_cast<double>(S + 1);
  const double hi = static_cast<double>(S) / static_cast<double>(S + 1);
  return std::clamp(static_cast<double>(count) / static_cast<double>(S), lo, hi);
}

struct QqpResult {
  double value = 0.0;
  int n = 0;
  bool insufficient = false;  // fewer than 100 intervals
};

// Mean absolute deviation between empirical quantiles of the rescaled
// interval values and Exp(1) quantiles on the grid q = 0.01 .. 0.99.
inline QqpResult qqp_dev(std::vector<double> lambdas) {
  QqpResult r;
  r.n = static_cast<int>(lambdas.size());
  if (lambdas.empty()) throw EmptyEval("qqp_dev: no intervals");
  r.insufficient = r.n < 100;
  std::sort(lambdas.begin(), lambdas.end());
  double acc = 0.0;
  for (int gi = 1; gi <= 99; ++gi) {
    const double q = gi / 100.0;
    // Linear-interpolation empirical quantile.
    const double pos = q * (r.n - 1);
    const int i0 = static_cast<int>(std::floor(pos));
    const int i1 = std::min(i0 + 1, r.n - 1);
    const double emp = lambdas[i0] + (pos - i0) * (lambdas[i1] - lambdas[i0]);
    acc += std::abs(emp - (-std::log1p(-q)));
  }
  r.value = acc / 99.0;
  return r;
}

// Rescaled interval from a predictive sample set: -ln(1 - F_hat(t)).
inline double rescaled_interval(const VecD& samples, double t) {
  return -std::log1p(-empirical_cdf_clipped(samples, t));
}

// Top-k hit with ties broken toward the lowest mark index. k larger than the
// number of classes counts as a hit (callers flag this separately).
inline bool topk_hit(const VecD& probs, int truth, int k) {
  const int M = static_cast<int>(probs.size());
  if (truth < 0 || truth >= M) throw DomainError("mark out of range");
  if (k < 1) throw ConfigError("top-k needs k >= 1");
  if (k >= M) return true;
  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (probs(a) != probs(b)) return probs(a) > probs(b);
    return a < b;
  });
  for (int i = 0; i < k; ++i)
    if (order[i] == truth) return true;
  return false;
}

}  // namespace tpp
