#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "tppkit/errors.hpp"
#include "tppkit/linalg.hpp"
#include "tppkit/rng.hpp"

namespace tpp::diag {

using CdfFn = std::function<double(double)>;

// Two-sided Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(VecD samples, const CdfFn& cdf) {
  if (samples.size() == 0) throw EmptyEval("ks_statistic: no samples");
  std::sort(samples.data(), samples.data() + samples.size());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples(i));
    d = std::max(d, std::max(f - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - f));
  }
  return d;
}

// Asymptotic two-sided critical value c(alpha)/sqrt(n), c = sqrt(-ln(alpha/2)/2).
inline double ks_threshold(double alpha, Eigen::Index n) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("ks_threshold: alpha must be in (0,1)");
  if (n < 1) throw ConfigError("ks_threshold: n must be positive");
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

struct KsResult {
  double statistic = 0.0;
  double threshold = 0.0;
  Eigen::Index n = 0;
  bool pass = false;
};

inline KsResult ks_test(const VecD& samples, const CdfFn& cdf, double alpha = 0.01) {
  if (samples.size() < 30) throw ConfigError("ks_test needs at least 30 samples");
  KsResult r;
  r.n = samples.size();
  r.statistic = ks_statistic(samples, cdf);
  r.threshold = ks_threshold(alpha, r.n);
  r.pass = r.statistic < r.threshold;
  return r;
}

enum class OracleFamily { kExp, kLogNormal, kGaussian, kMixture };

// Reference distribution used to score sampler output. Plain families use
// loc/scale component 0; kMixture is a weighted sum of Gaussians.
struct OracleSpec {
  OracleFamily family = OracleFamily::kExp;
  VecD weights = VecD::Ones(1);
  VecD loc = VecD::Zero(1);    // rate for kExp, mean otherwise
  VecD scale = VecD::Ones(1);  // unused for kExp

  void validate() const {
    if (loc.size() < 1 || scale.size() != loc.size() || weights.size() != loc.size())
      throw ConfigError("oracle component vectors must be non-empty and equally sized");
    if (family != OracleFamily::kMixture && loc.size() != 1)
      throw ConfigError("non-mixture oracle takes exactly one component");
    for (Eigen::Index i = 0; i < loc.size(); ++i) {
      if (family == OracleFamily::kExp && !(loc(i) > 0.0))
        throw ConfigError("exponential rate must be positive");
      if (family != OracleFamily::kExp && !(scale(i) > 0.0))
        throw ConfigError("scale must be positive");
      if (!(weights(i) > 0.0)) throw ConfigError("mixture weights must be positive");
    }
    if (std::abs(weights.sum() - 1.0) > 1e-12)
      throw ConfigError("mixture weights must sum to 1");
  }

  double cdf(double x) const {
    auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    switch (family) {
      case OracleFamily::kExp: return x <= 0.0 ? 0.0 : 1.0 - std::exp(-loc(0) * x);
      case OracleFamily::kLogNormal:
        return x <= 0.0 ? 0.0 : phi((std::log(x) - loc(0)) / scale(0));
      case OracleFamily::kGaussian: return phi((x - loc(0)) / scale(0));
      case OracleFamily::kMixture: {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < loc.size(); ++i)
          acc += weights(i) * phi((x - loc(i)) / scale(i));
        return acc;
      }
    }
    throw ConfigError("unhandled oracle family");
  }

  VecD sample(int n, Rng& rng) const {
    validate();
    if (n < 1) throw ConfigError("oracle sample count must be positive");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
    VecD out(n);
    for (int i = 0; i < n; ++i) {
      switch (family) {
        case OracleFamily::kExp: out(i) = -std::log1p(-unif(rng)) / loc(0); break;
        case OracleFamily::kLogNormal: out(i) = std::exp(loc(0) + scale(0) * normal(rng)); break;
        case OracleFamily::kGaussian: out(i) = loc(0) + scale(0) * normal(rng); break;
        case OracleFamily::kMixture: {
          const double u = unif(rng);
          double acc = 0.0;
          Eigen::Index c = loc.size() - 1;
          for (Eigen::Index j = 0; j < weights.size(); ++j) {
            acc += weights(j);
            if (u <= acc) {
              c = j;
              break;
            }
          }
          out(i) = loc(c) + scale(c) * normal(rng);
          break;
        }
      }
    }
    return out;
  }
};

struct TimingRow {
  std::string label;
  int epochs = 0;
  double total_seconds = 0.0;
};

// Plain-text per-epoch timing table; informational only, never a gate.
inline std::string timing_report(const std::vector<TimingRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "decoder" << std::right << std::setw(8) << "epochs"
     << std::setw(14) << "total_s" << std::setw(14) << "s_per_epoch" << '\n';
  for (const auto& r : rows) {
    if (r.epochs < 1) throw ConfigError("timing row needs at least one epoch");
    os << std::left << std::setw(16) << r.label << std::right << std::setw(8) << r.epochs
       << std::setw(14) << std::fixed << std::setprecision(3) << r.total_seconds << std::setw(14)
       << r.total_seconds / r.epochs << '\n';
  }
  return os.str();
}

}  // namespace tpp::diag
