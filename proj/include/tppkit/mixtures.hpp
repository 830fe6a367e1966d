#pragma once

#include <cmath>
#include <random>

#include "tppkit/decoders.hpp"
#include "tppkit/errors.hpp"
#include "tppkit/linalg.hpp"
#include "tppkit/params.hpp"
#include "tppkit/rng.hpp"

namespace tpp::dec {

enum class MixtureFamily { kGaussian, kLogNormal, kGompertz, kWeibull };

inline MixtureFamily family_of(DecoderKind k) {
  switch (k) {
    case DecoderKind::kGauss: return MixtureFamily::kGaussian;
    case DecoderKind::kLogNorm: return MixtureFamily::kLogNormal;
    case DecoderKind::kGompertz: return MixtureFamily::kGompertz;
    case DecoderKind::kWeibull: return MixtureFamily::kWeibull;
    default: throw ConfigError("decoder is not a mixture family");
  }
}

// exp(x) * E1(x) for x > 0, stable for large x via the asymptotic series
// (1/x) sum_n (-1)^n n! / x^n truncated where the terms still decrease.
inline double expx_e1(double x) {
  if (x <= 0.0) throw DomainError("expx_e1 requires x > 0");
  if (x <= 40.0) return std::exp(x) * (-std::expint(-x));
  const double y = 1.0 / x;
  double s = -362880.0;
  for (double c : {40320.0, -5040.0, 720.0, -120.0, 24.0, -6.0, 2.0, -1.0, 1.0}) s = s * y + c;
  return y * s;
}

template <class S>
struct MixtureHead {
  MixtureFamily family = MixtureFamily::kGaussian;
  Mat<S> wlogit, wloc, wscale;  // C x D
  Vec<S> blogit, bloc, bscale;  // C
};

inline void register_mixture_params(const DecoderConfig& cfg, ParamStore& ps, Rng& rng) {
  const int C = cfg.mixture_components, D = cfg.embed_dim;
  if (C < 1) throw ConfigError("mixture needs at least 1 component");
  ps.add_linear("dec.mix.wlogit", C, D, rng);
  ps.add_bias("dec.mix.blogit", C);
  ps.add_linear("dec.mix.wloc", C, D, rng);
  ps.add_bias("dec.mix.bloc", C);
  ps.add_linear("dec.mix.wscale", C, D, rng);
  ps.add_bias("dec.mix.bscale", C);
}

template <class S>
MixtureHead<S> bind_mixture(Binder<S>& b, MixtureFamily family) {
  MixtureHead<S> m;
  m.family = family;
  m.wlogit = b.mat("dec.mix.wlogit");
  m.blogit = b.mat("dec.mix.blogit");
  m.wloc = b.mat("dec.mix.wloc");
  m.bloc = b.mat("dec.mix.bloc");
  m.wscale = b.mat("dec.mix.wscale");
  m.bscale = b.mat("dec.mix.bscale");
  return m;
}

// Component parameters conditioned on h. `loc` is the raw location for
// Gaussian/LogNormal (mu) and a positive rate/scale for Gompertz (lambda) and
// Weibull (lambda); `scale` is always positive (sigma, Gompertz shape w,
// Weibull shape respectively).
template <class S>
struct MixtureParams {
  Vec<S> weights, loc, scale;
};

template <class S>
MixtureParams<S> mixture_params(const MixtureHead<S>& m, const Vec<S>& h) {
  MixtureParams<S> p;
  p.weights = softmax<S>(m.wlogit * h + m.blogit);
  p.loc = m.wloc * h + m.bloc;
  p.scale = m.wscale * h + m.bscale;
  const bool positive_loc =
      m.family == MixtureFamily::kGompertz || m.family == MixtureFamily::kWeibull;
  for (Eigen::Index c = 0; c < p.loc.size(); ++c) {
    if (positive_loc) p.loc(c) = softplus(p.loc(c)) + 1e-4;
    p.scale(c) = softplus(p.scale(c)) + 1e-4;
  }
  return p;
}

// Component log-density at raw interval tau. Positive-support families clamp
// tau to the floor to keep log(tau) finite; the Gaussian evaluates exactly.
template <class S>
S mixture_log_pdf(MixtureFamily family, const S& loc, const S& scale, double tau) {
  using std::exp;
  using std::log;
  if (family != MixtureFamily::kGaussian) tau = std::max(tau, kTauFloor);
  switch (family) {
    case MixtureFamily::kGaussian: {
      S d = (S(tau) - loc) / scale;
      return S(-0.5 * kLog2Pi) - log(scale) - d * d * 0.5;
    }
    case MixtureFamily::kLogNormal: {
      S d = (S(std::log(tau)) - loc) / scale;
      return S(-0.5 * kLog2Pi - std::log(tau)) - log(scale) - d * d * 0.5;
    }
    case MixtureFamily::kGompertz:
      // lambda exp(w tau) exp(-(lambda/w)(exp(w tau) - 1)), normalized on
      // tau >= 0.
      return log(loc) + scale * tau - loc / scale * (exp(scale * tau) - S(1.0));
    case MixtureFamily::kWeibull: {
      S lt = S(std::log(tau));
      S llam = log(loc);
      S p = exp((lt - llam) * scale);
      return log(scale) - llam + (scale - S(1.0)) * (lt - llam) - p;
    }
  }
  throw ConfigError("unknown mixture family");
}

template <class S>
S mixture_nll(const MixtureParams<S>& p, MixtureFamily family, double tau) {
  using std::log;
  Vec<S> terms(p.weights.size());
  for (Eigen::Index c = 0; c < terms.size(); ++c)
    terms(c) = log(p.weights(c)) + mixture_log_pdf(family, p.loc(c), p.scale(c), tau);
  return S(0.0) - logsumexp<S>(terms);
}

inline double mixture_mean(const MixtureParams<double>& p, MixtureFamily family) {
  double mean = 0.0;
  for (Eigen::Index c = 0; c < p.weights.size(); ++c) {
    double m = 0.0;
    switch (family) {
      case MixtureFamily::kGaussian: m = p.loc(c); break;
      case MixtureFamily::kLogNormal:
        m = std::exp(p.loc(c) + 0.5 * p.scale(c) * p.scale(c));
        break;
      case MixtureFamily::kGompertz:
        // E[tau] = (1/w) exp(lambda/w) E1(lambda/w)
        m = expx_e1(p.loc(c) / p.scale(c)) / p.scale(c);
        break;
      case MixtureFamily::kWeibull: m = p.loc(c) * std::tgamma(1.0 + 1.0 / p.scale(c)); break;
    }
    mean += p.weights(c) * m;
  }
  return mean;
}

// Inverse-CDF draw from one component.
inline double mixture_component_draw(MixtureFamily family, double loc, double scale, Rng& rng) {
  std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (family) {
    case MixtureFamily::kGaussian: return loc + scale * normal(rng);
    case MixtureFamily::kLogNormal: return std::exp(loc + scale * normal(rng));
    case MixtureFamily::kGompertz: {
      const double u = unif(rng);
      return std::log1p(-scale / loc * std::log1p(-u)) / scale;
    }
    case MixtureFamily::kWeibull: {
      const double u = unif(rng);
      return loc * std::pow(-std::log1p(-u), 1.0 / scale);
    }
  }
  throw ConfigError("unknown mixture family");
}

inline VecD mixture_sample(const MixtureParams<double>& p, MixtureFamily family, int count,
                           Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  VecD out(count);
  for (int i = 0; i < count; ++i) {
    const double u = unif(rng);
    double acc = 0.0;
    Eigen::Index c = 0;
    for (; c < p.weights.size(); ++c) {
      acc += p.weights(c);
      if (u <= acc) break;
    }
    if (c == p.weights.size()) c = p.weights.size() - 1;
    out(i) = std::max(mixture_component_draw(family, p.loc(c), p.scale(c), rng), kTauFloor);
  }
  return out;
}

}  // namespace tpp::dec
