#pragma once

#include <cmath>

#include "tppkit/autodiff.hpp"

namespace tpp {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)

template <class S>
S logsumexp(const Vec<S>& v) {
  using std::exp;
  using std::log;
  S m = v(0);
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (ad::value_of(v(i)) > ad::value_of(m)) m = v(i);
  S s = S(0.0);
  for (Eigen::Index i = 0; i < v.size(); ++i) s += exp(v(i) - m);
  return m + log(s);
}

// Max-shifted softmax; finite logits give strictly positive outputs that
// sum to one.
template <class S>
Vec<S> softmax(const Vec<S>& logits) {
  using std::exp;
  S m = logits(0);
  for (Eigen::Index i = 1; i < logits.size(); ++i)
    if (ad::value_of(logits(i)) > ad::value_of(m)) m = logits(i);
  Vec<S> out(logits.size());
  S z = S(0.0);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    out(i) = exp(logits(i) - m);
    z += out(i);
  }
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = out(i) / z;
  return out;
}

template <class S>
S sigmoid(const S& x) {
  using std::exp;
  if (ad::value_of(x) >= 0.0) {
    S e = exp(-x);
    return S(1.0) / (S(1.0) + e);
  }
  S e = exp(x);
  return e / (S(1.0) + e);
}

// log(1 + e^x), overflow-safe.
template <class S>
S softplus(const S& x) {
  using std::exp;
  using std::log;
  if (ad::value_of(x) > 30.0) return x;
  return log(S(1.0) + exp(x));
}

template <class S>
S sqr(const S& x) {
  return x * x;
}

}  // namespace tpp
