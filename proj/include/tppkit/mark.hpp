#pragma once

#include "tppkit/errors.hpp"
#include "tppkit/linalg.hpp"
#include "tppkit/params.hpp"
#include "tppkit/rng.hpp"

namespace tpp {

template <class S>
struct MarkHead {
  Mat<S> w;  // M x D
  Vec<S> b;  // M
};

inline void register_mark_params(int num_marks, int embed_dim, ParamStore& ps, Rng& rng) {
  if (num_marks < 1) throw ConfigError("mark head needs at least 1 class");
  ps.add_linear("mark.w", num_marks, embed_dim, rng);
  ps.add_bias("mark.b", num_marks);
}

template <class S>
MarkHead<S> bind_mark(Binder<S>& b) {
  return MarkHead<S>{b.mat("mark.w"), b.mat("mark.b")};
}

template <class S>
Vec<S> mark_logits(const MarkHead<S>& m, const Vec<S>& h) {
  return m.w * h + m.b;
}

// Cross entropy: -log softmax(logits)[mark] = logsumexp(logits) - logits[mark].
template <class S>
S mark_nll(const MarkHead<S>& m, const Vec<S>& h, int mark) {
  Vec<S> logits = mark_logits(m, h);
  if (mark < 0 || mark >= logits.size()) throw DomainError("mark out of range");
  return logsumexp<S>(logits) - logits(mark);
}

inline VecD mark_probs(const MarkHead<double>& m, const VecD& h) {
  return softmax<double>(mark_logits(m, h));
}

}  // namespace tpp
