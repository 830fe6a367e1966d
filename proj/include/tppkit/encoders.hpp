#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tppkit/data.hpp"
#include "tppkit/errors.hpp"
#include "tppkit/linalg.hpp"
#include "tppkit/params.hpp"

namespace tpp::enc {

enum class EncoderKind { kGru, kLstm, kAtt, kRevAtt };

// kAdditive: [sin(w1 j + w2 tau); cos(w1 j + w2 tau)] tiled over D/2 slots.
// kSeparate: [sin(w1 tau); cos(w2 tau)] tiled.
enum class TimeEncoding { kAdditive, kSeparate };

inline const char* to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::kGru: return "gru";
    case EncoderKind::kLstm: return "lstm";
    case EncoderKind::kAtt: return "att";
    case EncoderKind::kRevAtt: return "revatt";
  }
  throw ConfigError("unknown encoder kind");
}

inline EncoderKind encoder_from_string(const std::string& s) {
  for (EncoderKind k :
       {EncoderKind::kGru, EncoderKind::kLstm, EncoderKind::kAtt, EncoderKind::kRevAtt})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown encoder: " + s);
}

inline const char* to_string(TimeEncoding t) {
  switch (t) {
    case TimeEncoding::kAdditive: return "additive";
    case TimeEncoding::kSeparate: return "separate";
  }
  throw ConfigError("unknown time encoding");
}

inline TimeEncoding time_encoding_from_string(const std::string& s) {
  for (TimeEncoding t : {TimeEncoding::kAdditive, TimeEncoding::kSeparate})
    if (s == to_string(t)) return t;
  throw ConfigError("unknown time encoding: " + s);
}

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kRevAtt;
  TimeEncoding time_enc = TimeEncoding::kAdditive;
  int embed_dim = 32;  // D, even; D/2 time slots + D/2 type slots
  int layers = 1;      // attention stack depth
  int num_marks = 1;

  void validate() const {
    if (embed_dim < 2 || embed_dim % 2 != 0)
      throw ConfigError("embed_dim must be even and >= 2");
    if (layers < 1) throw ConfigError("layers must be >= 1");
    if (num_marks < 1) throw ConfigError("num_marks must be >= 1");
  }
};

inline void register_params(const EncoderConfig& cfg, ParamStore& ps, Rng& rng) {
  cfg.validate();
  const int D = cfg.embed_dim;
  Eigen::MatrixXd& emb = ps.add_linear("enc.emb", cfg.num_marks, D / 2, rng);
  for (int r = 0; r < emb.rows(); ++r) {
    const double n = emb.row(r).norm();
    if (n > 0) emb.row(r) /= n;
  }
  ps.add_scalar("enc.w1", 1.0);
  ps.add_scalar("enc.w2", 1.0);
  switch (cfg.kind) {
    case EncoderKind::kRevAtt:
      ps.add_scalar("enc.rev.a", 0.0);
      [[fallthrough]];
    case EncoderKind::kAtt:
      for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "enc.att.l" + std::to_string(l) + ".";
        ps.add_linear(p + "wq", D, D, rng);
        ps.add_linear(p + "wk", D, D, rng);
        ps.add_linear(p + "wv", D, D, rng);
        if (l + 1 < cfg.layers) {
          ps.add_linear(p + "f1", 2 * D, D, rng);
          ps.add_bias(p + "fb1", 2 * D);
          ps.add_linear(p + "f2", D, 2 * D, rng);
          ps.add_bias(p + "fb2", D);
        }
      }
      break;
    case EncoderKind::kGru:
      for (const char* n : {"wz", "wr", "wh"}) ps.add_linear("enc.gru." + std::string(n), D, D, rng);
      for (const char* n : {"uz", "ur", "uh"}) ps.add_linear("enc.gru." + std::string(n), D, D, rng);
      for (const char* n : {"bz", "br", "bh"}) ps.add_bias("enc.gru." + std::string(n), D);
      break;
    case EncoderKind::kLstm:
      for (const char* n : {"wi", "wf", "wo", "wc"})
        ps.add_linear("enc.lstm." + std::string(n), D, D, rng);
      for (const char* n : {"ui", "uf", "uo", "uc"})
        ps.add_linear("enc.lstm." + std::string(n), D, D, rng);
      for (const char* n : {"bi", "bf", "bo", "bc"}) ps.add_bias("enc.lstm." + std::string(n), D);
      break;
  }
}

template <class S>
struct AttLayer {
  Mat<S> wq, wk, wv;
  bool has_ffn = false;
  Mat<S> f1, f2;
  Vec<S> fb1, fb2;
};

template <class S>
struct Encoder {
  EncoderConfig cfg;
  Mat<S> emb;
  S w1, w2;
  S decay;  // rev-att temporal decay a
  std::vector<AttLayer<S>> att;
  Mat<S> wz, uz, wr, ur, wh, uh;
  Vec<S> bz, br, bh;
  Mat<S> wi, ui, wf, uf, wo, uo, wc, uc;
  Vec<S> bi, bf, bo, bc;
};

template <class S>
Encoder<S> bind_encoder(const EncoderConfig& cfg, Binder<S>& b) {
  cfg.validate();
  Encoder<S> e;
  e.cfg = cfg;
  e.emb = b.mat("enc.emb");
  e.w1 = b.scalar("enc.w1");
  e.w2 = b.scalar("enc.w2");
  switch (cfg.kind) {
    case EncoderKind::kRevAtt:
      e.decay = b.scalar("enc.rev.a");
      [[fallthrough]];
    case EncoderKind::kAtt:
      for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "enc.att.l" + std::to_string(l) + ".";
        AttLayer<S> layer;
        layer.wq = b.mat(p + "wq");
        layer.wk = b.mat(p + "wk");
        layer.wv = b.mat(p + "wv");
        if (l + 1 < cfg.layers) {
          layer.has_ffn = true;
          layer.f1 = b.mat(p + "f1");
          layer.fb1 = b.mat(p + "fb1");
          layer.f2 = b.mat(p + "f2");
          layer.fb2 = b.mat(p + "fb2");
        }
        e.att.push_back(std::move(layer));
      }
      break;
    case EncoderKind::kGru:
      e.wz = b.mat("enc.gru.wz");
      e.uz = b.mat("enc.gru.uz");
      e.wr = b.mat("enc.gru.wr");
      e.ur = b.mat("enc.gru.ur");
      e.wh = b.mat("enc.gru.wh");
      e.uh = b.mat("enc.gru.uh");
      e.bz = b.mat("enc.gru.bz");
      e.br = b.mat("enc.gru.br");
      e.bh = b.mat("enc.gru.bh");
      break;
    case EncoderKind::kLstm:
      e.wi = b.mat("enc.lstm.wi");
      e.ui = b.mat("enc.lstm.ui");
      e.wf = b.mat("enc.lstm.wf");
      e.uf = b.mat("enc.lstm.uf");
      e.wo = b.mat("enc.lstm.wo");
      e.uo = b.mat("enc.lstm.uo");
      e.wc = b.mat("enc.lstm.wc");
      e.uc = b.mat("enc.lstm.uc");
      e.bi = b.mat("enc.lstm.bi");
      e.bf = b.mat("enc.lstm.bf");
      e.bo = b.mat("enc.lstm.bo");
      e.bc = b.mat("enc.lstm.bc");
      break;
  }
  return e;
}

// L2-normalized type embedding; similarity between marks is the cosine of
// these rows.
template <class S>
Vec<S> normalized_type_row(const Encoder<S>& e, int mark) {
  using std::sqrt;
  if (mark < 0 || mark >= e.cfg.num_marks) throw DomainError("mark out of range");
  Vec<S> v = e.emb.row(mark).transpose();
  S n2 = S(1e-24);
  for (Eigen::Index i = 0; i < v.size(); ++i) n2 += v(i) * v(i);
  S inv = S(1.0) / sqrt(n2);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = v(i) * inv;
  return v;
}

// Event embedding from (position j, interval tau, mark); first D/2 slots
// encode time, the rest hold the normalized type embedding.
template <class S>
Vec<S> embed_event(const Encoder<S>& e, int pos, double tau, int mark) {
  using std::cos;
  using std::sin;
  const int D = e.cfg.embed_dim;
  Vec<S> out(D);
  const int half = D / 2;
  if (e.cfg.time_enc == TimeEncoding::kAdditive) {
    S theta = e.w1 * static_cast<double>(pos) + e.w2 * tau;
    S s = sin(theta), c = cos(theta);
    for (int d = 0; d < half; ++d) out(d) = (d % 2 == 0) ? s : c;
  } else {
    S s = sin(e.w1 * tau), c = cos(e.w2 * tau);
    for (int d = 0; d < half; ++d) out(d) = (d % 2 == 0) ? s : c;
  }
  Vec<S> ty = normalized_type_row(e, mark);
  for (int d = 0; d < half; ++d) out(half + d) = ty(d);
  return out;
}

namespace detail {

template <class S>
Vec<S> ffn(const AttLayer<S>& l, const Vec<S>& y) {
  using std::tanh;
  Vec<S> u = l.f1 * y + l.fb1;
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = tanh(u(i));
  return l.f2 * u + l.fb2;
}

// Shared attention stack. If `weights_out` is non-null it receives the
// final-layer attention weights for each query position.
template <class S>
std::vector<Vec<S>> attention_encode(const Encoder<S>& e, const EventSequence& seq,
                                     std::vector<Vec<S>>* weights_out) {
  using std::exp;
  const int n = static_cast<int>(seq.size());
  const int D = e.cfg.embed_dim;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));
  const bool revised = e.cfg.kind == EncoderKind::kRevAtt;

  std::vector<double> tau = intervals(seq);
  std::vector<Vec<S>> x(n);
  for (int i = 0; i < n; ++i) x[i] = embed_event(e, i + 1, tau[i], seq.m[i]);

  // Similarity/recency factors depend only on raw events, not on the layer.
  std::vector<Vec<S>> ty;
  if (revised) {
    ty.resize(e.cfg.num_marks);
    for (int m = 0; m < e.cfg.num_marks; ++m) ty[m] = normalized_type_row(e, m);
  }

  for (std::size_t l = 0; l < e.att.size(); ++l) {
    const AttLayer<S>& layer = e.att[l];
    std::vector<Vec<S>> q(n), k(n), v(n);
    for (int i = 0; i < n; ++i) {
      q[i] = layer.wq * x[i];
      k[i] = layer.wk * x[i];
      v[i] = layer.wv * x[i];
    }
    std::vector<Vec<S>> a(n);
    for (int p = 0; p < n; ++p) {
      Vec<S> logits(p + 1);
      for (int j = 0; j <= p; ++j) {
        S phi = q[p].dot(k[j]) * inv_sqrt_d;
        if (revised) {
          S sim = ty[seq.m[j]].dot(ty[seq.m[p]]);
          if (ad::value_of(sim) == 0.0) {
            logits(j) = S(-1e9);  // masked: zero-similarity pair
            continue;
          }
          S rec = exp(e.decay * (seq.t[p] - seq.t[j]));
          phi = sim * rec * phi;
        }
        logits(j) = phi;
      }
      Vec<S> w = softmax(logits);
      if (weights_out && l + 1 == e.att.size()) (*weights_out)[p] = w;
      Vec<S> acc = Vec<S>::Zero(D);
      for (int j = 0; j <= p; ++j) acc += w(j) * v[j];
      a[p] = std::move(acc);
    }
    if (layer.has_ffn) {
      for (int p = 0; p < n; ++p) {
        Vec<S> y = x[p] + a[p];
        x[p] = y + ffn(layer, y);
      }
    } else {
      x = std::move(a);  // final layer: pure weighted value sum
    }
  }
  return x;
}

template <class S>
std::vector<Vec<S>> rnn_encode(const Encoder<S>& e, const EventSequence& seq) {
  using std::tanh;
  const int n = static_cast<int>(seq.size());
  const int D = e.cfg.embed_dim;
  std::vector<double> tau = intervals(seq);
  std::vector<Vec<S>> out(n);
  Vec<S> h = Vec<S>::Zero(D);
  Vec<S> c = Vec<S>::Zero(D);
  for (int i = 0; i < n; ++i) {
    Vec<S> in = embed_event(e, i + 1, tau[i], seq.m[i]);
    if (e.cfg.kind == EncoderKind::kGru) {
      Vec<S> z = e.wz * in + e.uz * h + e.bz;
      Vec<S> r = e.wr * in + e.ur * h + e.br;
      for (int d = 0; d < D; ++d) {
        z(d) = sigmoid(z(d));
        r(d) = sigmoid(r(d));
      }
      Vec<S> hh = e.wh * in + e.uh * r.cwiseProduct(h) + e.bh;
      for (int d = 0; d < D; ++d) hh(d) = tanh(hh(d));
      h = (Vec<S>::Ones(D) - z).cwiseProduct(h) + z.cwiseProduct(hh);
    } else {
      Vec<S> ig = e.wi * in + e.ui * h + e.bi;
      Vec<S> fg = e.wf * in + e.uf * h + e.bf;
      Vec<S> og = e.wo * in + e.uo * h + e.bo;
      Vec<S> cc = e.wc * in + e.uc * h + e.bc;
      for (int d = 0; d < D; ++d) {
        ig(d) = sigmoid(ig(d));
        fg(d) = sigmoid(fg(d));
        og(d) = sigmoid(og(d));
        cc(d) = tanh(cc(d));
      }
      c = fg.cwiseProduct(c) + ig.cwiseProduct(cc);
      Vec<S> ct = c;
      for (int d = 0; d < D; ++d) ct(d) = tanh(ct(d));
      h = og.cwiseProduct(ct);
    }
    out[i] = h;
  }
  return out;
}

}  // namespace detail

// History encodings h_0..h_n; h_k summarizes the first k events, so h_{i-1}
// conditions the model for event i. h_0 is zero.
template <class S>
std::vector<Vec<S>> encode_history(const Encoder<S>& e, const EventSequence& seq) {
  const int D = e.cfg.embed_dim;
  std::vector<Vec<S>> enc;
  if (e.cfg.kind == EncoderKind::kAtt || e.cfg.kind == EncoderKind::kRevAtt)
    enc = detail::attention_encode(e, seq, static_cast<std::vector<Vec<S>>*>(nullptr));
  else
    enc = detail::rnn_encode(e, seq);
  std::vector<Vec<S>> h(seq.size() + 1);
  h[0] = Vec<S>::Zero(D);
  for (std::size_t i = 0; i < seq.size(); ++i) h[i + 1] = std::move(enc[i]);
  return h;
}

// Final-layer attention weights for each query position (attention encoders
// only); weights[p] has p+1 entries over keys 0..p.
template <class S>
std::vector<Vec<S>> attention_weights(const Encoder<S>& e, const EventSequence& seq) {
  if (e.cfg.kind != EncoderKind::kAtt && e.cfg.kind != EncoderKind::kRevAtt)
    throw ConfigError("attention_weights requires an attention encoder");
  std::vector<Vec<S>> w(seq.size());
  detail::attention_encode(e, seq, &w);
  return w;
}

// M x M cosine similarity of type embeddings.
inline MatD type_similarity(const ParamStore& ps, const EncoderConfig& cfg) {
  Binder<double> b(ps);
  Encoder<double> e = bind_encoder(cfg, b);
  MatD sim(cfg.num_marks, cfg.num_marks);
  for (int i = 0; i < cfg.num_marks; ++i) {
    VecD vi = normalized_type_row(e, i);
    for (int j = 0; j < cfg.num_marks; ++j)
      sim(i, j) = vi.dot(normalized_type_row(e, j));
  }
  return sim;
}

}  // namespace tpp::enc
