#pragma once

#include <string>
#include <vector>

#include "tppkit/data.hpp"
#include "tppkit/decoders.hpp"
#include "tppkit/encoders.hpp"
#include "tppkit/errors.hpp"
#include "tppkit/mark.hpp"
#include "tppkit/metrics.hpp"
#include "tppkit/mixtures.hpp"
#include "tppkit/params.hpp"
#include "tppkit/rng.hpp"

namespace tpp {

struct ModelConfig {
  enc::EncoderConfig encoder;
  dec::DecoderConfig decoder;

  void validate() const {
    encoder.validate();
    if (decoder.embed_dim != encoder.embed_dim)
      throw ConfigError("encoder and decoder embedding dimensions must match");
    if (decoder.diffusion_steps < 1) throw ConfigError("diffusion steps must be >= 1");
    if (decoder.score_levels < 1) throw ConfigError("score levels must be >= 1");
    if (decoder.cnf_steps < 2) throw ConfigError("integrator needs at least 2 steps");
    if (decoder.mixture_components < 1) throw ConfigError("mixture needs >= 1 component");
    if (decoder.langevin_steps < 1) throw ConfigError("langevin steps must be >= 1");
    if (decoder.critic_steps < 1) throw ConfigError("critic steps must be >= 1");
  }
};

// Precomputed double-valued tables derived from the decoder config.
struct DecoderTables {
  dec::DiffusionSchedule sched;
  dec::NoiseLadder ladder;
};

inline DecoderTables make_tables(const dec::DecoderConfig& d) {
  DecoderTables t;
  if (d.kind == dec::DecoderKind::kTcddm)
    t.sched = dec::make_linear_schedule(d.diffusion_steps, d.beta_min, d.beta_max);
  if (d.kind == dec::DecoderKind::kTcnsn)
    t.ladder = dec::make_ladder(d.score_levels, d.sigma_max, d.sigma_min, d.langevin_eps);
  return t;
}

inline void register_model_params(const ModelConfig& cfg, ParamStore& ps, Rng& rng) {
  cfg.validate();
  enc::register_params(cfg.encoder, ps, rng);
  switch (cfg.decoder.kind) {
    case dec::DecoderKind::kTcddm: dec::register_eps_params(cfg.decoder, ps, rng); break;
    case dec::DecoderKind::kTcvae: dec::register_vae_params(cfg.decoder, ps, rng); break;
    case dec::DecoderKind::kTcgan: dec::register_gan_params(cfg.decoder, ps, rng); break;
    case dec::DecoderKind::kTccnf: dec::register_cnf_params(cfg.decoder, ps, rng); break;
    case dec::DecoderKind::kTcnsn: dec::register_nsn_params(cfg.decoder, ps, rng); break;
    case dec::DecoderKind::kGauss:
    case dec::DecoderKind::kLogNorm:
    case dec::DecoderKind::kGompertz:
    case dec::DecoderKind::kWeibull: dec::register_mixture_params(cfg.decoder, ps, rng); break;
    case dec::DecoderKind::kDeter: dec::register_deter_params(cfg.decoder, ps, rng); break;
  }
  register_mark_params(cfg.encoder.num_marks, cfg.encoder.embed_dim, ps, rng);
}

template <class S>
struct BoundModel {
  ModelConfig cfg;
  enc::Encoder<S> encoder;
  MarkHead<S> mark;
  dec::EpsNet<S> eps;
  dec::VaeNets<S> vae;
  dec::GanNets<S> gan;
  dec::FlowField<S> cnf;
  dec::ScoreNet<S> nsn;
  dec::MixtureHead<S> mix;
  dec::DeterHead<S> deter;
};

template <class S>
BoundModel<S> bind_model(const ModelConfig& cfg, Binder<S>& b) {
  BoundModel<S> m;
  m.cfg = cfg;
  m.encoder = enc::bind_encoder(cfg.encoder, b);
  m.mark = bind_mark<S>(b);
  switch (cfg.decoder.kind) {
    case dec::DecoderKind::kTcddm: m.eps = dec::bind_eps(b); break;
    case dec::DecoderKind::kTcvae: m.vae = dec::bind_vae(b); break;
    case dec::DecoderKind::kTcgan: m.gan = dec::bind_gan(b); break;
    case dec::DecoderKind::kTccnf: m.cnf = dec::bind_cnf(b); break;
    case dec::DecoderKind::kTcnsn: m.nsn = dec::bind_nsn(b); break;
    case dec::DecoderKind::kGauss:
    case dec::DecoderKind::kLogNorm:
    case dec::DecoderKind::kGompertz:
    case dec::DecoderKind::kWeibull:
      m.mix = dec::bind_mixture(b, dec::family_of(cfg.decoder.kind));
      break;
    case dec::DecoderKind::kDeter: m.deter = dec::bind_deter(b); break;
  }
  return m;
}

// Per-event stochastic inputs, drawn outside the loss so a training step (or
// a finite-difference check) sees a fixed, repeatable objective.
struct EventNoise {
  int k = 1;
  double eps = 0.0;
  VecD vec;
};
using SeqNoise = std::vector<EventNoise>;

inline SeqNoise draw_noise(const ModelConfig& cfg, std::size_t n_events, Rng& rng) {
  SeqNoise out(n_events);
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (cfg.decoder.kind) {
    case dec::DecoderKind::kTcddm: {
      std::uniform_int_distribution<int> pick(1, cfg.decoder.diffusion_steps);
      for (auto& n : out) {
        n.k = pick(rng);
        n.eps = normal(rng);
      }
      break;
    }
    case dec::DecoderKind::kTcnsn: {
      std::uniform_int_distribution<int> pick(1, cfg.decoder.score_levels);
      for (auto& n : out) {
        n.k = pick(rng);
        n.eps = normal(rng);
      }
      break;
    }
    case dec::DecoderKind::kTcvae:
    case dec::DecoderKind::kTcgan:
      for (auto& n : out) {
        n.vec.resize(cfg.decoder.embed_dim);
        for (Eigen::Index d = 0; d < n.vec.size(); ++d) n.vec(d) = normal(rng);
      }
      break;
    default: break;
  }
  return out;
}

// Summed per-event loss (time term plus mark cross entropy) for every
// decoder except TCGAN, whose two objectives live in sequence_gan_losses.
template <class S>
S sequence_loss(const BoundModel<S>& m, const DecoderTables& tb, const EventSequence& seq,
                const LogNormStats& stats, const SeqNoise& noise) {
  const auto kind = m.cfg.decoder.kind;
  if (kind == dec::DecoderKind::kTcgan)
    throw ConfigError("tcgan trains through sequence_gan_losses");
  if (noise.size() < seq.size()) throw ConfigError("noise draws do not cover the sequence");
  const std::vector<double> iv = intervals(seq);
  auto h = enc::encode_history(m.encoder, seq);
  S total = S(0.0);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Vec<S>& hp = h[i];
    const double tau = iv[i];
    switch (kind) {
      case dec::DecoderKind::kTcddm:
        total += dec::tcddm_loss(log_normalize(tau, stats), hp, m.eps, tb.sched, noise[i].k,
                                 noise[i].eps, m.cfg.decoder.weighted_loss);
        break;
      case dec::DecoderKind::kTcvae:
        total += dec::tcvae_loss(log_normalize(tau, stats), hp, m.vae, noise[i].vec);
        break;
      case dec::DecoderKind::kTccnf:
        total += dec::tccnf_nll(log_normalize(tau, stats), hp, m.cnf, m.cfg.decoder.cnf_steps);
        break;
      case dec::DecoderKind::kTcnsn:
        total += dec::tcnsn_loss(log_normalize(tau, stats), hp, m.nsn, tb.ladder, noise[i].k,
                                 noise[i].eps);
        break;
      case dec::DecoderKind::kGauss:
      case dec::DecoderKind::kLogNorm:
      case dec::DecoderKind::kGompertz:
      case dec::DecoderKind::kWeibull: {
        auto p = dec::mixture_params(m.mix, hp);
        total += dec::mixture_nll(p, m.mix.family, tau);
        break;
      }
      case dec::DecoderKind::kDeter:
        total += sqr(dec::deter_output(m.deter, hp) - S(tau));
        break;
      default: throw ConfigError("unhandled decoder kind");
    }
    total += mark_nll(m.mark, hp, seq.m[i]);
  }
  return total;
}

template <class S>
struct GanSeqLosses {
  S critic;
  S model;  // generator term plus mark cross entropy
};

template <class S>
GanSeqLosses<S> sequence_gan_losses(const BoundModel<S>& m, const EventSequence& seq,
                                    const LogNormStats& stats, const SeqNoise& noise) {
  if (m.cfg.decoder.kind != dec::DecoderKind::kTcgan)
    throw ConfigError("sequence_gan_losses requires the tcgan decoder");
  if (noise.size() < seq.size()) throw ConfigError("noise draws do not cover the sequence");
  const std::vector<double> iv = intervals(seq);
  auto h = enc::encode_history(m.encoder, seq);
  GanSeqLosses<S> out{S(0.0), S(0.0)};
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Vec<S>& hp = h[i];
    const double z = log_normalize(iv[i], stats);
    auto gl = dec::tcgan_losses(z, hp, m.gan, m.cfg.decoder.gan_eta, noise[i].vec);
    out.critic += gl.critic;
    out.model += gl.generator + mark_nll(m.mark, hp, seq.m[i]);
  }
  return out;
}

// Raw-interval predictive samples for one history encoding.
inline VecD sample_intervals(const BoundModel<double>& m, const DecoderTables& tb, const VecD& h,
                             const LogNormStats& stats, int count, Rng& rng) {
  switch (m.cfg.decoder.kind) {
    case dec::DecoderKind::kTcddm: return dec::tcddm_sample(m.eps, h, tb.sched, count, rng, stats);
    case dec::DecoderKind::kTcvae: return dec::tcvae_sample(m.vae, h, count, rng, stats);
    case dec::DecoderKind::kTcgan: return dec::tcgan_sample(m.gan, h, count, rng, stats);
    case dec::DecoderKind::kTccnf:
      return dec::tccnf_sample(m.cnf, h, count, rng, m.cfg.decoder.cnf_steps, stats);
    case dec::DecoderKind::kTcnsn:
      return dec::tcnsn_sample(m.nsn, h, tb.ladder, m.cfg.decoder.langevin_steps, count, rng,
                               stats);
    case dec::DecoderKind::kGauss:
    case dec::DecoderKind::kLogNorm:
    case dec::DecoderKind::kGompertz:
    case dec::DecoderKind::kWeibull: {
      auto p = dec::mixture_params(m.mix, h);
      return dec::mixture_sample(p, m.mix.family, count, rng);
    }
    case dec::DecoderKind::kDeter:
      return VecD::Constant(count, dec::deter_predict(m.deter, h));
  }
  throw ConfigError("unhandled decoder kind");
}

// Point prediction of the next interval. Sampling decoders use a Monte Carlo
// mean; mixtures use their closed-form expectation; the deterministic head is
// its own point estimate.
inline double predict_interval(const BoundModel<double>& m, const DecoderTables& tb, const VecD& h,
                               const LogNormStats& stats, int count, Rng& rng) {
  switch (m.cfg.decoder.kind) {
    case dec::DecoderKind::kGauss:
    case dec::DecoderKind::kLogNorm:
    case dec::DecoderKind::kGompertz:
    case dec::DecoderKind::kWeibull: {
      auto p = dec::mixture_params(m.mix, h);
      return std::max(dec::mixture_mean(p, m.mix.family), kTauFloor);
    }
    case dec::DecoderKind::kDeter: return dec::deter_predict(m.deter, h);
    default: return sample_intervals(m, tb, h, stats, count, rng).mean();
  }
}

struct EvalConfig {
  int samples = 100;  // predictive draws per event
};

struct EvalReport {
  double mape = 0.0;
  double crps = 0.0;
  double qqp = 0.0;
  double top1 = 0.0;
  double top3 = 0.0;
  int n_events = 0;
  int mape_excluded = 0;
  int samples = 0;
  int topk_flagged = 0;  // events scored with k above the number of classes
  bool qqp_insufficient = false;
};

EvalReport evaluate_model(const ModelConfig& cfg, const ParamStore& ps, const Dataset& data,
                          const LogNormStats& stats, const EvalConfig& ec, Rng& rng);

// Autoregressive generation of a fresh sequence with n_events events.
EventSequence rollout(const ModelConfig& cfg, const ParamStore& ps, const LogNormStats& stats,
                      int n_events, Rng& rng);

struct Checkpoint {
  ModelConfig config;
  LogNormStats stats;
  ParamStore params;
};

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& ps,
                     const LogNormStats& stats);
Checkpoint load_checkpoint(const std::string& path);

// Latent-chain statistics of an iterative sampler (tcddm, tccnf, tcnsn),
// written as CSV rows: step, checkpoint_k, mean, var, hist_bin_edges,
// hist_counts (pipe-separated lists inside the last two cells).
void record_sampling_dynamics(const ModelConfig& cfg, const ParamStore& ps, const VecD& h,
                              int count, int every, const std::string& path, Rng& rng);

}  // namespace tpp
