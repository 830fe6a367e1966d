#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tppkit/data.hpp"
#include "tppkit/errors.hpp"
#include "tppkit/linalg.hpp"
#include "tppkit/params.hpp"
#include "tppkit/rng.hpp"

namespace tpp::dec {

enum class DecoderKind {
  kTcddm,
  kTcvae,
  kTcgan,
  kTccnf,
  kTcnsn,
  kGauss,
  kLogNorm,
  kGompertz,
  kWeibull,
  kDeter,
};

inline const char* to_string(DecoderKind k) {
  switch (k) {
    case DecoderKind::kTcddm: return "tcddm";
    case DecoderKind::kTcvae: return "tcvae";
    case DecoderKind::kTcgan: return "tcgan";
    case DecoderKind::kTccnf: return "tccnf";
    case DecoderKind::kTcnsn: return "tcnsn";
    case DecoderKind::kGauss: return "gauss";
    case DecoderKind::kLogNorm: return "lognorm";
    case DecoderKind::kGompertz: return "gompertz";
    case DecoderKind::kWeibull: return "weibull";
    case DecoderKind::kDeter: return "deter";
  }
  throw ConfigError("unknown decoder kind");
}

inline DecoderKind decoder_from_string(const std::string& s) {
  for (DecoderKind k :
       {DecoderKind::kTcddm, DecoderKind::kTcvae, DecoderKind::kTcgan, DecoderKind::kTccnf,
        DecoderKind::kTcnsn, DecoderKind::kGauss, DecoderKind::kLogNorm, DecoderKind::kGompertz,
        DecoderKind::kWeibull, DecoderKind::kDeter})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown decoder: " + s);
}

// The five deep generative decoders model log-normalized intervals; mixtures
// and the deterministic head act on raw intervals.
inline bool is_generative(DecoderKind k) {
  switch (k) {
    case DecoderKind::kTcddm:
    case DecoderKind::kTcvae:
    case DecoderKind::kTcgan:
    case DecoderKind::kTccnf:
    case DecoderKind::kTcnsn: return true;
    default: return false;
  }
}

inline bool is_mixture(DecoderKind k) {
  switch (k) {
    case DecoderKind::kGauss:
    case DecoderKind::kLogNorm:
    case DecoderKind::kGompertz:
    case DecoderKind::kWeibull: return true;
    default: return false;
  }
}

struct DecoderConfig {
  DecoderKind kind = DecoderKind::kTcddm;
  int embed_dim = 32;  // history encoding dimension D

  int diffusion_steps = 100;
  double beta_min = 1e-4, beta_max = 0.02;
  bool weighted_loss = false;  // variance-weighted objective variant

  int score_levels = 1000;
  double sigma_max = 1.0, sigma_min = 0.01;
  double langevin_eps = 2e-5;
  int langevin_steps = 5;

  int cnf_steps = 100;

  int mixture_components = 3;

  double gan_eta = 1.0;
  int critic_steps = 5;
};

// ---------------------------------------------------------------------------
// Diffusion schedule

struct DiffusionSchedule {
  int K = 0;
  VecD beta, alpha, abar, btilde;
};

inline DiffusionSchedule make_linear_schedule(int K, double beta_min = 1e-4,
                                              double beta_max = 0.02) {
  if (K < 1) throw ConfigError("diffusion steps must be >= 1");
  DiffusionSchedule s;
  s.K = K;
  s.beta.resize(K);
  s.alpha.resize(K);
  s.abar.resize(K);
  s.btilde.resize(K);
  double prod = 1.0;
  for (int k = 0; k < K; ++k) {
    const double b =
        K == 1 ? beta_min : beta_min + (beta_max - beta_min) * static_cast<double>(k) / (K - 1);
    s.beta(k) = b;
    s.alpha(k) = 1.0 - b;
    const double abar_prev = prod;
    prod *= s.alpha(k);
    s.abar(k) = prod;
    s.btilde(k) = (1.0 - abar_prev) / (1.0 - prod) * b;
  }
  return s;
}

// ---------------------------------------------------------------------------
// TCDDM: noise-prediction network and the denoising chain

template <class S>
struct EpsNet {
  Mat<S> wh;  // D x D
  Mat<S> wt;  // D x 1
  Mat<S> w2;  // D x D
  Mat<S> w3;  // 1 x D
  Vec<S> b2;  // D
  S b3;
  Mat<S> ek;  // D x K step embedding, consumed through cos()
};

inline void register_eps_params(const DecoderConfig& cfg, ParamStore& ps, Rng& rng) {
  const int D = cfg.embed_dim;
  ps.add_linear("dec.eps.wh", D, D, rng);
  ps.add_linear("dec.eps.wt", D, 1, rng);
  ps.add_linear("dec.eps.w2", D, D, rng);
  ps.add_bias("dec.eps.b2", D);
  ps.add_linear("dec.eps.w3", 1, D, rng);
  ps.add_scalar("dec.eps.b3", 0.0);
  // Step embedding spans +-1 so cos() separates the K levels.
  ps.add_linear("dec.eps.ek", D, cfg.diffusion_steps, rng) *=
      std::sqrt(static_cast<double>(cfg.diffusion_steps));
}

template <class S>
EpsNet<S> bind_eps(Binder<S>& b) {
  EpsNet<S> n;
  n.wh = b.mat("dec.eps.wh");
  n.wt = b.mat("dec.eps.wt");
  n.w2 = b.mat("dec.eps.w2");
  n.b2 = b.mat("dec.eps.b2");
  n.w3 = b.mat("dec.eps.w3");
  n.b3 = b.scalar("dec.eps.b3");
  n.ek = b.mat("dec.eps.ek");
  return n;
}

// eps_theta(tau', h, k): u = W_h h + W_t tau' + cos(E_k[:,k]);
// v = u + tanh(W2 u + b2); out = W3 v + b3. k is 1-based.
template <class S>
S eps_eval(const EpsNet<S>& n, const S& tau_p, const Vec<S>& h, int k) {
  using std::cos;
  using std::tanh;
  if (k < 1 || k > n.ek.cols()) throw DomainError("diffusion step index out of range");
  Vec<S> u = n.wh * h + n.wt * tau_p;
  for (Eigen::Index d = 0; d < u.size(); ++d) u(d) += cos(n.ek(d, k - 1));
  Vec<S> w = n.w2 * u + n.b2;
  for (Eigen::Index d = 0; d < w.size(); ++d) w(d) = tanh(w(d));
  Vec<S> v = u + w;
  return (n.w3 * v)(0) + n.b3;
}

// Batched double-path eval across a vector of tau' states (shared h, k).
inline VecD eps_eval_batch(const EpsNet<double>& n, const VecD& hterm_ck, const VecD& x) {
  const Eigen::Index m = x.size();
  MatD u = hterm_ck.replicate(1, m) + n.wt * x.transpose();
  MatD v = u + ((n.w2 * u).colwise() + n.b2).array().tanh().matrix();
  return ((n.w3 * v).transpose().array() + n.b3).matrix();
}

// Training objective, noise arguments explicit so instances are
// deterministic: ||eps - eps_theta(sqrt(abar_k) z + sqrt(1-abar_k) eps, h, k)||^2.
template <class S>
S tcddm_loss(double z, const Vec<S>& h, const EpsNet<S>& net, const DiffusionSchedule& sched,
             int k, double eps, bool weighted = false) {
  const double abar = sched.abar(k - 1);
  const double tau_p = std::sqrt(abar) * z + std::sqrt(1.0 - abar) * eps;
  S pred = eps_eval(net, S(tau_p), h, k);
  S diff = S(eps) - pred;
  S loss = diff * diff;
  if (weighted) {
    const double beta = sched.beta(k - 1);
    const double sigma2 = k == 1 ? sched.beta(0) : sched.btilde(k - 1);
    loss = loss * (beta * beta / (2.0 * sigma2 * sched.alpha(k - 1) * (1.0 - abar)));
  }
  return loss;
}

// Forward marginal tau^k = sqrt(abar_k) tau0 + sqrt(1-abar_k) eps.
inline double forward_marginal(double tau0, int k, const DiffusionSchedule& s, double eps) {
  if (k < 1 || k > s.K) throw DomainError("diffusion step index out of range");
  const double abar = s.abar(k - 1);
  return std::sqrt(abar) * tau0 + std::sqrt(1.0 - abar) * eps;
}

struct DynamicsCapture {
  int every = 0;  // capture every `every` steps (plus endpoints); 0 = off
  std::vector<std::pair<double, VecD>> frames;
};

// Denoising chain in normalized (z) space, n independent chains. Draw order:
// n initial states, then per k = K..2 one z per chain; z = 0 at k = 1.
inline VecD tcddm_sample_z(const EpsNet<double>& net, const VecD& h, const DiffusionSchedule& s,
                           int n, Rng& rng, DynamicsCapture* cap = nullptr) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VecD x(n);
  for (int i = 0; i < n; ++i) x(i) = normal(rng);
  const VecD hterm = net.wh * h;
  if (cap && cap->every > 0) cap->frames.emplace_back(static_cast<double>(s.K), x);
  for (int k = s.K; k >= 1; --k) {
    VecD ck(hterm.size());
    for (Eigen::Index d = 0; d < ck.size(); ++d) ck(d) = hterm(d) + std::cos(net.ek(d, k - 1));
    const VecD pred = eps_eval_batch(net, ck, x);
    const double inv_sqrt_a = 1.0 / std::sqrt(s.alpha(k - 1));
    const double coef = s.beta(k - 1) / std::sqrt(1.0 - s.abar(k - 1));
    const double sigma = std::sqrt(s.btilde(k - 1));
    for (int i = 0; i < n; ++i) {
      const double z = k > 1 ? normal(rng) : 0.0;
      x(i) = (x(i) - coef * pred(i)) * inv_sqrt_a + sigma * z;
    }
    if (!x.allFinite()) throw SamplerDiverged("tcddm chain diverged at step " + std::to_string(k));
    if (cap && cap->every > 0 && ((s.K - k + 1) % cap->every == 0 || k == 1))
      cap->frames.emplace_back(static_cast<double>(k - 1), x);
  }
  return x;
}

inline VecD tcddm_sample(const EpsNet<double>& net, const VecD& h, const DiffusionSchedule& s,
                         int n, Rng& rng, const LogNormStats& stats) {
  VecD z = tcddm_sample_z(net, h, s, n, rng);
  for (int i = 0; i < n; ++i) z(i) = log_denormalize(z(i), stats);
  return z;
}

// ---------------------------------------------------------------------------
// TCVAE

template <class S>
struct VaeNets {
  // encoder q_xi(z | tau, h)
  Mat<S> ewt, ewh, ewmu, ewlv;
  Vec<S> eb1, ebmu, eblv;
  // decoder tau_hat(z, h)
  Mat<S> dwz, dwh, dw2;
  Vec<S> db1;
  S db2;
};

inline void register_vae_params(const DecoderConfig& cfg, ParamStore& ps, Rng& rng) {
  const int D = cfg.embed_dim;
  ps.add_linear("dec.vae.enc.wt", D, 1, rng);
  ps.add_linear("dec.vae.enc.wh", D, D, rng);
  ps.add_bias("dec.vae.enc.b1", D);
  ps.add_linear("dec.vae.enc.wmu", D, D, rng);
  ps.add_bias("dec.vae.enc.bmu", D);
  ps.add_linear("dec.vae.enc.wlv", D, D, rng);
  ps.add_bias("dec.vae.enc.blv", D);
  ps.add_linear("dec.vae.dec.wz", D, D, rng);
  ps.add_linear("dec.vae.dec.wh", D, D, rng);
  ps.add_bias("dec.vae.dec.b1", D);
  ps.add_linear("dec.vae.dec.w2", 1, D, rng);
  ps.add_scalar("dec.vae.dec.b2", 0.0);
}

template <class S>
VaeNets<S> bind_vae(Binder<S>& b) {
  VaeNets<S> n;
  n.ewt = b.mat("dec.vae.enc.wt");
  n.ewh = b.mat("dec.vae.enc.wh");
  n.eb1 = b.mat("dec.vae.enc.b1");
  n.ewmu = b.mat("dec.vae.enc.wmu");
  n.ebmu = b.mat("dec.vae.enc.bmu");
  n.ewlv = b.mat("dec.vae.enc.wlv");
  n.eblv = b.mat("dec.vae.enc.blv");
  n.dwz = b.mat("dec.vae.dec.wz");
  n.dwh = b.mat("dec.vae.dec.wh");
  n.db1 = b.mat("dec.vae.dec.b1");
  n.dw2 = b.mat("dec.vae.dec.w2");
  n.db2 = b.scalar("dec.vae.dec.b2");
  return n;
}

template <class S>
S vae_decode(const VaeNets<S>& n, const Vec<S>& z, const Vec<S>& h) {
  using std::tanh;
  Vec<S> u = n.dwz * z + n.dwh * h + n.db1;
  for (Eigen::Index d = 0; d < u.size(); ++d) u(d) = tanh(u(d));
  return (n.dw2 * u)(0) + n.db2;
}

// ELBO-style objective: KL(q(z|tau,h) || N(0,I)) + (tau_hat - tau)^2 with a
// reparameterized z; `noise` supplies the fixed N(0,1) draw per latent dim.
template <class S>
S tcvae_loss(double z_target, const Vec<S>& h, const VaeNets<S>& n, const VecD& noise) {
  using std::exp;
  using std::tanh;
  Vec<S> u = n.ewt * S(z_target) + n.ewh * h + n.eb1;
  for (Eigen::Index d = 0; d < u.size(); ++d) u(d) = tanh(u(d));
  Vec<S> mu = n.ewmu * u + n.ebmu;
  Vec<S> lv = n.ewlv * u + n.eblv;
  S kl = S(0.0);
  Vec<S> zlat(mu.size());
  for (Eigen::Index d = 0; d < mu.size(); ++d) {
    S var = exp(lv(d));
    kl += mu(d) * mu(d) + var - S(1.0) - lv(d);
    zlat(d) = mu(d) + exp(lv(d) * 0.5) * noise(d);
  }
  kl = kl * 0.5;
  S rec = vae_decode(n, zlat, h) - S(z_target);
  return kl + rec * rec;
}

inline VecD tcvae_sample_z(const VaeNets<double>& n, const VecD& h, int count, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const VecD ch = n.dwh * h + n.db1;
  const Eigen::Index D = ch.size();
  MatD z(D, count);
  for (Eigen::Index j = 0; j < count; ++j)
    for (Eigen::Index d = 0; d < D; ++d) z(d, j) = normal(rng);
  MatD u = ((n.dwz * z).colwise() + ch).array().tanh().matrix();
  return ((n.dw2 * u).transpose().array() + n.db2).matrix();
}

inline VecD tcvae_sample(const VaeNets<double>& n, const VecD& h, int count, Rng& rng,
                         const LogNormStats& stats) {
  VecD z = tcvae_sample_z(n, h, count, rng);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = log_denormalize(z(i), stats);
  return z;
}

// ---------------------------------------------------------------------------
// TCGAN: generator shares the VAE decoder shape; critic scores (tau, h).

template <class S>
struct GanNets {
  Mat<S> gwz, gwh, gw2;
  Vec<S> gb1;
  S gb2;
  Mat<S> cwt, cwh, cw2;
  Vec<S> cb1;
  S cb2;
};

inline void register_gan_params(const DecoderConfig& cfg, ParamStore& ps, Rng& rng) {
  const int D = cfg.embed_dim;
  ps.add_linear("dec.gan.gen.wz", D, D, rng);
  ps.add_linear("dec.gan.gen.wh", D, D, rng);
  ps.add_bias("dec.gan.gen.b1", D);
  ps.add_linear("dec.gan.gen.w2", 1, D, rng);
  ps.add_scalar("dec.gan.gen.b2", 0.0);
  ps.add_linear("dec.gan.crit.wt", D, 1, rng);
  ps.add_linear("dec.gan.crit.wh", D, D, rng);
  ps.add_bias("dec.gan.crit.b1", D);
  ps.add_linear("dec.gan.crit.w2", 1, D, rng);
  ps.add_scalar("dec.gan.crit.b2", 0.0);
}

template <class S>
GanNets<S> bind_gan(Binder<S>& b) {
  GanNets<S> n;
  n.gwz = b.mat("dec.gan.gen.wz");
  n.gwh = b.mat("dec.gan.gen.wh");
  n.gb1 = b.mat("dec.gan.gen.b1");
  n.gw2 = b.mat("dec.gan.gen.w2");
  n.gb2 = b.scalar("dec.gan.gen.b2");
  n.cwt = b.mat("dec.gan.crit.wt");
  n.cwh = b.mat("dec.gan.crit.wh");
  n.cb1 = b.mat("dec.gan.crit.b1");
  n.cw2 = b.mat("dec.gan.crit.w2");
  n.cb2 = b.scalar("dec.gan.crit.b2");
  return n;
}

template <class S>
S gan_generate(const GanNets<S>& n, const Vec<S>& z, const Vec<S>& h) {
  using std::tanh;
  Vec<S> u = n.gwz * z + n.gwh * h + n.gb1;
  for (Eigen::Index d = 0; d < u.size(); ++d) u(d) = tanh(u(d));
  return (n.gw2 * u)(0) + n.gb2;
}

template <class S>
S gan_critic(const GanNets<S>& n, const S& tau, const Vec<S>& h) {
  using std::tanh;
  Vec<S> u = n.cwt * tau + n.cwh * h + n.cb1;
  for (Eigen::Index d = 0; d < u.size(); ++d) u(d) = tanh(u(d));
  return (n.cw2 * u)(0) + n.cb2;
}

template <class S>
struct GanLosses {
  S critic;
  S generator;
};

// Lipschitz penalty eta * | |d(tau)-d(tau_hat)| / |tau_hat - tau| - 1 | with
// the denominator floored at 1e-8.
template <class S>
S gan_penalty(const S& w, const S& tau_hat, double z_target, double eta) {
  using std::abs;
  S gap = abs(tau_hat - S(z_target));
  if (ad::value_of(gap) < 1e-8) gap = S(1e-8);
  return abs(abs(w) / gap - S(1.0)) * eta;
}

// Critic maximizes d(tau|h) - d(tau_hat|h) minus the penalty; generator
// minimizes the first term. Losses are returned in minimization form.
template <class S>
GanLosses<S> tcgan_losses(double z_target, const Vec<S>& h, const GanNets<S>& n, double eta,
                          const VecD& zlat) {
  Vec<S> zl = to_vec<S>(zlat);
  S tau_hat = gan_generate(n, zl, h);
  S dr = gan_critic(n, S(z_target), h);
  S df = gan_critic(n, tau_hat, h);
  S w = dr - df;
  return GanLosses<S>{gan_penalty(w, tau_hat, z_target, eta) - w, w};
}

inline VecD tcgan_sample_z(const GanNets<double>& n, const VecD& h, int count, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const VecD ch = n.gwh * h + n.gb1;
  const Eigen::Index D = ch.size();
  MatD z(D, count);
  for (Eigen::Index j = 0; j < count; ++j)
    for (Eigen::Index d = 0; d < D; ++d) z(d, j) = normal(rng);
  MatD u = ((n.gwz * z).colwise() + ch).array().tanh().matrix();
  return ((n.gw2 * u).transpose().array() + n.gb2).matrix();
}

inline VecD tcgan_sample(const GanNets<double>& n, const VecD& h, int count, Rng& rng,
                         const LogNormStats& stats) {
  VecD z = tcgan_sample_z(n, h, count, rng);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = log_denormalize(z(i), stats);
  return z;
}

// ---------------------------------------------------------------------------
// TCCNF: scalar flow tau(k1) = z + int f_theta(tau(k), k | h) dk

template <class S>
struct FlowField {
  Mat<S> wt, wk, wh, w2;
  Vec<S> b1;
  S b2;
};

inline void register_cnf_params(const DecoderConfig& cfg, ParamStore& ps, Rng& rng) {
  const int D = cfg.embed_dim;
  ps.add_linear("dec.cnf.wt", D, 1, rng);
  ps.add_linear("dec.cnf.wk", D, 1, rng);
  ps.add_linear("dec.cnf.wh", D, D, rng);
  ps.add_bias("dec.cnf.b1", D);
  ps.add_linear("dec.cnf.w2", 1, D, rng);
  ps.add_scalar("dec.cnf.b2", 0.0);
}

template <class S>
FlowField<S> bind_cnf(Binder<S>& b) {
  FlowField<S> n;
  n.wt = b.mat("dec.cnf.wt");
  n.wk = b.mat("dec.cnf.wk");
  n.wh = b.mat("dec.cnf.wh");
  n.b1 = b.mat("dec.cnf.b1");
  n.w2 = b.mat("dec.cnf.w2");
  n.b2 = b.scalar("dec.cnf.b2");
  return n;
}

// Field value and its exact tau-derivative (scalar state, so the trace is
// just df/dtau).
template <class S>
std::pair<S, S> cnf_field(const FlowField<S>& n, const S& tau, double k, const Vec<S>& h) {
  using std::tanh;
  Vec<S> u = n.wt * tau + n.wk * k + n.wh * h + n.b1;
  S f = S(0.0), df = S(0.0);
  for (Eigen::Index d = 0; d < u.size(); ++d) {
    S t = tanh(u(d));
    f += n.w2(0, d) * t;
    df += n.w2(0, d) * (S(1.0) - t * t) * n.wt(d, 0);
  }
  return {f + n.b2, df};
}

// RK4 transform from k0 to k1 (either direction).
template <class S>
S tccnf_transform(const S& z, const Vec<S>& h, const FlowField<S>& n, double k0, double k1,
                  int steps) {
  if (steps < 2) throw ConfigError("integrator needs at least 2 steps");
  const double dk = (k1 - k0) / steps;
  S x = z;
  for (int i = 0; i < steps; ++i) {
    const double k = k0 + dk * i;
    S f1 = cnf_field(n, x, k, h).first;
    S f2 = cnf_field(n, x + f1 * (dk / 2.0), k + dk / 2.0, h).first;
    S f3 = cnf_field(n, x + f2 * (dk / 2.0), k + dk / 2.0, h).first;
    S f4 = cnf_field(n, x + f3 * dk, k + dk, h).first;
    x = x + (f1 + f2 * 2.0 + f3 * 2.0 + f4) * (dk / 6.0);
    if (!std::isfinite(ad::value_of(x))) throw SamplerDiverged("tccnf trajectory diverged");
  }
  return x;
}

// NLL via the inverse trajectory: integrate [x, l] backward from (tau, 0) at
// k1 to k0; NLL = 0.5 ln 2pi + x(k0)^2/2 - l(k0) where dl/dk = df/dtau.
template <class S>
S tccnf_nll(double tau, const Vec<S>& h, const FlowField<S>& n, int steps, double k0 = 0.0,
            double k1 = 1.0) {
  if (steps < 2) throw ConfigError("integrator needs at least 2 steps");
  const double dk = (k0 - k1) / steps;
  S x = S(tau), l = S(0.0);
  for (int i = 0; i < steps; ++i) {
    const double k = k1 + dk * i;
    auto [f1, g1] = cnf_field(n, x, k, h);
    auto [f2, g2] = cnf_field(n, x + f1 * (dk / 2.0), k + dk / 2.0, h);
    auto [f3, g3] = cnf_field(n, x + f2 * (dk / 2.0), k + dk / 2.0, h);
    auto [f4, g4] = cnf_field(n, x + f3 * dk, k + dk, h);
    x = x + (f1 + f2 * 2.0 + f3 * 2.0 + f4) * (dk / 6.0);
    l = l + (g1 + g2 * 2.0 + g3 * 2.0 + g4) * (dk / 6.0);
    if (!std::isfinite(ad::value_of(x))) throw SamplerDiverged("tccnf trajectory diverged");
  }
  return S(0.5 * kLog2Pi) + x * x * 0.5 - l;
}

inline VecD tccnf_sample_z(const FlowField<double>& n, const VecD& h, int count, Rng& rng,
                           int steps, DynamicsCapture* cap = nullptr) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VecD x(count);
  for (int i = 0; i < count; ++i) x(i) = normal(rng);
  const VecD ch = n.wh * h + n.b1;
  const double dk = 1.0 / steps;
  auto field = [&](const VecD& state, double k) -> VecD {
    const VecD ck = ch + n.wk.col(0) * k;
    MatD u = ((n.wt * state.transpose()).colwise() + ck).array().tanh().matrix();
    return ((n.w2 * u).transpose().array() + n.b2).matrix();
  };
  if (cap && cap->every > 0) cap->frames.emplace_back(0.0, x);
  for (int i = 0; i < steps; ++i) {
    const double k = dk * i;
    VecD f1 = field(x, k);
    VecD f2 = field(x + f1 * (dk / 2.0), k + dk / 2.0);
    VecD f3 = field(x + f2 * (dk / 2.0), k + dk / 2.0);
    VecD f4 = field(x + f3 * dk, k + dk);
    x += (f1 + 2.0 * f2 + 2.0 * f3 + f4) * (dk / 6.0);
    if (!x.allFinite()) throw SamplerDiverged("tccnf chain diverged");
    if (cap && cap->every > 0 && ((i + 1) % cap->every == 0 || i + 1 == steps))
      cap->frames.emplace_back(k + dk, x);
  }
  return x;
}

inline VecD tccnf_sample(const FlowField<double>& n, const VecD& h, int count, Rng& rng,
                         int steps, const LogNormStats& stats) {
  VecD z = tccnf_sample_z(n, h, count, rng, steps);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = log_denormalize(z(i), stats);
  return z;
}

// ---------------------------------------------------------------------------
// TCNSN: denoising score matching over a geometric noise ladder

struct NoiseLadder {
  VecD sigma;  // strictly decreasing
  VecD alpha;  // Langevin step sizes
};

inline NoiseLadder make_ladder(int K, double sigma_max = 1.0, double sigma_min = 0.01,
                               double eps = 2e-5) {
  if (K < 1) throw ConfigError("score levels must be >= 1");
  NoiseLadder l;
  l.sigma.resize(K);
  l.alpha.resize(K);
  const double rho = K == 1 ? 1.0 : std::pow(sigma_min / sigma_max, 1.0 / (K - 1));
  for (int k = 0; k < K; ++k) {
    l.sigma(k) = sigma_max * std::pow(rho, k);
    l.alpha(k) = eps * l.sigma(k) * l.sigma(k) / (sigma_min * sigma_min);
  }
  return l;
}

template <class S>
struct ScoreNet {
  Mat<S> wt, wh, w2;
  Vec<S> b1;
  S b2;
};

inline void register_nsn_params(const DecoderConfig& cfg, ParamStore& ps, Rng& rng) {
  const int D = cfg.embed_dim;
  ps.add_linear("dec.nsn.wt", D, 1, rng);
  ps.add_linear("dec.nsn.wh", D, D, rng);
  ps.add_bias("dec.nsn.b1", D);
  ps.add_linear("dec.nsn.w2", 1, D, rng);
  ps.add_scalar("dec.nsn.b2", 0.0);
}

template <class S>
ScoreNet<S> bind_nsn(Binder<S>& b) {
  ScoreNet<S> n;
  n.wt = b.mat("dec.nsn.wt");
  n.wh = b.mat("dec.nsn.wh");
  n.b1 = b.mat("dec.nsn.b1");
  n.w2 = b.mat("dec.nsn.w2");
  n.b2 = b.scalar("dec.nsn.b2");
  return n;
}

template <class S>
S nsn_net(const ScoreNet<S>& n, const S& tau, const Vec<S>& h) {
  using std::tanh;
  Vec<S> u = n.wt * tau + n.wh * h + n.b1;
  for (Eigen::Index d = 0; d < u.size(); ++d) u(d) = tanh(u(d));
  return (n.w2 * u)(0) + n.b2;
}

// Score is sigma-scaled: s_theta(tau; sigma | h) = net(tau, h) / sigma.
// Loss: (sigma_k^2 / 2) * (s/sigma_k + (tau~ - tau)/sigma_k^2)^2 with
// tau~ = tau + sigma_k * eps.
template <class S>
S tcnsn_loss(double z, const Vec<S>& h, const ScoreNet<S>& net, const NoiseLadder& ladder, int k,
             double eps) {
  const double sigma = ladder.sigma(k - 1);
  const double tau_t = z + sigma * eps;
  S s = nsn_net(net, S(tau_t), h) / sigma;
  S term = s / sigma + S((tau_t - z) / (sigma * sigma));
  return term * term * (sigma * sigma / 2.0);
}

// Batch score callable: maps (states, sigma) -> per-state score values.
using BatchScore = std::function<VecD(const VecD&, double)>;

inline BatchScore make_net_score(const ScoreNet<double>& n, const VecD& h) {
  VecD ch = n.wh * h + n.b1;
  return [n, ch](const VecD& x, double sigma) -> VecD {
    MatD u = ((n.wt * x.transpose()).colwise() + ch).array().tanh().matrix();
    VecD out = ((n.w2 * u).transpose().array() + n.b2).matrix();
    return out / sigma;
  };
}

// Annealed Langevin sampling in z space:
// tau^k = tau^{k-1} + alpha_k s(tau^{k-1}; sigma_k) + sqrt(2 alpha_k) z.
inline VecD tcnsn_sample_z(const BatchScore& score, const NoiseLadder& ladder, int inner_steps,
                           int count, Rng& rng, DynamicsCapture* cap = nullptr) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VecD x(count);
  for (int i = 0; i < count; ++i) x(i) = normal(rng);
  const int K = static_cast<int>(ladder.sigma.size());
  if (cap && cap->every > 0) cap->frames.emplace_back(0.0, x);
  for (int k = 0; k < K; ++k) {
    const double alpha = ladder.alpha(k);
    const double noise_scale = std::sqrt(2.0 * alpha);
    for (int it = 0; it < inner_steps; ++it) {
      const VecD s = score(x, ladder.sigma(k));
      for (int i = 0; i < count; ++i) x(i) += alpha * s(i) + noise_scale * normal(rng);
    }
    if (!x.allFinite())
      throw SamplerDiverged("tcnsn chain diverged at level " + std::to_string(k + 1));
    if (cap && cap->every > 0 && ((k + 1) % cap->every == 0 || k + 1 == K))
      cap->frames.emplace_back(static_cast<double>(k + 1), x);
  }
  return x;
}

inline VecD tcnsn_sample(const ScoreNet<double>& n, const VecD& h, const NoiseLadder& ladder,
                         int inner_steps, int count, Rng& rng, const LogNormStats& stats) {
  VecD z = tcnsn_sample_z(make_net_score(n, h), ladder, inner_steps, count, rng);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = log_denormalize(z(i), stats);
  return z;
}

// ---------------------------------------------------------------------------
// Deterministic head: tau_hat = softplus(w) . h + softplus(b)

template <class S>
struct DeterHead {
  Vec<S> w;
  S b;
};

inline void register_deter_params(const DecoderConfig& cfg, ParamStore& ps, Rng& rng) {
  ps.add_linear("dec.deter.w", cfg.embed_dim, 1, rng);
  ps.add_scalar("dec.deter.b", 0.0);
}

template <class S>
DeterHead<S> bind_deter(Binder<S>& b) {
  return DeterHead<S>{b.mat("dec.deter.w"), b.scalar("dec.deter.b")};
}

// Raw affine output used by the squared-error training loss.
template <class S>
S deter_output(const DeterHead<S>& d, const Vec<S>& h) {
  S out = softplus(d.b);
  for (Eigen::Index i = 0; i < d.w.size(); ++i) out += softplus(d.w(i)) * h(i);
  return out;
}

inline double deter_predict(const DeterHead<double>& d, const VecD& h) {
  return std::max(deter_output(d, h), kTauFloor);
}

}  // namespace tpp::dec
