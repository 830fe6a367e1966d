// Acceptance gate: eight numbered criteria, each printing one PASS/FAIL line.
// Run with no arguments for the full gate or with an index (1-8) for one
// criterion. Exit code 0 iff every executed criterion passes.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tppkit/diagnostics.hpp"
#include "tppkit/hawkes.hpp"
#include "tppkit/metrics.hpp"
#include "tppkit/mixtures.hpp"
#include "tppkit/model.hpp"
#include "tppkit/training.hpp"

namespace ad = tpp::ad;
namespace dec = tpp::dec;
namespace enc = tpp::enc;
namespace diag = tpp::diag;
namespace hawkes = tpp::hawkes;
using tpp::MatD;
using tpp::VecD;

namespace {

struct Gate {
  int checks = 0;
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& what) { notes.push_back(what); }
  bool ok() const { return failures.empty(); }
};

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

VecD randn(int n, tpp::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VecD v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

double sample_var(const VecD& x) {
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness: every decoder loss against central differences.

void criterion_1(Gate& g) {
  constexpr int kD = 8;
  constexpr int kInstances = 20;
  const auto sched = dec::make_linear_schedule(20);
  const auto ladder = dec::make_ladder(20);

  struct Case {
    const char* name;
    // seeds a fresh store and returns the loss functional for one instance
    std::function<tpp::FdReport(std::uint64_t)> run;
  };

  auto mixture_case = [&](dec::MixtureFamily fam) {
    return [&, fam](std::uint64_t seed) {
      dec::DecoderConfig cfg;
      cfg.embed_dim = kD;
      tpp::ParamStore ps;
      tpp::Rng rng = tpp::make_rng(seed);
      dec::register_mixture_params(cfg, ps, rng);
      const VecD h = randn(kD, rng);
      std::normal_distribution<double> normal(0.0, 1.0);
      const double tau = std::abs(normal(rng)) + 0.05;
      auto loss = [&, tau]<class B>(B& b) {
        using S = typename B::Scalar;
        auto head = dec::bind_mixture(b, fam);
        tpp::Vec<S> hv = tpp::to_vec<S>(h);
        return dec::mixture_nll(dec::mixture_params(head, hv), fam, tau);
      };
      return tpp::finite_diff_check(ps, loss, 1e-5, 1e-4);
    };
  };

  const std::vector<Case> cases = {
      {"tcddm", [&](std::uint64_t seed) {
         dec::DecoderConfig cfg;
         cfg.embed_dim = kD;
         cfg.diffusion_steps = 20;
         tpp::ParamStore ps;
         tpp::Rng rng = tpp::make_rng(seed);
         dec::register_eps_params(cfg, ps, rng);
         const VecD h = randn(kD, rng);
         std::normal_distribution<double> normal(0.0, 1.0);
         std::uniform_int_distribution<int> pick(1, 20);
         const double z0 = normal(rng), e0 = normal(rng);
         const double z1 = normal(rng), e1 = normal(rng);
         const int k0 = pick(rng), k1 = pick(rng);
         auto loss = [&, z0, e0, z1, e1, k0, k1]<class B>(B& b) {
           using S = typename B::Scalar;
           auto net = dec::bind_eps(b);
           tpp::Vec<S> hv = tpp::to_vec<S>(h);
           S total = dec::tcddm_loss(z0, hv, net, sched, k0, e0, false);
           total += dec::tcddm_loss(z1, hv, net, sched, k1, e1, true);
           return total;
         };
         return tpp::finite_diff_check(ps, loss, 1e-5, 1e-4);
       }},
      {"tcvae", [&](std::uint64_t seed) {
         dec::DecoderConfig cfg;
         cfg.embed_dim = kD;
         tpp::ParamStore ps;
         tpp::Rng rng = tpp::make_rng(seed);
         dec::register_vae_params(cfg, ps, rng);
         const VecD h = randn(kD, rng);
         const VecD noise = randn(kD, rng);
         std::normal_distribution<double> normal(0.0, 1.0);
         const double z = normal(rng);
         auto loss = [&, z]<class B>(B& b) {
           using S = typename B::Scalar;
           auto nets = dec::bind_vae(b);
           tpp::Vec<S> hv = tpp::to_vec<S>(h);
           return dec::tcvae_loss(z, hv, nets, noise);
         };
         return tpp::finite_diff_check(ps, loss, 1e-5, 1e-4);
       }},
      {"tcgan-critic", [&](std::uint64_t seed) {
         dec::DecoderConfig cfg;
         cfg.embed_dim = kD;
         tpp::ParamStore ps;
         tpp::Rng rng = tpp::make_rng(seed);
         dec::register_gan_params(cfg, ps, rng);
         const VecD h = randn(kD, rng);
         const VecD zlat = randn(kD, rng);
         std::normal_distribution<double> normal(0.0, 1.0);
         const double z = normal(rng);
         auto loss = [&, z]<class B>(B& b) {
           using S = typename B::Scalar;
           auto nets = dec::bind_gan(b);
           tpp::Vec<S> hv = tpp::to_vec<S>(h);
           return dec::tcgan_losses(z, hv, nets, 1.0, zlat).critic;
         };
         return tpp::finite_diff_check(ps, loss, 1e-5, 1e-4);
       }},
      {"tcgan-generator", [&](std::uint64_t seed) {
         dec::DecoderConfig cfg;
         cfg.embed_dim = kD;
         tpp::ParamStore ps;
         tpp::Rng rng = tpp::make_rng(seed);
         dec::register_gan_params(cfg, ps, rng);
         const VecD h = randn(kD, rng);
         const VecD zlat = randn(kD, rng);
         std::normal_distribution<double> normal(0.0, 1.0);
         const double z = normal(rng);
         auto loss = [&, z]<class B>(B& b) {
           using S = typename B::Scalar;
           auto nets = dec::bind_gan(b);
           tpp::Vec<S> hv = tpp::to_vec<S>(h);
           return dec::tcgan_losses(z, hv, nets, 1.0, zlat).generator;
         };
         return tpp::finite_diff_check(ps, loss, 1e-5, 1e-4);
       }},
      {"tccnf", [&](std::uint64_t seed) {
         dec::DecoderConfig cfg;
         cfg.embed_dim = kD;
         tpp::ParamStore ps;
         tpp::Rng rng = tpp::make_rng(seed);
         dec::register_cnf_params(cfg, ps, rng);
         const VecD h = randn(kD, rng);
         std::normal_distribution<double> normal(0.0, 1.0);
         const double z = normal(rng);
         auto loss = [&, z]<class B>(B& b) {
           using S = typename B::Scalar;
           auto field = dec::bind_cnf(b);
           tpp::Vec<S> hv = tpp::to_vec<S>(h);
           return dec::tccnf_nll(z, hv, field, 20);
         };
         return tpp::finite_diff_check(ps, loss, 1e-5, 1e-4);
       }},
      {"tcnsn", [&](std::uint64_t seed) {
         dec::DecoderConfig cfg;
         cfg.embed_dim = kD;
         tpp::ParamStore ps;
         tpp::Rng rng = tpp::make_rng(seed);
         dec::register_nsn_params(cfg, ps, rng);
         const VecD h = randn(kD, rng);
         std::normal_distribution<double> normal(0.0, 1.0);
         std::uniform_int_distribution<int> pick(1, 20);
         const double z = normal(rng), eps = normal(rng);
         const int k = pick(rng);
         auto loss = [&, z, eps, k]<class B>(B& b) {
           using S = typename B::Scalar;
           auto net = dec::bind_nsn(b);
           tpp::Vec<S> hv = tpp::to_vec<S>(h);
           return dec::tcnsn_loss(z, hv, net, ladder, k, eps);
         };
         return tpp::finite_diff_check(ps, loss, 1e-5, 1e-4);
       }},
      {"mix-gaussian", mixture_case(dec::MixtureFamily::kGaussian)},
      {"mix-lognorm", mixture_case(dec::MixtureFamily::kLogNormal)},
      {"mix-gompertz", mixture_case(dec::MixtureFamily::kGompertz)},
      {"mix-weibull", mixture_case(dec::MixtureFamily::kWeibull)},
      {"deterministic", [&](std::uint64_t seed) {
         dec::DecoderConfig cfg;
         cfg.embed_dim = kD;
         tpp::ParamStore ps;
         tpp::Rng rng = tpp::make_rng(seed);
         dec::register_deter_params(cfg, ps, rng);
         const VecD h = randn(kD, rng);
         std::normal_distribution<double> normal(0.0, 1.0);
         const double tau = std::abs(normal(rng)) + 0.05;
         auto loss = [&, tau]<class B>(B& b) {
           using S = typename B::Scalar;
           auto head = dec::bind_deter(b);
           tpp::Vec<S> hv = tpp::to_vec<S>(h);
           S diff = dec::deter_output(head, hv) - S(tau);
           return diff * diff;
         };
         return tpp::finite_diff_check(ps, loss, 1e-5, 1e-4);
       }},
      {"mark-ce", [&](std::uint64_t seed) {
         tpp::ParamStore ps;
         tpp::Rng rng = tpp::make_rng(seed);
         tpp::register_mark_params(5, kD, ps, rng);
         const VecD h = randn(kD, rng);
         std::uniform_int_distribution<int> pick(0, 4);
         const int mark = pick(rng);
         auto loss = [&, mark]<class B>(B& b) {
           using S = typename B::Scalar;
           auto head = tpp::bind_mark<S>(b);
           tpp::Vec<S> hv = tpp::to_vec<S>(h);
           return tpp::mark_nll(head, hv, mark);
         };
         return tpp::finite_diff_check(ps, loss, 1e-5, 1e-4);
       }},
  };

  for (const auto& c : cases) {
    double worst = 0.0;
    bool all = true;
    for (int i = 0; i < kInstances; ++i) {
      const auto rep = c.run(1000 + 37 * i);
      worst = std::max(worst, rep.max_rel_err);
      all = all && rep.pass;
    }
    g.expect(all, std::string(c.name) + ": max rel err " + fmt(worst) + " over " +
                      std::to_string(kInstances) + " instances (tol 1e-4)");
    g.note(std::string(c.name) + " max rel err " + fmt(worst));
  }
}

// ---------------------------------------------------------------------------
// 2. Simulator fidelity: Poisson degeneration and unit-exponential rescaling.

void criterion_2(Gate& g) {
  hawkes::Model m;
  m.num_marks = 1;
  m.mu = {0.5};
  m.g = {{hawkes::Kind::kZero}};
  const double horizon = 40.0, lam_t = 20.0;
  const int runs = 1000;
  tpp::Rng rng = tpp::make_rng(2024);
  double total = 0.0;
  for (int r = 0; r < runs; ++r)
    total += static_cast<double>(hawkes::simulate(m, horizon, rng).t.size());
  const double mean = total / runs;
  const double band = 3.0 * std::sqrt(lam_t / runs);
  g.expect(std::abs(mean - lam_t) < band, "degenerate count mean " + fmt(mean) + " vs " +
                                              fmt(lam_t) + " (band " + fmt(band) + ")");
  g.note("poisson mean " + fmt(mean) + ", band " + fmt(band));

  hawkes::SynthConfig sc;
  sc.num_marks = 5;
  sc.num_seqs = 200;
  sc.horizon = 10.0;
  sc.mu = 0.1;
  sc.cutting_ratio = 0.2;
  sc.seed = 11;
  const auto synth = hawkes::generate_synthetic(sc);
  std::vector<double> lam;
  for (const auto& seq : synth.data.seqs) {
    const auto seg = hawkes::compensator_segments(synth.model, seq);
    lam.insert(lam.end(), seg.begin(), seg.end());
  }
  g.expect(lam.size() >= 5000, "compensator segments: " + std::to_string(lam.size()) + " < 5000");
  const auto q = tpp::qqp_dev(lam);
  g.expect(q.value < 0.05, "true-model QQP deviation " + fmt(q.value) + " >= 0.05");
  g.note("qqp " + fmt(q.value) + " over " + std::to_string(q.n) + " segments");
}

// ---------------------------------------------------------------------------
// 3. Diffusion mechanics: forward-marginal variance and the zero-net chain.

void criterion_3(Gate& g) {
  const auto sched = dec::make_linear_schedule(100);
  const int n = 10000;
  tpp::Rng rng = tpp::make_rng(333);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k : {1, 50, 100}) {
    VecD draws(n);
    for (int i = 0; i < n; ++i) draws(i) = dec::forward_marginal(0.7, k, sched, normal(rng));
    const double want = 1.0 - sched.abar(k - 1);
    const double got = sample_var(draws);
    const double band = 3.0 * want * std::sqrt(2.0 / (n - 1));
    g.expect(std::abs(got - want) < band, "forward variance at k=" + std::to_string(k) + ": " +
                                              fmt(got) + " vs " + fmt(want) + " (band " +
                                              fmt(band) + ")");
  }

  // zero network: the reverse chain must reduce to the affine noise recursion
  dec::DecoderConfig cfg;
  cfg.embed_dim = 8;
  cfg.diffusion_steps = 100;
  tpp::ParamStore ps;
  tpp::Rng reg = tpp::make_rng(12);
  dec::register_eps_params(cfg, ps, reg);
  for (const auto& e : ps.entries()) ps.value(e.name).setZero();
  tpp::Binder<double> b(ps);
  const auto net = dec::bind_eps(b);
  const VecD h = VecD::Zero(8);
  const int chains = 32;

  tpp::Rng r1 = tpp::make_rng(303);
  const VecD got = dec::tcddm_sample_z(net, h, sched, chains, r1);

  tpp::Rng r2 = tpp::make_rng(303);
  std::vector<double> x(chains);
  for (int i = 0; i < chains; ++i) x[i] = normal(r2);
  for (int k = sched.K; k >= 1; --k) {
    const double inv_sqrt_a = 1.0 / std::sqrt(sched.alpha(k - 1));
    const double sigma = std::sqrt(sched.btilde(k - 1));
    for (int i = 0; i < chains; ++i) {
      const double z = k > 1 ? normal(r2) : 0.0;
      x[i] = x[i] * inv_sqrt_a + sigma * z;
    }
  }
  bool bitwise = true;
  for (int i = 0; i < chains; ++i) bitwise = bitwise && got(i) == x[i];
  g.expect(bitwise, "zero-net chain deviates from the hand recursion");
}

// ---------------------------------------------------------------------------
// 4. Distribution recovery on i.i.d. LogNormal(0,1) intervals with constant
//    (zero) history; TCNSN is checked for its variance-explosion signature.

void criterion_4(Gate& g) {
  constexpr int kD = 8;
  constexpr int kN = 2000;
  constexpr int kBatch = 250;
  constexpr int kDraws = 4000;
  const double want_mean = std::exp(0.5);

  tpp::Rng data_rng = tpp::make_rng(41);
  std::normal_distribution<double> normal(0.0, 1.0);
  VecD tau(kN);
  for (int i = 0; i < kN; ++i) tau(i) = std::exp(normal(data_rng));

  tpp::LogNormStats stats;
  double acc = 0.0;
  for (int i = 0; i < kN; ++i) acc += std::log(tau(i));
  stats.mean_log = acc / kN;
  acc = 0.0;
  for (int i = 0; i < kN; ++i) {
    const double d = std::log(tau(i)) - stats.mean_log;
    acc += d * d;
  }
  stats.var_log = acc / kN;
  std::vector<double> z(kN);
  for (int i = 0; i < kN; ++i) z[i] = tpp::log_normalize(tau(i), stats);

  const VecD h0 = VecD::Zero(kD);
  dec::DecoderConfig cfg;
  cfg.embed_dim = kD;
  cfg.cnf_steps = 20;
  const auto sched = dec::make_linear_schedule(cfg.diffusion_steps, cfg.beta_min, cfg.beta_max);
  const auto ladder =
      dec::make_ladder(cfg.score_levels, cfg.sigma_max, cfg.sigma_min, cfg.langevin_eps);

  // decoder-only training on the normalized targets
  auto fit = [&](dec::DecoderKind kind, int epochs, double lr) {
    tpp::ParamStore ps;
    tpp::Rng rng = tpp::make_rng(700 + static_cast<int>(kind));
    switch (kind) {
      case dec::DecoderKind::kTcddm: dec::register_eps_params(cfg, ps, rng); break;
      case dec::DecoderKind::kTcvae: dec::register_vae_params(cfg, ps, rng); break;
      case dec::DecoderKind::kTccnf: dec::register_cnf_params(cfg, ps, rng); break;
      case dec::DecoderKind::kTcnsn: dec::register_nsn_params(cfg, ps, rng); break;
      default: throw tpp::ConfigError("criterion 4 covers the generative decoders only");
    }
    std::uniform_int_distribution<int> pick_k(1, cfg.diffusion_steps);
    std::uniform_int_distribution<int> pick_level(1, cfg.score_levels);
    std::vector<int> order(kN);
    std::iota(order.begin(), order.end(), 0);
    ad::Tape tape;
    for (int e = 0; e < epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (int start = 0; start < kN; start += kBatch) {
        tape.clear();
        ad::TapeScope scope(tape);
        tpp::Binder<ad::Value> b(ps);
        tpp::Vec<ad::Value> hv = tpp::to_vec<ad::Value>(h0);
        ad::Value obj(0.0);
        const int stop = std::min(start + kBatch, kN);
        for (int j = start; j < stop; ++j) {
          const double zj = z[order[j]];
          switch (kind) {
            case dec::DecoderKind::kTcddm:
              obj += dec::tcddm_loss(zj, hv, dec::bind_eps(b), sched, pick_k(rng), normal(rng),
                                     cfg.weighted_loss);
              break;
            case dec::DecoderKind::kTcvae:
              obj += dec::tcvae_loss(zj, hv, dec::bind_vae(b), randn(kD, rng));
              break;
            case dec::DecoderKind::kTccnf:
              obj += dec::tccnf_nll(zj, hv, dec::bind_cnf(b), cfg.cnf_steps);
              break;
            default:
              obj += dec::tcnsn_loss(zj, hv, dec::bind_nsn(b), ladder, pick_level(rng),
                                     normal(rng));
              break;
          }
        }
        obj = obj * (1.0 / (stop - start));
        if (!std::isfinite(obj.value())) throw tpp::NonFiniteLoss("criterion 4 loss not finite");
        tape.backward(obj.index());
        ps.adam_step(b.grads(), lr);
      }
    }
    return ps;
  };

  auto check_recovery = [&](const char* name, tpp::ParamStore& ps, dec::DecoderKind kind) {
    tpp::Binder<double> b(ps);
    tpp::Rng rng = tpp::make_rng(501 + static_cast<int>(kind));
    VecD zs;
    switch (kind) {
      case dec::DecoderKind::kTcddm:
        zs = dec::tcddm_sample_z(dec::bind_eps(b), h0, sched, kDraws, rng);
        break;
      case dec::DecoderKind::kTcvae:
        zs = dec::tcvae_sample_z(dec::bind_vae(b), h0, kDraws, rng);
        break;
      default: zs = dec::tccnf_sample_z(dec::bind_cnf(b), h0, kDraws, rng, cfg.cnf_steps); break;
    }
    VecD taus(kDraws);
    for (int i = 0; i < kDraws; ++i) taus(i) = tpp::log_denormalize(zs(i), stats);
    const double mean = taus.mean();
    diag::OracleSpec oracle;
    oracle.family = diag::OracleFamily::kLogNormal;
    const double ks = diag::ks_statistic(taus, [&](double x) { return oracle.cdf(x); });
    g.expect(std::abs(mean - want_mean) <= 0.10 * want_mean,
             std::string(name) + " mean " + fmt(mean) + " vs " + fmt(want_mean) + " (10% band)");
    g.expect(ks < 0.08, std::string(name) + " KS " + fmt(ks) + " >= 0.08");
    g.note(std::string(name) + " mean " + fmt(mean) + ", ks " + fmt(ks));
  };

  auto ps_ddm = fit(dec::DecoderKind::kTcddm, 100, 3e-3);
  check_recovery("tcddm", ps_ddm, dec::DecoderKind::kTcddm);
  auto ps_vae = fit(dec::DecoderKind::kTcvae, 100, 3e-3);
  check_recovery("tcvae", ps_vae, dec::DecoderKind::kTcvae);
  auto ps_cnf = fit(dec::DecoderKind::kTccnf, 60, 3e-3);
  check_recovery("tccnf", ps_cnf, dec::DecoderKind::kTccnf);

  // TCNSN: exempt from the recovery bound; its annealed-Langevin chain must
  // show the variance blow-up relative to both its own endpoint and the
  // denoising chain.
  auto ps_nsn = fit(dec::DecoderKind::kTcnsn, 60, 3e-3);
  tpp::Binder<double> bn(ps_nsn);
  dec::DynamicsCapture cap_nsn;
  cap_nsn.every = 1;
  tpp::Rng rn = tpp::make_rng(881);
  dec::tcnsn_sample_z(dec::make_net_score(dec::bind_nsn(bn), h0), ladder, cfg.langevin_steps, 512,
                      rn, &cap_nsn);
  double nsn_max = 0.0;
  for (const auto& f : cap_nsn.frames) nsn_max = std::max(nsn_max, sample_var(f.second));
  const double nsn_final = sample_var(cap_nsn.frames.back().second);

  tpp::Binder<double> bd(ps_ddm);
  dec::DynamicsCapture cap_ddm;
  cap_ddm.every = 1;
  tpp::Rng rd = tpp::make_rng(882);
  dec::tcddm_sample_z(dec::bind_eps(bd), h0, sched, 512, rd, &cap_ddm);
  double ddm_max = 0.0;
  for (const auto& f : cap_ddm.frames) ddm_max = std::max(ddm_max, sample_var(f.second));

  g.expect(nsn_max > 10.0 * ddm_max, "tcnsn variance peak " + fmt(nsn_max) +
                                         " not an order beyond tcddm peak " + fmt(ddm_max));
  g.expect(nsn_max > 10.0, "tcnsn variance peak " + fmt(nsn_max) +
                               " not an order beyond the unit target variance");
  g.note("tcnsn var peak " + fmt(nsn_max) + ", final " + fmt(nsn_final) + "; tcddm peak " +
         fmt(ddm_max));
}

// ---------------------------------------------------------------------------
// 5. Decoder ordering on the reduced synthetic benchmark, averaged over
//    three training seeds.

void criterion_5(Gate& g) {
  hawkes::SynthConfig sc;
  sc.num_marks = 5;
  sc.num_seqs = 500;
  sc.horizon = 10.0;
  sc.mu = 0.1;
  sc.cutting_ratio = 0.2;
  sc.seed = 7;
  const auto synth = hawkes::generate_synthetic(sc);

  tpp::SplitResult sp = tpp::split(synth.data, 0);
  const double t_raw = tpp::max_time(sp.train);
  tpp::rescale_time(sp.train, t_raw);
  tpp::rescale_time(sp.val, t_raw);
  tpp::rescale_time(sp.test, t_raw);
  const tpp::LogNormStats stats = tpp::compute_stats(sp.train);

  auto run_decoder = [&](dec::DecoderKind kind, std::uint64_t seed) {
    tpp::ModelConfig mc;
    mc.encoder.embed_dim = 8;
    mc.encoder.layers = 1;
    mc.encoder.num_marks = 5;
    mc.decoder.kind = kind;
    mc.decoder.embed_dim = 8;
    tpp::TrainConfig tc;
    tc.lr = 1e-3;
    tc.max_epochs = 30;
    tc.patience = 30;
    tc.batch_size = 16;
    tc.seed = seed;
    const auto run = tpp::train_model(mc, sp.train, sp.val, stats, tc);
    g.expect(!run.aborted, std::string(dec::to_string(kind)) + " seed " + std::to_string(seed) +
                               " aborted on a non-finite loss");
    tpp::Rng erng = tpp::make_rng(9);
    return tpp::evaluate_model(mc, run.params, sp.test, stats, tpp::EvalConfig{30}, erng);
  };

  double mape_ddm = 0.0, mape_nsn = 0.0, crps_ddm = 0.0, crps_nsn = 0.0;
  const std::array<std::uint64_t, 3> seeds = {1, 2, 3};
  for (const auto seed : seeds) {
    const auto rd = run_decoder(dec::DecoderKind::kTcddm, seed);
    const auto rn = run_decoder(dec::DecoderKind::kTcnsn, seed);
    mape_ddm += rd.mape / seeds.size();
    mape_nsn += rn.mape / seeds.size();
    crps_ddm += rd.crps / seeds.size();
    crps_nsn += rn.crps / seeds.size();
    g.note("seed " + std::to_string(seed) + ": tcddm mape " + fmt(rd.mape) + " crps " +
           fmt(rd.crps) + "; tcnsn mape " + fmt(rn.mape) + " crps " + fmt(rn.crps));
  }
  g.expect(mape_ddm < mape_nsn,
           "mean MAPE: tcddm " + fmt(mape_ddm) + " not below tcnsn " + fmt(mape_nsn));
  g.expect(mape_ddm <= 15.0, "mean MAPE tcddm " + fmt(mape_ddm) + " above 15");
  g.expect(crps_ddm < crps_nsn,
           "mean CRPS: tcddm " + fmt(crps_ddm) + " not below tcnsn " + fmt(crps_nsn));
  g.note("means: tcddm mape " + fmt(mape_ddm) + " crps " + fmt(crps_ddm) + "; tcnsn mape " +
         fmt(mape_nsn) + " crps " + fmt(crps_nsn));
}

// ---------------------------------------------------------------------------
// 6. Revised-attention properties.

void criterion_6(Gate& g) {
  auto make_seq = [](std::initializer_list<double> ts, std::initializer_list<int> ms) {
    tpp::EventSequence s;
    s.t = ts;
    s.m = ms;
    return s;
  };

  {  // (a) one mark + zero decay reduces to plain attention
    enc::EncoderConfig rev;
    rev.kind = enc::EncoderKind::kRevAtt;
    rev.embed_dim = 8;
    rev.num_marks = 1;
    tpp::ParamStore ps;
    tpp::Rng rng = tpp::make_rng(23);
    enc::register_params(rev, ps, rng);
    ps.value("enc.rev.a")(0, 0) = 0.0;
    tpp::Binder<double> b(ps);
    auto er = enc::bind_encoder(rev, b);
    enc::EncoderConfig att = rev;
    att.kind = enc::EncoderKind::kAtt;
    auto ea = enc::bind_encoder(att, b);
    const auto seq = make_seq({0.3, 0.9, 2.4, 2.9, 4.0}, {0, 0, 0, 0, 0});
    const auto hr = enc::encode_history(er, seq);
    const auto ha = enc::encode_history(ea, seq);
    double worst = 0.0;
    for (std::size_t i = 0; i < hr.size(); ++i)
      worst = std::max(worst, (hr[i] - ha[i]).cwiseAbs().maxCoeff());
    g.expect(worst < 1e-12, "revised attention differs from plain attention by " + fmt(worst));
    g.note("reduction gap " + fmt(worst));
  }

  {  // (b) zero-similarity pairs are masked out
    enc::EncoderConfig cfg;
    cfg.kind = enc::EncoderKind::kRevAtt;
    cfg.embed_dim = 4;
    cfg.num_marks = 2;
    tpp::ParamStore ps;
    tpp::Rng rng = tpp::make_rng(2);
    enc::register_params(cfg, ps, rng);
    ps.value("enc.emb").setZero();
    ps.value("enc.emb")(0, 0) = 1.0;
    ps.value("enc.emb")(1, 1) = 1.0;
    tpp::Binder<double> b(ps);
    auto e = enc::bind_encoder(cfg, b);
    const auto seq = make_seq({1.0, 2.0}, {0, 1});
    const auto w = enc::attention_weights(e, seq);
    g.expect(w[1](0) < 1e-30, "masked pair weight " + fmt(w[1](0)) + " >= 1e-30");
    g.note("masked weight " + fmt(w[1](0)));
  }

  {  // (c) negative decay favours the more recent of two equal events
    enc::EncoderConfig cfg;
    cfg.kind = enc::EncoderKind::kRevAtt;
    cfg.embed_dim = 4;
    cfg.num_marks = 1;
    tpp::ParamStore ps;
    tpp::Rng rng = tpp::make_rng(2);
    enc::register_params(cfg, ps, rng);
    ps.value("enc.w1").setZero();
    ps.value("enc.w2").setZero();
    ps.value("enc.rev.a")(0, 0) = -0.7;
    ps.value("enc.att.l0.wq").setIdentity();
    ps.value("enc.att.l0.wk").setIdentity();
    tpp::Binder<double> b(ps);
    auto e = enc::bind_encoder(cfg, b);
    const auto w = enc::attention_weights(e, make_seq({1.0, 2.0}, {0, 0}));
    g.expect(w[1](1) > w[1](0), "recent-event weight " + fmt(w[1](1)) +
                                    " not above older weight " + fmt(w[1](0)));
    g.note("recent " + fmt(w[1](1)) + " vs old " + fmt(w[1](0)));
  }
}

// ---------------------------------------------------------------------------
// 7. Metric unit checks.

void criterion_7(Gate& g) {
  {
    VecD s(2);
    s << 1.0, 3.0;
    g.expect(tpp::crps_empirical(s, 2.0) == 0.5,
             "CRPS({1,3}, 2) = " + fmt(tpp::crps_empirical(s, 2.0)) + " != 0.5");
  }
  {
    const int n = 200000;
    tpp::Rng rng = tpp::make_rng(99);
    const VecD s = randn(n, rng);
    const double got = tpp::crps_empirical(s, 0.0);
    const double want = (std::sqrt(2.0) - 1.0) / std::sqrt(M_PI);
    g.expect(std::abs(got - want) <= 0.02 * want,
             "Gaussian CRPS " + fmt(got) + " vs analytic " + fmt(want) + " (2% band)");
    g.note("gaussian crps " + fmt(got) + " vs " + fmt(want));
  }
  {
    VecD pred(3), truth(3);
    pred << 110.0, 90.0, 5.0;
    truth << 100.0, 100.0, 0.0;
    const auto r = tpp::mape(pred, truth);
    g.expect(std::abs(r.value - 10.0) < 1e-12, "MAPE value " + fmt(r.value) + " != 10");
    g.expect(r.excluded == 1 && r.used == 2, "MAPE exclusion bookkeeping wrong");
    const auto scaled = tpp::mape(17.0 * pred, 17.0 * truth);
    g.expect(std::abs(scaled.value - r.value) < 1e-12, "MAPE not scale invariant");
  }
  {
    VecD p(4);
    p << 0.4, 0.3, 0.2, 0.1;
    bool monotone = true;
    for (int truth = 0; truth < 4; ++truth)
      for (int k = 1; k < 4; ++k)
        if (tpp::topk_hit(p, truth, k) && !tpp::topk_hit(p, truth, k + 1)) monotone = false;
    g.expect(monotone, "top-k hits are not monotone in k");
    VecD single(1);
    single << 1.0;
    g.expect(tpp::topk_hit(single, 0, 1), "single-class top-1 is not a guaranteed hit");
  }
}

// ---------------------------------------------------------------------------
// 8. Determinism and persistence.

void criterion_8(Gate& g) {
  hawkes::SynthConfig sc;
  sc.num_marks = 3;
  sc.num_seqs = 40;
  sc.horizon = 20.0;
  sc.mu = 0.1;
  sc.cutting_ratio = 0.2;
  sc.seed = 5;
  const auto synth = hawkes::generate_synthetic(sc);
  tpp::SplitResult sp = tpp::split(synth.data, 0);
  const double t_raw = tpp::max_time(sp.train);
  tpp::rescale_time(sp.train, t_raw);
  tpp::rescale_time(sp.val, t_raw);
  tpp::rescale_time(sp.test, t_raw);
  const tpp::LogNormStats stats = tpp::compute_stats(sp.train);

  tpp::ModelConfig mc;
  mc.encoder.embed_dim = 4;
  mc.encoder.num_marks = 3;
  mc.decoder.kind = dec::DecoderKind::kTcddm;
  mc.decoder.embed_dim = 4;
  mc.decoder.diffusion_steps = 20;

  const auto tmp = std::filesystem::temp_directory_path();
  const std::string log_a = (tmp / "tppkit-acc8-a.csv").string();
  const std::string log_b = (tmp / "tppkit-acc8-b.csv").string();
  const std::string ckpt = (tmp / "tppkit-acc8.ckpt").string();

  tpp::TrainConfig tc;
  tc.lr = 1e-3;
  tc.max_epochs = 3;
  tc.patience = 3;
  tc.batch_size = 16;
  tc.seed = 123;
  tc.log_path = log_a;
  const auto run_a = tpp::train_model(mc, sp.train, sp.val, stats, tc);
  tc.log_path = log_b;
  const auto run_b = tpp::train_model(mc, sp.train, sp.val, stats, tc);

  g.expect(run_a.train_curve == run_b.train_curve && run_a.val_curve == run_b.val_curve,
           "loss curves differ between identically seeded runs");
  auto flat = [](const tpp::ParamStore& ps) {
    std::ostringstream o;
    ps.write_flat(o);
    return o.str();
  };
  g.expect(flat(run_a.params) == flat(run_b.params),
           "trained weights differ between identically seeded runs");
  // Logs must agree on everything the seed controls; the trailing
  // wall-seconds column is wall-clock time and is dropped before comparing.
  auto seeded_columns = [](const std::string& p) {
    std::ifstream is(p);
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(is, line)) rows.push_back(line.substr(0, line.rfind(',')));
    return rows;
  };
  const auto rows_a = seeded_columns(log_a);
  g.expect(!rows_a.empty() && rows_a == seeded_columns(log_b),
           "training logs differ between identically seeded runs");

  tpp::save_checkpoint(ckpt, mc, run_a.params, stats);
  const auto ck = tpp::load_checkpoint(ckpt);
  tpp::Rng e1 = tpp::make_rng(5);
  tpp::Rng e2 = tpp::make_rng(5);
  const auto rep1 = tpp::evaluate_model(mc, run_a.params, sp.test, stats, tpp::EvalConfig{20}, e1);
  const auto rep2 =
      tpp::evaluate_model(ck.config, ck.params, sp.test, ck.stats, tpp::EvalConfig{20}, e2);
  const bool same = rep1.mape == rep2.mape && rep1.crps == rep2.crps && rep1.qqp == rep2.qqp &&
                    rep1.top1 == rep2.top1 && rep1.top3 == rep2.top3 &&
                    rep1.n_events == rep2.n_events;
  g.expect(same, "round-tripped checkpoint does not reproduce the evaluation bitwise");
  g.note("mape " + fmt(rep1.mape) + " == " + fmt(rep2.mape) + " after round trip");

  std::error_code ec;
  std::filesystem::remove(log_a, ec);
  std::filesystem::remove(log_b, ec);
  std::filesystem::remove(ckpt, ec);
}

}  // namespace

int main(int argc, char** argv) {
  struct Entry {
    const char* name;
    void (*fn)(Gate&);
  };
  const std::array<Entry, 8> criteria = {{
      {"gradient-checks", criterion_1},
      {"simulator-fidelity", criterion_2},
      {"diffusion-mechanics", criterion_3},
      {"distribution-recovery", criterion_4},
      {"decoder-ordering", criterion_5},
      {"attention-properties", criterion_6},
      {"metric-units", criterion_7},
      {"determinism-persistence", criterion_8},
  }};

  int only = 0;
  if (argc > 1) {
    only = std::atoi(argv[1]);
    if (only < 1 || only > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: %s [criterion 1-%zu]\n", argv[0], criteria.size());
      return 2;
    }
  }

  bool all_ok = true;
  for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) {
    if (only != 0 && i != only) continue;
    Gate gate;
    std::string error;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i - 1].fn(gate);
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = error.empty() && gate.ok();
    std::printf("criterion %d %-24s %s  (%d checks, %.1fs)\n", i, criteria[i - 1].name,
                pass ? "PASS" : "FAIL", gate.checks, secs);
    if (!error.empty()) std::printf("  ! error: %s\n", error.c_str());
    for (const auto& m : gate.failures) std::printf("  - %s\n", m.c_str());
    for (const auto& m : gate.notes) std::printf("    %s\n", m.c_str());
    std::fflush(stdout);
    all_ok = all_ok && pass;
  }
  return all_ok ? 0 : 1;
}
