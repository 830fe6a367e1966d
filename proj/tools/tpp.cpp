#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tppkit/diagnostics.hpp"
#include "tppkit/hawkes.hpp"
#include "tppkit/model.hpp"
#include "tppkit/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ModelFlags {
  std::string decoder = "tcddm";
  std::string encoder = "revatt";
  std::string time_enc = "additive";
  int embed_dim = 32;
  int layers = 1;
  int diffusion_steps = 100;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  bool weighted_loss = false;
  int score_levels = 1000;
  double sigma_max = 1.0;
  double sigma_min = 0.01;
  double langevin_eps = 2e-5;
  int langevin_steps = 5;
  int cnf_steps = 100;
  int mixture_components = 3;
  double gan_eta = 1.0;
  int critic_steps = 5;
};

void add_model_flags(CLI::App* cmd, ModelFlags& mf) {
  cmd->add_option("--decoder", mf.decoder, "Conditional decoder for the next interval")
      ->check(CLI::IsMember({"tcddm", "tcvae", "tcgan", "tccnf", "tcnsn", "gauss", "lognorm",
                             "gompertz", "weibull", "deter"}))
      ->capture_default_str();
  cmd->add_option("--encoder", mf.encoder, "History encoder")
      ->check(CLI::IsMember({"gru", "lstm", "att", "revatt"}))
      ->capture_default_str();
  cmd->add_option("--time-enc", mf.time_enc, "Time embedding placement for attention encoders")
      ->check(CLI::IsMember({"additive", "separate"}))
      ->capture_default_str();
  cmd->add_option("--embed-dim", mf.embed_dim, "History embedding width D (even)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--layers", mf.layers, "Attention stack depth")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--diffusion-steps", mf.diffusion_steps, "Diffusion chain length K")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--beta-min", mf.beta_min, "Linear schedule start")->capture_default_str();
  cmd->add_option("--beta-max", mf.beta_max, "Linear schedule end")->capture_default_str();
  cmd->add_flag("--weighted-loss", mf.weighted_loss,
                "Use the variational per-step weighting for the diffusion loss");
  cmd->add_option("--score-levels", mf.score_levels, "Noise-scale count for the score decoder")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--sigma-max", mf.sigma_max, "Largest score noise scale")
      ->capture_default_str();
  cmd->add_option("--sigma-min", mf.sigma_min, "Smallest score noise scale")
      ->capture_default_str();
  cmd->add_option("--langevin-eps", mf.langevin_eps, "Langevin base step size")
      ->capture_default_str();
  cmd->add_option("--langevin-steps", mf.langevin_steps, "Langevin iterations per noise level")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--cnf-steps", mf.cnf_steps, "Runge-Kutta steps for the flow decoder")
      ->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  cmd->add_option("--mixture-components", mf.mixture_components, "Mixture component count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--gan-eta", mf.gan_eta, "Lipschitz penalty weight")->capture_default_str();
  cmd->add_option("--critic-steps", mf.critic_steps, "Critic updates per generator update")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

tpp::ModelConfig to_config(const ModelFlags& mf, int num_marks) {
  tpp::ModelConfig cfg;
  cfg.encoder.kind = tpp::enc::encoder_from_string(mf.encoder);
  cfg.encoder.time_enc = tpp::enc::time_encoding_from_string(mf.time_enc);
  cfg.encoder.embed_dim = mf.embed_dim;
  cfg.encoder.layers = mf.layers;
  cfg.encoder.num_marks = num_marks;
  cfg.decoder.kind = tpp::dec::decoder_from_string(mf.decoder);
  cfg.decoder.embed_dim = mf.embed_dim;
  cfg.decoder.diffusion_steps = mf.diffusion_steps;
  cfg.decoder.beta_min = mf.beta_min;
  cfg.decoder.beta_max = mf.beta_max;
  cfg.decoder.weighted_loss = mf.weighted_loss;
  cfg.decoder.score_levels = mf.score_levels;
  cfg.decoder.sigma_max = mf.sigma_max;
  cfg.decoder.sigma_min = mf.sigma_min;
  cfg.decoder.langevin_eps = mf.langevin_eps;
  cfg.decoder.langevin_steps = mf.langevin_steps;
  cfg.decoder.cnf_steps = mf.cnf_steps;
  cfg.decoder.mixture_components = mf.mixture_components;
  cfg.decoder.gan_eta = mf.gan_eta;
  cfg.decoder.critic_steps = mf.critic_steps;
  cfg.validate();
  return cfg;
}

struct Prepared {
  tpp::SplitResult sp;
  tpp::LogNormStats stats;
  int num_marks = 0;
};

// Shared data pipeline: split, rescale every split by the training split's
// raw time span, compute interval statistics on the rescaled training data.
// stats.t_max keeps the RAW span so later runs can rescale new data the same
// way.
Prepared prepare(const std::string& path, std::uint64_t split_seed, bool lognorm_std) {
  tpp::Dataset ds = tpp::load_jsonl(path);
  Prepared p;
  p.num_marks = ds.num_marks;
  p.sp = tpp::split(ds, split_seed);
  const double t_raw = tpp::max_time(p.sp.train);
  tpp::rescale_time(p.sp.train, t_raw);
  tpp::rescale_time(p.sp.val, t_raw);
  tpp::rescale_time(p.sp.test, t_raw);
  p.stats = tpp::compute_stats(p.sp.train, lognorm_std);
  p.stats.t_max = t_raw;
  return p;
}

void write_similarity_csv(const tpp::ModelConfig& cfg, const tpp::ParamStore& ps,
                          const std::string& path) {
  tpp::MatD sim = tpp::enc::type_similarity(ps, cfg.encoder);
  std::ofstream os(path);
  if (!os) throw tpp::DataError("cannot open similarity file for writing: " + path);
  os.precision(17);
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    for (Eigen::Index j = 0; j < sim.cols(); ++j) os << (j ? "," : "") << sim(i, j);
    os << '\n';
  }
}

void write_report(const tpp::EvalReport& r, const std::string& path) {
  json j{{"mape", r.mape},
         {"crps", r.crps},
         {"qqp_dev", r.qqp},
         {"top1_acc", r.top1},
         {"top3_acc", r.top3},
         {"S", r.samples},
         {"n_events", r.n_events},
         {"exclusions", r.mape_excluded},
         {"qqp_insufficient", r.qqp_insufficient},
         {"topk_flagged", r.topk_flagged}};
  std::ofstream os(path);
  if (!os) throw tpp::DataError("cannot open report file for writing: " + path);
  os << j.dump(2) << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"Temporal point process toolkit: attentive encoders with conditional "
               "generative and mixture decoders over event streams"};
  app.require_subcommand(1);

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic multivariate Hawkes dataset");
  tpp::hawkes::SynthConfig sc;
  std::string sim_out = "synthetic";
  sim->add_option("--types", sc.num_marks, "Number of event types")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim->add_option("--n", sc.num_seqs, "Number of sequences")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim->add_option("--horizon", sc.horizon, "Simulation horizon per sequence")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim->add_option("--mu", sc.mu, "Shared base rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim->add_option("--cut", sc.cutting_ratio, "Probability of zeroing a kernel entry")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sim->add_option("--seed", sc.seed, "Simulation seed")->capture_default_str();
  sim->add_option("--out", sim_out, "Output directory")->capture_default_str();
  sim->callback([&] {
    fs::create_directories(sim_out);
    tpp::hawkes::SynthResult res = tpp::hawkes::generate_synthetic(sc);
    tpp::save_jsonl(res.data, (fs::path(sim_out) / "data.jsonl").string());
    tpp::hawkes::save_model(res.model, sc.horizon, sc.cutting_ratio, sc.seed,
                            (fs::path(sim_out) / "kernels.json").string());
    tpp::save_stats(tpp::compute_stats(res.data),
                    (fs::path(sim_out) / "stats.json").string());
    std::cout << "wrote " << res.data.seqs.size() << " sequences (" << res.data.total_events()
              << " events, " << sc.num_marks << " types) to " << sim_out << '\n';
    if (res.unstable)
      std::cout << "note: sampled kernels are supercritical; sequences are horizon-truncated\n";
  });

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Train one model and save the best checkpoint");
  ModelFlags tr_mf;
  tpp::TrainConfig tr_tc;
  std::string tr_data, tr_ckpt = "model.ckpt", tr_log;
  std::uint64_t tr_split_seed = 0;
  bool tr_lognorm_std = false;
  tr->add_option("--data", tr_data, "Input JSONL dataset")->required();
  add_model_flags(tr, tr_mf);
  tr->add_option("--lr", tr_tc.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--epochs", tr_tc.max_epochs, "Maximum training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr->add_option("--patience", tr_tc.patience, "Early-stopping patience in epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr->add_option("--batch", tr_tc.batch_size, "Sequences per optimizer step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr->add_option("--seed", tr_tc.seed, "Training seed")->capture_default_str();
  tr->add_option("--split-seed", tr_split_seed, "Dataset split seed")->capture_default_str();
  tr->add_flag("--lognorm-std", tr_lognorm_std,
               "Normalize log intervals by std instead of variance");
  tr->add_option("--ckpt", tr_ckpt, "Checkpoint output path")->capture_default_str();
  tr->add_option("--log", tr_log, "Per-epoch CSV log path");
  tr->callback([&] {
    Prepared p = prepare(tr_data, tr_split_seed, tr_lognorm_std);
    tpp::ModelConfig cfg = to_config(tr_mf, p.num_marks);
    tr_tc.log_path = tr_log;
    const auto t0 = std::chrono::steady_clock::now();
    tpp::TrainResult res = tpp::train_model(cfg, p.sp.train, p.sp.val, p.stats, tr_tc);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                            .count();
    tpp::save_checkpoint(tr_ckpt, cfg, res.params, p.stats);
    std::cout << "trained " << tr_mf.decoder << " for " << res.epochs_run << " epochs, best val "
              << res.best_val << " at epoch " << res.best_epoch << ", checkpoint " << tr_ckpt
              << '\n';
    if (res.epochs_run > 0)
      std::cout << tpp::diag::timing_report({{tr_mf.decoder, res.epochs_run, wall}});
    if (res.aborted)
      throw tpp::NonFiniteLoss("training aborted on a non-finite loss; checkpoint holds the "
                               "last good weights");
  });

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a dataset split");
  std::string ev_data, ev_ckpt, ev_report = "report.json", ev_sim, ev_use = "test";
  std::uint64_t ev_split_seed = 0, ev_seed = 0;
  int ev_samples = 100;
  ev->add_option("--data", ev_data, "Input JSONL dataset")->required();
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint to evaluate")->required();
  ev->add_option("--samples", ev_samples, "Predictive draws per event")
      ->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  ev->add_option("--split", ev_use, "Which split to score")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  ev->add_option("--split-seed", ev_split_seed, "Dataset split seed (must match training)")
      ->capture_default_str();
  ev->add_option("--seed", ev_seed, "Sampling seed")->capture_default_str();
  ev->add_option("--report", ev_report, "Report JSON output path")->capture_default_str();
  ev->add_option("--similarity-csv", ev_sim, "Type-similarity matrix CSV output path");
  ev->callback([&] {
    tpp::Checkpoint ck = tpp::load_checkpoint(ev_ckpt);
    tpp::Dataset ds = tpp::load_jsonl(ev_data);
    if (ds.num_marks > ck.config.encoder.num_marks)
      throw tpp::SchemaError("dataset has more mark types than the checkpointed model");
    tpp::SplitResult sp = tpp::split(ds, ev_split_seed);
    tpp::rescale_time(sp.train, ck.stats.t_max);
    tpp::rescale_time(sp.val, ck.stats.t_max);
    tpp::rescale_time(sp.test, ck.stats.t_max);
    const tpp::Dataset& target = ev_use == "train" ? sp.train : ev_use == "val" ? sp.val
                                                                                : sp.test;
    tpp::Rng rng = tpp::make_rng(ev_seed);
    tpp::EvalReport r =
        tpp::evaluate_model(ck.config, ck.params, target, ck.stats, tpp::EvalConfig{ev_samples},
                            rng);
    write_report(r, ev_report);
    if (!ev_sim.empty()) write_similarity_csv(ck.config, ck.params, ev_sim);
    std::cout << "events " << r.n_events << "  mape " << r.mape << "  crps " << r.crps
              << "  qqp_dev " << r.qqp << (r.qqp_insufficient ? " (insufficient)" : "")
              << "  top1 " << r.top1 << "  top3 " << r.top3 << '\n';
  });

  // ---- sample ----
  auto* sa = app.add_subcommand("sample", "Autoregressively generate sequences from a checkpoint");
  std::string sa_ckpt, sa_out = "generated.jsonl";
  int sa_events = 100, sa_seqs = 10;
  double sa_horizon = 0.0;
  std::uint64_t sa_seed = 0;
  sa->add_option("--ckpt", sa_ckpt, "Checkpoint to sample from")->required();
  sa->add_option("--events", sa_events, "Events per generated sequence")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sa->add_option("--seqs", sa_seqs, "Number of sequences to generate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sa->add_option("--horizon", sa_horizon, "Optional time cap; events beyond it are dropped")
      ->capture_default_str();
  sa->add_option("--seed", sa_seed, "Sampling seed")->capture_default_str();
  sa->add_option("--out", sa_out, "Generated JSONL path")->capture_default_str();
  sa->callback([&] {
    tpp::Checkpoint ck = tpp::load_checkpoint(sa_ckpt);
    tpp::Rng rng = tpp::make_rng(sa_seed);
    tpp::Dataset out;
    out.num_marks = ck.config.encoder.num_marks;
    for (int s = 0; s < sa_seqs; ++s) {
      tpp::EventSequence seq = tpp::rollout(ck.config, ck.params, ck.stats, sa_events, rng);
      if (sa_horizon > 0.0) {
        while (!seq.t.empty() && seq.t.back() > sa_horizon) {
          seq.t.pop_back();
          seq.m.pop_back();
        }
      }
      out.seqs.push_back(std::move(seq));
    }
    tpp::save_jsonl(out, sa_out);
    std::cout << "wrote " << out.seqs.size() << " generated sequences (" << out.total_events()
              << " events) to " << sa_out << '\n';
  });

  // ---- dynamics ----
  auto* dy = app.add_subcommand("dynamics",
                                "Record latent-chain statistics of an iterative sampler");
  std::string dy_ckpt, dy_out = "dynamics.csv";
  int dy_count = 512, dy_every = 10;
  std::uint64_t dy_seed = 0;
  dy->add_option("--ckpt", dy_ckpt, "Checkpoint to sample from")->required();
  dy->add_option("--count", dy_count, "Parallel chains")
      ->check(CLI::Range(2, 10000000))
      ->capture_default_str();
  dy->add_option("--every", dy_every, "Capture cadence in sampler steps")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  dy->add_option("--seed", dy_seed, "Sampling seed")->capture_default_str();
  dy->add_option("--out", dy_out, "Dynamics CSV path")->capture_default_str();
  dy->callback([&] {
    tpp::Checkpoint ck = tpp::load_checkpoint(dy_ckpt);
    tpp::Rng rng = tpp::make_rng(dy_seed);
    tpp::VecD h = tpp::VecD::Zero(ck.config.encoder.embed_dim);
    tpp::record_sampling_dynamics(ck.config, ck.params, h, dy_count, dy_every, dy_out, rng);
    std::cout << "wrote sampler dynamics to " << dy_out << '\n';
  });

  // ---- grid ----
  auto* gr = app.add_subcommand("grid", "Grid-search lr/width/depth and keep the best model");
  ModelFlags gr_mf;
  tpp::TrainConfig gr_tc;
  std::string gr_data, gr_out = "grid.csv", gr_ckpt;
  std::uint64_t gr_split_seed = 0;
  bool gr_lognorm_std = false;
  std::vector<double> gr_lrs = {1e-3, 5e-4, 1e-4};
  std::vector<int> gr_dims = {8, 16, 32};
  std::vector<int> gr_layers = {1, 2, 3};
  gr->add_option("--data", gr_data, "Input JSONL dataset")->required();
  add_model_flags(gr, gr_mf);
  gr->add_option("--lrs", gr_lrs, "Learning rates to sweep")->capture_default_str();
  gr->add_option("--dims", gr_dims, "Embedding widths to sweep")->capture_default_str();
  gr->add_option("--layer-counts", gr_layers, "Attention depths to sweep")
      ->capture_default_str();
  gr->add_option("--epochs", gr_tc.max_epochs, "Maximum epochs per cell")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gr->add_option("--patience", gr_tc.patience, "Early-stopping patience")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gr->add_option("--batch", gr_tc.batch_size, "Sequences per optimizer step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gr->add_option("--seed", gr_tc.seed, "Training seed")->capture_default_str();
  gr->add_option("--split-seed", gr_split_seed, "Dataset split seed")->capture_default_str();
  gr->add_flag("--lognorm-std", gr_lognorm_std,
               "Normalize log intervals by std instead of variance");
  gr->add_option("--out", gr_out, "Grid table CSV path")->capture_default_str();
  gr->add_option("--ckpt", gr_ckpt, "Optional checkpoint path for the best cell");
  gr->callback([&] {
    Prepared p = prepare(gr_data, gr_split_seed, gr_lognorm_std);
    tpp::ModelConfig base = to_config(gr_mf, p.num_marks);
    tpp::GridResult res = tpp::grid_search(base, p.sp.train, p.sp.val, p.stats, gr_tc, gr_lrs,
                                           gr_dims, gr_layers, gr_out);
    std::cout << "best cell: lr " << res.best.lr << "  embed_dim " << res.best.embed_dim
              << "  layers " << res.best.layers << "  val " << res.best_run.best_val << '\n';
    if (!gr_ckpt.empty()) {
      base.encoder.embed_dim = res.best.embed_dim;
      base.decoder.embed_dim = res.best.embed_dim;
      base.encoder.layers = res.best.layers;
      tpp::save_checkpoint(gr_ckpt, base, res.best_run.params, p.stats);
      std::cout << "saved best checkpoint to " << gr_ckpt << '\n';
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse error
    return code == 0 ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const tpp::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const tpp::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const tpp::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
