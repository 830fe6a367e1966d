#include "tppkit/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "tppkit/autodiff.hpp"

namespace tpp {

namespace {

std::vector<SeqNoise> draw_dataset_noise(const ModelConfig& cfg, const Dataset& data, Rng& rng) {
  std::vector<SeqNoise> out;
  out.reserve(data.seqs.size());
  for (const auto& seq : data.seqs) out.push_back(draw_noise(cfg, seq.size(), rng));
  return out;
}

// Per-event mean loss under fixed noise; the tcgan number is its model-side
// objective (generator term plus mark cross entropy).
double mean_loss(const ModelConfig& cfg, const ParamStore& ps, const DecoderTables& tb,
                 const Dataset& data, const LogNormStats& stats,
                 const std::vector<SeqNoise>& noise) {
  Binder<double> b(ps);
  auto m = bind_model(cfg, b);
  double total = 0.0;
  std::size_t events = 0;
  for (std::size_t i = 0; i < data.seqs.size(); ++i) {
    const auto& seq = data.seqs[i];
    if (cfg.decoder.kind == dec::DecoderKind::kTcgan)
      total += sequence_gan_losses(m, seq, stats, noise[i]).model;
    else
      total += sequence_loss(m, tb, seq, stats, noise[i]);
    events += seq.size();
  }
  return events ? total / static_cast<double>(events) : 0.0;
}

bool is_critic_param(const std::string& name) { return name.rfind("dec.gan.crit", 0) == 0; }

}  // namespace

TrainResult train_model(const ModelConfig& cfg, const Dataset& train, const Dataset& val,
                        const LogNormStats& stats, const TrainConfig& tc) {
  cfg.validate();
  tc.validate();
  if (train.seqs.empty()) throw EmptyDataset("training split has no sequences");
  const bool gan = cfg.decoder.kind == dec::DecoderKind::kTcgan;

  TrainResult res;
  Rng init = make_rng(tc.seed);
  register_model_params(cfg, res.params, init);
  ParamStore& ps = res.params;
  DecoderTables tb = make_tables(cfg.decoder);

  Rng train_rng = make_rng(tc.seed ^ 0x9e3779b97f4a7c15ull);
  Rng val_rng = make_rng(tc.seed ^ 0xa5a5a5a5a5a5a5a5ull);
  const std::vector<SeqNoise> val_noise = draw_dataset_noise(cfg, val, val_rng);

  std::ofstream log;
  if (!tc.log_path.empty()) {
    log.open(tc.log_path);
    if (!log) throw DataError("cannot open training log for writing: " + tc.log_path);
    log << "epoch,train_loss,val_loss,wall_seconds\n";
  }

  ParamStore best = ps;
  int since_best = 0;
  std::int64_t critic_steps = 0, gen_steps = 0;
  std::vector<std::size_t> order(train.seqs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ad::Tape tape;  // reused across batches to keep its capacity
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < tc.max_epochs && !res.aborted; ++epoch) {
    std::shuffle(order.begin(), order.end(), train_rng);
    double epoch_loss = 0.0;
    std::size_t epoch_events = 0;

    for (std::size_t start = 0; start < order.size() && !res.aborted;
         start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      const double bsz = static_cast<double>(stop - start);
      std::size_t batch_events = 0;
      for (std::size_t j = start; j < stop; ++j) batch_events += train.seqs[order[j]].size();

      try {
        if (gan) {
          for (int c = 0; c < cfg.decoder.critic_steps; ++c) {
            std::vector<SeqNoise> cn;
            for (std::size_t j = start; j < stop; ++j)
              cn.push_back(draw_noise(cfg, train.seqs[order[j]].size(), train_rng));
            tape.clear();
            ad::TapeScope scope(tape);
            Binder<ad::Value> b(ps);
            auto m = bind_model(cfg, b);
            ad::Value obj(0.0);
            for (std::size_t j = start; j < stop; ++j)
              obj += sequence_gan_losses(m, train.seqs[order[j]], stats, cn[j - start]).critic;
            obj = obj * (1.0 / bsz);
            if (!std::isfinite(obj.value())) throw NonFiniteLoss("critic loss is not finite");
            if (!obj.tracked()) continue;
            tape.backward(obj.index());
            ps.adam_step_filtered(b.grads(), tc.lr, ++critic_steps, is_critic_param);
          }
          std::vector<SeqNoise> gn;
          for (std::size_t j = start; j < stop; ++j)
            gn.push_back(draw_noise(cfg, train.seqs[order[j]].size(), train_rng));
          tape.clear();
          ad::TapeScope scope(tape);
          Binder<ad::Value> b(ps);
          auto m = bind_model(cfg, b);
          ad::Value obj(0.0);
          for (std::size_t j = start; j < stop; ++j)
            obj += sequence_gan_losses(m, train.seqs[order[j]], stats, gn[j - start]).model;
          const double batch_total = obj.value();
          obj = obj * (1.0 / bsz);
          if (!std::isfinite(batch_total)) throw NonFiniteLoss("generator loss is not finite");
          if (obj.tracked()) {
            tape.backward(obj.index());
            ps.adam_step_filtered(b.grads(), tc.lr, ++gen_steps,
                                  [](const std::string& n) { return !is_critic_param(n); });
          }
          epoch_loss += batch_total;
        } else {
          std::vector<SeqNoise> bn;
          for (std::size_t j = start; j < stop; ++j)
            bn.push_back(draw_noise(cfg, train.seqs[order[j]].size(), train_rng));
          tape.clear();
          ad::TapeScope scope(tape);
          Binder<ad::Value> b(ps);
          auto m = bind_model(cfg, b);
          ad::Value obj(0.0);
          for (std::size_t j = start; j < stop; ++j)
            obj += sequence_loss(m, tb, train.seqs[order[j]], stats, bn[j - start]);
          const double batch_total = obj.value();
          obj = obj * (1.0 / bsz);
          if (!std::isfinite(batch_total)) throw NonFiniteLoss("training loss is not finite");
          if (obj.tracked()) {
            tape.backward(obj.index());
            ps.adam_step(b.grads(), tc.lr);
          }
          epoch_loss += batch_total;
        }
        epoch_events += batch_events;
      } catch (const NumericError&) {
        res.aborted = true;
      }
    }
    if (res.aborted) break;

    res.train_curve.push_back(epoch_events ? epoch_loss / static_cast<double>(epoch_events) : 0.0);
    const double vloss = val.seqs.empty() ? res.train_curve.back()
                                          : mean_loss(cfg, ps, tb, val, stats, val_noise);
    res.val_curve.push_back(vloss);
    res.epochs_run = epoch + 1;
    if (log) {
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log << epoch << ',' << res.train_curve.back() << ',' << vloss << ',' << wall << '\n';
      log.flush();
    }

    // Adversarial training has no meaningful validation optimum; keep the
    // final weights. Everything else keeps the best-validation snapshot.
    if (gan) {
      best = ps;
      res.best_epoch = epoch;
      res.best_val = vloss;
    } else if (vloss < res.best_val) {
      best = ps;
      res.best_epoch = epoch;
      res.best_val = vloss;
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }

  res.params = std::move(best);
  return res;
}

GridResult grid_search(ModelConfig base, const Dataset& train, const Dataset& val,
                       const LogNormStats& stats, TrainConfig tc, const std::vector<double>& lrs,
                       const std::vector<int>& dims, const std::vector<int>& layer_counts,
                       const std::string& log_path) {
  if (lrs.empty() || dims.empty() || layer_counts.empty())
    throw ConfigError("grid_search needs at least one value per axis");
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path);
    if (!log) throw DataError("cannot open grid log for writing: " + log_path);
    log << "lr,embed_dim,layers,val_loss,aborted\n";
  }

  GridResult out;
  bool have_best = false;
  double best_loss = std::numeric_limits<double>::infinity();
  for (double lr : lrs)
    for (int dim : dims)
      for (int layers : layer_counts) {
        base.encoder.embed_dim = dim;
        base.decoder.embed_dim = dim;
        base.encoder.layers = layers;
        tc.lr = lr;
        TrainResult run = train_model(base, train, val, stats, tc);
        GridCell cell;
        cell.point = {lr, dim, layers};
        cell.aborted = run.aborted;
        cell.val_loss = run.val_curve.empty() ? std::numeric_limits<double>::infinity()
                                              : run.best_val;
        out.cells.push_back(cell);
        if (log) {
          log << lr << ',' << dim << ',' << layers << ',' << cell.val_loss << ','
              << (cell.aborted ? 1 : 0) << '\n';
          log.flush();
        }
        if (!have_best || cell.val_loss < best_loss) {
          best_loss = cell.val_loss;
          out.best = cell.point;
          out.best_run = std::move(run);
          have_best = true;
        }
      }
  return out;
}

SeedStats run_seeds(const std::vector<std::uint64_t>& seeds,
                    const std::function<double(std::uint64_t)>& fn) {
  if (seeds.empty()) throw ConfigError("run_seeds needs at least one seed");
  SeedStats s;
  for (std::uint64_t seed : seeds) s.values.push_back(fn(seed));
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) /
           static_cast<double>(s.values.size());
  if (s.values.size() > 1) {
    double acc = 0.0;
    for (double v : s.values) acc += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(s.values.size() - 1));
  }
  return s;
}

}  // namespace tpp
