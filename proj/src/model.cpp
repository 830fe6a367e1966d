#include "tppkit/model.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tpp {

using nlohmann::json;

EvalReport evaluate_model(const ModelConfig& cfg, const ParamStore& ps, const Dataset& data,
                          const LogNormStats& stats, const EvalConfig& ec, Rng& rng) {
  cfg.validate();
  if (ec.samples < 2) throw ConfigError("evaluation needs at least 2 predictive samples");
  Binder<double> b(ps);
  auto m = bind_model(cfg, b);
  DecoderTables tb = make_tables(cfg.decoder);
  const int num_marks = cfg.encoder.num_marks;

  std::vector<double> pred_t, true_t, lambdas;
  double crps_sum = 0.0;
  int n_events = 0, top1 = 0, top3 = 0, flagged = 0;
  const bool mixture = dec::is_mixture(cfg.decoder.kind);
  const bool deter = cfg.decoder.kind == dec::DecoderKind::kDeter;

  for (const auto& seq : data.seqs) {
    const std::vector<double> iv = intervals(seq);
    auto h = enc::encode_history(m.encoder, seq);
    double t_prev = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const VecD& hp = h[i];
      VecD samples = sample_intervals(m, tb, hp, stats, ec.samples, rng);
      double point;
      if (mixture) {
        point = std::max(dec::mixture_mean(dec::mixture_params(m.mix, hp), m.mix.family),
                         kTauFloor);
      } else if (deter) {
        point = samples(0);
      } else {
        point = samples.mean();
      }
      pred_t.push_back(t_prev + point);
      true_t.push_back(seq.t[i]);
      crps_sum += crps_empirical(samples, iv[i]);
      lambdas.push_back(rescaled_interval(samples, iv[i]));

      VecD probs = mark_probs(m.mark, hp);
      if (topk_hit(probs, seq.m[i], 1)) ++top1;
      if (topk_hit(probs, seq.m[i], 3)) ++top3;
      if (num_marks < 3) ++flagged;

      t_prev = seq.t[i];
      ++n_events;
    }
  }
  if (n_events == 0) throw EmptyEval("evaluation dataset has no events");

  EvalReport r;
  const Eigen::Index n = static_cast<Eigen::Index>(n_events);
  MapeResult mr = mape(Eigen::Map<const VecD>(pred_t.data(), n),
                       Eigen::Map<const VecD>(true_t.data(), n));
  r.mape = mr.value;
  r.mape_excluded = mr.excluded;
  r.crps = crps_sum / n_events;
  QqpResult qr = qqp_dev(lambdas);
  r.qqp = qr.value;
  r.qqp_insufficient = qr.insufficient;
  r.top1 = static_cast<double>(top1) / n_events;
  r.top3 = static_cast<double>(top3) / n_events;
  r.n_events = n_events;
  r.samples = ec.samples;
  r.topk_flagged = flagged;
  return r;
}

EventSequence rollout(const ModelConfig& cfg, const ParamStore& ps, const LogNormStats& stats,
                      int n_events, Rng& rng) {
  cfg.validate();
  if (n_events < 0) throw ConfigError("rollout length must be non-negative");
  Binder<double> b(ps);
  auto m = bind_model(cfg, b);
  DecoderTables tb = make_tables(cfg.decoder);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  EventSequence seq;
  double t = 0.0;
  for (int i = 0; i < n_events; ++i) {
    auto h = enc::encode_history(m.encoder, seq);
    const VecD& hp = h.back();
    t += sample_intervals(m, tb, hp, stats, 1, rng)(0);
    VecD probs = mark_probs(m.mark, hp);
    double u = unif(rng), acc = 0.0;
    int mark = static_cast<int>(probs.size()) - 1;
    for (Eigen::Index c = 0; c < probs.size(); ++c) {
      acc += probs(c);
      if (u <= acc) {
        mark = static_cast<int>(c);
        break;
      }
    }
    seq.t.push_back(t);
    seq.m.push_back(mark);
  }
  return seq;
}

namespace {

constexpr char kMagic[8] = {'T', 'P', 'P', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

json config_to_json(const ModelConfig& cfg) {
  const auto& e = cfg.encoder;
  const auto& d = cfg.decoder;
  return json{{"encoder",
               {{"kind", enc::to_string(e.kind)},
                {"time_enc", enc::to_string(e.time_enc)},
                {"embed_dim", e.embed_dim},
                {"layers", e.layers},
                {"num_marks", e.num_marks}}},
              {"decoder",
               {{"kind", dec::to_string(d.kind)},
                {"embed_dim", d.embed_dim},
                {"diffusion_steps", d.diffusion_steps},
                {"beta_min", d.beta_min},
                {"beta_max", d.beta_max},
                {"weighted_loss", d.weighted_loss},
                {"score_levels", d.score_levels},
                {"sigma_max", d.sigma_max},
                {"sigma_min", d.sigma_min},
                {"langevin_eps", d.langevin_eps},
                {"langevin_steps", d.langevin_steps},
                {"cnf_steps", d.cnf_steps},
                {"mixture_components", d.mixture_components},
                {"gan_eta", d.gan_eta},
                {"critic_steps", d.critic_steps}}}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  const json& e = j.at("encoder");
  cfg.encoder.kind = enc::encoder_from_string(e.at("kind").get<std::string>());
  cfg.encoder.time_enc = enc::time_encoding_from_string(e.at("time_enc").get<std::string>());
  cfg.encoder.embed_dim = e.at("embed_dim").get<int>();
  cfg.encoder.layers = e.at("layers").get<int>();
  cfg.encoder.num_marks = e.at("num_marks").get<int>();
  const json& d = j.at("decoder");
  cfg.decoder.kind = dec::decoder_from_string(d.at("kind").get<std::string>());
  cfg.decoder.embed_dim = d.at("embed_dim").get<int>();
  cfg.decoder.diffusion_steps = d.at("diffusion_steps").get<int>();
  cfg.decoder.beta_min = d.at("beta_min").get<double>();
  cfg.decoder.beta_max = d.at("beta_max").get<double>();
  cfg.decoder.weighted_loss = d.at("weighted_loss").get<bool>();
  cfg.decoder.score_levels = d.at("score_levels").get<int>();
  cfg.decoder.sigma_max = d.at("sigma_max").get<double>();
  cfg.decoder.sigma_min = d.at("sigma_min").get<double>();
  cfg.decoder.langevin_eps = d.at("langevin_eps").get<double>();
  cfg.decoder.langevin_steps = d.at("langevin_steps").get<int>();
  cfg.decoder.cnf_steps = d.at("cnf_steps").get<int>();
  cfg.decoder.mixture_components = d.at("mixture_components").get<int>();
  cfg.decoder.gan_eta = d.at("gan_eta").get<double>();
  cfg.decoder.critic_steps = d.at("critic_steps").get<int>();
  return cfg;
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw SchemaError("checkpoint truncated in header length");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& ps,
                     const LogNormStats& stats) {
  cfg.validate();
  json params = json::array();
  for (const auto& e : ps.entries())
    params.push_back(json{{"name", e.name}, {"rows", e.rows}, {"cols", e.cols}});
  json header{{"format_version", kFormatVersion},
              {"config", config_to_json(cfg)},
              {"stats",
               {{"mean_log", stats.mean_log}, {"var_log", stats.var_log}, {"t_max", stats.t_max}}},
              {"params", params}};
  const std::string hs = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open checkpoint file for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_u64(os, hs.size());
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  ps.write_flat(os);
  if (!os) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint file: " + path);
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw SchemaError("not a checkpoint file: bad magic");
  const std::uint64_t hlen = read_u64(is);
  if (hlen == 0 || hlen > (1u << 24)) throw SchemaError("checkpoint header length out of range");
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw SchemaError("checkpoint truncated in header");

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& ex) {
    throw SchemaError(std::string("checkpoint header is not valid JSON: ") + ex.what());
  }
  Checkpoint ck;
  try {
    if (header.at("format_version").get<std::uint32_t>() != kFormatVersion)
      throw SchemaError("unsupported checkpoint format version");
    ck.config = config_from_json(header.at("config"));
    const json& st = header.at("stats");
    ck.stats.mean_log = st.at("mean_log").get<double>();
    ck.stats.var_log = st.at("var_log").get<double>();
    ck.stats.t_max = st.at("t_max").get<double>();

    Rng init = make_rng(0);
    register_model_params(ck.config, ck.params, init);

    const json& params = header.at("params");
    if (!params.is_array() || params.size() != ck.params.entries().size())
      throw SchemaError("checkpoint parameter list does not match the configured model");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& e = ck.params.entries()[i];
      const json& p = params[static_cast<int>(i)];
      if (p.at("name").get<std::string>() != e.name ||
          p.at("rows").get<Eigen::Index>() != e.rows || p.at("cols").get<Eigen::Index>() != e.cols)
        throw SchemaError("checkpoint parameter " + p.at("name").get<std::string>() +
                          " does not match the configured model");
    }
  } catch (const json::exception& ex) {
    throw SchemaError(std::string("checkpoint header missing fields: ") + ex.what());
  }

  ck.params.read_flat(is);
  if (is.peek() != std::char_traits<char>::eof())
    throw SchemaError("checkpoint has trailing bytes after parameter payload");
  return ck;
}

namespace {

std::string join_pipe(const VecD& v) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) os << '|';
    os << v(i);
  }
  return os.str();
}

}  // namespace

void record_sampling_dynamics(const ModelConfig& cfg, const ParamStore& ps, const VecD& h,
                              int count, int every, const std::string& path, Rng& rng) {
  cfg.validate();
  if (count < 2) throw ConfigError("dynamics capture needs at least 2 chains");
  if (every < 1) throw ConfigError("capture cadence must be >= 1");
  const auto kind = cfg.decoder.kind;
  if (kind != dec::DecoderKind::kTcddm && kind != dec::DecoderKind::kTccnf &&
      kind != dec::DecoderKind::kTcnsn)
    throw ConfigError("sampling dynamics requires an iterative sampler (tcddm, tccnf, tcnsn)");

  Binder<double> b(ps);
  auto m = bind_model(cfg, b);
  DecoderTables tb = make_tables(cfg.decoder);
  dec::DynamicsCapture cap;
  cap.every = every;
  switch (kind) {
    case dec::DecoderKind::kTcddm:
      dec::tcddm_sample_z(m.eps, h, tb.sched, count, rng, &cap);
      break;
    case dec::DecoderKind::kTccnf:
      dec::tccnf_sample_z(m.cnf, h, count, rng, cfg.decoder.cnf_steps, &cap);
      break;
    default:
      dec::tcnsn_sample_z(dec::make_net_score(m.nsn, h), tb.ladder, cfg.decoder.langevin_steps,
                          count, rng, &cap);
      break;
  }

  std::ofstream os(path);
  if (!os) throw DataError("cannot open dynamics file for writing: " + path);
  os << "step,checkpoint_k,mean,var,hist_bin_edges,hist_counts\n";
  os.precision(17);
  constexpr int kBins = 20;
  for (std::size_t f = 0; f < cap.frames.size(); ++f) {
    const VecD& x = cap.frames[f].second;
    const double mean = x.mean();
    const double var = (x.array() - mean).square().sum() / x.size();
    double lo = x.minCoeff(), hi = x.maxCoeff();
    if (hi - lo < 1e-9) {
      lo -= 5e-10;
      hi += 5e-10;
    }
    VecD edges(kBins + 1);
    for (int i = 0; i <= kBins; ++i) edges(i) = lo + (hi - lo) * i / kBins;
    VecD counts = VecD::Zero(kBins);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      int bin = static_cast<int>((x(i) - lo) / (hi - lo) * kBins);
      counts(std::clamp(bin, 0, kBins - 1)) += 1.0;
    }
    os << f << ',' << cap.frames[f].first << ',' << mean << ',' << var << ',' << join_pipe(edges)
       << ',' << join_pipe(counts) << '\n';
  }
  if (!os) throw DataError("failed writing dynamics file: " + path);
}

}  // namespace tpp
