#include "tppkit/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "tppkit/errors.hpp"
#include "tppkit/rng.hpp"

namespace tpp {

using nlohmann::json;

std::size_t Dataset::total_events() const {
  std::size_t n = 0;
  for (const auto& s : seqs) n += s.size();
  return n;
}

Dataset load_jsonl(const std::string& path, int num_marks) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  Dataset ds;
  int max_mark = -1;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("seq") || !j["seq"].is_array())
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected {\"seq\": [[t, m], ...]}");
    EventSequence seq;
    double prev = -1.0;
    for (const auto& ev : j["seq"]) {
      if (!ev.is_array() || ev.size() != 2 || !ev[0].is_number())
        throw ParseError(path + ":" + std::to_string(lineno) + ": event must be [t, m]");
      const double t = ev[0].get<double>();
      if (!ev[1].is_number_integer() && !ev[1].is_number_unsigned())
        throw ParseError(path + ":" + std::to_string(lineno) + ": mark must be an integer");
      const long long mk = ev[1].get<long long>();
      if (!std::isfinite(t) || t < 0.0)
        throw ParseError(path + ":" + std::to_string(lineno) + ": timestamp must be finite and >= 0");
      if (t < prev)
        throw ParseError(path + ":" + std::to_string(lineno) + ": timestamps out of order");
      if (mk < 0)
        throw ParseError(path + ":" + std::to_string(lineno) + ": mark must be >= 0");
      prev = t;
      if (static_cast<int>(seq.size()) >= kMaxSeqLen) continue;  // clamp long sequences
      seq.t.push_back(t);
      seq.m.push_back(static_cast<int>(mk));
      max_mark = std::max(max_mark, static_cast<int>(mk));
    }
    if (!seq.t.empty()) ds.seqs.push_back(std::move(seq));
  }
  if (ds.seqs.empty()) throw EmptyDataset("no sequences in " + path);
  ds.num_marks = num_marks > 0 ? num_marks : max_mark + 1;
  if (max_mark >= ds.num_marks)
    throw ParseError(path + ": mark " + std::to_string(max_mark) + " out of range for " +
                     std::to_string(ds.num_marks) + " mark types");
  return ds;
}

void save_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  for (const auto& seq : ds.seqs) {
    json evs = json::array();
    for (std::size_t i = 0; i < seq.size(); ++i) evs.push_back({seq.t[i], seq.m[i]});
    out << json{{"seq", evs}} << "\n";
  }
}

SplitResult split(const Dataset& ds, std::uint64_t seed) {
  const std::size_t n = ds.seqs.size();
  if (n < 5) throw SplitError("need at least 5 sequences to split, got " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(derive_seed(seed, 0x5714ULL));
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_train = static_cast<std::size_t>(0.64 * static_cast<double>(n));
  const std::size_t n_val = static_cast<std::size_t>(0.16 * static_cast<double>(n));
  SplitResult r;
  r.train.num_marks = r.val.num_marks = r.test.num_marks = ds.num_marks;
  for (std::size_t i = 0; i < n; ++i) {
    const EventSequence& s = ds.seqs[idx[i]];
    if (i < n_train)
      r.train.seqs.push_back(s);
    else if (i < n_train + n_val)
      r.val.seqs.push_back(s);
    else
      r.test.seqs.push_back(s);
  }
  return r;
}

double max_time(const Dataset& ds) {
  double m = 0.0;
  for (const auto& s : ds.seqs)
    if (!s.t.empty()) m = std::max(m, s.t.back());
  return m;
}

void rescale_time(Dataset& ds, double t_max, double target) {
  if (!(t_max > 0.0)) throw RescaleError("T_max must be positive, got " + std::to_string(t_max));
  const double scale = target / t_max;
  for (auto& s : ds.seqs)
    for (auto& t : s.t) t *= scale;
}

std::vector<double> intervals(const EventSequence& seq) {
  std::vector<double> tau(seq.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    tau[i] = seq.t[i] - prev;
    prev = seq.t[i];
  }
  return tau;
}

LogNormStats compute_stats(const Dataset& train, bool use_std) {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (const auto& s : train.seqs) {
    for (double tau : intervals(s)) {
      const double l = std::log(std::max(tau, kTauFloor));
      sum += l;
      sum2 += l * l;
      ++n;
    }
  }
  if (n == 0) throw EmptyDataset("no events to compute interval statistics");
  LogNormStats st;
  st.mean_log = sum / static_cast<double>(n);
  st.var_log = std::max(sum2 / static_cast<double>(n) - st.mean_log * st.mean_log, 1e-6);
  if (use_std) st.var_log = std::sqrt(st.var_log);
  st.t_max = max_time(train);
  return st;
}

double log_normalize(double tau, const LogNormStats& s) {
  return (std::log(std::max(tau, kTauFloor)) - s.mean_log) / s.var_log;
}

double log_denormalize(double z, const LogNormStats& s) {
  return std::exp(z * s.var_log + s.mean_log);
}

void save_stats(const LogNormStats& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << json{{"mean_log", s.mean_log}, {"var_log", s.var_log}, {"t_max", s.t_max}}.dump(2)
      << "\n";
}

LogNormStats load_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  if (!j.contains("mean_log") || !j.contains("var_log") || !j.contains("t_max"))
    throw SchemaError(path + ": missing mean_log/var_log/t_max");
  LogNormStats s;
  s.mean_log = j["mean_log"].get<double>();
  s.var_log = j["var_log"].get<double>();
  s.t_max = j["t_max"].get<double>();
  return s;
}

}  // namespace tpp
