#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tpp {

// One marked sequence: timestamps non-decreasing, marks in [0, num_marks).
struct EventSequence {
  std::vector<double> t;
  std::vector<int> m;
  std::size_t size() const { return t.size(); }
};

struct Dataset {
  std::vector<EventSequence> seqs;
  int num_marks = 0;
  std::size_t total_events() const;
};

struct SplitResult {
  Dataset train, val, test;
};

// Interval statistics of the training split used for log-normalization and
// time rescaling. var_log is the population variance of log tau; per the
// source method the z-score divides by the variance (std available behind a
// flag elsewhere).
struct LogNormStats {
  double mean_log = 0.0;
  double var_log = 1.0;
  double t_max = 1.0;
};

inline constexpr double kTauFloor = 1e-8;
inline constexpr int kMaxSeqLen = 1000;
inline constexpr double kRescaleTarget = 50.0;

// JSONL: one {"seq": [[t, m], ...]} object per line.
Dataset load_jsonl(const std::string& path, int num_marks = -1);
void save_jsonl(const Dataset& ds, const std::string& path);

// Deterministic 64/16/20 shuffle-split by sequence.
SplitResult split(const Dataset& ds, std::uint64_t seed);

// Scale all timestamps by target/t_max. t_max must come from the training
// split.
void rescale_time(Dataset& ds, double t_max, double target = kRescaleTarget);
double max_time(const Dataset& ds);

// tau_1 = t_1 (origin at zero), tau_i = t_i - t_{i-1}.
std::vector<double> intervals(const EventSequence& seq);

LogNormStats compute_stats(const Dataset& train, bool use_std = false);

double log_normalize(double tau, const LogNormStats& s);
double log_denormalize(double z, const LogNormStats& s);

void save_stats(const LogNormStats& s, const std::string& path);
LogNormStats load_stats(const std::string& path);

}  // namespace tpp
