#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tppkit/data.hpp"
#include "tppkit/rng.hpp"

namespace tpp::hawkes {

// Excitation kernel shapes for the synthetic generator.
//   A: 0.09 e^{-0.4 t}
//   B: 0.01 e^{-0.8 t} + 0.03 e^{-0.6 t} + 0.05 e^{-0.4 t}
//   C: 0.25 |cos 3t| e^{-0.1 t}
//   D: 0.1 (0.5 + t)^{-2}
enum class Kind : char { kZero = 'z', kA = 'a', kB = 'b', kC = 'c', kD = 'd' };

double kernel(Kind k, double t);                     // g(t), t >= 0
double kernel_envelope(Kind k, double t);            // non-increasing bound >= g
double kernel_integral(Kind k, double a, double b);  // int_a^b g
double kernel_total_mass(Kind k);                    // int_0^inf g

struct Model {
  int num_marks = 1;
  std::vector<double> mu;              // base rates, one per mark
  std::vector<std::vector<Kind>> g;    // g[target][source]
};

// Mark-wise intensities at time t given events strictly before t.
std::vector<double> intensity(const Model& m, const EventSequence& hist, double t);

// Largest eigenvalue of the branching matrix B[j][i] = total mass of
// g[j][i]; >= 1 means the process is supercritical (simulation still runs,
// horizon-truncated).
double branching_spectral_radius(const Model& m);

// Ogata thinning over [0, horizon]; sequence length clamped at max_len.
EventSequence simulate(const Model& m, double horizon, Rng& rng, int max_len = kMaxSeqLen);

struct SynthConfig {
  int num_marks = 5;
  int num_seqs = 6000;
  double horizon = 100.0;
  double mu = 0.1;           // shared base rate
  double cutting_ratio = 0.2;
  std::uint64_t seed = 1;
};

struct SynthResult {
  Dataset data;
  Model model;
  bool unstable = false;
};

// Random kernel matrix (uniform over A-D, zeroed with prob cutting_ratio),
// then one thinning run per sequence with a per-sequence derived seed.
SynthResult generate_synthetic(const SynthConfig& cfg);

// Integrated total intensity between consecutive events (first segment from
// the origin). Under the true model these are iid Exp(1).
std::vector<double> compensator_segments(const Model& m, const EventSequence& seq);

void save_model(const Model& m, double horizon, double cutting_ratio, std::uint64_t seed,
                const std::string& path);
Model load_model(const std::string& path);

}  // namespace tpp::hawkes
