#include "tppkit/hawkes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>

#include <Eigen/Core>
#include <json.hpp>

#include "tppkit/errors.hpp"

namespace tpp::hawkes {

using nlohmann::json;

double kernel(Kind k, double t) {
  if (t < 0.0) throw DomainError("kernel evaluated at negative elapsed time");
  switch (k) {
    case Kind::kZero: return 0.0;
    case Kind::kA: return 0.09 * std::exp(-0.4 * t);
    case Kind::kB:
      return 0.01 * std::exp(-0.8 * t) + 0.03 * std::exp(-0.6 * t) + 0.05 * std::exp(-0.4 * t);
    case Kind::kC: return 0.25 * std::abs(std::cos(3.0 * t)) * std::exp(-0.1 * t);
    case Kind::kD: {
      const double u = 0.5 + t;
      return 0.1 / (u * u);
    }
  }
  throw DomainError("unknown kernel kind");
}

double kernel_envelope(Kind k, double t) {
  // A, B, D are already non-increasing; C is bounded by its cosine-free
  // envelope.
  if (k == Kind::kC) {
    if (t < 0.0) throw DomainError("kernel evaluated at negative elapsed time");
    return 0.25 * std::exp(-0.1 * t);
  }
  return kernel(k, t);
}

namespace {

// One smooth arc of |cos(3t)| e^{-0.1 t}: integrate exactly.
// int cos(3t) e^{-pt} dt = e^{-pt} (3 sin 3t - p cos 3t) / (9 + p^2)
double arc_integral(double a, double b, double sign) {
  constexpr double p = 0.1;
  auto F = [](double t) {
    return std::exp(-p * t) * (3.0 * std::sin(3.0 * t) - p * std::cos(3.0 * t)) / (9.0 + p * p);
  };
  return sign * 0.25 * (F(b) - F(a));
}

// Piecewise-exact integral of kernel C over [a, b]; |cos 3t| changes sign at
// t = (pi/2 + k pi)/3.
double integral_c(double a, double b) {
  constexpr double kPi = std::numbers::pi;
  double total = 0.0;
  double lo = a;
  // first sign-change point >= a
  long idx = static_cast<long>(std::ceil((3.0 * a - kPi / 2.0) / kPi));
  while (lo < b) {
    const double knot = (kPi / 2.0 + static_cast<double>(idx) * kPi) / 3.0;
    const double hi = std::min(knot, b);
    if (hi > lo) {
      const double mid = 0.5 * (lo + hi);
      const double sign = std::cos(3.0 * mid) >= 0.0 ? 1.0 : -1.0;
      total += arc_integral(lo, hi, sign);
    }
    lo = hi;
    ++idx;
  }
  return total;
}

}  // namespace

double kernel_integral(Kind k, double a, double b) {
  if (a < 0.0 || b < a) throw DomainError("bad kernel integration bounds");
  switch (k) {
    case Kind::kZero: return 0.0;
    case Kind::kA: return 0.09 / 0.4 * (std::exp(-0.4 * a) - std::exp(-0.4 * b));
    case Kind::kB:
      return 0.01 / 0.8 * (std::exp(-0.8 * a) - std::exp(-0.8 * b)) +
             0.03 / 0.6 * (std::exp(-0.6 * a) - std::exp(-0.6 * b)) +
             0.05 / 0.4 * (std::exp(-0.4 * a) - std::exp(-0.4 * b));
    case Kind::kC: return integral_c(a, b);
    case Kind::kD: return 0.1 * (1.0 / (0.5 + a) - 1.0 / (0.5 + b));
  }
  throw DomainError("unknown kernel kind");
}

double kernel_total_mass(Kind k) {
  switch (k) {
    case Kind::kZero: return 0.0;
    case Kind::kA: return 0.09 / 0.4;
    case Kind::kB: return 0.01 / 0.8 + 0.03 / 0.6 + 0.05 / 0.4;
    case Kind::kC: return integral_c(0.0, 400.0);  // tail below 1e-17 of the mass
    case Kind::kD: return 0.1 / 0.5;
  }
  throw DomainError("unknown kernel kind");
}

std::vector<double> intensity(const Model& m, const EventSequence& hist, double t) {
  std::vector<double> lam(m.mu);
  for (std::size_t e = 0; e < hist.size(); ++e) {
    if (hist.t[e] > t) break;
    const double dt = t - hist.t[e];
    const int src = hist.m[e];
    for (int j = 0; j < m.num_marks; ++j) lam[j] += kernel(m.g[j][src], dt);
  }
  return lam;
}

double branching_spectral_radius(const Model& m) {
  const int M = m.num_marks;
  Eigen::MatrixXd B(M, M);
  for (int j = 0; j < M; ++j)
    for (int i = 0; i < M; ++i) B(j, i) = kernel_total_mass(m.g[j][i]);
  // power iteration; B is non-negative so the dominant eigenvalue is real
  Eigen::VectorXd v = Eigen::VectorXd::Ones(M);
  double rho = 0.0;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd w = B * v;
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    rho = n;
  }
  return rho;
}

EventSequence simulate(const Model& m, double horizon, Rng& rng, int max_len) {
  EventSequence seq;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double mu_total = std::accumulate(m.mu.begin(), m.mu.end(), 0.0);
  double t = 0.0;
  while (static_cast<int>(seq.size()) < max_len) {
    // dominating rate from the current origin; envelopes are non-increasing
    // so this bounds the intensity at any later time
    double lam_bar = mu_total;
    for (std::size_t e = 0; e < seq.size(); ++e) {
      const double dt = t - seq.t[e];
      const int src = seq.m[e];
      for (int j = 0; j < m.num_marks; ++j) lam_bar += kernel_envelope(m.g[j][src], dt);
    }
    if (lam_bar <= 0.0) break;
    t += -std::log(1.0 - unif(rng)) / lam_bar;
    if (t > horizon) break;
    std::vector<double> lam = intensity(m, seq, t);
    const double lam_tot = std::accumulate(lam.begin(), lam.end(), 0.0);
    if (lam_tot > lam_bar * (1.0 + 1e-9))
      throw NumericError("thinning envelope violated; simulator bug");
    if (unif(rng) * lam_bar <= lam_tot) {
      double u = unif(rng) * lam_tot;
      int mark = m.num_marks - 1;
      for (int j = 0; j < m.num_marks; ++j) {
        if (u < lam[j]) {
          mark = j;
          break;
        }
        u -= lam[j];
      }
      seq.t.push_back(t);
      seq.m.push_back(mark);
    }
  }
  return seq;
}

SynthResult generate_synthetic(const SynthConfig& cfg) {
  SynthResult out;
  Model& m = out.model;
  m.num_marks = cfg.num_marks;
  m.mu.assign(cfg.num_marks, cfg.mu);
  m.g.assign(cfg.num_marks, std::vector<Kind>(cfg.num_marks, Kind::kZero));

  Rng krng = make_rng(derive_seed(cfg.seed, 0));
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  constexpr Kind kinds[4] = {Kind::kA, Kind::kB, Kind::kC, Kind::kD};
  for (int j = 0; j < cfg.num_marks; ++j)
    for (int i = 0; i < cfg.num_marks; ++i) {
      Kind k = kinds[pick(krng)];
      if (unif(krng) < cfg.cutting_ratio) k = Kind::kZero;
      m.g[j][i] = k;
    }

  if (branching_spectral_radius(m) >= 1.0) {
    out.unstable = true;
    std::cerr << "warning: UnstableProcess: branching ratio >= 1; sequences are "
                 "horizon-truncated\n";
  }

  out.data.num_marks = cfg.num_marks;
  out.data.seqs.reserve(cfg.num_seqs);
  for (int s = 0; s < cfg.num_seqs; ++s) {
    Rng rng = make_rng(derive_seed(cfg.seed, 1 + static_cast<std::uint64_t>(s)));
    EventSequence seq = simulate(m, cfg.horizon, rng);
    if (!seq.t.empty()) out.data.seqs.push_back(std::move(seq));
  }
  if (out.data.seqs.empty()) throw EmptyDataset("all simulated sequences were empty");
  return out;
}

std::vector<double> compensator_segments(const Model& m, const EventSequence& seq) {
  const double mu_total = std::accumulate(m.mu.begin(), m.mu.end(), 0.0);
  std::vector<double> seg;
  seg.reserve(seq.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double cur = seq.t[i];
    double lam_int = mu_total * (cur - prev);
    for (std::size_t e = 0; e < i; ++e) {
      const int src = seq.m[e];
      const double a = prev - seq.t[e];
      const double b = cur - seq.t[e];
      for (int j = 0; j < m.num_marks; ++j) lam_int += kernel_integral(m.g[j][src], a, b);
    }
    seg.push_back(lam_int);
    prev = cur;
  }
  return seg;
}

namespace {
Kind kind_from_char(char c) {
  switch (c) {
    case 'z': return Kind::kZero;
    case 'a': return Kind::kA;
    case 'b': return Kind::kB;
    case 'c': return Kind::kC;
    case 'd': return Kind::kD;
    default: throw SchemaError(std::string("unknown kernel kind '") + c + "'");
  }
}
}  // namespace

void save_model(const Model& m, double horizon, double cutting_ratio, std::uint64_t seed,
                const std::string& path) {
  json kinds = json::array();
  for (const auto& row : m.g) {
    std::string r;
    for (Kind k : row) r += static_cast<char>(k);
    kinds.push_back(r);
  }
  json j{{"num_marks", m.num_marks}, {"mu", m.mu},     {"kinds", kinds},
         {"horizon", horizon},       {"seed", seed},   {"cutting_ratio", cutting_ratio},
         {"branching_radius", branching_spectral_radius(m)}};
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << j.dump(2) << "\n";
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  Model m;
  m.num_marks = j.at("num_marks").get<int>();
  m.mu = j.at("mu").get<std::vector<double>>();
  for (const auto& row : j.at("kinds")) {
    std::vector<Kind> r;
    for (char c : row.get<std::string>()) r.push_back(kind_from_char(c));
    m.g.push_back(std::move(r));
  }
  if (static_cast<int>(m.g.size()) != m.num_marks ||
      static_cast<int>(m.mu.size()) != m.num_marks)
    throw SchemaError(path + ": kernel matrix shape mismatch");
  for (const auto& r : m.g)
    if (static_cast<int>(r.size()) != m.num_marks)
      throw SchemaError(path + ": kernel matrix shape mismatch");
  return m;
}

}  // namespace tpp::hawkes
