#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tppkit/diagnostics.hpp"

using tpp::VecD;
using tpp::diag::ks_statistic;
using tpp::diag::ks_test;
using tpp::diag::ks_threshold;
using tpp::diag::OracleFamily;
using tpp::diag::OracleSpec;

namespace {

OracleSpec gaussian(double mu, double sigma) {
  OracleSpec o;
  o.family = OracleFamily::kGaussian;
  o.loc(0) = mu;
  o.scale(0) = sigma;
  return o;
}

}  // namespace

TEST_CASE("ks statistic matches a hand-computed staircase case") {
  VecD s(3);
  s << 0.9, 0.2, 0.5;  // sorting is the function's job
  auto unif = [](double x) { return x; };
  // D+ = max(1/3-0.2, 2/3-0.5, 1-0.9); D- = max(0.2, 0.5-1/3, 0.9-2/3)
  CHECK(ks_statistic(s, unif) == doctest::Approx(0.9 - 2.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(ks_statistic(VecD(), unif), tpp::EmptyEval);
}

TEST_CASE("ks thresholds reproduce the closed-form critical values") {
  // c(0.05) = 1.3581, c(0.01) = 1.6276 (two-sided asymptotic constants)
  CHECK(ks_threshold(0.05, 1) == doctest::Approx(1.3581).epsilon(1e-4));
  CHECK(ks_threshold(0.01, 1) == doctest::Approx(1.6276).epsilon(1e-4));
  CHECK(ks_threshold(0.05, 100) == doctest::Approx(0.13581).epsilon(1e-4));
  CHECK_THROWS_AS(ks_threshold(0.0, 10), tpp::ConfigError);
  CHECK_THROWS_AS(ks_threshold(0.5, 0), tpp::ConfigError);
}

TEST_CASE("ks test accepts matching and rejects shifted gaussians") {
  tpp::Rng rng = tpp::make_rng(123);
  OracleSpec std_normal = gaussian(0.0, 1.0);
  VecD matched = std_normal.sample(10000, rng);
  auto cdf = [&](double x) { return std_normal.cdf(x); };
  auto ok = ks_test(matched, cdf, 0.01);
  CHECK(ok.pass);
  CHECK(ok.statistic < ok.threshold);
  CHECK(ok.n == 10000);

  VecD shifted = gaussian(1.0, 1.0).sample(10000, rng);
  auto bad = ks_test(shifted, cdf, 0.01);
  CHECK(!bad.pass);
  CHECK(bad.statistic > 0.3);  // shift by one sigma moves mass far beyond noise

  CHECK_THROWS_AS(ks_test(VecD::Zero(10), cdf), tpp::ConfigError);
}

TEST_CASE("oracle cdfs hit known values and stay monotone") {
  OracleSpec e;
  e.family = OracleFamily::kExp;
  e.loc(0) = 2.0;
  CHECK(e.cdf(-1.0) == 0.0);
  CHECK(e.cdf(0.5) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));

  OracleSpec ln;
  ln.family = OracleFamily::kLogNormal;
  CHECK(ln.cdf(1.0) == doctest::Approx(0.5).epsilon(1e-12));  // median e^mu = 1
  CHECK(ln.cdf(0.0) == 0.0);

  OracleSpec g = gaussian(1.0, 2.0);
  CHECK(g.cdf(1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.cdf(3.0) == doctest::Approx(0.8413447460685429).epsilon(1e-9));

  for (const OracleSpec& o : {e, ln, g}) {
    double prev = -1.0;
    for (double x = -4.0; x <= 8.0; x += 0.25) {
      const double f = o.cdf(x);
      CHECK(f >= prev);
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
      prev = f;
    }
  }
}

TEST_CASE("oracle sampling matches its own cdf for every family") {
  tpp::Rng rng = tpp::make_rng(77);
  OracleSpec mix;
  mix.family = OracleFamily::kMixture;
  mix.weights = VecD(2);
  mix.weights << 0.3, 0.7;
  mix.loc = VecD(2);
  mix.loc << -1.0, 2.0;
  mix.scale = VecD(2);
  mix.scale << 0.5, 1.5;

  OracleSpec e;
  e.family = OracleFamily::kExp;
  e.loc(0) = 0.7;
  OracleSpec ln;
  ln.family = OracleFamily::kLogNormal;
  ln.loc(0) = 0.3;
  ln.scale(0) = 0.8;

  for (const OracleSpec& o : {e, ln, gaussian(-2.0, 0.4), mix}) {
    VecD s = o.sample(8000, rng);
    auto res = ks_test(s, [&](double x) { return o.cdf(x); }, 0.01);
    CHECK(res.pass);
  }
}

TEST_CASE("oracle validation rejects bad parameters") {
  OracleSpec e;
  e.family = OracleFamily::kExp;
  e.loc(0) = 0.0;
  CHECK_THROWS_AS(e.validate(), tpp::ConfigError);

  OracleSpec g = gaussian(0.0, -1.0);
  CHECK_THROWS_AS(g.validate(), tpp::ConfigError);

  OracleSpec plain = gaussian(0.0, 1.0);
  plain.loc = VecD::Zero(2);
  plain.scale = VecD::Ones(2);
  plain.weights = VecD::Constant(2, 0.5);
  CHECK_THROWS_AS(plain.validate(), tpp::ConfigError);  // two components, not a mixture

  OracleSpec mix;
  mix.family = OracleFamily::kMixture;
  mix.weights = VecD::Constant(1, 0.4);  // does not sum to 1
  CHECK_THROWS_AS(mix.validate(), tpp::ConfigError);

  tpp::Rng r = tpp::make_rng(1);
  CHECK_THROWS_AS(gaussian(0.0, 1.0).sample(0, r), tpp::ConfigError);
}

TEST_CASE("timing report formats one row per decoder with per-epoch seconds") {
  std::string rep = tpp::diag::timing_report({{"tcddm", 10, 5.0}, {"tccnf", 10, 50.0}});
  CHECK(rep.find("tcddm") != std::string::npos);
  CHECK(rep.find("tccnf") != std::string::npos);
  CHECK(rep.find("0.500") != std::string::npos);
  CHECK(rep.find("5.000") != std::string::npos);
  CHECK(rep.find("s_per_epoch") != std::string::npos);
  CHECK_THROWS_AS(tpp::diag::timing_report({{"x", 0, 1.0}}), tpp::ConfigError);
}
