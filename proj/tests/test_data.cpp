#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "tppkit/data.hpp"
#include "tppkit/errors.hpp"

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& contents) {
    static int counter = 0;
    path = "tppkit_test_" + std::to_string(counter++) + ".jsonl";
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

tpp::Dataset make_dataset(std::size_t n_seqs, std::size_t len = 4) {
  tpp::Dataset ds;
  ds.num_marks = 2;
  for (std::size_t s = 0; s < n_seqs; ++s) {
    tpp::EventSequence seq;
    double t = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      t += 0.5 + 0.1 * static_cast<double>(s % 3);
      seq.t.push_back(t);
      seq.m.push_back(static_cast<int>((s + i) % 2));
    }
    ds.seqs.push_back(seq);
  }
  return ds;
}

}  // namespace

TEST_CASE("load_jsonl parses sequences and infers mark count") {
  TempFile f("{\"seq\": [[0.5, 0], [1.25, 2]]}\n{\"seq\": [[0.1, 1]]}\n");
  tpp::Dataset ds = tpp::load_jsonl(f.path);
  REQUIRE(ds.seqs.size() == 2);
  CHECK(ds.num_marks == 3);
  CHECK(ds.seqs[0].t[1] == doctest::Approx(1.25));
  CHECK(ds.seqs[0].m[1] == 2);
}

TEST_CASE("load_jsonl rejects malformed input with a line number") {
  TempFile bad_json("{\"seq\": [[0.5, 0]]}\nnot json\n");
  CHECK_THROWS_AS(tpp::load_jsonl(bad_json.path), tpp::ParseError);
  try {
    tpp::load_jsonl(bad_json.path);
  } catch (const tpp::ParseError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }

  TempFile out_of_order("{\"seq\": [[2.0, 0], [1.0, 0]]}\n");
  CHECK_THROWS_AS(tpp::load_jsonl(out_of_order.path), tpp::ParseError);

  TempFile frac_mark("{\"seq\": [[1.0, 0.5]]}\n");
  CHECK_THROWS_AS(tpp::load_jsonl(frac_mark.path), tpp::ParseError);

  TempFile neg_time("{\"seq\": [[-1.0, 0]]}\n");
  CHECK_THROWS_AS(tpp::load_jsonl(neg_time.path), tpp::ParseError);

  TempFile empty("");
  CHECK_THROWS_AS(tpp::load_jsonl(empty.path), tpp::EmptyDataset);
}

TEST_CASE("equal timestamps are allowed and give a zero interval") {
  TempFile f("{\"seq\": [[1.0, 0], [1.0, 1], [2.0, 0]]}\n");
  tpp::Dataset ds = tpp::load_jsonl(f.path);
  auto tau = tpp::intervals(ds.seqs[0]);
  CHECK(tau[0] == doctest::Approx(1.0));
  CHECK(tau[1] == doctest::Approx(0.0));
  CHECK(tau[2] == doctest::Approx(1.0));
}

TEST_CASE("sequences longer than the clamp are truncated") {
  std::string line = "{\"seq\": [";
  for (int i = 0; i < 1200; ++i) {
    if (i) line += ",";
    line += "[" + std::to_string(i + 1) + ", 0]";
  }
  line += "]}\n";
  TempFile f(line);
  tpp::Dataset ds = tpp::load_jsonl(f.path);
  CHECK(ds.seqs[0].size() == 1000);
}

TEST_CASE("save then load round-trips timestamps exactly") {
  tpp::Dataset ds;
  ds.num_marks = 2;
  tpp::EventSequence s;
  s.t = {0.1234567890123456, 1.9999999999999998, 3.14159265358979};
  s.m = {0, 1, 0};
  ds.seqs.push_back(s);
  const std::string path = "tppkit_roundtrip.jsonl";
  tpp::save_jsonl(ds, path);
  tpp::Dataset back = tpp::load_jsonl(path);
  std::remove(path.c_str());
  REQUIRE(back.seqs.size() == 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(back.seqs[0].t[i] == ds.seqs[0].t[i]);
    CHECK(back.seqs[0].m[i] == ds.seqs[0].m[i]);
  }
}

TEST_CASE("split is an exact deterministic partition with 64/16/20 counts") {
  tpp::Dataset ds = make_dataset(100);
  for (std::size_t i = 0; i < ds.seqs.size(); ++i) ds.seqs[i].t[0] += 1e-9 * double(i);

  tpp::SplitResult a = tpp::split(ds, 42);
  tpp::SplitResult b = tpp::split(ds, 42);
  CHECK(a.train.seqs.size() == 64);
  CHECK(a.val.seqs.size() == 16);
  CHECK(a.test.seqs.size() == 20);
  CHECK(a.train.seqs.size() == b.train.seqs.size());
  for (std::size_t i = 0; i < a.train.seqs.size(); ++i)
    CHECK(a.train.seqs[i].t[0] == b.train.seqs[i].t[0]);

  // partition: every original first-timestamp appears exactly once
  std::multiset<double> seen;
  for (const auto& part : {a.train, a.val, a.test})
    for (const auto& s : part.seqs) seen.insert(s.t[0]);
  std::multiset<double> orig;
  for (const auto& s : ds.seqs) orig.insert(s.t[0]);
  CHECK(seen == orig);

  tpp::SplitResult c = tpp::split(ds, 43);
  bool same = true;
  for (std::size_t i = 0; i < c.train.seqs.size() && same; ++i)
    same = c.train.seqs[i].t[0] == a.train.seqs[i].t[0];
  CHECK_FALSE(same);
}

TEST_CASE("split refuses fewer than 5 sequences") {
  tpp::Dataset ds = make_dataset(4);
  CHECK_THROWS_AS(tpp::split(ds, 1), tpp::SplitError);
}

TEST_CASE("rescale maps the training maximum to the target") {
  tpp::Dataset ds = make_dataset(10);
  const double t_max = tpp::max_time(ds);
  tpp::rescale_time(ds, t_max);
  CHECK(tpp::max_time(ds) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK_THROWS_AS(tpp::rescale_time(ds, 0.0), tpp::RescaleError);
  CHECK_THROWS_AS(tpp::rescale_time(ds, -3.0), tpp::RescaleError);
}

TEST_CASE("log normalization round-trips and uses variance scaling") {
  tpp::Dataset train = make_dataset(20, 6);
  tpp::LogNormStats st = tpp::compute_stats(train);
  CHECK(st.var_log > 0.0);
  for (double tau : {1e-6, 0.37, 1.0, 42.0}) {
    const double z = tpp::log_normalize(tau, st);
    CHECK(tpp::log_denormalize(z, st) == doctest::Approx(tau).epsilon(1e-9));
  }
  // hand-computed: z = (log(tau) - mean) / var
  const double z = tpp::log_normalize(2.0, st);
  CHECK(z == doctest::Approx((std::log(2.0) - st.mean_log) / st.var_log));
}

TEST_CASE("tiny intervals are clamped before the log") {
  tpp::LogNormStats st{0.0, 1.0, 1.0};
  CHECK(tpp::log_normalize(0.0, st) == doctest::Approx(std::log(1e-8)));
  CHECK(std::isfinite(tpp::log_normalize(0.0, st)));
}

TEST_CASE("stats sidecar round-trips") {
  tpp::LogNormStats st{-0.25, 1.75, 123.5};
  const std::string path = "tppkit_stats.json";
  tpp::save_stats(st, path);
  tpp::LogNormStats back = tpp::load_stats(path);
  std::remove(path.c_str());
  CHECK(back.mean_log == st.mean_log);
  CHECK(back.var_log == st.var_log);
  CHECK(back.t_max == st.t_max);
}

TEST_CASE("constant intervals produce the variance floor, not zero") {
  tpp::Dataset ds;
  ds.num_marks = 1;
  tpp::EventSequence s;
  for (int i = 1; i <= 10; ++i) {
    s.t.push_back(static_cast<double>(i));
    s.m.push_back(0);
  }
  ds.seqs.push_back(s);
  tpp::LogNormStats st = tpp::compute_stats(ds);
  CHECK(st.var_log == doctest::Approx(1e-6));
}
