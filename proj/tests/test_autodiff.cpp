#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tppkit/linalg.hpp"
#include "tppkit/params.hpp"

using tpp::ad::Tape;
using tpp::ad::TapeScope;
using tpp::ad::Value;

TEST_CASE("square gradient matches analytic value") {
  Tape tape;
  TapeScope scope(tape);
  Value x = Value::leaf(3.0);
  Value y = x * x;
  tape.backward(y.index());
  CHECK(y.value() == doctest::Approx(9.0));
  CHECK(x.grad() == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("composite chain matches finite differences") {
  auto f = [](double x) { return std::exp(std::sin(x) * x) + std::log(1.0 + x * x); };
  for (double x0 : {0.3, 1.1, -0.7}) {
    Tape tape;
    TapeScope scope(tape);
    Value x = Value::leaf(x0);
    Value y = exp(sin(x) * x) + log(1.0 + x * x);
    tape.backward(y.index());
    const double g_fd = (f(x0 + 1e-6) - f(x0 - 1e-6)) / 2e-6;
    CHECK(x.grad() == doctest::Approx(g_fd).epsilon(1e-6));
  }
}

TEST_CASE("division, sqrt, tanh, abs, pow gradients") {
  Tape tape;
  TapeScope scope(tape);
  Value x = Value::leaf(0.8);
  Value y = tanh(x) / sqrt(x) + abs(x * -2.0) + pow(x, 3.0);
  tape.backward(y.index());
  const double h = 1e-6, xv = 0.8;
  auto f = [](double x) {
    return std::tanh(x) / std::sqrt(x) + std::abs(-2.0 * x) + std::pow(x, 3.0);
  };
  CHECK(x.grad() == doctest::Approx((f(xv + h) - f(xv - h)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("constants fold without growing the tape") {
  Tape tape;
  TapeScope scope(tape);
  Value a(2.0), b(3.0);
  Value c = a * b + exp(a) - b / a;
  CHECK(tape.size() == 0);
  CHECK(c.value() == doctest::Approx(2.0 * 3.0 + std::exp(2.0) - 1.5));
  CHECK_FALSE(c.tracked());
}

TEST_CASE("backward on non-finite root throws NonFiniteLoss") {
  Tape tape;
  TapeScope scope(tape);
  Value x = Value::leaf(0.0);
  Value y = log(x);  // -inf
  CHECK_THROWS_AS(tape.backward(y.index()), tpp::NonFiniteLoss);
}

TEST_CASE("softmax: sums to one, strictly positive, gradient matches FD") {
  tpp::Vec<double> logits(4);
  logits << 3.0, -2.0, 11.0, 0.5;
  tpp::Vec<double> p = tpp::softmax<double>(logits);
  CHECK(std::abs(p.sum() - 1.0) < 1e-12);
  for (int i = 0; i < 4; ++i) CHECK(p(i) > 0.0);

  // d/dx softmax([x, 0])[0] at x=0 is 1/4.
  auto smx0 = [](double x) {
    tpp::Vec<double> l(2);
    l << x, 0.0;
    return tpp::softmax<double>(l)(0);
  };
  const double g_fd = (smx0(1e-5) - smx0(-1e-5)) / 2e-5;
  CHECK(g_fd == doctest::Approx(0.25).epsilon(1e-6));

  Tape tape;
  TapeScope scope(tape);
  Value x = Value::leaf(0.0);
  tpp::Vec<Value> l(2);
  l << x, Value(0.0);
  Value p0 = tpp::softmax<Value>(l)(0);
  tape.backward(p0.index());
  CHECK(x.grad() == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(x.grad() == doctest::Approx(g_fd).epsilon(1e-5));
}

TEST_CASE("logsumexp matches naive computation and is shift-stable") {
  tpp::Vec<double> v(3);
  v << 1.0, 2.0, 3.0;
  const double naive = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  CHECK(tpp::logsumexp<double>(v) == doctest::Approx(naive).epsilon(1e-14));
  tpp::Vec<double> big(2);
  big << 1000.0, 1000.0;
  CHECK(tpp::logsumexp<double>(big) == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("Eigen matrix product with tracked scalars backpropagates") {
  Tape tape;
  TapeScope scope(tape);
  tpp::Mat<Value> W(2, 2);
  W(0, 0) = Value::leaf(1.0);
  W(0, 1) = Value::leaf(2.0);
  W(1, 0) = Value::leaf(-0.5);
  W(1, 1) = Value::leaf(0.25);
  tpp::Vec<double> x(2);
  x << 3.0, -1.0;
  tpp::Vec<Value> y = W * tpp::to_vec<Value>(x);
  Value loss = y(0) * y(0) + y(1);
  tape.backward(loss.index());
  // y0 = 1*3 + 2*(-1) = 1; dloss/dW00 = 2*y0*x0 = 6, dW01 = 2*y0*x1 = -2,
  // dW10 = x0 = 3, dW11 = x1 = -1.
  CHECK(W(0, 0).grad() == doctest::Approx(6.0));
  CHECK(W(0, 1).grad() == doctest::Approx(-2.0));
  CHECK(W(1, 0).grad() == doctest::Approx(3.0));
  CHECK(W(1, 1).grad() == doctest::Approx(-1.0));
}

TEST_CASE("mixed Value/double Eigen expressions produce Value") {
  Tape tape;
  TapeScope scope(tape);
  tpp::Vec<Value> a(2);
  a << Value::leaf(1.0), Value::leaf(2.0);
  tpp::Vec<double> b(2);
  b << 4.0, 5.0;
  Value d = a.dot(tpp::to_vec<Value>(b));
  CHECK(d.value() == doctest::Approx(14.0));
  tape.backward(d.index());
  CHECK(a(0).grad() == doctest::Approx(4.0));
  CHECK(a(1).grad() == doctest::Approx(5.0));
}

TEST_CASE("Adam first step moves a parameter by about -lr for unit gradient") {
  tpp::ParamStore store;
  store.add("w", 1, 1);
  tpp::GradMap g(store);
  g.at("w")(0, 0) = 1.0;
  store.adam_step(g, 0.1);
  CHECK(std::abs(store.value("w")(0, 0) + 0.1) < 1e-8);
  CHECK(store.adam_steps() == 1);
}

TEST_CASE("Adam rejects non-finite gradients") {
  tpp::ParamStore store;
  store.add("w", 1, 1);
  tpp::GradMap g(store);
  g.at("w")(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(store.adam_step(g, 0.1), tpp::NonFiniteGradient);
}

TEST_CASE("parameter init is deterministic for a fixed seed") {
  auto build = [](std::uint64_t seed) {
    tpp::ParamStore s;
    tpp::Rng rng = tpp::make_rng(seed);
    s.add_linear("w", 4, 3, rng);
    return s.value("w");
  };
  CHECK(build(7) == build(7));
  CHECK(build(7) != build(8));
}

TEST_CASE("linear init stays within +-1/sqrt(fan_in) and biases are zero") {
  tpp::ParamStore s;
  tpp::Rng rng = tpp::make_rng(3);
  s.add_linear("w", 8, 16, rng);
  s.add_bias("b", 8);
  CHECK(s.value("w").cwiseAbs().maxCoeff() <= 1.0 / 4.0);
  CHECK(s.value("b").isZero());
}

TEST_CASE("finite_diff_check validates a two-layer tanh network loss") {
  tpp::ParamStore store;
  tpp::Rng rng = tpp::make_rng(11);
  store.add_linear("w1", 4, 3, rng);
  store.add_bias("b1", 4);
  store.add_linear("w2", 1, 4, rng);

  tpp::Vec<double> x(3);
  x << 0.2, -1.0, 0.7;
  auto loss = [&]<class B>(B& b) {
    using S = typename B::Scalar;
    using std::tanh;
    tpp::Vec<S> h = b.mat("w1") * tpp::to_vec<S>(x) + b.mat("b1");
    for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = tanh(h(i));
    tpp::Vec<S> o = b.mat("w2") * h;
    return o(0) * o(0);
  };
  auto rep = tpp::finite_diff_check(store, loss, 1e-5, 1e-4);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err < 1e-4);
  CHECK(rep.params.size() == 3);
}

TEST_CASE("gradients accumulate across reused subexpressions") {
  Tape tape;
  TapeScope scope(tape);
  Value x = Value::leaf(2.0);
  Value y = x * x + x * 3.0 + x;  // dy/dx = 2x + 4 = 8
  tape.backward(y.index());
  CHECK(x.grad() == doctest::Approx(8.0));
}
