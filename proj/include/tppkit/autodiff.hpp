#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "tppkit/errors.hpp"

namespace tpp::ad {

// Reverse-mode tape. Nodes are appended in evaluation order, so parent
// indices are always smaller than the child's and the reverse sweep is a
// topological traversal by construction.
struct Node {
  double data;
  double grad;
  double d0, d1;        // local derivatives wrt parents
  std::int32_t p0, p1;  // parent tape indices, -1 = none
};

class Tape {
 public:
  Tape() { nodes_.reserve(1 << 16); }

  static Tape*& current() {
    static thread_local Tape* cur = nullptr;
    return cur;
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  std::int32_t push(double data, std::int32_t p0, double d0, std::int32_t p1, double d1) {
    nodes_.push_back(Node{data, 0.0, d0, d1, p0, p1});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  double data(std::int32_t i) const { return nodes_[i].data; }
  double grad(std::int32_t i) const { return nodes_[i].grad; }

  // Reverse sweep seeded at `root`. Accumulates into Node::grad.
  void backward(std::int32_t root) {
    if (root < 0 || root >= static_cast<std::int32_t>(nodes_.size()))
      throw NumericError("backward: root is not a tracked node");
    if (!std::isfinite(nodes_[root].data)) throw NonFiniteLoss();
    for (auto& n : nodes_) n.grad = 0.0;
    nodes_[root].grad = 1.0;
    for (std::int32_t i = root; i >= 0; --i) {
      const Node& n = nodes_[i];
      const double g = n.grad;
      if (g == 0.0) continue;
      if (n.p0 >= 0) nodes_[n.p0].grad += n.d0 * g;
      if (n.p1 >= 0) nodes_[n.p1].grad += n.d1 * g;
    }
  }

 private:
  std::vector<Node> nodes_;
};

// RAII scope that installs a tape as the thread-local target for new nodes.
class TapeScope {
 public:
  explicit TapeScope(Tape& t) : prev_(Tape::current()) { Tape::current() = &t; }
  ~TapeScope() { Tape::current() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

// Differentiable scalar. Carries its numeric value inline so arithmetic on
// constants folds without touching the tape; tracked values additionally
// carry a tape index.
class Value {
 public:
  Value() : idx_(-1), data_(0.0) {}
  Value(double c) : idx_(-1), data_(c) {}  // NOLINT: implicit by design

  static Value leaf(double v) {
    Tape* t = Tape::current();
    if (!t) throw NumericError("Value::leaf: no active tape");
    return Value(t->push(v, -1, 0.0, -1, 0.0), v);
  }

  double value() const { return data_; }
  bool tracked() const { return idx_ >= 0; }
  std::int32_t index() const { return idx_; }

  double grad() const {
    if (idx_ < 0) return 0.0;
    return Tape::current()->grad(idx_);
  }

  static Value raw(std::int32_t idx, double data) { return Value(idx, data); }

 private:
  Value(std::int32_t idx, double data) : idx_(idx), data_(data) {}
  std::int32_t idx_;
  double data_;
};

inline Value make_unary(const Value& a, double out, double d0) {
  if (!a.tracked()) return Value(out);
  return Value::raw(Tape::current()->push(out, a.index(), d0, -1, 0.0), out);
}

inline Value make_binary(const Value& a, const Value& b, double out, double d0, double d1) {
  if (!a.tracked() && !b.tracked()) return Value(out);
  return Value::raw(Tape::current()->push(out, a.index(), d0, b.index(), d1), out);
}

inline Value operator+(const Value& a, const Value& b) {
  return make_binary(a, b, a.value() + b.value(), 1.0, 1.0);
}
inline Value operator-(const Value& a, const Value& b) {
  return make_binary(a, b, a.value() - b.value(), 1.0, -1.0);
}
inline Value operator*(const Value& a, const Value& b) {
  return make_binary(a, b, a.value() * b.value(), b.value(), a.value());
}
inline Value operator/(const Value& a, const Value& b) {
  const double bv = b.value();
  return make_binary(a, b, a.value() / bv, 1.0 / bv, -a.value() / (bv * bv));
}
inline Value operator-(const Value& a) { return make_unary(a, -a.value(), -1.0); }
inline Value operator+(const Value& a) { return a; }

inline Value& operator+=(Value& a, const Value& b) { return a = a + b; }
inline Value& operator-=(Value& a, const Value& b) { return a = a - b; }
inline Value& operator*=(Value& a, const Value& b) { return a = a * b; }
inline Value& operator/=(Value& a, const Value& b) { return a = a / b; }

inline bool operator<(const Value& a, const Value& b) { return a.value() < b.value(); }
inline bool operator>(const Value& a, const Value& b) { return a.value() > b.value(); }
inline bool operator<=(const Value& a, const Value& b) { return a.value() <= b.value(); }
inline bool operator>=(const Value& a, const Value& b) { return a.value() >= b.value(); }
inline bool operator==(const Value& a, const Value& b) { return a.value() == b.value(); }
inline bool operator!=(const Value& a, const Value& b) { return a.value() != b.value(); }

inline Value exp(const Value& a) {
  const double e = std::exp(a.value());
  return make_unary(a, e, e);
}
inline Value log(const Value& a) { return make_unary(a, std::log(a.value()), 1.0 / a.value()); }
inline Value sqrt(const Value& a) {
  const double s = std::sqrt(a.value());
  return make_unary(a, s, 0.5 / s);
}
inline Value tanh(const Value& a) {
  const double t = std::tanh(a.value());
  return make_unary(a, t, 1.0 - t * t);
}
inline Value sin(const Value& a) { return make_unary(a, std::sin(a.value()), std::cos(a.value())); }
inline Value cos(const Value& a) { return make_unary(a, std::cos(a.value()), -std::sin(a.value())); }
inline Value abs(const Value& a) {
  return make_unary(a, std::abs(a.value()), a.value() >= 0.0 ? 1.0 : -1.0);
}
inline Value pow(const Value& a, double p) {
  const double v = std::pow(a.value(), p);
  return make_unary(a, v, p * std::pow(a.value(), p - 1.0));
}
inline Value pow(const Value& a, const Value& b) {
  const double av = a.value(), bv = b.value();
  const double v = std::pow(av, bv);
  return make_binary(a, b, v, bv * std::pow(av, bv - 1.0), v * std::log(av));
}

// Eigen support hooks, found by ADL.
inline const Value& conj(const Value& a) { return a; }
inline const Value& real(const Value& a) { return a; }
inline Value imag(const Value&) { return Value(0.0); }
inline Value abs2(const Value& a) { return a * a; }
inline bool isfinite(const Value& a) { return std::isfinite(a.value()); }

// Uniform accessor so generic code can read the numeric value of either
// scalar type.
inline double value_of(double x) { return x; }
inline double value_of(const Value& x) { return x.value(); }

}  // namespace tpp::ad

namespace Eigen {

template <>
struct NumTraits<tpp::ad::Value> : GenericNumTraits<tpp::ad::Value> {
  using Real = tpp::ad::Value;
  using NonInteger = tpp::ad::Value;
  using Nested = tpp::ad::Value;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3,
  };
  static inline Real epsilon() { return Real(NumTraits<double>::epsilon()); }
  static inline Real dummy_precision() { return Real(NumTraits<double>::dummy_precision()); }
  static inline Real highest() { return Real(NumTraits<double>::highest()); }
  static inline Real lowest() { return Real(NumTraits<double>::lowest()); }
  static inline int digits10() { return NumTraits<double>::digits10(); }
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<tpp::ad::Value, double, BinaryOp> {
  using ReturnType = tpp::ad::Value;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, tpp::ad::Value, BinaryOp> {
  using ReturnType = tpp::ad::Value;
};

}  // namespace Eigen

namespace tpp {

// Dense aliases used across the library; S is double (inference/sampling)
// or ad::Value (training).
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatD = Mat<double>;
using VecD = Vec<double>;

// Promote plain data to the working scalar before matrix products; Eigen's
// product kernels do not support mixed scalars.
template <class S>
Vec<S> to_vec(const VecD& x) {
  return x.template cast<S>();
}
template <class S>
Mat<S> to_mat(const MatD& x) {
  return x.template cast<S>();
}

}  // namespace tpp
