#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tppkit/autodiff.hpp"
#include "tppkit/errors.hpp"
#include "tppkit/rng.hpp"

namespace tpp {

struct ParamEntry {
  std::string name;
  int rows = 0, cols = 0;
  Eigen::MatrixXd value;
  Eigen::MatrixXd m, v;  // Adam moments
};

class GradMap;

// Flat named parameter store. Declaration order is the serialization order.
class ParamStore {
 public:
  Eigen::MatrixXd& add(const std::string& name, int rows, int cols) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back(ParamEntry{name, rows, cols, Eigen::MatrixXd::Zero(rows, cols),
                                  Eigen::MatrixXd::Zero(rows, cols),
                                  Eigen::MatrixXd::Zero(rows, cols)});
    total_ += static_cast<std::int64_t>(rows) * cols;
    return entries_.back().value;
  }

  // Linear-map weight, uniform in +-1/sqrt(fan_in).
  Eigen::MatrixXd& add_linear(const std::string& name, int out, int in, Rng& rng) {
    Eigen::MatrixXd& w = add(name, out, in);
    const double b = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-b, b);
    for (int j = 0; j < in; ++j)
      for (int i = 0; i < out; ++i) w(i, j) = u(rng);
    return w;
  }

  Eigen::MatrixXd& add_bias(const std::string& name, int n) { return add(name, n, 1); }

  Eigen::MatrixXd& add_scalar(const std::string& name, double v0) {
    Eigen::MatrixXd& w = add(name, 1, 1);
    w(0, 0) = v0;
    return w;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  int entry_index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  const ParamEntry& entry(const std::string& name) const { return entries_[entry_index(name)]; }
  Eigen::MatrixXd& value(const std::string& name) { return entries_[entry_index(name)].value; }
  const Eigen::MatrixXd& value(const std::string& name) const {
    return entries_[entry_index(name)].value;
  }

  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::int64_t total_coeffs() const { return total_; }
  std::int64_t adam_steps() const { return adam_steps_; }

  void adam_step(const GradMap& grads, double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);

  // Update only entries selected by `include`, with an externally managed
  // bias-correction step count (for parameter groups on separate schedules).
  void adam_step_filtered(const GradMap& grads, double lr, std::int64_t step,
                          const std::function<bool(const std::string&)>& include,
                          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void reset_optimizer() {
    adam_steps_ = 0;
    for (auto& e : entries_) {
      e.m.setZero();
      e.v.setZero();
    }
  }

  // Raw little-endian doubles in declaration order, column-major per entry.
  void write_flat(std::ostream& os) const {
    for (const auto& e : entries_)
      os.write(reinterpret_cast<const char*>(e.value.data()),
               static_cast<std::streamsize>(sizeof(double) * e.value.size()));
  }

  void read_flat(std::istream& is) {
    for (auto& e : entries_) {
      is.read(reinterpret_cast<char*>(e.value.data()),
              static_cast<std::streamsize>(sizeof(double) * e.value.size()));
      if (!is) throw SchemaError("checkpoint payload truncated while reading " + e.name);
    }
  }

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, int> index_;
  std::int64_t total_ = 0;
  std::int64_t adam_steps_ = 0;
};

// Gradients aligned with a store's entries, addressable by parameter name.
class GradMap {
 public:
  explicit GradMap(const ParamStore& store) : store_(&store) {
    g.reserve(store.size());
    for (const auto& e : store.entries()) g.push_back(Eigen::MatrixXd::Zero(e.rows, e.cols));
  }

  Eigen::MatrixXd& at(const std::string& name) { return g[store_->entry_index(name)]; }
  const Eigen::MatrixXd& at(const std::string& name) const {
    return g[store_->entry_index(name)];
  }

  std::vector<Eigen::MatrixXd> g;

 private:
  const ParamStore* store_;
};

inline void ParamStore::adam_step_filtered(const GradMap& grads, double lr, std::int64_t step,
                                           const std::function<bool(const std::string&)>& include,
                                           double beta1, double beta2, double eps) {
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    ParamEntry& e = entries_[k];
    if (include && !include(e.name)) continue;
    const Eigen::MatrixXd& g = grads.g[k];
    if (!g.allFinite()) throw NonFiniteGradient("non-finite gradient for " + e.name);
    e.m = beta1 * e.m + (1.0 - beta1) * g;
    e.v = beta2 * e.v + (1.0 - beta2) * g.cwiseProduct(g);
    e.value -= lr * (e.m / c1).cwiseQuotient(((e.v / c2).cwiseSqrt().array() + eps).matrix());
    if (!e.value.allFinite()) throw NumericError("non-finite parameter after update: " + e.name);
  }
}

inline void ParamStore::adam_step(const GradMap& grads, double lr, double beta1, double beta2,
                                  double eps) {
  ++adam_steps_;
  adam_step_filtered(grads, lr, adam_steps_, nullptr, beta1, beta2, eps);
}

template <class S>
class Binder;

// Plain numeric view of a store; used for sampling and evaluation.
template <>
class Binder<double> {
 public:
  using Scalar = double;
  explicit Binder(const ParamStore& store) : store_(&store) {}

  const MatD& mat(const std::string& name) const { return store_->value(name); }
  double scalar(const std::string& name) const { return store_->value(name)(0, 0); }

 private:
  const ParamStore* store_;
};

// Tracked view: each parameter coefficient becomes a tape leaf on first
// access. Leaves for one entry are contiguous, which makes gradient
// gathering a linear scan.
template <>
class Binder<ad::Value> {
 public:
  using Scalar = ad::Value;
  explicit Binder(const ParamStore& store)
      : store_(&store), cache_(store.size()), leaf_start_(store.size(), -1) {}

  const Mat<ad::Value>& mat(const std::string& name) { return bind(store_->entry_index(name)); }
  ad::Value scalar(const std::string& name) { return mat(name)(0, 0); }

  GradMap grads() const {
    GradMap gm(*store_);
    const ad::Tape* tape = ad::Tape::current();
    for (std::size_t k = 0; k < cache_.size(); ++k) {
      if (leaf_start_[k] < 0) continue;  // never bound -> zero grad
      Eigen::MatrixXd& g = gm.g[k];
      std::int32_t idx = leaf_start_[k];
      for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = tape->grad(idx + i);
    }
    return gm;
  }

 private:
  const Mat<ad::Value>& bind(int k) {
    Mat<ad::Value>& m = cache_[k];
    if (leaf_start_[k] < 0) {
      const ParamEntry& e = store_->entries()[k];
      m.resize(e.rows, e.cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        ad::Value v = ad::Value::leaf(e.value.data()[i]);
        if (i == 0) leaf_start_[k] = v.index();
        m.data()[i] = v;
      }
    }
    return m;
  }

  const ParamStore* store_;
  std::vector<Mat<ad::Value>> cache_;
  std::vector<std::int32_t> leaf_start_;
};

struct FdParamReport {
  std::string name;
  double max_rel_err = 0.0;
};

struct FdReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::vector<FdParamReport> params;
};

// Compares reverse-mode gradients against central finite differences for a
// deterministic loss functional. `fn` must accept Binder<double>& and
// Binder<ad::Value>& and return the matching scalar type.
template <class F>
FdReport finite_diff_check(ParamStore& store, F&& fn, double h = 1e-5, double tol = 1e-4) {
  ad::Tape tape;
  GradMap gad = [&] {
    ad::TapeScope scope(tape);
    Binder<ad::Value> b(store);
    ad::Value loss = fn(b);
    if (!std::isfinite(loss.value())) throw NonFiniteLoss("finite_diff_check loss not finite");
    if (loss.tracked()) tape.backward(loss.index());
    return b.grads();
  }();

  FdReport rep;
  for (std::size_t k = 0; k < store.size(); ++k) {
    const std::string& name = store.entries()[k].name;
    Eigen::MatrixXd& val = store.value(name);
    FdParamReport pr{name, 0.0};
    for (Eigen::Index i = 0; i < val.size(); ++i) {
      const double orig = val.data()[i];
      val.data()[i] = orig + h;
      Binder<double> bp(store);
      const double fp = fn(bp);
      val.data()[i] = orig - h;
      Binder<double> bm(store);
      const double fm = fn(bm);
      val.data()[i] = orig;
      const double gfd = (fp - fm) / (2.0 * h);
      // Mixed tolerance: the tol term in the denominator grants an absolute
      // floor of tol^2, since central differences cannot resolve vanishing
      // gradients past their own roundoff noise.
      const double rel = std::abs(gad.g[k].data()[i] - gfd) / (std::abs(gfd) + tol);
      if (rel > pr.max_rel_err) pr.max_rel_err = rel;
    }
    rep.max_rel_err = std::max(rep.max_rel_err, pr.max_rel_err);
    rep.params.push_back(std::move(pr));
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace tpp
