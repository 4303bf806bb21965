#pragma once

#include <cassert>
#include <cmath>
#include <vector>

namespace ccm::ad {

// Reverse-mode tape over scalar doubles. Small by intent: the model evaluates
// its O(n) likelihood analytically and only uses the tape for the group-level
// transforms and prior densities, so tapes stay at a few thousand nodes.
class Tape {
 public:
  int add_leaf(double v) {
    val_.push_back(v);
    parent0_.push_back(-1);
    parent1_.push_back(-1);
    w0_.push_back(0.0);
    w1_.push_back(0.0);
    return static_cast<int>(val_.size()) - 1;
  }

  int add_unary(int p, double v, double w) {
    val_.push_back(v);
    parent0_.push_back(p);
    parent1_.push_back(-1);
    w0_.push_back(w);
    w1_.push_back(0.0);
    return static_cast<int>(val_.size()) - 1;
  }

  int add_binary(int p0, int p1, double v, double w0, double w1) {
    val_.push_back(v);
    parent0_.push_back(p0);
    parent1_.push_back(p1);
    w0_.push_back(w0);
    w1_.push_back(w1);
    return static_cast<int>(val_.size()) - 1;
  }

  double value(int i) const { return val_[i]; }
  std::size_t size() const { return val_.size(); }

  void clear() {
    val_.clear();
    parent0_.clear();
    parent1_.clear();
    w0_.clear();
    w1_.clear();
  }

  // Backward sweep from externally seeded adjoints. `adj` must have size()
  // entries holding the seeds; on return it holds full adjoints.
  void backward(std::vector<double>& adj) const {
    assert(adj.size() == val_.size());
    for (int i = static_cast<int>(val_.size()) - 1; i >= 0; --i) {
      const double a = adj[i];
      if (a == 0.0) continue;
      if (parent0_[i] >= 0) adj[parent0_[i]] += w0_[i] * a;
      if (parent1_[i] >= 0) adj[parent1_[i]] += w1_[i] * a;
    }
  }

 private:
  std::vector<double> val_;
  std::vector<int> parent0_, parent1_;
  std::vector<double> w0_, w1_;
};

class Var {
 public:
  Var() : tape_(nullptr), idx_(-1), val_(0.0) {}
  Var(Tape* t, int idx) : tape_(t), idx_(idx), val_(t->value(idx)) {}

  static Var leaf(Tape& t, double v) { return Var(&t, t.add_leaf(v)); }

  double value() const { return val_; }
  int index() const { return idx_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_;
  int idx_;
  double val_;
};

inline Var operator+(const Var& a, const Var& b) {
  Tape* t = a.tape();
  return Var(t, t->add_binary(a.index(), b.index(), a.value() + b.value(), 1.0, 1.0));
}
inline Var operator+(const Var& a, double c) {
  Tape* t = a.tape();
  return Var(t, t->add_unary(a.index(), a.value() + c, 1.0));
}
inline Var operator+(double c, const Var& a) { return a + c; }

inline Var operator-(const Var& a, const Var& b) {
  Tape* t = a.tape();
  return Var(t, t->add_binary(a.index(), b.index(), a.value() - b.value(), 1.0, -1.0));
}
inline Var operator-(const Var& a, double c) { return a + (-c); }
inline Var operator-(double c, const Var& a) {
  Tape* t = a.tape();
  return Var(t, t->add_unary(a.index(), c - a.value(), -1.0));
}
inline Var operator-(const Var& a) { return 0.0 - a; }

inline Var operator*(const Var& a, const Var& b) {
  Tape* t = a.tape();
  return Var(t, t->add_binary(a.index(), b.index(), a.value() * b.value(), b.value(), a.value()));
}
inline Var operator*(const Var& a, double c) {
  Tape* t = a.tape();
  return Var(t, t->add_unary(a.index(), a.value() * c, c));
}
inline Var operator*(double c, const Var& a) { return a * c; }

inline Var operator/(const Var& a, const Var& b) {
  Tape* t = a.tape();
  const double v = a.value() / b.value();
  return Var(t, t->add_binary(a.index(), b.index(), v, 1.0 / b.value(), -v / b.value()));
}
inline Var operator/(const Var& a, double c) { return a * (1.0 / c); }
inline Var operator/(double c, const Var& a) {
  Tape* t = a.tape();
  const double v = c / a.value();
  return Var(t, t->add_unary(a.index(), v, -v / a.value()));
}

inline Var exp(const Var& a) {
  Tape* t = a.tape();
  const double v = std::exp(a.value());
  return Var(t, t->add_unary(a.index(), v, v));
}
inline Var log(const Var& a) {
  Tape* t = a.tape();
  return Var(t, t->add_unary(a.index(), std::log(a.value()), 1.0 / a.value()));
}
inline Var log1p(const Var& a) {
  Tape* t = a.tape();
  return Var(t, t->add_unary(a.index(), std::log1p(a.value()), 1.0 / (1.0 + a.value())));
}
inline Var sqrt(const Var& a) {
  Tape* t = a.tape();
  const double v = std::sqrt(a.value());
  return Var(t, t->add_unary(a.index(), v, 0.5 / v));
}
inline Var tanh(const Var& a) {
  Tape* t = a.tape();
  const double v = std::tanh(a.value());
  return Var(t, t->add_unary(a.index(), v, 1.0 - v * v));
}
inline Var square(const Var& a) {
  Tape* t = a.tape();
  return Var(t, t->add_unary(a.index(), a.value() * a.value(), 2.0 * a.value()));
}

}  // namespace ccm::ad
