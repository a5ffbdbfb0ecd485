#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>

#include "microformal/errors.hpp"
#include "microformal/field.hpp"

namespace microformal {

// Element of the exterior algebra on a fixed number of anticommuting
// generators; terms are keyed by the generator subset as a bitmask.
template <class F>
class Grassmann {
 public:
  using Ops = FieldOps<F>;

  explicit Grassmann(int gens = 0) : gens_(gens) { check_gens(); }
  Grassmann(int gens, F body) : gens_(gens) {
    check_gens();
    if (!Ops::is_zero(body)) terms_.emplace(0u, std::move(body));
  }

  static Grassmann generator(int gens, int i) {
    Grassmann g(gens);
    require(i >= 0 && i < gens, ErrorKind::shape, "generator index out of range");
    g.terms_.emplace(uint32_t(1) << i, Ops::one());
    return g;
  }
  static Grassmann term(int gens, uint32_t mask, F c) {
    Grassmann g(gens);
    require(mask < (uint32_t(1) << gens), ErrorKind::shape, "generator mask out of range");
    if (!Ops::is_zero(c)) g.terms_.emplace(mask, std::move(c));
    return g;
  }

  int gens() const { return gens_; }
  const std::map<uint32_t, F>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  F body() const {
    auto it = terms_.find(0u);
    return it == terms_.end() ? Ops::zero() : it->second;
  }
  Grassmann soul() const {
    Grassmann s(gens_);
    for (const auto& [m, c] : terms_)
      if (m != 0u) s.terms_.emplace(m, c);
    return s;
  }
  F coeff(uint32_t mask) const {
    auto it = terms_.find(mask);
    return it == terms_.end() ? Ops::zero() : it->second;
  }

  // 0 even, 1 odd, -1 mixed (zero counts as even)
  int parity() const {
    int p = -2;
    for (const auto& [m, c] : terms_) {
      int q = std::popcount(m) & 1;
      if (p == -2) p = q;
      else if (p != q) return -1;
    }
    return p == -2 ? 0 : p;
  }

  void add_term(uint32_t mask, const F& c) {
    require(mask < (uint32_t(1) << gens_), ErrorKind::shape, "generator mask out of range");
    if (Ops::is_zero(c)) return;
    auto [it, fresh] = terms_.try_emplace(mask, c);
    if (!fresh) {
      it->second += c;
      if (Ops::is_zero(it->second)) terms_.erase(it);
    }
  }

  friend Grassmann operator+(const Grassmann& a, const Grassmann& b) {
    Grassmann r = a.frame(b);
    r.terms_ = a.terms_;
    for (const auto& [m, c] : b.terms_) r.add_term(m, c);
    return r;
  }
  friend Grassmann operator-(const Grassmann& a, const Grassmann& b) {
    Grassmann r = a.frame(b);
    r.terms_ = a.terms_;
    for (const auto& [m, c] : b.terms_) r.add_term(m, -c);
    return r;
  }
  friend Grassmann operator-(const Grassmann& a) {
    Grassmann r(a.gens_);
    for (const auto& [m, c] : a.terms_) r.terms_.emplace(m, -c);
    return r;
  }
  friend Grassmann operator*(const Grassmann& a, const F& s) {
    Grassmann r(a.gens_);
    if (Ops::is_zero(s)) return r;
    for (const auto& [m, c] : a.terms_) {
      F v = c * s;
      if (!Ops::is_zero(v)) r.terms_.emplace(m, std::move(v));
    }
    return r;
  }
  friend Grassmann operator*(const F& s, const Grassmann& a) { return a * s; }

  friend Grassmann operator*(const Grassmann& a, const Grassmann& b) {
    Grassmann r = a.frame(b);
    for (const auto& [ma, ca] : a.terms_) {
      for (const auto& [mb, cb] : b.terms_) {
        if (ma & mb) continue;
        int sign = merge_sign(ma, mb);
        F c = ca * cb;
        r.add_term(ma | mb, sign < 0 ? -c : c);
      }
    }
    return r;
  }

  Grassmann& operator+=(const Grassmann& b) { *this = *this + b; return *this; }
  Grassmann& operator-=(const Grassmann& b) { *this = *this - b; return *this; }
  Grassmann& operator*=(const Grassmann& b) { *this = *this * b; return *this; }

  friend bool operator==(const Grassmann& a, const Grassmann& b) {
    return a.gens_ == b.gens_ && a.terms_ == b.terms_;
  }
  friend bool operator!=(const Grassmann& a, const Grassmann& b) { return !(a == b); }

  // body^{-1} with the soul handled by the finite geometric series
  Grassmann inverse() const {
    F b = body();
    require(!Ops::is_zero(b), ErrorKind::singular, "Grassmann inverse: zero body");
    F bi = Ops::one() / b;
    Grassmann u = soul() * bi;  // nilpotent
    Grassmann acc(gens_, bi);
    Grassmann pw(gens_, bi);
    for (int k = 1; k <= gens_; ++k) {
      pw = pw * u;
      if (pw.is_zero()) break;
      acc += (k % 2) ? -pw : pw;
    }
    return acc;
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [m, c] : terms_) {
      if (!first) os << " + ";
      first = false;
      os << "(" << Ops::to_cd(c).real();
      if (Ops::to_cd(c).imag() != 0) os << "+" << Ops::to_cd(c).imag() << "i";
      os << ")";
      for (int i = 0; i < gens_; ++i)
        if (m & (uint32_t(1) << i)) os << " th" << i;
    }
    return os.str();
  }

  // (-1)^{#\{(i,j): i in a, j in b, i > j\}}
  static int merge_sign(uint32_t a, uint32_t b) {
    int inv = 0;
    for (uint32_t bb = b; bb; bb &= bb - 1) {
      int j = std::countr_zero(bb);
      inv += std::popcount(a >> (j + 1));
    }
    return (inv & 1) ? -1 : 1;
  }

 private:
  void check_gens() const {
    require(gens_ >= 0 && gens_ <= 30, ErrorKind::shape, "generator count out of range");
  }
  Grassmann frame(const Grassmann& b) const {
    require(gens_ == b.gens_, ErrorKind::shape, "generator counts differ");
    return Grassmann(gens_);
  }

  int gens_;
  std::map<uint32_t, F> terms_;
};

}  // namespace microformal
