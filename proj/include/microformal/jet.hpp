#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "microformal/errors.hpp"
#include "microformal/field.hpp"
#include "microformal/variables.hpp"

namespace microformal {

enum class Side { left, right };

// Truncated multivariate polynomial with even and odd variables. Values are
// immutable after construction in spirit: all operations return new jets.
// Monomials are kept in canonical order (ascending variable index); products
// reorder odd factors with the Koszul sign.
template <class F>
class Jet {
 public:
  using Ops = FieldOps<F>;
  using TermMap = std::map<Monomial, F, MonoLess>;

  Jet(VarsPtr vars, Trunc trunc)
      : vars_(std::move(vars)), trunc_(std::move(trunc)), terms_(MonoLess{vars_.get()}) {
    require(static_cast<int>(trunc_.max_deg.size()) == vars_->block_count(), ErrorKind::shape,
            "truncation arity mismatch");
  }

  static Jet zero(VarsPtr vars, const Trunc& t) { return Jet(std::move(vars), t); }

  static Jet constant(VarsPtr vars, const Trunc& t, F c) {
    Jet j(std::move(vars), t);
    if (!Ops::is_zero(c)) j.terms_.emplace(Monomial(static_cast<size_t>(j.vars_->total()), 0), std::move(c));
    return j;
  }

  static Jet variable(VarsPtr vars, const Trunc& t, int v) {
    Jet j(vars, t);
    require(v >= 0 && v < vars->total(), ErrorKind::shape, "variable index out of range");
    Monomial m(static_cast<size_t>(vars->total()), 0);
    m[static_cast<size_t>(v)] = 1;
    require(j.in_window(m), ErrorKind::shape, "variable outside truncation window");
    j.terms_.emplace(std::move(m), Ops::one());
    return j;
  }

  static Jet variable(VarsPtr vars, const Trunc& t, const std::string& block, int i) {
    int v = vars->var(block, i);
    return variable(std::move(vars), t, v);
  }

  const VariableSpec& vars() const { return *vars_; }
  const VarsPtr& vars_ptr() const { return vars_; }
  const Trunc& trunc() const { return trunc_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  size_t term_count() const { return terms_.size(); }

  F coeff(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? Ops::zero() : it->second;
  }
  F constant_term() const { return coeff(Monomial(static_cast<size_t>(vars_->total()), 0)); }

  void add_term(const Monomial& m, const F& c) {
    if (Ops::is_zero(c)) return;
    require(static_cast<int>(m.size()) == vars_->total(), ErrorKind::shape, "monomial arity mismatch");
    for (int v = 0; v < vars_->total(); ++v) {
      require(!vars_->odd(v) || m[static_cast<size_t>(v)] <= 1, ErrorKind::shape,
              "odd exponent above 1");
      require(vars_->odd(v) ? m[static_cast<size_t>(v)] >= 0 : true, ErrorKind::shape,
              "negative odd exponent");
    }
    if (!in_window(m)) return;
    auto [it, fresh] = terms_.try_emplace(m, c);
    if (!fresh) {
      it->second += c;
      if (Ops::is_zero(it->second)) terms_.erase(it);
    }
  }

  // 0 even, 1 odd, -1 mixed. The zero jet reports even.
  int parity() const {
    int p = -2;
    for (const auto& [m, c] : terms_) {
      int q = monomial_parity(*vars_, m);
      if (p == -2) p = q;
      else if (p != q) return -1;
    }
    return p == -2 ? 0 : p;
  }

  int min_degree_in(int blk) const {
    int d = Trunc::unbounded;
    for (const auto& [m, c] : terms_) d = std::min(d, block_degree(*vars_, m, blk));
    return d;
  }
  int max_degree_in(int blk) const {
    int d = -Trunc::unbounded;
    for (const auto& [m, c] : terms_) d = std::max(d, block_degree(*vars_, m, blk));
    return d;
  }
  // Minimum over terms of the summed degree across the given blocks
  // (the contraction grading used by fixed-point solvers).
  int min_joint_degree(const std::vector<int>& blocks) const {
    int d = Trunc::unbounded;
    for (const auto& [m, c] : terms_) {
      int s = 0;
      for (int b : blocks) s += block_degree(*vars_, m, b);
      d = std::min(d, s);
    }
    return d;
  }

  friend bool operator==(const Jet& a, const Jet& b) {
    if (!a.vars_->same(*b.vars_)) return false;
    if (a.terms_.size() != b.terms_.size()) return false;
    auto ia = a.terms_.begin();
    auto ib = b.terms_.begin();
    for (; ia != a.terms_.end(); ++ia, ++ib)
      if (ia->first != ib->first || !(ia->second == ib->second)) return false;
    return true;
  }
  friend bool operator!=(const Jet& a, const Jet& b) { return !(a == b); }

  friend Jet operator+(const Jet& a, const Jet& b) {
    Jet r = a.binary_frame(b);
    r.terms_ = a.terms_;
    r.clip();
    for (const auto& [m, c] : b.terms_) r.add_term(m, c);
    return r;
  }
  friend Jet operator-(const Jet& a, const Jet& b) {
    Jet r = a.binary_frame(b);
    r.terms_ = a.terms_;
    r.clip();
    for (const auto& [m, c] : b.terms_) r.add_term(m, -c);
    return r;
  }
  friend Jet operator-(const Jet& a) {
    Jet r(a.vars_, a.trunc_);
    for (const auto& [m, c] : a.terms_) r.terms_.emplace(m, -c);
    return r;
  }
  friend Jet operator*(const Jet& a, const F& s) {
    Jet r(a.vars_, a.trunc_);
    if (Ops::is_zero(s)) return r;
    for (const auto& [m, c] : a.terms_) {
      F v = c * s;
      if (!Ops::is_zero(v)) r.terms_.emplace(m, std::move(v));
    }
    return r;
  }
  friend Jet operator*(const F& s, const Jet& a) { return a * s; }
  friend Jet operator/(const Jet& a, const F& s) { return a * (Ops::one() / s); }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r = a.binary_frame(b);
    Monomial prod(static_cast<size_t>(a.vars_->total()), 0);
    for (const auto& [ma, ca] : a.terms_) {
      for (const auto& [mb, cb] : b.terms_) {
        int sign = mono_mul(*a.vars_, ma, mb, prod);
        if (sign == 0) continue;
        if (!r.in_window(prod)) continue;
        F c = ca * cb;
        if (sign < 0) c = -c;
        if (Ops::is_zero(c)) continue;
        auto [it, fresh] = r.terms_.try_emplace(prod, c);
        if (!fresh) {
          it->second += c;
          if (Ops::is_zero(it->second)) r.terms_.erase(it);
        }
      }
    }
    return r;
  }

  Jet& operator+=(const Jet& b) { *this = *this + b; return *this; }
  Jet& operator-=(const Jet& b) { *this = *this - b; return *this; }
  Jet& operator*=(const Jet& b) { *this = *this * b; return *this; }

  // Re-truncate to a (possibly narrower) window.
  Jet truncated(const Trunc& t) const {
    Jet r(vars_, t);
    for (const auto& [m, c] : terms_)
      if (r.in_window(m)) r.terms_.emplace(m, c);
    return r;
  }
  // Widen the guarantee window; the caller asserts the stored terms are the
  // exact content to the new bounds.
  Jet assert_exact_to(const Trunc& t) const {
    Jet r(vars_, t);
    for (const auto& [m, c] : terms_) {
      require(r.in_window(m), ErrorKind::internal, "assert_exact_to would drop terms");
      r.terms_.emplace(m, c);
    }
    return r;
  }

  // Koszul sign of the canonical reordering of the concatenation a.b;
  // 0 if a repeated odd variable makes the product vanish.
  static int mono_mul(const VariableSpec& vars, const Monomial& a, const Monomial& b,
                      Monomial& out) {
    int inversions = 0;
    int n = vars.total();
    out.assign(static_cast<size_t>(n), 0);
    int odd_a_above = 0;  // running count of odd vars of `a` with index > current v
    // count pairs (i in odd(a), j in odd(b), i > j)
    for (int v = n - 1; v >= 0; --v) {
      int ea = a[static_cast<size_t>(v)], eb = b[static_cast<size_t>(v)];
      if (vars.odd(v)) {
        if (ea && eb) return 0;
        if (eb) inversions += odd_a_above;
        if (ea) ++odd_a_above;
      }
      out[static_cast<size_t>(v)] = static_cast<int16_t>(ea + eb);
    }
    return (inversions & 1) ? -1 : 1;
  }

  bool in_window(const Monomial& m) const {
    for (int b = 0; b < vars_->block_count(); ++b) {
      int d = block_degree(*vars_, m, b);
      if (d > trunc_.max_deg[static_cast<size_t>(b)] || d < trunc_.min_deg[static_cast<size_t>(b)])
        return false;
    }
    return true;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (const auto& [mo, c] : terms_) m = std::max(m, Ops::mag(c));
    return m;
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [m, c] : terms_) {
      if (!first) os << " + ";
      first = false;
      os << "(" << scalar_str(c) << ")";
      for (int v = 0; v < vars_->total(); ++v) {
        int e = m[static_cast<size_t>(v)];
        if (e == 0) continue;
        os << " " << vars_->var_name(v);
        if (e != 1) os << "^" << e;
      }
    }
    return os.str();
  }

 private:
  Jet binary_frame(const Jet& b) const {
    require(vars_->same(*b.vars_), ErrorKind::shape, "variable specs differ");
    return Jet(vars_, Trunc::meet(trunc_, b.trunc_));
  }
  void clip() {
    for (auto it = terms_.begin(); it != terms_.end();)
      it = in_window(it->first) ? std::next(it) : terms_.erase(it);
  }
  static std::string scalar_str(const F& c) {
    if constexpr (std::is_same_v<F, Rat>) {
      return c.str();
    } else if constexpr (std::is_same_v<F, CRat>) {
      return c.re.str() + (c.im == 0 ? std::string() : "+" + c.im.str() + "i");
    } else {
      std::ostringstream os;
      os << FieldOps<F>::to_cd(c).real();
      double im = FieldOps<F>::to_cd(c).imag();
      if (im != 0) os << (im > 0 ? "+" : "") << im << "i";
      return os.str();
    }
  }

  VarsPtr vars_;
  Trunc trunc_;
  TermMap terms_;
};

// Formal partial derivative. Left and right derivatives differ by the Koszul
// sign of moving d/dv through the monomial.
template <class F>
Jet<F> differentiate(const Jet<F>& a, int v, Side side = Side::left) {
  const VariableSpec& vars = a.vars();
  require(v >= 0 && v < vars.total(), ErrorKind::shape, "unknown variable");
  Trunc t = a.trunc();
  size_t blk = static_cast<size_t>(vars.block_of(v));
  if (t.max_deg[blk] != Trunc::unbounded && t.max_deg[blk] > t.min_deg[blk]) t.max_deg[blk] -= 1;
  Jet<F> r(a.vars_ptr(), t);
  for (const auto& [m, c] : a.terms()) {
    int e = m[static_cast<size_t>(v)];
    if (e == 0) continue;
    Monomial d = m;
    d[static_cast<size_t>(v)] = static_cast<int16_t>(e - 1);
    if (!vars.odd(v)) {
      r.add_term(d, c * FieldOps<F>::from_int(e));
      continue;
    }
    int flips = 0;
    if (side == Side::left) {
      for (int w = 0; w < v; ++w)
        if (vars.odd(w) && m[static_cast<size_t>(w)]) ++flips;
    } else {
      for (int w = v + 1; w < vars.total(); ++w)
        if (vars.odd(w) && m[static_cast<size_t>(w)]) ++flips;
    }
    r.add_term(d, (flips & 1) ? -c : c);
  }
  return r;
}

template <class F>
Jet<F> differentiate(const Jet<F>& a, const std::string& block, int i, Side side = Side::left) {
  return differentiate(a, a.vars().var(block, i), side);
}

namespace detail {

template <class F>
int series_cap(const Jet<F>& a) {
  const Trunc& t = a.trunc();
  long cap = 2;
  bool any_finite = false;
  for (size_t b = 0; b < t.max_deg.size(); ++b) {
    if (t.max_deg[b] == Trunc::unbounded) continue;
    any_finite = true;
    cap += static_cast<long>(t.max_deg[b]) - static_cast<long>(std::min(0, t.min_deg[b]));
  }
  // odd variables in unbounded blocks still nilpotent
  for (int v = 0; v < a.vars().total(); ++v)
    if (a.vars().odd(v)) ++cap;
  (void)any_finite;
  return static_cast<int>(std::min<long>(cap, 4096));
}

}  // namespace detail

// Composition of formal series. Each replaced variable maps to a jet over the
// target spec; untouched variables must exist in the target spec under the
// same block name, slot and parity. Replacements must have zero constant term
// unless allow_const is set (evaluation of an exact polynomial).
template <class F>
Jet<F> substitute(const Jet<F>& a, const std::map<int, Jet<F>>& repl, VarsPtr tvars,
                  const Trunc& ttrunc, bool allow_const = false) {
  const VariableSpec& sv = a.vars();
  std::vector<const Jet<F>*> image(static_cast<size_t>(sv.total()), nullptr);
  std::vector<Jet<F>> passthrough;
  passthrough.reserve(static_cast<size_t>(sv.total()));

  for (const auto& [v, j] : repl) {
    require(v >= 0 && v < sv.total(), ErrorKind::shape, "substitute: unknown variable");
    require(j.vars().same(*tvars), ErrorKind::shape, "substitute: replacement spec mismatch");
    int jp = j.parity();
    int vp = sv.odd(v) ? 1 : 0;
    require(j.is_zero() || jp == vp, ErrorKind::parity, "substitute: parity mismatch");
    if (!allow_const)
      require(FieldOps<F>::is_zero(j.constant_term()), ErrorKind::convergence,
              "substitute: replacement has constant term (pass allow_const for evaluation)");
  }

  // resolve untouched variables by block name + slot
  for (int v = 0; v < sv.total(); ++v) {
    if (repl.count(v)) continue;
    bool used = false;
    for (const auto& [m, c] : a.terms())
      if (m[static_cast<size_t>(v)] != 0) { used = true; break; }
    if (!used) continue;
    const std::string& bname = sv.block(sv.block_of(v)).name;
    int tb = tvars->find_block(bname);
    require(tb >= 0, ErrorKind::shape, "substitute: target lacks block '" + bname + "'");
    int slot = v - sv.offset(sv.block_of(v));
    require(slot < tvars->block(tb).dim, ErrorKind::shape,
            "substitute: target block '" + bname + "' too small");
    int tv = tvars->offset(tb) + slot;
    require(tvars->odd(tv) == sv.odd(v), ErrorKind::parity,
            "substitute: parity of carried variable changed");
    passthrough.push_back(Jet<F>::variable(tvars, ttrunc, tv));
  }
  {
    size_t k = 0;
    for (int v = 0; v < sv.total(); ++v) {
      if (repl.count(v)) {
        image[static_cast<size_t>(v)] = &repl.at(v);
        continue;
      }
      bool used = false;
      for (const auto& [m, c] : a.terms())
        if (m[static_cast<size_t>(v)] != 0) { used = true; break; }
      if (used) image[static_cast<size_t>(v)] = &passthrough[k++];
    }
  }

  std::map<std::pair<int, int>, Jet<F>> powers;
  auto power_of = [&](int v, int e) -> const Jet<F>& {
    if (e == 1) return *image[static_cast<size_t>(v)];
    auto key = std::make_pair(v, e);
    auto it = powers.find(key);
    if (it != powers.end()) return it->second;
    Jet<F> p(tvars, ttrunc);
    if (e < 0) {
      // Laurent powers only pass through untouched variables
      require(!repl.count(v), ErrorKind::domain,
              "substitute: negative power of a replaced variable");
      const std::string& bname = sv.block(sv.block_of(v)).name;
      int tv = tvars->var(bname, v - sv.offset(sv.block_of(v)));
      Monomial mono(static_cast<size_t>(tvars->total()), 0);
      mono[static_cast<size_t>(tv)] = static_cast<int16_t>(e);
      p.add_term(mono, FieldOps<F>::one());
    } else {
      p = *image[static_cast<size_t>(v)];
      for (int k = 2; k <= e; ++k) p = p * (*image[static_cast<size_t>(v)]);
    }
    return powers.emplace(key, std::move(p)).first->second;
  };

  Jet<F> acc(tvars, ttrunc);
  for (const auto& [m, c] : a.terms()) {
    Jet<F> prod = Jet<F>::constant(tvars, ttrunc, c);
    for (int v = 0; v < sv.total() && !prod.is_zero(); ++v) {
      int e = m[static_cast<size_t>(v)];
      if (e == 0) continue;
      prod = prod * power_of(v, e);
    }
    acc += prod;
  }
  return acc;
}

// Same-spec substitution shorthand.
template <class F>
Jet<F> substitute(const Jet<F>& a, const std::map<int, Jet<F>>& repl, bool allow_const = false) {
  VarsPtr tv = repl.empty() ? a.vars_ptr() : repl.begin()->second.vars_ptr();
  Trunc tt = repl.empty() ? a.trunc() : repl.begin()->second.trunc();
  return substitute(a, repl, tv, tt, allow_const);
}

// Re-home a jet into a larger spec, matching blocks by name and slot. If the
// relative canonical order of odd variables differs between the specs, the
// Koszul sign of the reordering is applied.
template <class F>
Jet<F> embed(const Jet<F>& a, VarsPtr tvars, const Trunc& ttrunc) {
  const VariableSpec& sv = a.vars();
  Jet<F> r(tvars, ttrunc);
  std::vector<int> tv(static_cast<size_t>(sv.total()), -1);
  for (int v = 0; v < sv.total(); ++v) {
    int b = sv.block_of(v);
    int tb = tvars->find_block(sv.block(b).name);
    if (tb < 0) continue;  // checked lazily below
    int slot = v - sv.offset(b);
    if (slot >= tvars->block(tb).dim) continue;
    int w = tvars->offset(tb) + slot;
    require(tvars->odd(w) == sv.odd(v), ErrorKind::parity, "embed: parity changed");
    tv[static_cast<size_t>(v)] = w;
  }
  Monomial out(static_cast<size_t>(tvars->total()), 0);
  std::vector<int> odd_targets;
  for (const auto& [m, c] : a.terms()) {
    std::fill(out.begin(), out.end(), 0);
    odd_targets.clear();
    for (int v = 0; v < sv.total(); ++v) {
      if (m[static_cast<size_t>(v)] == 0) continue;
      require(tv[static_cast<size_t>(v)] >= 0, ErrorKind::shape,
              "embed: variable " + sv.var_name(v) + " missing from target spec");
      out[static_cast<size_t>(tv[static_cast<size_t>(v)])] = m[static_cast<size_t>(v)];
      if (sv.odd(v)) odd_targets.push_back(tv[static_cast<size_t>(v)]);
    }
    int inv = 0;
    for (size_t i = 0; i < odd_targets.size(); ++i)
      for (size_t j = i + 1; j < odd_targets.size(); ++j)
        if (odd_targets[i] > odd_targets[j]) ++inv;
    r.add_term(out, (inv & 1) ? -c : c);
  }
  return r;
}

// Rename a block, keeping dimensions and parities.
template <class F>
Jet<F> rename_block(const Jet<F>& a, const std::string& from, const std::string& to) {
  const VariableSpec& sv = a.vars();
  std::vector<Block> blocks;
  for (int b = 0; b < sv.block_count(); ++b) {
    Block blk = sv.block(b);
    if (blk.name == from) blk.name = to;
    blocks.push_back(std::move(blk));
  }
  VarsPtr nv = make_vars(std::move(blocks));
  Jet<F> r(nv, a.trunc());
  for (const auto& [m, c] : a.terms()) r.add_term(m, c);
  return r;
}

// Terms of exact degree k in the given block, kept in place.
template <class F>
Jet<F> component(const Jet<F>& a, const std::string& block, int k) {
  int b = a.vars().block_index(block);
  Jet<F> r(a.vars_ptr(), a.trunc());
  for (const auto& [m, c] : a.terms())
    if (block_degree(a.vars(), m, b) == k) r.add_term(m, c);
  return r;
}

// Coefficient of v^k for a one-dimensional even block: strips the variable.
template <class F>
Jet<F> coeff_of_power(const Jet<F>& a, const std::string& block, int k) {
  int b = a.vars().block_index(block);
  require(a.vars().block(b).dim == 1 && !a.vars().odd(a.vars().offset(b)), ErrorKind::shape,
          "coeff_of_power needs a 1-dimensional even block");
  int v = a.vars().offset(b);
  Jet<F> r(a.vars_ptr(), a.trunc());
  for (const auto& [m, c] : a.terms()) {
    if (m[static_cast<size_t>(v)] != k) continue;
    Monomial d = m;
    d[static_cast<size_t>(v)] = 0;
    r.add_term(d, c);
  }
  return r;
}

template <class F>
Jet<F> jet_pow(const Jet<F>& a, int e) {
  Jet<F> r = Jet<F>::constant(a.vars_ptr(), a.trunc(), FieldOps<F>::one());
  for (int i = 0; i < e; ++i) r = r * a;
  return r;
}

// exp of a jet whose non-constant part dies under truncation. A nonzero
// constant term needs an analytic field.
template <class F>
Jet<F> jet_exp(const Jet<F>& a) {
  F c = a.constant_term();
  Jet<F> u = a - Jet<F>::constant(a.vars_ptr(), a.trunc(), c);
  F pre = FieldOps<F>::one();
  if (!FieldOps<F>::is_zero(c)) pre = FieldOps<F>::exp(c);  // domain error over exact fields
  Jet<F> acc = Jet<F>::constant(a.vars_ptr(), a.trunc(), pre);
  Jet<F> pow = acc;
  int cap = detail::series_cap(a);
  for (int k = 1; k <= cap; ++k) {
    pow = pow * u * (FieldOps<F>::one() / FieldOps<F>::from_int(k));
    if (pow.is_zero()) return acc;
    acc += pow;
  }
  require(false, ErrorKind::domain, "jet_exp: argument not nilpotent under truncation");
  return acc;
}

// log of a jet with constant term 1 (or any invertible constant over an
// analytic field).
template <class F>
Jet<F> jet_log(const Jet<F>& a) {
  F c = a.constant_term();
  F pre = FieldOps<F>::zero();
  Jet<F> w(a.vars_ptr(), a.trunc());
  if (c == FieldOps<F>::one()) {
    w = a - Jet<F>::constant(a.vars_ptr(), a.trunc(), c);
  } else {
    require(FieldOps<F>::analytic && !FieldOps<F>::is_zero(c), ErrorKind::domain,
            "jet_log: constant term must be 1");
    pre = FieldOps<F>::log(c);
    w = a * (FieldOps<F>::one() / c) - Jet<F>::constant(a.vars_ptr(), a.trunc(), FieldOps<F>::one());
  }
  Jet<F> acc = Jet<F>::constant(a.vars_ptr(), a.trunc(), pre);
  Jet<F> pow = Jet<F>::constant(a.vars_ptr(), a.trunc(), FieldOps<F>::one());
  int cap = detail::series_cap(a);
  for (int k = 1; k <= cap; ++k) {
    pow = pow * w;
    if (pow.is_zero()) return acc;
    F coef = FieldOps<F>::ratio((k % 2) ? 1 : -1, k);
    acc += pow * coef;
  }
  require(false, ErrorKind::domain, "jet_log: argument not nilpotent under truncation");
  return acc;
}

// Multiplicative inverse of a jet with invertible constant term.
template <class F>
Jet<F> jet_invert(const Jet<F>& a) {
  F c = a.constant_term();
  require(!FieldOps<F>::is_zero(c), ErrorKind::singular, "jet_invert: zero constant term");
  F ci = FieldOps<F>::one() / c;
  Jet<F> w = a * ci - Jet<F>::constant(a.vars_ptr(), a.trunc(), FieldOps<F>::one());
  Jet<F> acc = Jet<F>::constant(a.vars_ptr(), a.trunc(), ci);
  Jet<F> pow = Jet<F>::constant(a.vars_ptr(), a.trunc(), ci);
  int cap = detail::series_cap(a);
  for (int k = 1; k <= cap; ++k) {
    pow = pow * w;
    if (pow.is_zero()) return acc;
    acc += ((k % 2) ? -pow : pow);
  }
  require(false, ErrorKind::singular, "jet_invert: soul not nilpotent under truncation");
  return acc;
}

// Unique fixed point of a contracting update map, graded by the joint degree
// in the given blocks. The caller asserts contraction; it is checked at run
// time through the degree of successive corrections.
template <class F>
std::vector<Jet<F>> solve_fixed_point(
    const std::function<std::vector<Jet<F>>(const std::vector<Jet<F>>&)>& update,
    std::vector<Jet<F>> state, const std::vector<int>& grading_blocks, int max_iter = 256) {
  int last_deg = -Trunc::unbounded;
  for (int it = 0; it < max_iter; ++it) {
    std::vector<Jet<F>> next = update(state);
    require(next.size() == state.size(), ErrorKind::internal, "fixed point: arity changed");
    int deg = Trunc::unbounded;
    bool changed = false;
    for (size_t i = 0; i < state.size(); ++i) {
      Jet<F> delta = next[i] - state[i];
      if (!delta.is_zero()) {
        changed = true;
        deg = std::min(deg, delta.min_joint_degree(grading_blocks));
      }
    }
    state = std::move(next);
    if (!changed) return state;
    require(it == 0 || deg > last_deg, ErrorKind::convergence,
            "fixed point: correction degree failed to increase (non-contractive map)");
    last_deg = deg;
  }
  require(false, ErrorKind::convergence, "fixed point: iteration cap reached");
  return state;
}

// Dense linear solve A x = b over jets, entries multiplied from the left.
// Pivots need an invertible constant term; even pivots keep the elimination
// valid over the supercommutative ring.
template <class F>
std::vector<Jet<F>> linear_solve(std::vector<std::vector<Jet<F>>> A, std::vector<Jet<F>> b) {
  size_t n = A.size();
  require(n == b.size(), ErrorKind::shape, "linear_solve: shape mismatch");
  for (auto& row : A) require(row.size() == n, ErrorKind::shape, "linear_solve: not square");
  for (size_t k = 0; k < n; ++k) {
    size_t best = n;
    double best_mag = 0.0;
    for (size_t r = k; r < n; ++r) {
      double m = FieldOps<F>::mag(A[r][k].constant_term());
      if (m > best_mag) { best_mag = m; best = r; }
    }
    require(best < n, ErrorKind::singular, "linear_solve: singular body");
    std::swap(A[k], A[best]);
    std::swap(b[k], b[best]);
    Jet<F> piv_inv = jet_invert(A[k][k]);
    for (size_t i = 0; i < n; ++i) {
      if (i == k || A[i][k].is_zero()) continue;
      Jet<F> f = A[i][k] * piv_inv;
      for (size_t j = k; j < n; ++j) A[i][j] -= f * A[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<Jet<F>> x;
  x.reserve(n);
  for (size_t k = 0; k < n; ++k) x.push_back(jet_invert(A[k][k]) * b[k]);
  return x;
}

}  // namespace microformal
