#pragma once

#include <string>
#include <vector>

#include "microformal/jet.hpp"
#include "microformal/supermatrix.hpp"

namespace microformal {

// Element of the (super) Weyl algebra with relation [p_a, x^b] = (hbar/i) d_a^b,
// stored in xp-normal form: a jet over blocks "x", "p" (equal parities) and the
// central "h" (= hbar). hbar/i enters products as -i * h, so the coefficient
// field must contain i.
template <class F>
class WeylElement {
  static_assert(FieldOps<F>::has_imag, "Weyl algebra needs a field containing i");

 public:
  explicit WeylElement(Jet<F> rep) : rep_(std::move(rep)) {
    const VariableSpec& v = rep_.vars();
    int bx = v.block_index("x"), bp = v.block_index("p"), bh = v.block_index("h");
    require(v.block(bx).dim == v.block(bp).dim, ErrorKind::shape,
            "Weyl element: x and p dimensions differ");
    require(v.block(bx).odd == v.block(bp).odd, ErrorKind::parity,
            "Weyl element: x and p parities differ");
    require(v.block(bh).dim == 1 && !v.odd(v.offset(bh)), ErrorKind::shape,
            "Weyl element: h block must be one even variable");
    require(rep_.trunc().min_deg[static_cast<size_t>(bh)] >= 0, ErrorKind::shape,
            "Weyl element: negative hbar powers");
  }

  static VarsPtr make_spec(int n, const std::vector<bool>& odd = {}) {
    Block bx{"x", n, odd}, bp{"p", n, odd};
    return make_vars({bx, bp, even_block("h", 1)});
  }
  static WeylElement zero(VarsPtr v) { return WeylElement(Jet<F>(v, Trunc(*v))); }
  static WeylElement constant(VarsPtr v, F c) {
    return WeylElement(Jet<F>::constant(v, Trunc(*v), std::move(c)));
  }
  static WeylElement xhat(VarsPtr v, int a) {
    return WeylElement(Jet<F>::variable(v, Trunc(*v), "x", a));
  }
  static WeylElement phat(VarsPtr v, int a) {
    return WeylElement(Jet<F>::variable(v, Trunc(*v), "p", a));
  }
  static WeylElement hbar(VarsPtr v) {
    return WeylElement(Jet<F>::variable(v, Trunc(*v), "h", 0));
  }

  const Jet<F>& rep() const { return rep_; }
  const VariableSpec& vars() const { return rep_.vars(); }
  VarsPtr vars_ptr() const { return rep_.vars_ptr(); }
  int pairs() const { return vars().block(vars().block_index("x")).dim; }
  bool pair_odd(int a) const { return vars().odd(vars().var("x", a)); }
  bool is_zero() const { return rep_.is_zero(); }
  int parity() const { return rep_.parity(); }

  friend WeylElement operator+(const WeylElement& a, const WeylElement& b) {
    return WeylElement(a.rep_ + b.rep_);
  }
  friend WeylElement operator-(const WeylElement& a, const WeylElement& b) {
    return WeylElement(a.rep_ - b.rep_);
  }
  friend WeylElement operator-(const WeylElement& a) { return WeylElement(-a.rep_); }
  friend WeylElement operator*(const WeylElement& a, const F& s) {
    return WeylElement(a.rep_ * s);
  }
  friend WeylElement operator*(const F& s, const WeylElement& a) { return a * s; }
  friend bool operator==(const WeylElement& a, const WeylElement& b) {
    return a.rep_ == b.rep_;
  }

  // normal-ordered product by local rewriting of words
  friend WeylElement operator*(const WeylElement& a, const WeylElement& b) {
    require(a.vars().same(b.vars()), ErrorKind::shape, "Weyl product: specs differ");
    const VariableSpec& v = a.vars();
    int n = a.pairs();
    int xoff = v.offset(v.block_index("x"));
    int poff = v.offset(v.block_index("p"));
    int hvar = v.var("h", 0);
    Trunc tr = Trunc::meet(a.rep_.trunc(), b.rep_.trunc());
    Jet<F> acc(a.rep_.vars_ptr(), tr);

    const F minus_i = -FieldOps<F>::imag_unit();

    // letters: 0..n-1 = x_a, n..2n-1 = p_a
    auto word_of = [&](const Monomial& m, std::vector<int>& w) {
      w.clear();
      for (int j = 0; j < n; ++j)
        for (int e = 0; e < m[static_cast<size_t>(xoff + j)]; ++e) w.push_back(j);
      for (int j = 0; j < n; ++j)
        for (int e = 0; e < m[static_cast<size_t>(poff + j)]; ++e) w.push_back(n + j);
    };
    auto odd_of = [&](int letter) { return v.odd(xoff + (letter % n)); };

    struct Item {
      F coef;
      int hpow;
      std::vector<int> w;
    };
    std::vector<Item> work;
    std::vector<int> wa, wb;
    for (const auto& [ma, ca] : a.rep_.terms()) {
      word_of(ma, wa);
      int ha = ma[static_cast<size_t>(hvar)];
      for (const auto& [mb, cb] : b.rep_.terms()) {
        word_of(mb, wb);
        std::vector<int> w = wa;
        w.insert(w.end(), wb.begin(), wb.end());
        work.push_back({ca * cb, ha + mb[static_cast<size_t>(hvar)], std::move(w)});
      }
    }

    Monomial mono(static_cast<size_t>(v.total()), 0);
    while (!work.empty()) {
      Item it = std::move(work.back());
      work.pop_back();
      bool emitted = true;
      for (size_t i = 0; i + 1 < it.w.size(); ++i) {
        int A = it.w[i], B = it.w[i + 1];
        bool ap = A >= n, bp2 = B >= n;
        if (ap == bp2) {
          if (A < B) continue;
          if (A == B) {
            if (odd_of(A)) { emitted = false; break; }  // odd square, term dies
            continue;
          }
          // same kind, descending: swap with Koszul sign
          Item sw = it;
          std::swap(sw.w[i], sw.w[i + 1]);
          if (odd_of(A) && odd_of(B)) sw.coef = -sw.coef;
          work.push_back(std::move(sw));
          emitted = false;
          break;
        }
        if (!ap && bp2) continue;  // x before p is normal
        // p_a x^b -> (-1)^{~a~b} x^b p_a + (hbar/i) delta_a^b
        int ia = A - n, ib = B;
        Item sw = it;
        std::swap(sw.w[i], sw.w[i + 1]);
        if (odd_of(A) && odd_of(B)) sw.coef = -sw.coef;
        work.push_back(std::move(sw));
        if (ia == ib) {
          Item ct;
          ct.coef = it.coef * minus_i;
          ct.hpow = it.hpow + 1;
          ct.w.reserve(it.w.size() - 2);
          for (size_t k = 0; k < it.w.size(); ++k)
            if (k != i && k != i + 1) ct.w.push_back(it.w[k]);
          work.push_back(std::move(ct));
        }
        emitted = false;
        break;
      }
      if (!emitted) continue;
      std::fill(mono.begin(), mono.end(), 0);
      for (int letter : it.w) {
        int var = letter < n ? xoff + letter : poff + (letter - n);
        ++mono[static_cast<size_t>(var)];
      }
      mono[static_cast<size_t>(hvar)] = static_cast<int16_t>(it.hpow);
      acc.add_term(mono, it.coef);
    }
    return WeylElement(std::move(acc));
  }

 private:
  Jet<F> rep_;
};

// (i/hbar) [a, b] with the super commutator; every commutator term carries an
// hbar factor by the Heisenberg relation, asserted here.
template <class F>
WeylElement<F> quantum_poisson(const WeylElement<F>& a, const WeylElement<F>& b) {
  int pa = a.parity(), pb = b.parity();
  require(pa >= 0 && pb >= 0, ErrorKind::parity, "quantum_poisson: inhomogeneous parity");
  WeylElement<F> comm =
      (pa == 1 && pb == 1) ? (a * b + b * a) : (a * b - b * a);
  // divide by hbar/i = -i hbar
  const VariableSpec& v = comm.vars();
  int hvar = v.var("h", 0);
  Jet<F> out(comm.rep().vars_ptr(), comm.rep().trunc());
  const F i_unit = FieldOps<F>::imag_unit();
  for (const auto& [m, c] : comm.rep().terms()) {
    require(m[static_cast<size_t>(hvar)] >= 1, ErrorKind::internal,
            "quantum_poisson: commutator term without an hbar factor");
    Monomial d = m;
    d[static_cast<size_t>(hvar)] -= 1;
    out.add_term(d, c * i_unit);
  }
  return WeylElement<F>(std::move(out));
}

// hbar -> 0 of the normal symbol
template <class F>
Jet<F> principal_symbol(const WeylElement<F>& a) {
  SpecUnion out = drop_blocks(a.vars(), a.rep().trunc(), {"h"});
  return embed(coeff_of_power(a.rep(), "h", 0), out.vars, out.trunc);
}

namespace detail {

template <class F>
Jet<F> parity_part(const Jet<F>& a, int p) {
  Jet<F> r(a.vars_ptr(), a.trunc());
  for (const auto& [m, c] : a.terms())
    if (monomial_parity(a.vars(), m) == p) r.add_term(m, c);
  return r;
}

template <class F>
Jet<F> classical_poisson_homog(const Jet<F>& f, const Jet<F>& g, int pf, int pg) {
  const VariableSpec& v = f.vars();
  int n = v.block(v.block_index("x")).dim;
  Jet<F> acc(f.vars_ptr(), Trunc::meet(f.trunc(), g.trunc()));
  for (int a = 0; a < n; ++a) {
    int xv = v.var("x", a), pv = v.var("p", a);
    acc += differentiate(f, pv, Side::right) * differentiate(g, xv, Side::left);
    Jet<F> second = differentiate(g, pv, Side::right) * differentiate(f, xv, Side::left);
    acc += ((pf * pg) ? second : -second);
  }
  return acc;
}

}  // namespace detail

// Poisson bracket on (x, p) jets, with the sign convention forced by the
// Heisenberg relation: symbol({a,b}_hbar) = {symbol a, symbol b}. In the even
// case {f,g} = df/dp dg/dx - dg/dp df/dx.
template <class F>
Jet<F> classical_poisson(const Jet<F>& f, const Jet<F>& g) {
  Jet<F> acc(f.vars_ptr(), Trunc::meet(f.trunc(), g.trunc()));
  for (int pf = 0; pf <= 1; ++pf)
    for (int pg = 0; pg <= 1; ++pg) {
      Jet<F> fp = detail::parity_part(f, pf), gp = detail::parity_part(g, pg);
      if (fp.is_zero() || gp.is_zero()) continue;
      acc += detail::classical_poisson_homog(fp, gp, pf, pg);
    }
  return acc;
}

inline int jet_xp_degree(const VariableSpec& v, const Monomial& m) {
  return block_degree(v, m, v.block_index("x")) + block_degree(v, m, v.block_index("p"));
}

// s-ordered quantization of a classical Hamiltonian of degree <= 2:
// monomials map to their xp-normal-ordered lift, and each x^a p_a cross term
// gains s (-1)^{~a} (hbar/i).
template <class F>
WeylElement<F> quantize_s(const Jet<F>& H, const F& s) {
  const VariableSpec& v = H.vars();
  int n = v.block(v.block_index("x")).dim;
  require(v.block(v.block_index("p")).dim == n, ErrorKind::shape, "quantize_s: p dimension");
  VarsPtr w = WeylElement<F>::make_spec(n, v.block(v.block_index("x")).odd);
  Trunc wt(*w);
  Jet<F> out(w, wt);
  Monomial mono(static_cast<size_t>(w->total()), 0);
  const F nu = -FieldOps<F>::imag_unit();  // hbar/i = nu * h
  int bx = v.block_index("x"), bp = v.block_index("p");
  for (const auto& [m, c] : H.terms()) {
    require(jet_xp_degree(v, m) <= 2, ErrorKind::domain, "quantize_s: degree above 2");
    for (int u = 0; u < v.total(); ++u)
      require(m[static_cast<size_t>(u)] == 0 || v.block_of(u) == bx || v.block_of(u) == bp,
              ErrorKind::shape, "quantize_s: Hamiltonian must depend on x and p only");
    std::fill(mono.begin(), mono.end(), 0);
    for (int a2 = 0; a2 < n; ++a2) {
      mono[static_cast<size_t>(w->var("x", a2))] = m[static_cast<size_t>(v.var("x", a2))];
      mono[static_cast<size_t>(w->var("p", a2))] = m[static_cast<size_t>(v.var("p", a2))];
    }
    out.add_term(mono, c);
    // Q_s(x^b p_a) = xhat^b phat_a + s (-1)^{~a} (hbar/i) delta_a^b
    for (int a2 = 0; a2 < n; ++a2) {
      if (m[static_cast<size_t>(v.var("x", a2))] == 1 && m[static_cast<size_t>(v.var("p", a2))] == 1) {
        std::fill(mono.begin(), mono.end(), 0);
        mono[static_cast<size_t>(w->var("h", 0))] = 1;
        F shift = c * s * nu;
        if (v.odd(v.var("x", a2))) shift = -shift;
        out.add_term(mono, shift);
      }
    }
  }
  return WeylElement<F>(std::move(out));
}

// Scalar defect of eq-ordering quantization: {Q_s H1, Q_s H2}_h - Q_s({H1,H2})
// equals (1-2s)(hbar/i) c(H1,H2) with c independent of s. Returns c for
// s != 1/2 and the raw (hbar/i)-coefficient at s = 1/2 (expected zero).
template <class F>
F cocycle_defect(const Jet<F>& H1, const Jet<F>& H2, const F& s) {
  WeylElement<F> q1 = quantize_s(H1, s), q2 = quantize_s(H2, s);
  WeylElement<F> lhs = quantum_poisson(q1, q2);
  WeylElement<F> rhs = quantize_s(classical_poisson(H1, H2), s);
  Jet<F> d = (lhs - rhs).rep();
  const VariableSpec& v = d.vars();
  F coef = FieldOps<F>::zero();
  for (const auto& [m, c] : d.terms()) {
    require(jet_xp_degree(v, m) == 0, ErrorKind::internal,
            "cocycle_defect: non-scalar defect term");
    require(m[static_cast<size_t>(v.var("h", 0))] == 1, ErrorKind::internal,
            "cocycle_defect: defect not linear in hbar");
    coef = c;
  }
  F c_over_nu = coef * FieldOps<F>::imag_unit();  // divide by nu = -i
  F one = FieldOps<F>::one();
  F half = FieldOps<F>::ratio(1, 2);
  if (s == half) return c_over_nu;
  return c_over_nu / (one - (s + s));
}

// Matrix of (i/hbar)[H, .] on the span of (xhat, phat), as a supermatrix with
// numeric entries. H must be quadratic so the span is preserved.
template <class F>
SuperMatrix<F> adjoint_on_L(const WeylElement<F>& H) {
  const VariableSpec& v = H.vars();
  int n = H.pairs();
  for (const auto& [m, c] : H.rep().terms())
    require(jet_xp_degree(v, m) <= 2, ErrorKind::domain, "adjoint_on_L: degree above 2");
  std::vector<int> par;
  for (int a = 0; a < n; ++a) par.push_back(H.pair_odd(a) ? 1 : 0);
  std::vector<int> par2 = par;
  par2.insert(par2.end(), par.begin(), par.end());
  SuperMatrix<F> M(par2, par2, 0);

  auto basis = [&](int j) {
    return j < n ? WeylElement<F>::xhat(H.vars_ptr(), j)
                 : WeylElement<F>::phat(H.vars_ptr(), j - n);
  };
  Monomial mono(static_cast<size_t>(v.total()), 0);
  for (int j = 0; j < 2 * n; ++j) {
    WeylElement<F> br = quantum_poisson(H, basis(j));
    for (const auto& [m, c] : br.rep().terms()) {
      int deg = jet_xp_degree(v, m);
      require(deg <= 1, ErrorKind::domain, "adjoint_on_L: image leaves the linear span");
      require(m[static_cast<size_t>(v.var("h", 0))] == 0 || deg == 0, ErrorKind::internal,
              "adjoint_on_L: hbar-dependent linear image");
      if (deg == 0) continue;  // scalar part, not part of the matrix
      for (int i2 = 0; i2 < 2 * n; ++i2) {
        int var = i2 < n ? v.var("x", i2) : v.var("p", i2 - n);
        if (m[static_cast<size_t>(var)] == 1)
          M.at(static_cast<size_t>(i2), static_cast<size_t>(j)) = Grassmann<F>(0, c);
      }
    }
  }
  return M;
}

// Pairing table J'_{ij} = {e_i, e_j}_hbar on the basis (xhat, phat).
template <class F>
SuperMatrix<F> canonical_pairing(VarsPtr w) {
  WeylElement<F> probe = WeylElement<F>::zero(w);
  int n = probe.pairs();
  std::vector<int> par;
  for (int a = 0; a < n; ++a) par.push_back(probe.pair_odd(a) ? 1 : 0);
  std::vector<int> par2 = par;
  par2.insert(par2.end(), par.begin(), par.end());
  SuperMatrix<F> J(par2, par2, 0);
  auto basis = [&](int j) {
    return j < n ? WeylElement<F>::xhat(w, j) : WeylElement<F>::phat(w, j - n);
  };
  for (int i = 0; i < 2 * n; ++i)
    for (int j = 0; j < 2 * n; ++j) {
      WeylElement<F> br = quantum_poisson(basis(i), basis(j));
      F val = br.rep().constant_term();
      if (!FieldOps<F>::is_zero(val)) J.at(static_cast<size_t>(i), static_cast<size_t>(j)) =
          Grassmann<F>(0, val);
    }
  return J;
}

}  // namespace microformal
