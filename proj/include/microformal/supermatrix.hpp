#pragma once

#include <complex>
#include <vector>

#include "microformal/errors.hpp"
#include "microformal/grassmann.hpp"

namespace microformal {

// Matrix with Grassmann entries and explicit row/column parities.
template <class F>
class SuperMatrix {
 public:
  using G = Grassmann<F>;

  SuperMatrix(std::vector<int> row_par, std::vector<int> col_par, int gens)
      : rp_(std::move(row_par)), cp_(std::move(col_par)), gens_(gens) {
    e_.assign(rp_.size() * cp_.size(), G(gens_));
  }

  static SuperMatrix identity(std::vector<int> par, int gens) {
    SuperMatrix m(par, par, gens);
    for (size_t i = 0; i < par.size(); ++i) m.at(i, i) = G(gens, FieldOps<F>::one());
    return m;
  }

  size_t rows() const { return rp_.size(); }
  size_t cols() const { return cp_.size(); }
  int gens() const { return gens_; }
  int row_parity(size_t i) const { return rp_[i]; }
  int col_parity(size_t j) const { return cp_[j]; }
  bool square() const { return rp_ == cp_; }

  G& at(size_t i, size_t j) { return e_[i * cp_.size() + j]; }
  const G& at(size_t i, size_t j) const { return e_[i * cp_.size() + j]; }

  // An even supermatrix has entry parity = row parity + column parity.
  bool is_even() const {
    for (size_t i = 0; i < rows(); ++i)
      for (size_t j = 0; j < cols(); ++j) {
        int p = at(i, j).parity();
        if (p == -1) return false;
        if (!at(i, j).is_zero() && p != ((rp_[i] + cp_[j]) & 1)) return false;
      }
    return true;
  }

  friend SuperMatrix operator+(const SuperMatrix& a, const SuperMatrix& b) {
    require(a.rp_ == b.rp_ && a.cp_ == b.cp_ && a.gens_ == b.gens_, ErrorKind::shape,
            "supermatrix shape mismatch");
    SuperMatrix r = a;
    for (size_t k = 0; k < r.e_.size(); ++k) r.e_[k] += b.e_[k];
    return r;
  }
  friend SuperMatrix operator-(const SuperMatrix& a, const SuperMatrix& b) {
    require(a.rp_ == b.rp_ && a.cp_ == b.cp_ && a.gens_ == b.gens_, ErrorKind::shape,
            "supermatrix shape mismatch");
    SuperMatrix r = a;
    for (size_t k = 0; k < r.e_.size(); ++k) r.e_[k] -= b.e_[k];
    return r;
  }
  friend SuperMatrix operator*(const SuperMatrix& a, const SuperMatrix& b) {
    require(a.cp_ == b.rp_, ErrorKind::shape, "supermatrix inner parities mismatch");
    require(a.gens_ == b.gens_, ErrorKind::shape, "generator counts differ");
    SuperMatrix r(a.rp_, b.cp_, a.gens_);
    for (size_t i = 0; i < a.rows(); ++i)
      for (size_t k = 0; k < a.cols(); ++k) {
        if (a.at(i, k).is_zero()) continue;
        for (size_t j = 0; j < b.cols(); ++j) r.at(i, j) += a.at(i, k) * b.at(k, j);
      }
    return r;
  }
  friend SuperMatrix operator*(const SuperMatrix& a, const G& s) {
    SuperMatrix r = a;
    for (auto& x : r.e_) x = x * s;
    return r;
  }

  friend bool operator==(const SuperMatrix& a, const SuperMatrix& b) {
    return a.rp_ == b.rp_ && a.cp_ == b.cp_ && a.e_ == b.e_;
  }

 private:
  std::vector<int> rp_, cp_;
  int gens_;
  std::vector<G> e_;
};

// str A = sum_i (-1)^{parity(i)} A_ii
template <class F>
Grassmann<F> supertrace(const SuperMatrix<F>& a) {
  require(a.square(), ErrorKind::shape, "supertrace needs a square supermatrix");
  Grassmann<F> s(a.gens());
  for (size_t i = 0; i < a.rows(); ++i)
    s += a.row_parity(i) ? -a.at(i, i) : a.at(i, i);
  return s;
}

namespace detail {

// Determinant of a matrix of commuting (even) Grassmann entries by cofactor
// expansion; exact over any coefficient field.
template <class F>
Grassmann<F> grass_det(const std::vector<Grassmann<F>>& m, size_t n, int gens) {
  require(n <= 9, ErrorKind::shape, "determinant block too large");
  if (n == 0) return Grassmann<F>(gens, FieldOps<F>::one());
  std::vector<size_t> cols(n);
  for (size_t j = 0; j < n; ++j) cols[j] = j;
  std::function<Grassmann<F>(size_t, std::vector<size_t>&)> rec =
      [&](size_t row, std::vector<size_t>& cs) -> Grassmann<F> {
    if (cs.size() == 1) return m[row * n + cs[0]];
    Grassmann<F> acc(gens);
    for (size_t k = 0; k < cs.size(); ++k) {
      const Grassmann<F>& piv = m[row * n + cs[k]];
      if (piv.is_zero()) continue;
      std::vector<size_t> rest;
      rest.reserve(cs.size() - 1);
      for (size_t t = 0; t < cs.size(); ++t)
        if (t != k) rest.push_back(cs[t]);
      Grassmann<F> sub = rec(row + 1, rest);
      acc += (k % 2) ? -(piv * sub) : (piv * sub);
    }
    return acc;
  };
  return rec(0, cols);
}

// Gauss-Jordan inverse over even Grassmann entries (body-invertible pivots).
template <class F>
std::vector<Grassmann<F>> grass_inverse(std::vector<Grassmann<F>> a, size_t n, int gens) {
  std::vector<Grassmann<F>> inv(n * n, Grassmann<F>(gens));
  for (size_t i = 0; i < n; ++i) inv[i * n + i] = Grassmann<F>(gens, FieldOps<F>::one());
  for (size_t k = 0; k < n; ++k) {
    size_t best = n;
    double best_mag = 0.0;
    for (size_t r = k; r < n; ++r) {
      double mg = FieldOps<F>::mag(a[r * n + k].body());
      if (mg > best_mag) { best_mag = mg; best = r; }
    }
    require(best < n, ErrorKind::singular, "supermatrix inverse: singular body");
    if (best != k)
      for (size_t j = 0; j < n; ++j) {
        std::swap(a[k * n + j], a[best * n + j]);
        std::swap(inv[k * n + j], inv[best * n + j]);
      }
    Grassmann<F> piv = a[k * n + k].inverse();
    for (size_t j = 0; j < n; ++j) {
      a[k * n + j] = piv * a[k * n + j];
      inv[k * n + j] = piv * inv[k * n + j];
    }
    for (size_t i = 0; i < n; ++i) {
      if (i == k || a[i * n + k].is_zero()) continue;
      Grassmann<F> f = a[i * n + k];
      for (size_t j = 0; j < n; ++j) {
        a[i * n + j] -= f * a[k * n + j];
        inv[i * n + j] -= f * inv[k * n + j];
      }
    }
  }
  return inv;
}

}  // namespace detail

// Ber A = det(P - Q T^{-1} R) det(T)^{-1} in the parity block decomposition
// [P Q; R T]. The purely even and purely odd cases degenerate to det(P) and
// det(T)^{-1}.
template <class F>
Grassmann<F> berezinian(const SuperMatrix<F>& a) {
  require(a.square(), ErrorKind::shape, "berezinian needs a square supermatrix");
  require(a.is_even(), ErrorKind::parity, "berezinian needs an even supermatrix");
  int gens = a.gens();
  std::vector<size_t> ev, od;
  for (size_t i = 0; i < a.rows(); ++i) (a.row_parity(i) ? od : ev).push_back(i);
  size_t ne = ev.size(), no = od.size();

  auto block = [&](const std::vector<size_t>& r, const std::vector<size_t>& c) {
    std::vector<Grassmann<F>> m;
    m.reserve(r.size() * c.size());
    for (size_t i : r)
      for (size_t j : c) m.push_back(a.at(i, j));
    return m;
  };

  if (no == 0) return detail::grass_det(block(ev, ev), ne, gens);
  auto T = block(od, od);
  auto detT = detail::grass_det(T, no, gens);
  require(!FieldOps<F>::is_zero(detT.body()), ErrorKind::singular,
          "berezinian: odd-odd block has singular body");
  if (ne == 0) return detT.inverse();

  auto Tinv = detail::grass_inverse(T, no, gens);
  auto P = block(ev, ev);
  auto Q = block(ev, od);
  auto R = block(od, ev);
  // S = P - Q Tinv R
  std::vector<Grassmann<F>> S = P;
  for (size_t i = 0; i < ne; ++i)
    for (size_t j = 0; j < ne; ++j) {
      Grassmann<F> acc(gens);
      for (size_t k = 0; k < no; ++k)
        for (size_t l = 0; l < no; ++l) acc += Q[i * no + k] * Tinv[k * no + l] * R[l * ne + j];
      S[i * ne + j] -= acc;
    }
  return detail::grass_det(S, ne, gens) * detT.inverse();
}

// Cross-check variant through the even-even Schur complement:
// Ber A = det(P) det(T - R P^{-1} Q)^{-1}.
template <class F>
Grassmann<F> berezinian_via_even_block(const SuperMatrix<F>& a) {
  require(a.square(), ErrorKind::shape, "berezinian needs a square supermatrix");
  require(a.is_even(), ErrorKind::parity, "berezinian needs an even supermatrix");
  int gens = a.gens();
  std::vector<size_t> ev, od;
  for (size_t i = 0; i < a.rows(); ++i) (a.row_parity(i) ? od : ev).push_back(i);
  size_t ne = ev.size(), no = od.size();
  auto block = [&](const std::vector<size_t>& r, const std::vector<size_t>& c) {
    std::vector<Grassmann<F>> m;
    m.reserve(r.size() * c.size());
    for (size_t i : r)
      for (size_t j : c) m.push_back(a.at(i, j));
    return m;
  };
  auto P = block(ev, ev);
  auto detP = detail::grass_det(P, ne, gens);
  if (no == 0) return detP;
  require(!FieldOps<F>::is_zero(detP.body()) || ne == 0, ErrorKind::singular,
          "berezinian: even-even block has singular body");
  auto T = block(od, od);
  if (ne == 0) {
    auto detT = detail::grass_det(T, no, gens);
    require(!FieldOps<F>::is_zero(detT.body()), ErrorKind::singular,
            "berezinian: odd-odd block has singular body");
    return detT.inverse();
  }
  auto Pinv = detail::grass_inverse(P, ne, gens);
  auto Q = block(ev, od);
  auto R = block(od, ev);
  std::vector<Grassmann<F>> S = T;
  for (size_t i = 0; i < no; ++i)
    for (size_t j = 0; j < no; ++j) {
      Grassmann<F> acc(gens);
      for (size_t k = 0; k < ne; ++k)
        for (size_t l = 0; l < ne; ++l) acc += R[i * ne + k] * Pinv[k * ne + l] * Q[l * no + j];
      S[i * no + j] -= acc;
    }
  auto dS = detail::grass_det(S, no, gens);
  require(!FieldOps<F>::is_zero(dS.body()), ErrorKind::singular,
          "berezinian: Schur complement has singular body");
  return detP * dS.inverse();
}

// Largest |eigenvalue| of the numeric body, by power iteration.
template <class F>
double body_spectral_radius(const SuperMatrix<F>& a, int iters = 80) {
  size_t n = a.rows();
  std::vector<std::complex<double>> b(n * n), v(n, {1.0, 0.3});
  bool all_zero = true;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      b[i * n + j] = FieldOps<F>::to_cd(a.at(i, j).body());
      if (b[i * n + j] != std::complex<double>(0.0, 0.0)) all_zero = false;
    }
  if (all_zero) return 0.0;
  double rho = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::vector<std::complex<double>> w(n, {0.0, 0.0});
    double norm = 0.0;
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j) w[i] += b[i * n + j] * v[j];
      norm = std::max(norm, std::abs(w[i]));
    }
    if (norm == 0.0) return 0.0;
    for (auto& x : w) x /= norm;
    v = std::move(w);
    rho = norm;
  }
  return rho;
}

// str ln(1 - A) = -sum_{k>=1} str(A^k)/k, truncated at order N. Terminates
// early for nilpotent A; otherwise the body spectral radius must be < 1.
template <class F>
Grassmann<F> str_log_one_minus(const SuperMatrix<F>& a, int order) {
  require(a.square(), ErrorKind::shape, "str_log_one_minus needs a square supermatrix");
  require(order >= 1, ErrorKind::domain, "str_log_one_minus: order must be >= 1");
  double rho = body_spectral_radius(a);
  require(rho < 1.0, ErrorKind::domain, "str_log_one_minus: body spectral radius >= 1");
  Grassmann<F> acc(a.gens());
  SuperMatrix<F> pw = a;
  for (int k = 1; k <= order; ++k) {
    acc -= supertrace(pw) * FieldOps<F>::ratio(1, k);
    bool zero = true;
    for (size_t i = 0; i < pw.rows() && zero; ++i)
      for (size_t j = 0; j < pw.cols(); ++j)
        if (!pw.at(i, j).is_zero()) { zero = false; break; }
    if (zero) break;
    if (k < order) pw = pw * a;
  }
  return acc;
}

// ln of a Grassmann scalar: exact on unit body, analytic fields handle the
// general invertible body.
template <class F>
Grassmann<F> grass_log(const Grassmann<F>& g) {
  F b = g.body();
  require(!FieldOps<F>::is_zero(b), ErrorKind::domain, "grass_log: zero body");
  F pre = FieldOps<F>::zero();
  if (!(b == FieldOps<F>::one())) {
    require(FieldOps<F>::analytic, ErrorKind::domain,
            "grass_log: non-unit body needs an analytic field");
    pre = FieldOps<F>::log(b);
  }
  Grassmann<F> u = g.soul() * (FieldOps<F>::one() / b);
  Grassmann<F> acc(g.gens(), pre);
  Grassmann<F> pw(g.gens(), FieldOps<F>::one());
  for (int k = 1; k <= g.gens(); ++k) {
    pw = pw * u;
    if (pw.is_zero()) break;
    acc += pw * FieldOps<F>::ratio((k % 2) ? 1 : -1, k);
  }
  return acc;
}

template <class F>
Grassmann<F> grass_exp(const Grassmann<F>& g) {
  F b = g.body();
  F pre = FieldOps<F>::one();
  if (!FieldOps<F>::is_zero(b)) {
    if constexpr (FieldOps<F>::analytic) pre = FieldOps<F>::exp(b);
    else fail(ErrorKind::domain, "grass_exp: nonzero body over an exact field");
  }
  Grassmann<F> u = g.soul();
  Grassmann<F> acc(g.gens(), pre);
  Grassmann<F> pw(g.gens(), pre);
  for (int k = 1; k <= g.gens(); ++k) {
    pw = pw * u * FieldOps<F>::ratio(1, k);
    if (pw.is_zero()) break;
    acc += pw;
  }
  return acc;
}

}  // namespace microformal
