#pragma once

#include <string>
#include <vector>

#include "microformal/generating.hpp"
#include "microformal/jet.hpp"
#include "microformal/supermatrix.hpp"

namespace microformal {

// Quadratic action
//   S(x,q) = s0 + x^a S_a + S^i q_i + 1/2 x^a x^b S_{ba} + x^a S_a^i q_i
//            + 1/2 S^{ij} q_j q_i
// with Grassmann-number coefficients and the super-symmetries
// S_{ab} = (-1)^{~a~b} S_{ba}, S^{ij} = (-1)^{~i~j} S^{ji}. The constant term
// s0 is kept as an hbar-series: s0[k] is the coefficient of hbar^k.
template <class F>
struct QuadraticAction {
  using G = Grassmann<F>;

  int gens = 0;
  std::vector<int> src_par, tgt_par;
  std::vector<G> s0;
  std::vector<G> Sa, Si;
  std::vector<std::vector<G>> Sab, Sai, Sij;

  int n1() const { return static_cast<int>(src_par.size()); }
  int n2() const { return static_cast<int>(tgt_par.size()); }

  static QuadraticAction zero(int gens, std::vector<int> sp, std::vector<int> tp) {
    QuadraticAction a;
    a.gens = gens;
    a.src_par = std::move(sp);
    a.tgt_par = std::move(tp);
    size_t n1 = a.src_par.size(), n2 = a.tgt_par.size();
    a.s0.assign(1, G(gens));
    a.Sa.assign(n1, G(gens));
    a.Si.assign(n2, G(gens));
    a.Sab.assign(n1, std::vector<G>(n1, G(gens)));
    a.Sai.assign(n1, std::vector<G>(n2, G(gens)));
    a.Sij.assign(n2, std::vector<G>(n2, G(gens)));
    return a;
  }

  static QuadraticAction identity(int gens, std::vector<int> par) {
    QuadraticAction a = zero(gens, par, par);
    for (size_t i = 0; i < par.size(); ++i) a.Sai[i][i] = G(gens, FieldOps<F>::one());
    return a;
  }

  // average the quadratic blocks with the super sign and check parities
  void normalize() {
    auto sym = [&](std::vector<std::vector<G>>& M, const std::vector<int>& par) {
      size_t n = par.size();
      for (size_t a = 0; a < n; ++a)
        for (size_t b = a; b < n; ++b) {
          int sg = (par[a] & par[b]) ? -1 : 1;
          G ma = M[a][b], mb = M[b][a];
          G avg = (ma + (sg < 0 ? -mb : mb)) * FieldOps<F>::ratio(1, 2);
          M[a][b] = avg;
          M[b][a] = sg < 0 ? -avg : avg;
        }
    };
    sym(Sab, src_par);
    sym(Sij, tgt_par);
    auto check = [&](const G& g, int want, const char* what) {
      int p = g.parity();
      require(g.is_zero() || p == want, ErrorKind::parity,
              std::string("quadratic action: wrong parity in ") + what);
    };
    for (const auto& g : s0) check(g, 0, "s0");
    for (int a = 0; a < n1(); ++a) check(Sa[static_cast<size_t>(a)], src_par[static_cast<size_t>(a)], "S_a");
    for (int i = 0; i < n2(); ++i) check(Si[static_cast<size_t>(i)], tgt_par[static_cast<size_t>(i)], "S^i");
    for (int a = 0; a < n1(); ++a)
      for (int b = 0; b < n1(); ++b)
        check(Sab[static_cast<size_t>(a)][static_cast<size_t>(b)],
              (src_par[static_cast<size_t>(a)] + src_par[static_cast<size_t>(b)]) & 1, "S_ab");
    for (int a = 0; a < n1(); ++a)
      for (int i = 0; i < n2(); ++i)
        check(Sai[static_cast<size_t>(a)][static_cast<size_t>(i)],
              (src_par[static_cast<size_t>(a)] + tgt_par[static_cast<size_t>(i)]) & 1, "S_a^i");
    for (int i = 0; i < n2(); ++i)
      for (int j = 0; j < n2(); ++j)
        check(Sij[static_cast<size_t>(i)][static_cast<size_t>(j)],
              (tgt_par[static_cast<size_t>(i)] + tgt_par[static_cast<size_t>(j)]) & 1, "S^ij");
  }

  friend bool operator==(const QuadraticAction& a, const QuadraticAction& b) {
    auto s0a = a.s0, s0b = b.s0;
    while (s0a.size() < s0b.size()) s0a.push_back(G(a.gens));
    while (s0b.size() < s0a.size()) s0b.push_back(G(b.gens));
    return a.gens == b.gens && a.src_par == b.src_par && a.tgt_par == b.tgt_par && s0a == s0b &&
           a.Sa == b.Sa && a.Si == b.Si && a.Sab == b.Sab && a.Sai == b.Sai && a.Sij == b.Sij;
  }
};

namespace detail {

template <class F>
Jet<F> grass_to_jet(const Grassmann<F>& g, VarsPtr vars, const Trunc& tr) {
  int tb = vars->block_index("th");
  Jet<F> r(vars, tr);
  for (const auto& [mask, c] : g.terms()) {
    Monomial m(static_cast<size_t>(vars->total()), 0);
    for (int i = 0; i < g.gens(); ++i)
      if (mask & (uint32_t(1) << i)) m[static_cast<size_t>(vars->offset(tb) + i)] = 1;
    r.add_term(m, c);
  }
  return r;
}

// the jet must involve only th variables
template <class F>
Grassmann<F> jet_to_grass(const Jet<F>& a, int gens) {
  const VariableSpec& v = a.vars();
  int tb = v.block_index("th");
  Grassmann<F> g(gens);
  for (const auto& [m, c] : a.terms()) {
    uint32_t mask = 0;
    for (int u = 0; u < v.total(); ++u) {
      if (m[static_cast<size_t>(u)] == 0) continue;
      require(v.block_of(u) == tb, ErrorKind::internal,
              "jet_to_grass: non-theta content survived evaluation");
      mask |= uint32_t(1) << (u - v.offset(tb));
    }
    g.add_term(mask, c);
  }
  return g;
}

}  // namespace detail

// Spec of the symbol carrier for a quadratic action: blocks x, q, th, h.
template <class F>
SpecUnion quadratic_spec(const QuadraticAction<F>& A, int hmax = 4) {
  std::vector<bool> sodd, todd;
  for (int p : A.src_par) sodd.push_back(p == 1);
  for (int p : A.tgt_par) todd.push_back(p == 1);
  VarsPtr vars = make_vars({Block{"x", A.n1(), sodd}, Block{"q", A.n2(), todd},
                            odd_block("th", A.gens), even_block("h", 1)});
  Trunc tr(*vars);
  tr.set(*vars, "x", 2).set(*vars, "q", 2).set(*vars, "h", hmax);
  return {vars, tr};
}

template <class F>
Jet<F> to_jet(const QuadraticAction<F>& A, VarsPtr vars, const Trunc& tr) {
  const F half = FieldOps<F>::ratio(1, 2);
  auto gj = [&](const Grassmann<F>& g) { return detail::grass_to_jet(g, vars, tr); };
  auto xv = [&](int a) { return Jet<F>::variable(vars, tr, "x", a); };
  auto qv = [&](int i) { return Jet<F>::variable(vars, tr, "q", i); };
  Jet<F> s(vars, tr);
  for (size_t k = 0; k < A.s0.size(); ++k)
    s += jet_pow(Jet<F>::variable(vars, tr, "h", 0), static_cast<int>(k)) * gj(A.s0[k]);
  for (int a = 0; a < A.n1(); ++a) s += xv(a) * gj(A.Sa[static_cast<size_t>(a)]);
  for (int i = 0; i < A.n2(); ++i) s += gj(A.Si[static_cast<size_t>(i)]) * qv(i);
  for (int a = 0; a < A.n1(); ++a)
    for (int b = 0; b < A.n1(); ++b)
      s += xv(a) * xv(b) * gj(A.Sab[static_cast<size_t>(b)][static_cast<size_t>(a)]) * half;
  for (int a = 0; a < A.n1(); ++a)
    for (int i = 0; i < A.n2(); ++i)
      s += xv(a) * gj(A.Sai[static_cast<size_t>(a)][static_cast<size_t>(i)]) * qv(i);
  for (int i = 0; i < A.n2(); ++i)
    for (int j = 0; j < A.n2(); ++j)
      s += gj(A.Sij[static_cast<size_t>(i)][static_cast<size_t>(j)]) * qv(j) * qv(i) * half;
  return s;
}

template <class F>
GeneratingFunction<F> to_generating(const QuadraticAction<F>& A, int hmax = 4) {
  SpecUnion sp = quadratic_spec(A, hmax);
  return GeneratingFunction<F>(to_jet(A, sp.vars, sp.trunc));
}

// Read the blocks back off a quadratic jet over (x, q, th, h); the sign
// twists compensate for the left derivatives used in the extraction.
template <class F>
QuadraticAction<F> from_jet(const Jet<F>& S, int gens, const std::vector<int>& src_par,
                            const std::vector<int>& tgt_par) {
  const VariableSpec& v = S.vars();
  int n1 = static_cast<int>(src_par.size()), n2 = static_cast<int>(tgt_par.size());
  QuadraticAction<F> A = QuadraticAction<F>::zero(gens, src_par, tgt_par);

  auto at0 = [&](const Jet<F>& a) {
    std::map<int, Jet<F>> m;
    for (int k = 0; k < n1; ++k)
      m.emplace(v.var("x", k), Jet<F>::zero(a.vars_ptr(), a.trunc()));
    for (int k = 0; k < n2; ++k)
      m.emplace(v.var("q", k), Jet<F>::zero(a.vars_ptr(), a.trunc()));
    return substitute(a, m, a.vars_ptr(), a.trunc(), true);
  };
  auto to_g = [&](const Jet<F>& a) { return detail::jet_to_grass(coeff_of_power(a, "h", 0), gens); };

  Jet<F> body = at0(S);
  int hmax_here = body.max_degree_in(v.block_index("h"));
  A.s0.assign(static_cast<size_t>(std::max(1, hmax_here + 1)), Grassmann<F>(gens));
  for (int k = 0; k <= std::max(0, hmax_here); ++k)
    A.s0[static_cast<size_t>(k)] = detail::jet_to_grass(coeff_of_power(body, "h", k), gens);

  for (int a = 0; a < n1; ++a) {
    Jet<F> d = differentiate(S, v.var("x", a), Side::left);
    A.Sa[static_cast<size_t>(a)] = to_g(at0(d));
    for (int b = 0; b < n1; ++b)
      A.Sab[static_cast<size_t>(b)][static_cast<size_t>(a)] =
          to_g(at0(differentiate(d, v.var("x", b), Side::left)));
    for (int l = 0; l < n2; ++l) {
      Grassmann<F> g = to_g(at0(differentiate(d, v.var("q", l), Side::left)));
      int sg = (tgt_par[static_cast<size_t>(l)] * (src_par[static_cast<size_t>(a)] + 1)) & 1;
      A.Sai[static_cast<size_t>(a)][static_cast<size_t>(l)] = sg ? -g : g;
    }
  }
  for (int l = 0; l < n2; ++l) {
    Jet<F> d = differentiate(S, v.var("q", l), Side::left);
    Grassmann<F> g = to_g(at0(d));
    A.Si[static_cast<size_t>(l)] = tgt_par[static_cast<size_t>(l)] ? -g : g;
    for (int k = 0; k < n2; ++k) {
      Grassmann<F> h = to_g(at0(differentiate(d, v.var("q", k), Side::left)));
      int sg = (tgt_par[static_cast<size_t>(k)] + tgt_par[static_cast<size_t>(l)] +
                tgt_par[static_cast<size_t>(k)] * tgt_par[static_cast<size_t>(l)]) &
               1;
      A.Sij[static_cast<size_t>(l)][static_cast<size_t>(k)] = sg ? -h : h;
    }
  }
  A.normalize();
  return A;
}

// The affine-linear relation generated by a quadratic action, read through
// left derivatives (p_b = dS/dx^b, y^i = (-1)^{~i} dS/dq_i):
//   p_b = x^a S_{ab} + S_b^i q_i + S_b,   y^i = x^a S_a^i + S^{ij} q_j + S^i
// (x-coefficients stand to the right of x, momentum coefficients to the left;
// in this convention the coefficient matrix carries no parity twists).
template <class F>
struct LinearCanonicalRelation {
  using G = Grassmann<F>;
  int gens = 0;
  std::vector<int> src_par, tgt_par;
  std::vector<std::vector<G>> px, pq, yx, yq;
  std::vector<G> pc, yc;
};

template <class F>
LinearCanonicalRelation<F> relation_of(const QuadraticAction<F>& A) {
  LinearCanonicalRelation<F> R;
  R.gens = A.gens;
  R.src_par = A.src_par;
  R.tgt_par = A.tgt_par;
  int n1 = A.n1(), n2 = A.n2();
  using G = Grassmann<F>;
  R.px.assign(static_cast<size_t>(n1), std::vector<G>(static_cast<size_t>(n1), G(A.gens)));
  R.pq.assign(static_cast<size_t>(n1), std::vector<G>(static_cast<size_t>(n2), G(A.gens)));
  R.yx.assign(static_cast<size_t>(n1), std::vector<G>(static_cast<size_t>(n2), G(A.gens)));
  R.yq.assign(static_cast<size_t>(n2), std::vector<G>(static_cast<size_t>(n2), G(A.gens)));
  R.pc = A.Sa;
  R.yc = A.Si;
  for (int a = 0; a < n1; ++a)
    for (int b = 0; b < n1; ++b)
      R.px[static_cast<size_t>(a)][static_cast<size_t>(b)] =
          A.Sab[static_cast<size_t>(a)][static_cast<size_t>(b)];
  for (int b = 0; b < n1; ++b)
    for (int i = 0; i < n2; ++i)
      R.pq[static_cast<size_t>(b)][static_cast<size_t>(i)] =
          A.Sai[static_cast<size_t>(b)][static_cast<size_t>(i)];
  for (int a = 0; a < n1; ++a)
    for (int i = 0; i < n2; ++i)
      R.yx[static_cast<size_t>(a)][static_cast<size_t>(i)] =
          A.Sai[static_cast<size_t>(a)][static_cast<size_t>(i)];
  for (int i = 0; i < n2; ++i)
    for (int j = 0; j < n2; ++j)
      R.yq[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          A.Sij[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return R;
}

// Evaluate the relation at a Grassmann point (x, q) -> (p, y); the point
// components must match the space parities.
template <class F>
std::pair<std::vector<Grassmann<F>>, std::vector<Grassmann<F>>> relation_apply(
    const LinearCanonicalRelation<F>& R, const std::vector<Grassmann<F>>& x,
    const std::vector<Grassmann<F>>& q) {
  using G = Grassmann<F>;
  size_t n1 = R.src_par.size(), n2 = R.tgt_par.size();
  std::vector<G> p(n1, G(R.gens)), y(n2, G(R.gens));
  for (size_t b = 0; b < n1; ++b) {
    G acc = R.pc[b];
    for (size_t a = 0; a < n1; ++a) acc += x[a] * R.px[a][b];
    for (size_t i = 0; i < n2; ++i) acc += R.pq[b][i] * q[i];
    p[b] = acc;
  }
  for (size_t i = 0; i < n2; ++i) {
    G acc = R.yc[i];
    for (size_t a = 0; a < n1; ++a) acc += x[a] * R.yx[a][i];
    for (size_t j = 0; j < n2; ++j) acc += R.yq[i][j] * q[j];
    y[i] = acc;
  }
  return {p, y};
}

// Linear quantum Hamiltonian Delta = xhat^a A_a + B^a phat_a + K of definite
// parity eps.
template <class F>
struct LinearHamiltonian {
  using G = Grassmann<F>;
  int eps = 0;
  std::vector<G> A, B;
  G K;
};

// Solve the intertwining system
//   B^a S_a + K1 = S^i C_i + K2
//   A_a + (-1)^{~b(eps+1)} S_{ab} B^b = S_a^i C_i
//   B^a S_a^j = (-1)^{~i(eps+1)} C_i S^{ij} + D^j
// for (A, D, K2) given (B, C, K1) and the action.
template <class F>
std::pair<LinearHamiltonian<F>, LinearHamiltonian<F>> intertwine_solve(
    const QuadraticAction<F>& S, const std::vector<Grassmann<F>>& B,
    const std::vector<Grassmann<F>>& C, const Grassmann<F>& K1, int eps) {
  using G = Grassmann<F>;
  int n1 = S.n1(), n2 = S.n2();
  require(static_cast<int>(B.size()) == n1 && static_cast<int>(C.size()) == n2,
          ErrorKind::shape, "intertwine_solve: coefficient arity mismatch");
  for (int a = 0; a < n1; ++a)
    require(B[static_cast<size_t>(a)].is_zero() ||
                B[static_cast<size_t>(a)].parity() == ((eps + S.src_par[static_cast<size_t>(a)]) & 1),
            ErrorKind::parity, "intertwine_solve: B parity inconsistent");
  for (int i = 0; i < n2; ++i)
    require(C[static_cast<size_t>(i)].is_zero() ||
                C[static_cast<size_t>(i)].parity() == ((eps + S.tgt_par[static_cast<size_t>(i)]) & 1),
            ErrorKind::parity, "intertwine_solve: C parity inconsistent");
  require(K1.is_zero() || K1.parity() == (eps & 1), ErrorKind::parity,
          "intertwine_solve: K1 parity inconsistent");

  G K2 = K1;
  for (int a = 0; a < n1; ++a) K2 += B[static_cast<size_t>(a)] * S.Sa[static_cast<size_t>(a)];
  for (int i = 0; i < n2; ++i) K2 -= S.Si[static_cast<size_t>(i)] * C[static_cast<size_t>(i)];

  std::vector<G> A(static_cast<size_t>(n1), G(S.gens));
  for (int a = 0; a < n1; ++a) {
    G acc(S.gens);
    for (int i = 0; i < n2; ++i)
      acc += S.Sai[static_cast<size_t>(a)][static_cast<size_t>(i)] * C[static_cast<size_t>(i)];
    for (int b = 0; b < n1; ++b) {
      G t = S.Sab[static_cast<size_t>(a)][static_cast<size_t>(b)] * B[static_cast<size_t>(b)];
      int sg = (S.src_par[static_cast<size_t>(b)] * (eps + 1)) & 1;
      acc -= sg ? -t : t;
    }
    A[static_cast<size_t>(a)] = acc;
  }

  std::vector<G> D(static_cast<size_t>(n2), G(S.gens));
  for (int j = 0; j < n2; ++j) {
    G acc(S.gens);
    for (int a = 0; a < n1; ++a)
      acc += B[static_cast<size_t>(a)] * S.Sai[static_cast<size_t>(a)][static_cast<size_t>(j)];
    for (int i = 0; i < n2; ++i) {
      G t = C[static_cast<size_t>(i)] * S.Sij[static_cast<size_t>(i)][static_cast<size_t>(j)];
      int sg = (S.tgt_par[static_cast<size_t>(i)] * (eps + 1)) & 1;
      acc -= sg ? -t : t;
    }
    D[static_cast<size_t>(j)] = acc;
  }

  LinearHamiltonian<F> d1{eps, A, B, K1};
  LinearHamiltonian<F> d2{eps, C, D, K2};
  return {d1, d2};
}

namespace detail {

// Eliminate linear unknowns at the stationary point of an even quadratic jet.
template <class F>
struct Eliminated {
  Jet<F> value;
  std::vector<Jet<F>> solution;
};

template <class F>
Eliminated<F> eliminate_stationary(const Jet<F>& Fj, const std::vector<int>& unknowns) {
  const VariableSpec& v = Fj.vars();
  size_t n = unknowns.size();
  std::vector<Jet<F>> E;
  E.reserve(n);
  for (int u : unknowns) E.push_back(differentiate(Fj, u, Side::left));

  auto strip_unknowns = [&](const Jet<F>& a) {
    std::map<int, Jet<F>> m;
    for (int u : unknowns) m.emplace(u, Jet<F>::zero(a.vars_ptr(), a.trunc()));
    return substitute(a, m, a.vars_ptr(), a.trunc(), true);
  };

  std::vector<std::vector<Jet<F>>> A(n, std::vector<Jet<F>>(n, Jet<F>(Fj.vars_ptr(), Fj.trunc())));
  std::vector<Jet<F>> b;
  b.reserve(n);
  for (size_t e = 0; e < n; ++e) {
    int pe = v.odd(unknowns[e]) ? 1 : 0;
    for (size_t w = 0; w < n; ++w) {
      int pw = v.odd(unknowns[w]) ? 1 : 0;
      Jet<F> d = differentiate(E[e], unknowns[w], Side::left);
      for (const auto& [m, c] : d.terms())
        for (int u : unknowns)
          require(m[static_cast<size_t>(u)] == 0, ErrorKind::domain,
                  "eliminate_stationary: the function is not quadratic in the unknowns");
      int sg = (pw * (pe + pw)) & 1;
      A[e][w] = sg ? -d : d;
    }
    b.push_back(-strip_unknowns(E[e]));
  }

  std::vector<Jet<F>> sol;
  try {
    sol = linear_solve(A, b);
  } catch (const Error& err) {
    if (err.kind() == ErrorKind::singular)
      fail(ErrorKind::singular,
           "stationary elimination: singular body (composition leaves the quadratic class)");
    throw;
  }
  std::map<int, Jet<F>> m;
  for (size_t w = 0; w < n; ++w) m.emplace(unknowns[w], sol[w]);
  Eliminated<F> out{substitute(Fj, m, Fj.vars_ptr(), Fj.trunc(), true), std::move(sol)};
  return out;
}

template <class F>
SpecUnion compose_spec(const QuadraticAction<F>& T32, const QuadraticAction<F>& S21, int hmax) {
  require(T32.gens == S21.gens, ErrorKind::shape, "compose: Grassmann contexts differ");
  require(T32.src_par == S21.tgt_par, ErrorKind::shape, "compose: middle parities differ");
  std::vector<bool> sodd, modd, rodd;
  for (int p : S21.src_par) sodd.push_back(p == 1);
  for (int p : S21.tgt_par) modd.push_back(p == 1);
  for (int p : T32.tgt_par) rodd.push_back(p == 1);
  VarsPtr vars = make_vars({Block{"x", S21.n1(), sodd}, Block{"q", S21.n2(), modd},
                            Block{"y", S21.n2(), modd}, Block{"r", T32.n2(), rodd},
                            odd_block("th", S21.gens), even_block("h", 1)});
  Trunc tr(*vars);
  tr.set(*vars, "x", 2).set(*vars, "q", 2).set(*vars, "y", 2).set(*vars, "r", 2).set(*vars, "h",
                                                                                     hmax);
  return {vars, tr};
}

}  // namespace detail

// Exact classical composition of quadratic actions:
//   S31(x,r) = S32(y,r) + S21(x,q) - y^i q_i at the stationary (y, q).
template <class F>
QuadraticAction<F> compose_classical(const QuadraticAction<F>& T32,
                                     const QuadraticAction<F>& S21, int hmax = 4) {
  SpecUnion W = detail::compose_spec(T32, S21, hmax);
  Jet<F> s21 = to_jet(S21, W.vars, W.trunc);
  SpecUnion m32 = quadratic_spec(T32, hmax);
  Jet<F> s32 = embed(rename_block(rename_block(to_jet(T32, m32.vars, m32.trunc), "q", "r"), "x", "y"),
                     W.vars, W.trunc);
  Jet<F> Fj = s21 + s32;
  int n2 = S21.n2();
  for (int i = 0; i < n2; ++i)
    Fj -= Jet<F>::variable(W.vars, W.trunc, "y", i) * Jet<F>::variable(W.vars, W.trunc, "q", i);

  std::vector<int> unknowns;
  for (int i = 0; i < n2; ++i) unknowns.push_back(W.vars->var("y", i));
  for (int i = 0; i < n2; ++i) unknowns.push_back(W.vars->var("q", i));
  auto elim = detail::eliminate_stationary(Fj, unknowns);

  SpecUnion out = drop_blocks(*W.vars, W.trunc, {"q", "y"});
  Jet<F> s31 = rename_block(embed(elim.value, out.vars, out.trunc), "r", "q");
  return from_jet(s31, S21.gens, S21.src_par, T32.tgt_par);
}

// c(Phi32, Phi21) = 1/2 ln Ber(1 - T_{ik} S^{kj} (-1)^{~k}) over the middle
// space; exact for nilpotent souls.
template <class F>
Grassmann<F> cocycle(const QuadraticAction<F>& T32, const QuadraticAction<F>& S21) {
  require(T32.gens == S21.gens, ErrorKind::shape, "cocycle: Grassmann contexts differ");
  require(T32.src_par == S21.tgt_par, ErrorKind::shape, "cocycle: middle parities differ");
  int n2 = S21.n2();
  SuperMatrix<F> B = SuperMatrix<F>::identity(S21.tgt_par, S21.gens);
  for (int i = 0; i < n2; ++i)
    for (int j = 0; j < n2; ++j) {
      Grassmann<F> acc(S21.gens);
      for (int k = 0; k < n2; ++k) {
        Grassmann<F> t = T32.Sab[static_cast<size_t>(i)][static_cast<size_t>(k)] *
                         S21.Sij[static_cast<size_t>(k)][static_cast<size_t>(j)];
        acc += S21.tgt_par[static_cast<size_t>(k)] ? -t : t;
      }
      B.at(static_cast<size_t>(i), static_cast<size_t>(j)) =
          B.at(static_cast<size_t>(i), static_cast<size_t>(j)) - acc;
    }
  return grass_log(berezinian(B)) * FieldOps<F>::ratio(1, 2);
}

// Same correction through the supertrace-logarithm series (cross-check route).
template <class F>
Grassmann<F> cocycle_via_strlog(const QuadraticAction<F>& T32, const QuadraticAction<F>& S21,
                                int order = 40) {
  int n2 = S21.n2();
  SuperMatrix<F> M(S21.tgt_par, S21.tgt_par, S21.gens);
  for (int i = 0; i < n2; ++i)
    for (int j = 0; j < n2; ++j) {
      Grassmann<F> acc(S21.gens);
      for (int k = 0; k < n2; ++k) {
        Grassmann<F> t = T32.Sab[static_cast<size_t>(i)][static_cast<size_t>(k)] *
                         S21.Sij[static_cast<size_t>(k)][static_cast<size_t>(j)];
        acc += S21.tgt_par[static_cast<size_t>(k)] ? -t : t;
      }
      M.at(static_cast<size_t>(i), static_cast<size_t>(j)) = acc;
    }
  return str_log_one_minus(M, order) * FieldOps<F>::ratio(1, 2);
}

// Quantum composition: the classical one with the constant term shifted by
// -(hbar/i) c = + i hbar c.
template <class F>
QuadraticAction<F> compose_quantum(const QuadraticAction<F>& T32, const QuadraticAction<F>& S21,
                                   int hmax = 4) {
  static_assert(FieldOps<F>::has_imag, "compose_quantum needs a field containing i");
  QuadraticAction<F> out = compose_classical(T32, S21, hmax);
  Grassmann<F> c = cocycle(T32, S21);
  if (out.s0.size() < 2) out.s0.resize(2, Grassmann<F>(out.gens));
  out.s0[1] += c * FieldOps<F>::imag_unit();
  return out;
}

// Generating function of the inverse framed relation (thick diffeomorphisms:
// equal source and target). Normalized so that composing with the original
// gives the identity action with zero constant.
template <class F>
QuadraticAction<F> classical_inverse(const QuadraticAction<F>& S, int hmax = 4) {
  require(S.src_par == S.tgt_par, ErrorKind::shape,
          "classical_inverse: source and target must match");
  int n = S.n1();
  std::vector<bool> odd;
  for (int p : S.src_par) odd.push_back(p == 1);
  VarsPtr vars = make_vars({Block{"x", n, odd}, Block{"q", n, odd}, Block{"y", n, odd},
                            Block{"r", n, odd}, odd_block("th", S.gens), even_block("h", 1)});
  Trunc tr(*vars);
  tr.set(*vars, "x", 2).set(*vars, "q", 2).set(*vars, "y", 2).set(*vars, "r", 2).set(*vars, "h",
                                                                                     hmax);
  // T(y, r) = x r + y q - S(x, q) at the stationary (x, q)
  Jet<F> Fj(vars, tr);
  for (int a = 0; a < n; ++a)
    Fj += Jet<F>::variable(vars, tr, "x", a) * Jet<F>::variable(vars, tr, "r", a);
  for (int i = 0; i < n; ++i)
    Fj += Jet<F>::variable(vars, tr, "y", i) * Jet<F>::variable(vars, tr, "q", i);
  SpecUnion ssp = quadratic_spec(S, hmax);
  Fj -= embed(to_jet(S, ssp.vars, ssp.trunc), vars, tr);

  std::vector<int> unknowns;
  for (int a = 0; a < n; ++a) unknowns.push_back(vars->var("x", a));
  for (int i = 0; i < n; ++i) unknowns.push_back(vars->var("q", i));
  auto elim = detail::eliminate_stationary(Fj, unknowns);

  SpecUnion out = drop_blocks(*vars, tr, {"x", "q"});
  Jet<F> tj = rename_block(rename_block(embed(elim.value, out.vars, out.trunc), "y", "x"), "r", "q");
  QuadraticAction<F> T = from_jet(tj, S.gens, S.src_par, S.src_par);

  // fix the framing so that T o S carries zero constant
  QuadraticAction<F> probe = compose_classical(T, S, hmax);
  for (size_t k = 0; k < probe.s0.size(); ++k) {
    if (T.s0.size() <= k) T.s0.resize(k + 1, Grassmann<F>(T.gens));
    T.s0[k] -= probe.s0[k];
  }
  return T;
}

// Bridge for thick-level callers: exact composition when both generating
// functions are quadratic (theta-block coefficients allowed).
template <class F>
GeneratingFunction<F> compose_quadratic(const GeneratingFunction<F>& S32,
                                        const GeneratingFunction<F>& S21) {
  auto prep = [](const GeneratingFunction<F>& Gf, std::vector<int>& sp, std::vector<int>& tp,
                 int& gens) {
    const VariableSpec& v = Gf.S.vars();
    sp.clear();
    tp.clear();
    for (int a = 0; a < Gf.n1(); ++a) sp.push_back(v.odd(v.var("x", a)) ? 1 : 0);
    for (int i = 0; i < Gf.n2(); ++i) tp.push_back(v.odd(v.var("q", i)) ? 1 : 0);
    int tb = v.find_block("th");
    gens = tb >= 0 ? v.block(tb).dim : 0;
    int bx = v.block_index("x"), bq = v.block_index("q");
    for (const auto& [m, c] : Gf.S.terms())
      require(block_degree(v, m, bx) + block_degree(v, m, bq) <= 2, ErrorKind::domain,
              "compose_quadratic: action is not quadratic");
  };
  std::vector<int> sp21, tp21, sp32, tp32;
  int g21 = 0, g32 = 0;
  prep(S21, sp21, tp21, g21);
  prep(S32, sp32, tp32, g32);
  int gens = std::max(g21, g32);

  auto lift = [&](const GeneratingFunction<F>& Gf, const std::vector<int>& sp,
                  const std::vector<int>& tp) {
    std::vector<bool> so, to;
    for (int p : sp) so.push_back(p == 1);
    for (int p : tp) to.push_back(p == 1);
    VarsPtr vars = make_vars({Block{"x", static_cast<int>(sp.size()), so},
                              Block{"q", static_cast<int>(tp.size()), to}, odd_block("th", gens),
                              even_block("h", 1)});
    Trunc tr(*vars);
    tr.set(*vars, "x", 2).set(*vars, "q", 2).set(*vars, "h", 4);
    return from_jet(embed(Gf.S, vars, tr), gens, sp, tp);
  };
  QuadraticAction<F> out = compose_classical(lift(S32, sp32, tp32), lift(S21, sp21, tp21));
  return to_generating(out);
}

}  // namespace microformal
