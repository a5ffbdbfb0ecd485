#pragma once

#include <map>
#include <string>
#include <vector>

#include "microformal/thick.hpp"

namespace microformal {

// Quantum generating function S(x, q; hbar): a jet over blocks "x", "q", "h"
// whose h-degree-0 part is a classical generating function.
template <class F>
struct QuantumAction {
  static_assert(FieldOps<F>::has_imag, "quantum actions need a field containing i");
  Jet<F> S;

  explicit QuantumAction(Jet<F> s) : S(std::move(s)) {
    const VariableSpec& v = S.vars();
    require(v.find_block("x") >= 0 && v.find_block("q") >= 0 && v.find_block("h") >= 0,
            ErrorKind::shape, "quantum action needs blocks 'x', 'q', 'h'");
    require(S.trunc().min_deg[static_cast<size_t>(v.block_index("h"))] >= 0, ErrorKind::shape,
            "quantum action: negative hbar powers");
    require(S.parity() != 1 && S.parity() != -1, ErrorKind::parity,
            "quantum action must be even");
  }

  int n1() const { return S.vars().block(S.vars().block_index("x")).dim; }
  int n2() const { return S.vars().block(S.vars().block_index("q")).dim; }
};

// Oscillatory wave function A(y; hbar) e^{(i/hbar) f(y; hbar)}; phase and
// amplitude share one spec (blocks "y", "h", plus passengers) and carry only
// nonnegative hbar powers.
template <class F>
struct OscillatoryFunction {
  Jet<F> phase;
  Jet<F> amplitude;

  OscillatoryFunction(Jet<F> f, Jet<F> a) : phase(std::move(f)), amplitude(std::move(a)) {
    require(phase.vars().same(amplitude.vars()), ErrorKind::shape,
            "oscillatory function: phase and amplitude specs differ");
    const VariableSpec& v = phase.vars();
    require(v.find_block("h") >= 0, ErrorKind::shape, "oscillatory function needs an 'h' block");
    int hb = v.block_index("h");
    require(phase.is_zero() || phase.min_degree_in(hb) >= 0, ErrorKind::shape,
            "oscillatory function: negative hbar powers in the phase");
    require(phase.parity() == 0, ErrorKind::parity, "oscillatory phase must be even");
  }
};

// Drop all positive hbar powers and the h block itself.
template <class F>
GeneratingFunction<F> classical_limit(const QuantumAction<F>& S) {
  SpecUnion out = drop_blocks(S.S.vars(), S.S.trunc(), {"h"});
  return GeneratingFunction<F>(embed(coeff_of_power(S.S, "h", 0), out.vars, out.trunc));
}

namespace detail {

// Exact division by hbar/i = -i hbar; every term must carry an hbar factor.
// Floating coefficients tolerate roundoff dust at hbar^0.
template <class F>
Jet<F> div_hbar_over_i(const Jet<F>& a) {
  const VariableSpec& v = a.vars();
  int hv = v.var("h", 0);
  Jet<F> r(a.vars_ptr(), a.trunc());
  const F i_unit = FieldOps<F>::imag_unit();
  double scale = a.max_abs_coeff();
  for (const auto& [m, c] : a.terms()) {
    if (m[static_cast<size_t>(hv)] < 1) {
      if (!FieldOps<F>::exact && FieldOps<F>::mag(c) <= 1e-12 * std::max(1.0, scale)) continue;
      fail(ErrorKind::internal, "div_hbar_over_i: term without an hbar factor");
    }
    Monomial d = m;
    d[static_cast<size_t>(hv)] -= 1;
    r.add_term(d, c * i_unit);
  }
  return r;
}

// The conjugation engine: operators built from (hbar/i) d/dy acting on
// amplitudes relative to a fixed even phase f,
//   Dtilde_i(B) = (d_i f) B + (hbar/i) d_i B.
template <class F>
struct ConjugationEngine {
  SpecUnion W;
  Jet<F> f;  // phase over W
  std::vector<int> yvars;
  Jet<F> nu;  // (hbar/i) as a jet: -i h

  ConjugationEngine(SpecUnion w, Jet<F> phase, const std::string& pos = "y")
      : W(std::move(w)),
        f(std::move(phase)),
        nu(Jet<F>::variable(W.vars, W.trunc, "h", 0) * (-FieldOps<F>::imag_unit())) {
    const VariableSpec& v = *W.vars;
    int yb = v.block_index(pos);
    for (int i = 0; i < v.block(yb).dim; ++i) yvars.push_back(v.var(pos, i));
  }

  Jet<F> dtilde(int i, const Jet<F>& B) const {
    int yv = yvars[static_cast<size_t>(i)];
    Jet<F> r = differentiate(f, yv, Side::left).assert_exact_to(W.trunc) * B +
               nu * differentiate(B, yv, Side::left).assert_exact_to(W.trunc);
    return r;
  }

  // P(x, Dtilde) B for a jet P whose momentum letters live in block `mom`;
  // non-momentum letters act by left multiplication in written order.
  Jet<F> apply_poly(const Jet<F>& P, const std::string& mom, const Jet<F>& B) const {
    const VariableSpec& pv = P.vars();
    int mb = pv.block_index(mom);
    Jet<F> acc(B.vars_ptr(), B.trunc());
    for (const auto& [m, c] : P.terms()) {
      Jet<F> cur = B;
      for (int v = pv.total() - 1; v >= 0; --v) {
        int e = m[static_cast<size_t>(v)];
        if (e == 0) continue;
        if (pv.block_of(v) == mb) {
          int slot = v - pv.offset(mb);
          for (int k = 0; k < e; ++k) cur = dtilde(slot, cur);
        } else {
          // match by block name and slot in the working spec
          const std::string& bn = pv.block(pv.block_of(v)).name;
          int wv = W.vars->var(bn, v - pv.offset(pv.block_of(v)));
          Jet<F> var = Jet<F>::variable(W.vars, W.trunc, wv);
          for (int k = 0; k < e; ++k) cur = var * cur;
        }
      }
      acc += cur * c;
    }
    return acc;
  }

  // exp(T) B for T = (i/hbar) P(x, Dtilde); terminates through the joint
  // grading (eps/lam blocks and the bounded hbar window).
  Jet<F> apply_exp(const Jet<F>& P, const std::string& mom, const Jet<F>& B, int cap) const {
    Jet<F> inv_nu =
        Jet<F>(W.vars, W.trunc);  // i * h^{-1}
    {
      Monomial m(static_cast<size_t>(W.vars->total()), 0);
      m[static_cast<size_t>(W.vars->var("h", 0))] = -1;
      inv_nu.add_term(m, FieldOps<F>::imag_unit());
    }
    Jet<F> acc = B;
    Jet<F> pw = B;
    for (int k = 1; k <= cap; ++k) {
      pw = inv_nu * apply_poly(P, mom, pw) / FieldOps<F>::from_int(k);
      if (pw.is_zero()) return acc;
      acc += pw;
    }
    require(false, ErrorKind::convergence,
            "operator exponential did not terminate; the action or the phase needs a grading");
    return acc;
  }
};

template <class F>
struct PullbackEngine {
  ConjugationEngine<F> conj;
  Jet<F> Sx, A;
  Jet<F> S0, Splus;
  std::vector<Jet<F>> phi;
  Jet<F> C;     // exp((i/hbar) S+(x, Dtilde)) A, before the target evaluation
  int cap = 0;

  Jet<F> eval_on_target(const Jet<F>& B) const {
    std::map<int, Jet<F>> m;
    for (size_t i = 0; i < phi.size(); ++i)
      m.emplace(conj.yvars[i], phi[i]);
    return substitute(B, m, conj.W.vars, conj.W.trunc, true);
  }
};

template <class F>
PullbackEngine<F> build_pullback_engine(const QuantumAction<F>& S,
                                        const OscillatoryFunction<F>& w, int K) {
  const VariableSpec& sv = S.S.vars();
  const VariableSpec& wv = w.phase.vars();
  require(wv.find_block("y") >= 0, ErrorKind::shape, "quantum pullback: w needs a 'y' block");
  int n2 = S.n2();
  int wyb = wv.block_index("y");
  require(wv.block(wyb).dim == n2, ErrorKind::shape, "quantum pullback: dimension mismatch");
  for (int i = 0; i < n2; ++i)
    require(wv.odd(wv.offset(wyb) + i) == sv.odd(sv.var("q", i)), ErrorKind::parity,
            "quantum pullback: target parities differ");

  SpecUnion W = merge_specs({{&sv, &S.S.trunc()}, {&wv, &w.phase.trunc()}});
  // widen the hbar window downward for intermediate 1/hbar bookkeeping
  int cap = K + 2;
  for (int b = 0; b < W.vars->block_count(); ++b) {
    const std::string& name = W.vars->block(b).name;
    if (name == "eps" || name == "lam") {
      int top = W.trunc.max_deg[static_cast<size_t>(b)];
      require(top < Trunc::unbounded, ErrorKind::convergence,
              "quantum pullback: grading block must carry a finite bound");
      cap += top;
    }
  }
  int hb = W.vars->block_index("h");
  W.trunc.max_deg[static_cast<size_t>(hb)] = K;
  W.trunc.min_deg[static_cast<size_t>(hb)] = -(cap + 1);

  ConjugationEngine<F> conj(W, embed(w.phase, W.vars, W.trunc));
  Jet<F> Sx = embed(S.S, W.vars, W.trunc);
  Jet<F> S0 = component(Sx, "q", 0);
  Jet<F> lin = component(Sx, "q", 1);
  Jet<F> Splus = Sx - S0 - lin;
  std::vector<Jet<F>> phi;
  for (int i = 0; i < n2; ++i) {
    // phi^i stands left of q_i, so the left q-derivative picks up (-1)^{~i}
    Jet<F> d = differentiate(lin, W.vars->var("q", i), Side::left);
    phi.push_back(W.vars->odd(W.vars->var("q", i)) ? -d : d);
  }

  Jet<F> A = embed(w.amplitude, W.vars, W.trunc);
  PullbackEngine<F> eng{std::move(conj), std::move(Sx), std::move(A),
                        std::move(S0),   std::move(Splus), std::move(phi),
                        Jet<F>(W.vars, W.trunc), cap};
  eng.C = eng.Splus.is_zero() ? eng.A : eng.conj.apply_exp(eng.Splus, "q", eng.A, cap);
  return eng;
}

}  // namespace detail

// Pullback without the amplitude/phase renormalization: the phase is kept as
// S^0(x) + f(phi(x)) and the amplitude is the conjugated operator exponential
// applied to the incoming amplitude. The amplitude may carry negative hbar
// powers (unresummed phase content), so the Laurent window stays open.
template <class F>
struct RawPullback {
  Jet<F> phase;
  Jet<F> amplitude;
};

template <class F>
RawPullback<F> quantum_pullback_raw(const QuantumAction<F>& S, const OscillatoryFunction<F>& w,
                                    int K = 2) {
  auto eng = detail::build_pullback_engine(S, w, K);
  const SpecUnion& W = eng.conj.W;
  Jet<F> C = eng.eval_on_target(eng.C);
  Jet<F> g0 = eng.S0 + eng.eval_on_target(eng.conj.f);
  SpecUnion out = drop_blocks(*W.vars, W.trunc, {"q", "y"});
  return {embed(g0, out.vars, out.trunc), embed(C, out.vars, out.trunc)};
}

// Pullback by a quantum thick morphism, computed through the conjugated
// operator form and renormalized into an amplitude/phase pair: the phase is
// the hbar-degree-0 part of (hbar/i) log of the result, everything else goes
// to the amplitude.
template <class F>
OscillatoryFunction<F> quantum_pullback(const QuantumAction<F>& S,
                                        const OscillatoryFunction<F>& w, int K = 2) {
  auto eng = detail::build_pullback_engine(S, w, K);
  const SpecUnion& W = eng.conj.W;
  Jet<F> C = eng.eval_on_target(eng.C);
  Jet<F> g0 = eng.S0 + eng.eval_on_target(eng.conj.f);

  Jet<F> phase(W.vars, W.trunc), amplitude(W.vars, W.trunc);
  if (eng.Splus.is_zero()) {
    phase = component(g0, "h", 0);
  } else {
    F c0 = C.constant_term();
    require(!FieldOps<F>::is_zero(c0), ErrorKind::domain,
            "quantum pullback: amplitude body is not invertible; phase split undefined");
    Jet<F> L = jet_log(C / c0);
    Jet<F> nu = Jet<F>::variable(W.vars, W.trunc, "h", 0) * (-FieldOps<F>::imag_unit());
    phase = component(nu * L + g0, "h", 0);
  }
  // amplitude = C exp((i/hbar)(g0 - phase))
  Jet<F> inv_nu(W.vars, W.trunc);
  {
    Monomial m(static_cast<size_t>(W.vars->total()), 0);
    m[static_cast<size_t>(W.vars->var("h", 0))] = -1;
    inv_nu.add_term(m, FieldOps<F>::imag_unit());
  }
  amplitude = C * jet_exp(inv_nu * (g0 - phase));
  require(amplitude.is_zero() ||
              amplitude.min_degree_in(W.vars->block_index("h")) >= 0,
          ErrorKind::internal, "quantum pullback: amplitude kept negative hbar powers");

  SpecUnion out = drop_blocks(*W.vars, W.trunc, {"q", "y"});
  int ohb = out.vars->block_index("h");
  out.trunc.min_deg[static_cast<size_t>(ohb)] = 0;
  return OscillatoryFunction<F>(embed(phase, out.vars, out.trunc),
                                embed(amplitude, out.vars, out.trunc));
}

// Composition of quantum thick morphisms, exact through hbar^1: the classical
// composition plus -(hbar/i) times half the supertrace logarithm of the
// normalized stationary-point Hessian.
template <class F>
QuantumAction<F> quantum_compose_first_order(const QuantumAction<F>& S32,
                                             const QuantumAction<F>& S21, int order = 3) {
  GeneratingFunction<F> G32(S32.S), G21(S21.S);
  auto core = detail::compose_core(G32, G21, order, /*formal=*/true, /*premarked=*/false,
                                   1e-12, 100);
  const SpecUnion& W = core.W;
  const VariableSpec& v = *W.vars;
  int n2 = G21.n2();

  std::map<int, Jet<F>> my, mq;
  for (int j = 0; j < n2; ++j) {
    my.emplace(v.var("y", j), core.ystar[static_cast<size_t>(j)]);
    mq.emplace(v.var("q", j), core.qstar[static_cast<size_t>(j)]);
  }
  std::vector<int> tau(static_cast<size_t>(n2), 0);
  for (int i = 0; i < n2; ++i) tau[static_cast<size_t>(i)] = v.odd(v.var("q", i)) ? 1 : 0;

  // Hessians at the critical point, with the sign twist that matches the
  // quadratic normal form (see the linear theory in spinor.hpp).
  auto at_crit = [&](const Jet<F>& a, const std::map<int, Jet<F>>& m) {
    return substitute(a, m, W.vars, W.trunc, true);
  };
  std::vector<std::vector<Jet<F>>> M(static_cast<size_t>(n2),
                                     std::vector<Jet<F>>(static_cast<size_t>(n2),
                                                         Jet<F>(W.vars, W.trunc)));
  for (int k = 0; k < n2; ++k)
    for (int j = 0; j < n2; ++j) {
      Jet<F> acc(W.vars, W.trunc);
      for (int l = 0; l < n2; ++l) {
        Jet<F> h32 = at_crit(
            differentiate(differentiate(core.S32e, v.var("y", l), Side::left), v.var("y", k),
                          Side::left),
            my);
        Jet<F> h21 = at_crit(
            differentiate(differentiate(core.S21e, v.var("q", l), Side::left), v.var("q", j),
                          Side::left),
            mq);
        // S~_{lj} = (-1)^{~j (1 + ~l)} H21_{jl}
        int sign = (tau[static_cast<size_t>(j)] * (1 + tau[static_cast<size_t>(l)])) & 1;
        Jet<F> term = h32 * h21;
        acc += sign ? -term : term;
      }
      M[static_cast<size_t>(k)][static_cast<size_t>(j)] = acc;
    }

  // c = 1/2 str ln(1 - M) = -1/2 sum_m str(M^m)/m
  int lam_bound = W.trunc.max_deg[static_cast<size_t>(v.block_index("lam"))];
  Jet<F> c(W.vars, W.trunc);
  std::vector<std::vector<Jet<F>>> P = M;
  for (int m = 1; m <= lam_bound + 2; ++m) {
    Jet<F> str(W.vars, W.trunc);
    bool zero = true;
    for (int k = 0; k < n2; ++k) {
      const Jet<F>& d = P[static_cast<size_t>(k)][static_cast<size_t>(k)];
      str += tau[static_cast<size_t>(k)] ? -d : d;
      for (int j = 0; j < n2; ++j)
        if (!P[static_cast<size_t>(k)][static_cast<size_t>(j)].is_zero()) zero = false;
    }
    c -= str / FieldOps<F>::from_int(2 * m);
    if (zero) break;
    // P <- P M
    std::vector<std::vector<Jet<F>>> Q(static_cast<size_t>(n2),
                                       std::vector<Jet<F>>(static_cast<size_t>(n2),
                                                           Jet<F>(W.vars, W.trunc)));
    for (int a = 0; a < n2; ++a)
      for (int b = 0; b < n2; ++b)
        for (int l = 0; l < n2; ++l)
          Q[static_cast<size_t>(a)][static_cast<size_t>(b)] +=
              P[static_cast<size_t>(a)][static_cast<size_t>(l)] *
              M[static_cast<size_t>(l)][static_cast<size_t>(b)];
    P = std::move(Q);
  }

  // S31 = S31_class - (hbar/i) c = S31_class + i hbar c
  Jet<F> h = Jet<F>::variable(W.vars, W.trunc, "h", 0);
  Jet<F> total = core.S31 + h * c * FieldOps<F>::imag_unit();

  SpecUnion out = drop_blocks(*W.vars, W.trunc, {"q", "y"});
  Jet<F> s = rename_block(embed(total, out.vars, out.trunc), "r", "q");
  return QuantumAction<F>(std::move(s));
}

}  // namespace microformal
