#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "microformal/quantum.hpp"
#include "microformal/thick.hpp"

namespace microformal {

namespace detail {

// classic fixed-step RK4 on a vector of jets
template <class F>
void rk4(std::vector<Jet<F>>& state,
         const std::function<std::vector<Jet<F>>(const std::vector<Jet<F>>&)>& rhs, double T,
         int steps) {
  require(steps >= 1, ErrorKind::domain, "rk4: step count must be >= 1");
  F h{T / steps};
  F half = h * FieldOps<F>::ratio(1, 2);
  F sixth = h * FieldOps<F>::ratio(1, 6);
  for (int s = 0; s < steps; ++s) {
    auto k1 = rhs(state);
    auto y2 = state;
    for (size_t i = 0; i < state.size(); ++i) y2[i] += k1[i] * half;
    auto k2 = rhs(y2);
    auto y3 = state;
    for (size_t i = 0; i < state.size(); ++i) y3[i] += k2[i] * half;
    auto k3 = rhs(y3);
    auto y4 = state;
    for (size_t i = 0; i < state.size(); ++i) y4[i] += k3[i] * h;
    auto k4 = rhs(y4);
    for (size_t i = 0; i < state.size(); ++i)
      state[i] += (k1[i] + k2[i] * FieldOps<F>::from_int(2) + k3[i] * FieldOps<F>::from_int(2) +
                   k4[i]) *
                  sixth;
  }
}

}  // namespace detail

// d f_t/dt = H(x, df_t/dx), integrated on the jet coefficients of f_t.
// H lives over blocks (x, p); f0 over (x) plus passengers.
template <class F>
Jet<F> evolve_function(const Jet<F>& H, const Jet<F>& f0, double T, int steps = 1000) {
  const VariableSpec& hv = H.vars();
  int n = hv.block(hv.block_index("x")).dim;
  require(hv.block(hv.block_index("p")).dim == n, ErrorKind::shape,
          "evolve_function: Hamiltonian blocks mismatch");
  for (int v = 0; v < hv.total(); ++v)
    require(!hv.odd(v), ErrorKind::parity, "evolve_function: even variables only");
  require(f0.parity() == 0, ErrorKind::parity, "evolve_function: f0 must be even");

  VarsPtr W = f0.vars_ptr();
  Trunc wt = f0.trunc();
  // the state is the exact representative of the quotient window, so the
  // derivative keeps the full working guarantee
  auto rhs = [&](const std::vector<Jet<F>>& st) {
    std::map<int, Jet<F>> m;
    for (int a = 0; a < n; ++a) {
      m.emplace(hv.var("x", a), Jet<F>::variable(W, wt, "x", a));
      m.emplace(hv.var("p", a),
                differentiate(st[0], W->var("x", a), Side::left).assert_exact_to(wt));
    }
    return std::vector<Jet<F>>{substitute(H, m, W, wt, true)};
  };
  std::vector<Jet<F>> state{f0};
  detail::rk4<F>(state, rhs, T, steps);
  return state[0];
}

// d S_t/dt = H(dS_t/dq, q) from S_0 = x q: the action of the thick
// diffeomorphism group generated by H, on (x, q) jets.
template <class F>
GeneratingFunction<F> evolve_action(const Jet<F>& H, double T, int steps = 1000, int xdeg = 6,
                                    int qdeg = 6) {
  const VariableSpec& hv = H.vars();
  int n = hv.block(hv.block_index("x")).dim;
  require(hv.block(hv.block_index("p")).dim == n, ErrorKind::shape,
          "evolve_action: Hamiltonian blocks mismatch");
  for (int v = 0; v < hv.total(); ++v)
    require(!hv.odd(v), ErrorKind::parity, "evolve_action: even variables only");

  VarsPtr W = make_vars({even_block("x", n), even_block("q", n)});
  Trunc wt(*W);
  wt.set(*W, "x", xdeg).set(*W, "q", qdeg);
  Jet<F> S0(W, wt);
  for (int a = 0; a < n; ++a)
    S0 += Jet<F>::variable(W, wt, "x", a) * Jet<F>::variable(W, wt, "q", a);

  auto rhs = [&](const std::vector<Jet<F>>& st) {
    std::map<int, Jet<F>> m;
    for (int a = 0; a < n; ++a) {
      m.emplace(hv.var("x", a),
                differentiate(st[0], W->var("q", a), Side::left).assert_exact_to(wt));
      m.emplace(hv.var("p", a), Jet<F>::variable(W, wt, "q", a));
    }
    return std::vector<Jet<F>>{substitute(H, m, W, wt, true)};
  };
  std::vector<Jet<F>> state{S0};
  detail::rk4<F>(state, rhs, T, steps);
  return GeneratingFunction<F>(state[0]);
}

namespace detail {

// evaluate a jet over (x, p) at a numeric phase point
inline CD eval_xp(const Jet<CD>& H, const std::vector<CD>& x, const std::vector<CD>& p) {
  const VariableSpec& v = H.vars();
  int bx = v.block_index("x"), bp = v.block_index("p");
  CD acc(0.0, 0.0);
  for (const auto& [m, c] : H.terms()) {
    CD t = c;
    for (int u = 0; u < v.total(); ++u) {
      int e = m[static_cast<size_t>(u)];
      if (e == 0) continue;
      CD base;
      if (v.block_of(u) == bx) base = x[static_cast<size_t>(u - v.offset(bx))];
      else if (v.block_of(u) == bp) base = p[static_cast<size_t>(u - v.offset(bp))];
      else fail(ErrorKind::shape, "flow Hamiltonian depends on a non-phase variable");
      for (int k = 0; k < e; ++k) t *= base;
    }
    acc += t;
  }
  return acc;
}

}  // namespace detail

struct FlowActionSamples {
  std::vector<double> x_grid, q_grid;
  std::vector<std::vector<CD>> S;    // S[i][j] = S_T(x_i, q_j)
  std::vector<std::vector<CD>> p0;   // solved initial momenta
  double sympl_drift = 0.0;          // |det dFlow - 1| spot check
};

// Sample S_T(x, q) = x p_0 + int_0^T (y qdot + H) dt over a grid by shooting:
// for each (x, q_T) the initial momentum is found by damped Newton on the
// final-momentum map. One-dimensional even case.
inline FlowActionSamples action_from_flow(const Jet<CD>& H, double T,
                                          const std::vector<double>& x_grid,
                                          const std::vector<double>& q_grid, int steps = 400,
                                          double tol = 1e-10, int max_iter = 100) {
  const VariableSpec& hv = H.vars();
  require(hv.block(hv.block_index("x")).dim == 1 && hv.block(hv.block_index("p")).dim == 1,
          ErrorKind::shape, "action_from_flow: one-dimensional case only");

  auto dHdx = differentiate(H, hv.var("x", 0), Side::left);
  auto dHdp = differentiate(H, hv.var("p", 0), Side::left);
  // augmented flow of (y, q, W): W integrates y qdot + H = -y dH/dy + H
  auto frhs = [&](const std::array<CD, 3>& s) {
    std::vector<CD> y{s[0]}, q{s[1]};
    CD hy = detail::eval_xp(dHdx, y, q);
    CD hp = detail::eval_xp(dHdp, y, q);
    CD hval = detail::eval_xp(H, y, q);
    return std::array<CD, 3>{hp, -hy, -s[0] * hy + hval};
  };
  auto flow = [&](double x0, CD p0) {
    std::array<CD, 3> s{CD(x0, 0.0), p0, CD(0.0, 0.0)};
    double h = T / steps;
    for (int k = 0; k < steps; ++k) {
      auto k1 = frhs(s);
      std::array<CD, 3> s2, s3, s4;
      for (int i = 0; i < 3; ++i) s2[static_cast<size_t>(i)] = s[static_cast<size_t>(i)] + k1[static_cast<size_t>(i)] * (h / 2);
      auto k2 = frhs(s2);
      for (int i = 0; i < 3; ++i) s3[static_cast<size_t>(i)] = s[static_cast<size_t>(i)] + k2[static_cast<size_t>(i)] * (h / 2);
      auto k3 = frhs(s3);
      for (int i = 0; i < 3; ++i) s4[static_cast<size_t>(i)] = s[static_cast<size_t>(i)] + k3[static_cast<size_t>(i)] * h;
      auto k4 = frhs(s4);
      for (int i = 0; i < 3; ++i)
        s[static_cast<size_t>(i)] +=
            (k1[static_cast<size_t>(i)] + k2[static_cast<size_t>(i)] * 2.0 +
             k3[static_cast<size_t>(i)] * 2.0 + k4[static_cast<size_t>(i)]) *
            (h / 6);
    }
    return s;
  };

  FlowActionSamples out;
  out.x_grid = x_grid;
  out.q_grid = q_grid;
  out.S.assign(x_grid.size(), std::vector<CD>(q_grid.size(), CD(0, 0)));
  out.p0.assign(x_grid.size(), std::vector<CD>(q_grid.size(), CD(0, 0)));

  for (size_t i = 0; i < x_grid.size(); ++i) {
    for (size_t j = 0; j < q_grid.size(); ++j) {
      CD target(q_grid[j], 0.0);
      CD p = target;  // identity-flow initial guess
      bool ok = false;
      for (int it = 0; it < max_iter; ++it) {
        auto s = flow(x_grid[i], p);
        CD r = s[1] - target;
        if (std::abs(r) <= tol) {
          out.S[i][j] = CD(x_grid[i], 0.0) * p + s[2];
          out.p0[i][j] = p;
          ok = true;
          break;
        }
        double dp = 1e-7 * std::max(1.0, std::abs(p));
        auto spert = flow(x_grid[i], p + CD(dp, 0.0));
        CD jac = (spert[1] - s[1]) / dp;
        require(std::abs(jac) > 1e-14, ErrorKind::singular,
                "action_from_flow: caustic at grid point (" + std::to_string(x_grid[i]) + ", " +
                    std::to_string(q_grid[j]) + ")");
        CD step = r / jac;
        double alpha = 1.0;
        for (int half = 0; half < 30; ++half) {
          auto strial = flow(x_grid[i], p - step * alpha);
          if (std::abs(strial[1] - target) < std::abs(r) || alpha < 1e-6) break;
          alpha *= 0.5;
        }
        p -= step * alpha;
      }
      require(ok, ErrorKind::singular,
              "action_from_flow: Newton failed at grid point (" + std::to_string(x_grid[i]) +
                  ", " + std::to_string(q_grid[j]) + ")");
    }
  }

  // symplectic spot check on the flow differential at a mid-grid point
  {
    double x0 = x_grid[x_grid.size() / 2];
    CD p0 = out.p0[x_grid.size() / 2][q_grid.size() / 2];
    double d = 1e-6;
    auto s00 = flow(x0, p0);
    auto sx = flow(x0 + d, p0);
    auto sp = flow(x0, p0 + CD(d, 0.0));
    CD a11 = (sx[0] - s00[0]) / d, a12 = (sp[0] - s00[0]) / d;
    CD a21 = (sx[1] - s00[1]) / d, a22 = (sp[1] - s00[1]) / d;
    out.sympl_drift = std::abs(a11 * a22 - a12 * a21 - CD(1.0, 0.0));
  }
  return out;
}

// (hbar/i) dw/dt = H(x, (hbar/i) d/dx) w in xp-order, split canonically: the
// phase follows the classical Hamilton-Jacobi flow, the amplitude transports
// the rest.
template <class F>
OscillatoryFunction<F> schrodinger_evolve(const Jet<F>& H, const OscillatoryFunction<F>& w0,
                                          double T, int steps = 1000, int K = 2) {
  static_assert(FieldOps<F>::has_imag, "schrodinger_evolve needs a field containing i");
  const VariableSpec& hv = H.vars();
  int n = hv.block(hv.block_index("x")).dim;
  const VariableSpec& wv = w0.phase.vars();
  require(wv.find_block("x") >= 0 && wv.block(wv.block_index("x")).dim == n, ErrorKind::shape,
          "schrodinger_evolve: wave function needs an 'x' block matching H");

  SpecUnion W{w0.phase.vars_ptr(), w0.phase.trunc()};
  int hb = W.vars->block_index("h");
  Trunc wt = W.trunc;
  wt.max_deg[static_cast<size_t>(hb)] = K;
  W.trunc = wt;

  auto rhs = [&](const std::vector<Jet<F>>& st) {
    const Jet<F>& f = st[0];
    const Jet<F>& A = st[1];
    std::map<int, Jet<F>> m;
    for (int a = 0; a < n; ++a)
      m.emplace(hv.var("p", a),
                differentiate(f, W.vars->var("x", a), Side::left).assert_exact_to(wt));
    Jet<F> hcl = substitute(H, m, W.vars, wt, true);
    detail::ConjugationEngine<F> conj(W, f, "x");
    Jet<F> kA = conj.apply_poly(H, "p", A);
    // the multiplication part of the conjugated operator cancels exactly,
    // leaving the transport terms, all carrying an hbar factor
    Jet<F> dA = detail::div_hbar_over_i(kA - hcl * A);
    return std::vector<Jet<F>>{hcl, dA};
  };

  std::vector<Jet<F>> state{w0.phase.truncated(wt), w0.amplitude.truncated(wt)};
  detail::rk4<F>(state, rhs, T, steps);
  return OscillatoryFunction<F>(state[0], state[1]);
}

// Residual of the family derivation formula for classical pullbacks:
//   d/dt Phi_t*[g_t] = H_t(x, q*(x)) + phi*_{g_t}(dg_t/dt),  H_t = dS_t/dt,
// with q* the solved momentum series of the graded pullback. Everything is
// formal in the family parameter block "t".
template <class F>
Jet<F> derivation_check_classical(const GeneratingFunction<F>& St, const Jet<F>& gt,
                                  int order = 2) {
  const VariableSpec& sv = St.S.vars();
  require(sv.find_block("t") >= 0, ErrorKind::shape,
          "derivation_check_classical: S needs a 't' block");
  auto pr = pullback(St, gt, order, "eps");
  VarsPtr ov = pr.f.vars_ptr();
  const Trunc& ot = pr.f.trunc();
  Jet<F> lhs = differentiate(pr.f, ov->var("t", 0), Side::left);

  Jet<F> Ht = differentiate(St.S, sv.var("t", 0), Side::left);
  std::map<int, Jet<F>> mq;
  int n2 = St.n2();
  for (int i = 0; i < n2; ++i) mq.emplace(sv.var("q", i), pr.q_series[static_cast<size_t>(i)]);
  Jet<F> rhs1 = substitute(Ht, mq, ov, ot, true);

  const VariableSpec& gv = gt.vars();
  if (gv.find_block("t") < 0) return lhs - rhs1;  // time-independent g
  Jet<F> dgt = differentiate(gt, gv.var("t", 0), Side::left);
  std::map<int, Jet<F>> my;
  for (int i = 0; i < n2; ++i) my.emplace(gv.var("y", i), pr.y_series[static_cast<size_t>(i)]);
  Jet<F> rhs2 =
      substitute(dgt, my, ov, ot, true) * Jet<F>::variable(ov, ot, "eps", 0);
  return lhs - rhs1 - rhs2;
}

// Residual of the quantum family derivation formula, as an amplitude jet
// relative to the common phase factor of the pullback:
//   (hbar/i) d/dt Phi_t*[w_t] = (H_t F*)(w_t) + (hbar/i) Phi_t*[dw_t/dt].
template <class F>
Jet<F> derivation_check_quantum(const QuantumAction<F>& St, const OscillatoryFunction<F>& wt,
                                int K = 1) {
  const VariableSpec& sv = St.S.vars();
  require(sv.find_block("t") >= 0, ErrorKind::shape,
          "derivation_check_quantum: S needs a 't' block");
  auto eng = detail::build_pullback_engine(St, wt, K);
  const SpecUnion& W = eng.conj.W;
  int tvar = W.vars->var("t", 0);

  Jet<F> Ceval = eng.eval_on_target(eng.C);
  Jet<F> g0 = eng.S0 + eng.eval_on_target(eng.conj.f);
  Jet<F> nu = Jet<F>::variable(W.vars, W.trunc, "h", 0) * (-FieldOps<F>::imag_unit());
  Jet<F> lhs = nu * differentiate(Ceval, tvar, Side::left) +
               differentiate(g0, tvar, Side::left) * Ceval;

  Jet<F> Ht = embed(differentiate(St.S, sv.var("t", 0), Side::left), W.vars, W.trunc);
  Jet<F> rhs1 = eng.eval_on_target(eng.conj.apply_poly(Ht, "q", eng.C));

  Jet<F> inv_nu(W.vars, W.trunc);
  {
    Monomial m(static_cast<size_t>(W.vars->total()), 0);
    m[static_cast<size_t>(W.vars->var("h", 0))] = -1;
    inv_nu.add_term(m, FieldOps<F>::imag_unit());
  }
  Jet<F> A2 = differentiate(eng.A, tvar, Side::left) +
              inv_nu * differentiate(eng.conj.f, tvar, Side::left) * eng.A;
  Jet<F> C2 = eng.Splus.is_zero() ? A2 : eng.conj.apply_exp(eng.Splus, "q", A2, eng.cap);
  Jet<F> rhs2 = nu * eng.eval_on_target(C2);

  return lhs - rhs1 - rhs2;
}

}  // namespace microformal
