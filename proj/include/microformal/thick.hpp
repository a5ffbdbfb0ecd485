#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "microformal/generating.hpp"
#include "microformal/jet.hpp"

namespace microformal {

// Grading-block indices (the formal small parameters) present in a spec.
inline std::vector<int> grading_blocks_of(const VariableSpec& vars,
                                          const std::vector<std::string>& extra = {}) {
  std::vector<int> r;
  for (const std::string& name : {std::string("eps"), std::string("lam")}) {
    int b = vars.find_block(name);
    if (b >= 0) r.push_back(b);
  }
  for (const auto& name : extra) {
    int b = vars.find_block(name);
    if (b >= 0) {
      bool seen = false;
      for (int x : r) seen |= (x == b);
      if (!seen) r.push_back(b);
    }
  }
  require(!r.empty(), ErrorKind::convergence,
          "no grading block present; a formal small parameter is required");
  return r;
}

// Multiply every term of momentum degree >= 2 by the grading variable.
template <class F>
Jet<F> mark_momentum_tail(const Jet<F>& s, const std::string& momentum, const std::string& lam) {
  Jet<F> low = component(s, momentum, 0) + component(s, momentum, 1);
  Jet<F> high = s - low;
  return low + high * Jet<F>::variable(s.vars_ptr(), s.trunc(), lam, 0);
}

template <class F>
struct PullbackResult {
  Jet<F> f;
  std::vector<Jet<F>> y_series;
  std::vector<Jet<F>> q_series;
  bool numeric = false;
};

// Nonlinear pullback f = g(y) + S(x,q) - y^i q_i with (y, q) solved from the
// coupled stationarity equations by iteration, graded by a formal parameter
// multiplying g. Passing an empty grading name uses g as given; g or S must
// then already carry an "eps"/"lam" filtration.
template <class F>
PullbackResult<F> pullback(const GeneratingFunction<F>& S, const Jet<F>& g, int order = 2,
                           const std::string& grading = "eps") {
  const VariableSpec& sv = S.S.vars();
  const VariableSpec& gv = g.vars();
  require(gv.find_block("y") >= 0, ErrorKind::shape, "pullback: g needs a 'y' block");
  int n2 = S.n2();
  int gyb = gv.block_index("y");
  require(gv.block(gyb).dim == n2, ErrorKind::shape, "pullback: target dimension mismatch");
  for (int i = 0; i < n2; ++i)
    require(gv.odd(gv.offset(gyb) + i) == S.target_odd(i), ErrorKind::parity,
            "pullback: target parities differ");
  require(g.parity() == 0, ErrorKind::parity, "pullback: g must be even");

  std::vector<Block> fresh;
  std::vector<std::pair<int, int>> fresh_bounds;
  if (!grading.empty()) {
    require(sv.find_block(grading) < 0 && gv.find_block(grading) < 0, ErrorKind::shape,
            "pullback: grading block name already in use");
    fresh.push_back(even_block(grading, 1));
    fresh_bounds.emplace_back(order, 0);
  }
  SpecUnion W = merge_specs({{&sv, &S.S.trunc()}, {&gv, &g.trunc()}}, fresh, fresh_bounds);

  Jet<F> Sx = embed(S.S, W.vars, W.trunc);
  Jet<F> gy = embed(g, W.vars, W.trunc);
  if (!grading.empty()) gy = gy * Jet<F>::variable(W.vars, W.trunc, grading, 0);

  // stored jets are the canonical representatives of the working quotient;
  // their derivatives keep the full window
  std::vector<Jet<F>> dSdq, dgdy;
  for (int i = 0; i < n2; ++i) {
    Jet<F> d = differentiate(Sx, W.vars->var("q", i), Side::left).assert_exact_to(W.trunc);
    dSdq.push_back(W.vars->odd(W.vars->var("q", i)) ? -d : d);  // (-1)^{~i} dS/dq_i
    dgdy.push_back(differentiate(gy, W.vars->var("y", i), Side::left).assert_exact_to(W.trunc));
  }

  auto q_from_y = [&](const std::vector<Jet<F>>& ys) {
    std::map<int, Jet<F>> m;
    for (int j = 0; j < n2; ++j) m.emplace(W.vars->var("y", j), ys[static_cast<size_t>(j)]);
    std::vector<Jet<F>> qs;
    qs.reserve(static_cast<size_t>(n2));
    for (int i = 0; i < n2; ++i)
      qs.push_back(substitute(dgdy[static_cast<size_t>(i)], m, W.vars, W.trunc, true));
    return qs;
  };
  auto y_from_q = [&](const std::vector<Jet<F>>& qs) {
    std::map<int, Jet<F>> m;
    for (int j = 0; j < n2; ++j) m.emplace(W.vars->var("q", j), qs[static_cast<size_t>(j)]);
    std::vector<Jet<F>> ys;
    ys.reserve(static_cast<size_t>(n2));
    for (int i = 0; i < n2; ++i)
      ys.push_back(substitute(dSdq[static_cast<size_t>(i)], m, W.vars, W.trunc, true));
    return ys;
  };

  std::vector<int> gblocks = grading_blocks_of(*W.vars, {grading});
  std::vector<Jet<F>> y0(static_cast<size_t>(n2), Jet<F>::zero(W.vars, W.trunc));
  auto ystar = solve_fixed_point<F>(
      [&](const std::vector<Jet<F>>& ys) { return y_from_q(q_from_y(ys)); }, y0, gblocks);
  auto qstar = q_from_y(ystar);

  std::map<int, Jet<F>> my, mq;
  for (int j = 0; j < n2; ++j) {
    my.emplace(W.vars->var("y", j), ystar[static_cast<size_t>(j)]);
    mq.emplace(W.vars->var("q", j), qstar[static_cast<size_t>(j)]);
  }
  Jet<F> f = substitute(gy, my, W.vars, W.trunc, true) + substitute(Sx, mq, W.vars, W.trunc, true);
  for (int i = 0; i < n2; ++i) f -= ystar[static_cast<size_t>(i)] * qstar[static_cast<size_t>(i)];

  SpecUnion out = drop_blocks(*W.vars, W.trunc, {"q", "y"});
  PullbackResult<F> r{embed(f, out.vars, out.trunc), {}, {}, false};
  for (int i = 0; i < n2; ++i) {
    r.y_series.push_back(embed(ystar[static_cast<size_t>(i)], out.vars, out.trunc));
    r.q_series.push_back(embed(qstar[static_cast<size_t>(i)], out.vars, out.trunc));
  }
  return r;
}

// The perturbed map phi_g: the y-series of the pullback fixed point.
template <class F>
std::vector<Jet<F>> perturbed_map(const GeneratingFunction<F>& S, const Jet<F>& g, int order = 2,
                                  const std::string& grading = "eps") {
  return pullback(S, g, order, grading).y_series;
}

enum class ComposeMode { formal, numeric, quadratic };

namespace detail {

template <class F>
struct ComposeCore {
  SpecUnion W;
  Jet<F> S21e, S32e;                   // over the working spec
  std::vector<Jet<F>> ystar, qstar;    // solved intermediates
  Jet<F> S31;                          // composite action, still in the working spec
};

// Shared layout and stationary solve for the classical composition:
//   S31(x,r) = S32(y,r) + S21(x,q) - y^i q_i,
//   q_i = dS32/dy^i, y^i = (-1)^{~i} dS21/dq_i.
template <class F>
ComposeCore<F> compose_core(const GeneratingFunction<F>& S32, const GeneratingFunction<F>& S21,
                            int order, bool formal, bool premarked, double tol, int max_iter) {
  int n2 = S21.n2();
  require(S32.n1() == n2, ErrorKind::shape, "compose: middle dimensions differ");
  for (int i = 0; i < n2; ++i)
    require(S32.source_odd(i) == S21.target_odd(i), ErrorKind::parity,
            "compose: middle parities differ");

  Jet<F> s32 = rename_block(rename_block(S32.S, "q", "r"), "x", "y");
  const VariableSpec& av = S21.S.vars();
  const VariableSpec& bv = s32.vars();

  bool have_lam = av.find_block("lam") >= 0 || bv.find_block("lam") >= 0;
  std::vector<Block> fresh;
  std::vector<std::pair<int, int>> fresh_bounds;
  if (formal && !have_lam) {
    fresh.push_back(even_block("lam", 1));
    fresh_bounds.emplace_back(order, 0);
  }
  SpecUnion W = merge_specs({{&av, &S21.S.trunc()}, {&bv, &s32.trunc()}}, fresh, fresh_bounds);

  Jet<F> S21e = embed(S21.S, W.vars, W.trunc);
  Jet<F> S32e = embed(s32, W.vars, W.trunc);
  if (formal && !premarked && !have_lam) {
    S21e = mark_momentum_tail(S21e, "q", "lam");
    S32e = mark_momentum_tail(S32e, "r", "lam");
  }

  std::vector<Jet<F>> dS32dy, dS21dq;
  for (int i = 0; i < n2; ++i) {
    dS32dy.push_back(differentiate(S32e, W.vars->var("y", i), Side::left).assert_exact_to(W.trunc));
    Jet<F> d = differentiate(S21e, W.vars->var("q", i), Side::left).assert_exact_to(W.trunc);
    dS21dq.push_back(W.vars->odd(W.vars->var("q", i)) ? -d : d);
  }
  auto q_from_y = [&](const std::vector<Jet<F>>& ys) {
    std::map<int, Jet<F>> m;
    for (int j = 0; j < n2; ++j) m.emplace(W.vars->var("y", j), ys[static_cast<size_t>(j)]);
    std::vector<Jet<F>> qs;
    for (int i = 0; i < n2; ++i)
      qs.push_back(substitute(dS32dy[static_cast<size_t>(i)], m, W.vars, W.trunc, true));
    return qs;
  };
  auto y_from_q = [&](const std::vector<Jet<F>>& qs) {
    std::map<int, Jet<F>> m;
    for (int j = 0; j < n2; ++j) m.emplace(W.vars->var("q", j), qs[static_cast<size_t>(j)]);
    std::vector<Jet<F>> ys;
    for (int i = 0; i < n2; ++i)
      ys.push_back(substitute(dS21dq[static_cast<size_t>(i)], m, W.vars, W.trunc, true));
    return ys;
  };

  std::vector<Jet<F>> ystar(static_cast<size_t>(n2), Jet<F>::zero(W.vars, W.trunc));
  if (formal) {
    std::vector<int> gblocks = grading_blocks_of(*W.vars);
    ystar = solve_fixed_point<F>(
        [&](const std::vector<Jet<F>>& ys) { return y_from_q(q_from_y(ys)); }, ystar, gblocks);
  } else {
    bool done = false;
    for (int it = 0; it < max_iter && !done; ++it) {
      auto next = y_from_q(q_from_y(ystar));
      double d = 0.0;
      for (int i = 0; i < n2; ++i)
        d = std::max(d, (next[static_cast<size_t>(i)] - ystar[static_cast<size_t>(i)]).max_abs_coeff());
      ystar = std::move(next);
      done = d <= tol;
    }
    require(done, ErrorKind::convergence, "compose: numeric iteration did not converge");
  }
  auto qstar = q_from_y(ystar);

  std::map<int, Jet<F>> my, mq;
  for (int j = 0; j < n2; ++j) {
    my.emplace(W.vars->var("y", j), ystar[static_cast<size_t>(j)]);
    mq.emplace(W.vars->var("q", j), qstar[static_cast<size_t>(j)]);
  }
  Jet<F> S31 =
      substitute(S32e, my, W.vars, W.trunc, true) + substitute(S21e, mq, W.vars, W.trunc, true);
  for (int i = 0; i < n2; ++i) S31 -= ystar[static_cast<size_t>(i)] * qstar[static_cast<size_t>(i)];
  return {W, std::move(S21e), std::move(S32e), std::move(ystar), std::move(qstar), std::move(S31)};
}

}  // namespace detail

// Formal and numeric modes live here; ComposeMode::quadratic is served by
// compose_quadratic in spinor.hpp (exact composition in the quadratic class).
template <class F>
GeneratingFunction<F> compose(const GeneratingFunction<F>& S32, const GeneratingFunction<F>& S21,
                              int order = 3, ComposeMode mode = ComposeMode::formal,
                              bool premarked = false, double tol = 1e-12, int max_iter = 100) {
  require(mode != ComposeMode::quadratic, ErrorKind::shape,
          "compose: quadratic mode is compose_quadratic (include spinor.hpp)");
  auto core = detail::compose_core(S32, S21, order, mode == ComposeMode::formal, premarked, tol,
                                   max_iter);
  SpecUnion out = drop_blocks(*core.W.vars, core.W.trunc, {"q", "y"});
  Jet<F> s = rename_block(embed(core.S31, out.vars, out.trunc), "r", "q");
  return GeneratingFunction<F>(std::move(s));
}

// Residual of d/dtau|_0 Phi*[g + tau dg] - phi_g*(dg), computed formally;
// vanishes identically through the requested grading order.
template <class F>
Jet<F> derivative_check(const GeneratingFunction<F>& S, const Jet<F>& g, const Jet<F>& dg,
                        int order = 3) {
  require(g.vars().same(dg.vars()), ErrorKind::shape, "derivative_check: g and dg specs differ");
  require(g.vars().find_block("tau") < 0, ErrorKind::shape,
          "derivative_check: block 'tau' already in use");
  require(dg.parity() == 0, ErrorKind::parity, "derivative_check: dg must be even");
  SpecUnion gw = merge_specs({{&g.vars(), &g.trunc()}}, {even_block("tau", 1)}, {{1, 0}});
  Jet<F> gt = embed(g, gw.vars, gw.trunc) +
              embed(dg, gw.vars, gw.trunc) * Jet<F>::variable(gw.vars, gw.trunc, "tau", 0);
  auto pr = pullback(S, gt, order, "eps");
  Jet<F> lhs = coeff_of_power(pr.f, "tau", 1);

  // phi_g from the tau = 0 slice of the solved map
  std::vector<Jet<F>> y0;
  for (const auto& ys : pr.y_series) y0.push_back(coeff_of_power(ys, "tau", 0));
  std::map<int, Jet<F>> m;
  int n2 = S.n2();
  for (int j = 0; j < n2; ++j) m.emplace(dg.vars().var("y", j), y0[static_cast<size_t>(j)]);
  Jet<F> rhs = substitute(dg, m, pr.f.vars_ptr(), pr.f.trunc(), true) *
               Jet<F>::variable(pr.f.vars_ptr(), pr.f.trunc(), "eps", 0);
  return lhs - rhs;
}

// LHS - RHS of H1(x, dS/dx) = H2((-1)^{~q} dS/dq, q); zero iff (H1, H2) are
// S-related. Hamiltonians use blocks "x" and "p".
template <class F>
Jet<F> hamilton_jacobi_residual(const GeneratingFunction<F>& S, const Jet<F>& H1,
                                const Jet<F>& H2) {
  const VariableSpec& sv = S.S.vars();
  int n1 = S.n1(), n2 = S.n2();
  require(H1.parity() == 0 && H2.parity() == 0, ErrorKind::parity,
          "hamilton_jacobi_residual: Hamiltonians must be even");
  const VariableSpec& h1v = H1.vars();
  const VariableSpec& h2v = H2.vars();
  require(h1v.block(h1v.block_index("x")).dim == n1 &&
              h1v.block(h1v.block_index("p")).dim == n1,
          ErrorKind::shape, "H1 dimension mismatch");
  require(h2v.block(h2v.block_index("x")).dim == n2 &&
              h2v.block(h2v.block_index("p")).dim == n2,
          ErrorKind::shape, "H2 dimension mismatch");

  SpecUnion W = merge_specs({{&sv, &S.S.trunc()}});
  Jet<F> Sx = embed(S.S, W.vars, W.trunc);
  std::vector<Jet<F>> p_series, y_series;
  for (int a = 0; a < n1; ++a)
    p_series.push_back(differentiate(Sx, W.vars->var("x", a), Side::left).assert_exact_to(W.trunc));
  for (int i = 0; i < n2; ++i) {
    Jet<F> d = differentiate(Sx, W.vars->var("q", i), Side::left).assert_exact_to(W.trunc);
    y_series.push_back(W.vars->odd(W.vars->var("q", i)) ? -d : d);
  }

  std::map<int, Jet<F>> m1;
  for (int a = 0; a < n1; ++a) {
    m1.emplace(h1v.var("x", a), Jet<F>::variable(W.vars, W.trunc, "x", a));
    m1.emplace(h1v.var("p", a), p_series[static_cast<size_t>(a)]);
  }
  Jet<F> lhs = substitute(H1, m1, W.vars, W.trunc, true);

  std::map<int, Jet<F>> m2;
  for (int i = 0; i < n2; ++i) {
    m2.emplace(h2v.var("x", i), y_series[static_cast<size_t>(i)]);
    m2.emplace(h2v.var("p", i), Jet<F>::variable(W.vars, W.trunc, "q", i));
  }
  Jet<F> rhs = substitute(H2, m2, W.vars, W.trunc, true);
  return lhs - rhs;
}

// Numeric pullback around a user-supplied center: jets in x about x0, solved
// by damped Newton on the coupled stationarity system. Even variables only.
template <class F>
PullbackResult<F> pullback_numeric(const GeneratingFunction<F>& S, const Jet<F>& g,
                                   const std::vector<F>& x0, int xdeg, double tol = 1e-12,
                                   int max_iter = 100) {
  const VariableSpec& sv = S.S.vars();
  for (int v = 0; v < sv.total(); ++v)
    require(!sv.odd(v), ErrorKind::parity, "pullback_numeric: even variables only");
  for (int v = 0; v < g.vars().total(); ++v)
    require(!g.vars().odd(v), ErrorKind::parity, "pullback_numeric: even variables only");
  int n1 = S.n1(), n2 = S.n2();
  require(static_cast<int>(x0.size()) == n1, ErrorKind::shape, "pullback_numeric: bad center");

  SpecUnion W = merge_specs({{&sv, &S.S.trunc()}, {&g.vars(), &g.trunc()}});
  Trunc wt = W.trunc;
  wt.set(*W.vars, "x", xdeg);
  // recenter: x -> x0 + x
  std::map<int, Jet<F>> shift;
  for (int a = 0; a < n1; ++a)
    shift.emplace(W.vars->var("x", a),
                  Jet<F>::constant(W.vars, wt, x0[static_cast<size_t>(a)]) +
                      Jet<F>::variable(W.vars, wt, "x", a));
  Jet<F> Sx = substitute(embed(S.S, W.vars, wt), shift, W.vars, wt, true);
  Jet<F> gy = embed(g, W.vars, wt);

  std::vector<Jet<F>> dSdq, dgdy;
  for (int i = 0; i < n2; ++i) {
    dSdq.push_back(differentiate(Sx, W.vars->var("q", i), Side::left).assert_exact_to(wt));
    dgdy.push_back(differentiate(gy, W.vars->var("y", i), Side::left).assert_exact_to(wt));
  }

  std::vector<Jet<F>> y(static_cast<size_t>(n2), Jet<F>::zero(W.vars, wt));
  std::vector<Jet<F>> q(static_cast<size_t>(n2), Jet<F>::zero(W.vars, wt));

  auto residual = [&](const std::vector<Jet<F>>& ys, const std::vector<Jet<F>>& qs) {
    std::map<int, Jet<F>> my, mq;
    for (int j = 0; j < n2; ++j) {
      my.emplace(W.vars->var("y", j), ys[static_cast<size_t>(j)]);
      mq.emplace(W.vars->var("q", j), qs[static_cast<size_t>(j)]);
    }
    std::vector<Jet<F>> R(2 * static_cast<size_t>(n2), Jet<F>::zero(W.vars, wt));
    for (int i = 0; i < n2; ++i) {
      R[static_cast<size_t>(i)] =
          ys[static_cast<size_t>(i)] - substitute(dSdq[static_cast<size_t>(i)], mq, W.vars, wt, true);
      R[static_cast<size_t>(n2 + i)] =
          qs[static_cast<size_t>(i)] - substitute(dgdy[static_cast<size_t>(i)], my, W.vars, wt, true);
    }
    return R;
  };
  auto res_norm = [&](const std::vector<Jet<F>>& R) {
    double m = 0.0;
    for (const auto& r : R) m = std::max(m, r.max_abs_coeff());
    return m;
  };

  std::vector<Jet<F>> R = residual(y, q);
  double rn = res_norm(R);
  for (int it = 0; it < max_iter && rn > tol; ++it) {
    std::map<int, Jet<F>> my, mq;
    for (int j = 0; j < n2; ++j) {
      my.emplace(W.vars->var("y", j), y[static_cast<size_t>(j)]);
      mq.emplace(W.vars->var("q", j), q[static_cast<size_t>(j)]);
    }
    // Linearized system in (dy, dq):
    //   dy_i - sum_j B_ij dq_j = -Ry_i,  dq_i - sum_j C_ij dy_j = -Rq_i
    size_t m = 2 * static_cast<size_t>(n2);
    std::vector<std::vector<Jet<F>>> A(m, std::vector<Jet<F>>(m, Jet<F>::zero(W.vars, wt)));
    std::vector<Jet<F>> rhs(m, Jet<F>::zero(W.vars, wt));
    Jet<F> one = Jet<F>::constant(W.vars, wt, FieldOps<F>::one());
    for (int i = 0; i < n2; ++i) {
      A[static_cast<size_t>(i)][static_cast<size_t>(i)] = one;
      A[static_cast<size_t>(n2 + i)][static_cast<size_t>(n2 + i)] = one;
      for (int j = 0; j < n2; ++j) {
        Jet<F> B = substitute(differentiate(dSdq[static_cast<size_t>(i)], W.vars->var("q", j)), mq,
                              W.vars, wt, true);
        Jet<F> C = substitute(differentiate(dgdy[static_cast<size_t>(i)], W.vars->var("y", j)), my,
                              W.vars, wt, true);
        A[static_cast<size_t>(i)][static_cast<size_t>(n2 + j)] = -B;
        A[static_cast<size_t>(n2 + i)][static_cast<size_t>(j)] = -C;
      }
      rhs[static_cast<size_t>(i)] = -R[static_cast<size_t>(i)];
      rhs[static_cast<size_t>(n2 + i)] = -R[static_cast<size_t>(n2 + i)];
    }
    std::vector<Jet<F>> delta = linear_solve(A, rhs);

    double alpha = 1.0;
    for (int half = 0; half < 40; ++half) {
      std::vector<Jet<F>> yt = y, qt = q;
      F step{alpha};
      for (int i = 0; i < n2; ++i) {
        yt[static_cast<size_t>(i)] += delta[static_cast<size_t>(i)] * step;
        qt[static_cast<size_t>(i)] += delta[static_cast<size_t>(n2 + i)] * step;
      }
      auto Rt = residual(yt, qt);
      double rt = res_norm(Rt);
      if (rt < rn || alpha < 1e-6) {
        y = std::move(yt);
        q = std::move(qt);
        R = std::move(Rt);
        rn = rt;
        break;
      }
      alpha *= 0.5;
    }
  }
  require(rn <= tol, ErrorKind::convergence, "pullback_numeric: Newton did not reach tolerance");

  std::map<int, Jet<F>> my, mq;
  for (int j = 0; j < n2; ++j) {
    my.emplace(W.vars->var("y", j), y[static_cast<size_t>(j)]);
    mq.emplace(W.vars->var("q", j), q[static_cast<size_t>(j)]);
  }
  Jet<F> f = substitute(gy, my, W.vars, wt, true) + substitute(Sx, mq, W.vars, wt, true);
  for (int i = 0; i < n2; ++i) f -= y[static_cast<size_t>(i)] * q[static_cast<size_t>(i)];

  SpecUnion out = drop_blocks(*W.vars, wt, {"q", "y"});
  PullbackResult<F> r{embed(f, out.vars, out.trunc), {}, {}, true};
  for (int i = 0; i < n2; ++i) {
    r.y_series.push_back(embed(y[static_cast<size_t>(i)], out.vars, out.trunc));
    r.q_series.push_back(embed(q[static_cast<size_t>(i)], out.vars, out.trunc));
  }
  return r;
}

}  // namespace microformal
