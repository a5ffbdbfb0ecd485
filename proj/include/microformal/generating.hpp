#pragma once

#include <string>
#include <vector>

#include "microformal/jet.hpp"

namespace microformal {

// Generating function S(x, q) of a thick morphism between an n1-dimensional
// source and an n2-dimensional target: a jet over blocks "x" (source
// positions) and "q" (target momenta), plus arbitrary passenger blocks
// (time, hbar, odd parameters) that all operations carry along untouched.
template <class F>
struct GeneratingFunction {
  Jet<F> S;

  explicit GeneratingFunction(Jet<F> s) : S(std::move(s)) {
    require(S.vars().find_block("x") >= 0 && S.vars().find_block("q") >= 0, ErrorKind::shape,
            "generating function needs blocks 'x' and 'q'");
    require(S.parity() != 1 && S.parity() != -1, ErrorKind::parity,
            "generating function must be even");
  }

  int n1() const { return S.vars().block(S.vars().block_index("x")).dim; }
  int n2() const { return S.vars().block(S.vars().block_index("q")).dim; }
  bool source_odd(int a) const { return S.vars().odd(S.vars().var("x", a)); }
  bool target_odd(int i) const { return S.vars().odd(S.vars().var("q", i)); }

  // q-degree 0 part
  Jet<F> S0() const { return component(S, "q", 0); }
  // coefficient of q_i (the underlying map phi^i), a jet in the remaining
  // vars; phi^i stands left of q_i, so the left derivative carries (-1)^{~i}
  Jet<F> phi(int i) const {
    int qv = S.vars().var("q", i);
    Jet<F> lin = component(S, "q", 1);
    Jet<F> d = differentiate(lin, qv, Side::left);
    return S.vars().odd(qv) ? -d : d;
  }
  // all terms of q-degree >= 2
  Jet<F> Splus() const {
    Jet<F> r = S;
    r -= component(S, "q", 0);
    r -= component(S, "q", 1);
    return r;
  }
};

// S = sum_a x^a q_a, the generating function of the identity map.
template <class F>
GeneratingFunction<F> identity_morphism(int n, const std::vector<bool>& odd = {}, int deg = 8) {
  require(n >= 0, ErrorKind::shape, "dimension must be >= 0");
  Block bx{"x", n, odd}, bq{"q", n, odd};
  VarsPtr vars = make_vars({bx, bq});
  Trunc tr(*vars, deg);
  Jet<F> s(vars, tr);
  for (int a = 0; a < n; ++a)
    s += Jet<F>::variable(vars, tr, "x", a) * Jet<F>::variable(vars, tr, "q", a);
  return GeneratingFunction<F>(std::move(s));
}

// S = phi^i(x) q_i for an ordinary map phi given by component jets over an
// "x" block (passenger blocks allowed); target parities default to even.
template <class F>
GeneratingFunction<F> from_map(const std::vector<Jet<F>>& phi,
                               const std::vector<bool>& target_odd = {}) {
  require(!phi.empty(), ErrorKind::shape, "from_map: empty map");
  const VariableSpec& sv = phi[0].vars();
  require(sv.find_block("x") >= 0, ErrorKind::shape, "from_map: components need an 'x' block");
  require(sv.find_block("q") < 0, ErrorKind::shape, "from_map: components must not contain 'q'");
  int n2 = static_cast<int>(phi.size());
  std::vector<bool> todd = target_odd;
  if (todd.empty()) todd.assign(static_cast<size_t>(n2), false);
  std::vector<Block> blocks;
  for (int b = 0; b < sv.block_count(); ++b) blocks.push_back(sv.block(b));
  blocks.push_back(Block{"q", n2, todd});
  VarsPtr vars = make_vars(std::move(blocks));
  Trunc tr(*vars);
  for (int b = 0; b < sv.block_count(); ++b) {
    tr.max_deg[static_cast<size_t>(vars->block_index(sv.block(b).name))] =
        phi[0].trunc().max_deg[static_cast<size_t>(b)];
    tr.min_deg[static_cast<size_t>(vars->block_index(sv.block(b).name))] =
        phi[0].trunc().min_deg[static_cast<size_t>(b)];
  }
  Jet<F> s(vars, tr);
  for (int i = 0; i < n2; ++i) {
    require(phi[static_cast<size_t>(i)].vars().same(sv), ErrorKind::shape,
            "from_map: component specs differ");
    int p = phi[static_cast<size_t>(i)].parity();
    require(phi[static_cast<size_t>(i)].is_zero() || p == (todd[static_cast<size_t>(i)] ? 1 : 0),
            ErrorKind::parity, "from_map: component parity does not match target variable");
    s += embed(phi[static_cast<size_t>(i)], vars, tr) * Jet<F>::variable(vars, tr, "q", i);
  }
  return GeneratingFunction<F>(std::move(s));
}

}  // namespace microformal
