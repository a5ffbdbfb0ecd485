#include <doctest.h>

#include <cmath>

#include "microformal/dynamics.hpp"
#include "test_util.hpp"

using namespace microformal;

namespace {

VarsPtr ham_spec() { return make_vars({even_block("x", 1), even_block("p", 1)}); }

Jet<CD> free_particle() {
  auto v = ham_spec();
  Trunc t(*v);
  auto p = Jet<CD>::variable(v, t, "p", 0);
  return p * p * CD(0.5);
}

Jet<CD> harmonic() {
  auto v = ham_spec();
  Trunc t(*v);
  auto x = Jet<CD>::variable(v, t, "x", 0);
  auto p = Jet<CD>::variable(v, t, "p", 0);
  return (p * p + x * x) * CD(0.5);
}

double eval_xq(const Jet<CD>& S, double x, double q) {
  const VariableSpec& v = S.vars();
  CD acc(0, 0);
  for (const auto& [m, c] : S.terms()) {
    CD t = c;
    for (int k = 0; k < m[static_cast<size_t>(v.var("x", 0))]; ++k) t *= x;
    for (int k = 0; k < m[static_cast<size_t>(v.var("q", 0))]; ++k) t *= q;
    acc += t;
  }
  return acc.real();
}

}  // namespace

TEST_CASE("function evolution") {
  auto xv = make_vars({even_block("x", 1)});
  Trunc xt(*xv, 6);
  auto x = Jet<CD>::variable(xv, xt, "x", 0);

  SUBCASE("zero Hamiltonian freezes everything") {
    auto v = ham_spec();
    auto f = x * CD(1.5) + x * x;
    CHECK(evolve_function(Jet<CD>(v, Trunc(*v)), f, 0.7, 50) == f);
  }

  SUBCASE("free particle on a linear function, closed form") {
    double a = 0.8, T = 0.6;
    auto f = evolve_function(free_particle(), x * CD(a), T, 200);
    auto expect = x * CD(a) + Jet<CD>::constant(xv, xt, CD(0.5 * a * a * T));
    CHECK(testutil::max_abs_diff(f, expect) <= 1e-13);
  }

  SUBCASE("infinitesimal step matches the generator formula") {
    double d = 1e-5;
    auto f0 = x * CD(0.4) + x * x * CD(0.3);
    auto f = evolve_function(harmonic(), f0, d, 1);
    // f0 + d H(x, df0/dx)
    auto hv = ham_spec();
    std::map<int, Jet<CD>> m{{hv->var("x", 0), x},
                             {hv->var("p", 0), differentiate(f0, xv->var("x", 0))}};
    auto expect = f0 + substitute(harmonic(), m, xv, xt, true) * CD(d);
    CHECK(testutil::max_abs_diff(f, expect) <= 1e-9);
  }

  SUBCASE("group law within integrator tolerance") {
    double t = 0.2, s = 0.15;
    auto f0 = x * CD(0.5) + x * x * CD(0.2);
    auto once = evolve_function(harmonic(), f0, t + s, 2000);
    auto twice = evolve_function(harmonic(), evolve_function(harmonic(), f0, s, 2000), t, 2000);
    CHECK(testutil::max_abs_diff(once, twice) <= 1e-10);
  }
}

TEST_CASE("action evolution") {
  SUBCASE("zero Hamiltonian keeps the identity action") {
    auto v = ham_spec();
    auto S = evolve_action(Jet<CD>(v, Trunc(*v)), 0.5, 10, 4, 4);
    auto ov = S.S.vars_ptr();
    CHECK(S.S == Jet<CD>::variable(ov, S.S.trunc(), "x", 0) *
                     Jet<CD>::variable(ov, S.S.trunc(), "q", 0));
  }

  SUBCASE("free particle gives x q + (T/2) q^2 exactly") {
    double T = 0.5;
    auto S = evolve_action(free_particle(), T, 100, 4, 4);
    auto ov = S.S.vars_ptr();
    auto X = Jet<CD>::variable(ov, S.S.trunc(), "x", 0);
    auto Q = Jet<CD>::variable(ov, S.S.trunc(), "q", 0);
    CHECK(testutil::max_abs_diff(S.S, X * Q + Q * Q * CD(T / 2)) <= 1e-13);
  }

  SUBCASE("harmonic oscillator against the secant/tangent closed form") {
    double T = 0.3;
    auto S = evolve_action(harmonic(), T, 1000, 4, 4);
    auto ov = S.S.vars_ptr();
    auto X = Jet<CD>::variable(ov, S.S.trunc(), "x", 0);
    auto Q = Jet<CD>::variable(ov, S.S.trunc(), "q", 0);
    auto expect = X * Q * CD(1.0 / std::cos(T)) +
                  (X * X + Q * Q) * CD(0.5 * std::tan(T));
    CHECK(testutil::max_abs_diff(S.S, expect) <= 1e-10);
  }

  SUBCASE("composition consistency of the one-parameter family") {
    double t = 0.15, s = 0.1;
    auto St = evolve_action(harmonic(), t, 500, 4, 4);
    auto Ss = evolve_action(harmonic(), s, 500, 4, 4);
    auto Sts = evolve_action(harmonic(), t + s, 500, 4, 4);
    auto comp = compose(St, Ss, 0, ComposeMode::numeric, false, 1e-13, 200);
    CHECK(testutil::max_abs_diff(comp.S, embed(Sts.S, comp.S.vars_ptr(), comp.S.trunc())) <=
          1e-9);
  }
}

TEST_CASE("action from the Hamiltonian flow") {
  std::vector<double> xs, qs;
  for (int i = 0; i < 9; ++i) {
    xs.push_back(-1.0 + 0.25 * i);
    qs.push_back(-1.0 + 0.25 * i);
  }

  SUBCASE("T = 0 gives the identity action on the grid") {
    auto samples = action_from_flow(free_particle(), 0.0, xs, qs, 10);
    for (size_t i = 0; i < xs.size(); ++i)
      for (size_t j = 0; j < qs.size(); ++j)
        CHECK(std::abs(samples.S[i][j].real() - xs[i] * qs[j]) <= 1e-12);
  }

  SUBCASE("free particle closed form") {
    double T = 0.4;
    auto samples = action_from_flow(free_particle(), T, xs, qs, 200);
    for (size_t i = 0; i < xs.size(); ++i)
      for (size_t j = 0; j < qs.size(); ++j)
        CHECK(std::abs(samples.S[i][j].real() - (xs[i] * qs[j] + 0.5 * T * qs[j] * qs[j])) <=
              1e-9);
    CHECK(samples.sympl_drift <= 1e-6);
  }

  SUBCASE("harmonic oscillator matches the evolved action jet") {
    for (double T : {0.1, 0.3}) {
      auto S = evolve_action(harmonic(), T, 1000, 4, 4);
      auto samples = action_from_flow(harmonic(), T, xs, qs, 400);
      double worst = 0.0;
      for (size_t i = 0; i < xs.size(); ++i)
        for (size_t j = 0; j < qs.size(); ++j)
          worst = std::max(worst,
                           std::abs(samples.S[i][j].real() - eval_xq(S.S, xs[i], qs[j])));
      CHECK(worst <= 1e-6);
    }
  }
}

TEST_CASE("Schrodinger evolution") {
  auto wvars = make_vars({even_block("x", 1), even_block("h", 1), even_block("eps", 1)});
  Trunc wt(*wvars);
  wt.set(*wvars, "x", 6).set(*wvars, "h", 2).set(*wvars, "eps", 3);
  auto X = Jet<CD>::variable(wvars, wt, "x", 0);
  auto one = Jet<CD>::constant(wvars, wt, CD(1.0));

  SUBCASE("zero Hamiltonian freezes the wave") {
    auto v = ham_spec();
    OscillatoryFunction<CD> w0(X * X * CD(0.3), one + X);
    auto w = schrodinger_evolve(Jet<CD>(v, Trunc(*v)), w0, 0.5, 20, 2);
    CHECK(w.phase == w0.phase.truncated(w.phase.trunc()));
    CHECK(w.amplitude == w0.amplitude.truncated(w.amplitude.trunc()));
  }

  SUBCASE("plane wave under the free particle") {
    double a = 0.7, T = 0.5;
    OscillatoryFunction<CD> w0(X * CD(a), one);
    auto w = schrodinger_evolve(free_particle(), w0, T, 400, 2);
    auto expect_phase = X * CD(a) + Jet<CD>::constant(wvars, w.phase.trunc(), CD(0.5 * a * a * T));
    CHECK(testutil::max_abs_diff(w.phase, expect_phase) <= 1e-12);
    CHECK(testutil::max_abs_diff(w.amplitude, one.truncated(w.amplitude.trunc())) <= 1e-12);
  }

  SUBCASE("hbar^0 phase follows the classical evolution") {
    double T = 0.25;
    auto f0 = X * CD(0.4) + X * X * CD(0.15);
    OscillatoryFunction<CD> w0(f0, one);
    auto w = schrodinger_evolve(harmonic(), w0, T, 800, 2);
    auto xv = make_vars({even_block("x", 1)});
    Trunc xt(*xv, 6);
    auto fcl = evolve_function(harmonic(), embed(f0, xv, xt), T, 800);
    auto got = coeff_of_power(w.phase, "h", 0);
    CHECK(testutil::max_abs_diff(got, embed(fcl, got.vars_ptr(), got.trunc())) <= 1e-10);
  }

  SUBCASE("harmonic amplitude develops the WKB factor") {
    // f = (1/2) tan(t + arctan a) x^2 and A0 = (cos(T+b)/cos b)^{-1/2}:
    // the transport equation dA/dt = (1/2) f'' A solved along the phase flow
    double a = 0.3, T = 0.2, b = std::atan(a);
    OscillatoryFunction<CD> w0(X * X * CD(a / 2), one);
    auto w = schrodinger_evolve(harmonic(), w0, T, 800, 2);
    double expect = std::pow(std::cos(T + b) / std::cos(b), -0.5);
    CHECK(std::abs(w.amplitude.constant_term() - CD(expect)) <= 1e-8);
    double alpha = std::tan(T + b);
    Monomial m{2, 0, 0};
    CHECK(std::abs(w.phase.coeff(m) - CD(alpha / 2)) <= 1e-10);
  }
}

TEST_CASE("derivation formula, classical families") {
  SUBCASE("time-independent family reduces to zero residual") {
    auto v = make_vars({even_block("x", 1), even_block("q", 1), even_block("t", 1)});
    Trunc tr(*v, 8);
    tr.set(*v, "t", 3);
    auto X = Jet<Rat>::variable(v, tr, "x", 0);
    auto Q = Jet<Rat>::variable(v, tr, "q", 0);
    auto S = GeneratingFunction<Rat>(X * Q + Q * Q * (Rat(1) / 3));
    auto gv = make_vars({even_block("y", 1)});
    Trunc gt(*gv);
    auto y = Jet<Rat>::variable(gv, gt, "y", 0);
    CHECK(derivation_check_classical(S, y * y, 3).is_zero());
  }

  SUBCASE("free-particle family with a time-dependent function") {
    auto v = make_vars({even_block("x", 1), even_block("q", 1), even_block("t", 1)});
    Trunc tr(*v, 8);
    tr.set(*v, "t", 3);
    auto X = Jet<Rat>::variable(v, tr, "x", 0);
    auto Q = Jet<Rat>::variable(v, tr, "q", 0);
    auto T = Jet<Rat>::variable(v, tr, "t", 0);
    auto S = GeneratingFunction<Rat>(X * Q + T * Q * Q * (Rat(1) / 2));
    auto gv = make_vars({even_block("y", 1), even_block("t", 1)});
    Trunc gt(*gv, 8);
    gt.set(*gv, "t", 3);
    auto y = Jet<Rat>::variable(gv, gt, "y", 0);
    auto tg = Jet<Rat>::variable(gv, gt, "t", 0);
    CHECK(derivation_check_classical(S, y * y + tg * y, 3).is_zero());
  }

  SUBCASE("random linear-in-t quadratic families vanish exactly") {
    auto rng = testutil::make_rng(61);
    auto v = make_vars({even_block("x", 1), even_block("q", 1), even_block("t", 1)});
    Trunc tr(*v, 6);
    tr.set(*v, "t", 2);
    auto X = Jet<Rat>::variable(v, tr, "x", 0);
    auto Q = Jet<Rat>::variable(v, tr, "q", 0);
    auto T = Jet<Rat>::variable(v, tr, "t", 0);
    auto gv = make_vars({even_block("y", 1), even_block("t", 1)});
    Trunc gt(*gv, 6);
    gt.set(*gv, "t", 2);
    for (int rep = 0; rep < 5; ++rep) {
      auto tail = testutil::rand_jet<Rat>(rng, v, tr, 3, 0);
      tail = tail - component(tail, "t", 1) - component(tail, "t", 2);
      auto S = GeneratingFunction<Rat>(X * Q + T * tail);
      auto g = testutil::rand_jet<Rat>(rng, gv, gt, 3, 0);
      CHECK(derivation_check_classical(S, g, 2).is_zero());
    }
  }

  SUBCASE("finite-difference oracle in numeric mode") {
    double s = 0.3, a = 0.4, b = 0.2, t0 = 0.2, dt = 1e-6;
    auto mk_S = [&](double t) {
      auto v = make_vars({even_block("x", 1), even_block("q", 1)});
      Trunc tr(*v, 10);
      auto X = Jet<CD>::variable(v, tr, "x", 0);
      auto Q = Jet<CD>::variable(v, tr, "q", 0);
      return GeneratingFunction<CD>(X * Q + Q * Q * CD(0.5 * s * t));
    };
    auto gv = make_vars({even_block("y", 1)});
    Trunc gt(*gv, 10);
    auto y = Jet<CD>::variable(gv, gt, "y", 0);
    auto mk_g = [&](double t) { return y * y * CD(a / 2) + y * CD(b * t); };

    std::vector<CD> x0{CD(0.6, 0.0)};
    auto fp = pullback_numeric(mk_S(t0 + dt), mk_g(t0 + dt), x0, 4);
    auto fm = pullback_numeric(mk_S(t0 - dt), mk_g(t0 - dt), x0, 4);
    auto fd = (fp.f - fm.f) / CD(2 * dt);

    auto base = pullback_numeric(mk_S(t0), mk_g(t0), x0, 4);
    // H_t = dS/dt = (s/2) q^2 evaluated on the solved momentum series
    auto rhs1 = base.q_series[0] * base.q_series[0] * CD(0.5 * s);
    std::map<int, Jet<CD>> my{{gv->var("y", 0), base.y_series[0]}};
    auto rhs2 = substitute(y * CD(b), my, base.f.vars_ptr(), base.f.trunc(), true);
    CHECK(testutil::max_abs_diff(fd, rhs1 + rhs2) <= 1e-6);
  }
}

TEST_CASE("derivation formula, quantum families") {
  SUBCASE("graph-type family reduces to the transport identity") {
    auto v = make_vars(
        {even_block("x", 1), even_block("q", 1), even_block("h", 1), even_block("t", 1)});
    Trunc tr(*v, 8);
    tr.set(*v, "h", 1).set(*v, "t", 2);
    auto X = Jet<CRat>::variable(v, tr, "x", 0);
    auto Q = Jet<CRat>::variable(v, tr, "q", 0);
    auto T = Jet<CRat>::variable(v, tr, "t", 0);
    auto S = QuantumAction<CRat>((X + T * X * X) * Q);
    auto wv = make_vars({even_block("y", 1), even_block("h", 1), even_block("eps", 1)});
    Trunc wt(*wv, 8);
    wt.set(*wv, "h", 1).set(*wv, "eps", 2);
    auto y = Jet<CRat>::variable(wv, wt, "y", 0);
    auto eps = Jet<CRat>::variable(wv, wt, "eps", 0);
    OscillatoryFunction<CRat> w(eps * y * y, Jet<CRat>::constant(wv, wt, CRat(1)) + y);
    CHECK(derivation_check_quantum(S, w, 1).is_zero());
  }

  SUBCASE("quadratic 1-d family vanishes through hbar^1") {
    auto v = make_vars(
        {even_block("x", 1), even_block("q", 1), even_block("h", 1), even_block("t", 1)});
    Trunc tr(*v, 8);
    tr.set(*v, "h", 1).set(*v, "t", 2);
    auto X = Jet<CRat>::variable(v, tr, "x", 0);
    auto Q = Jet<CRat>::variable(v, tr, "q", 0);
    auto T = Jet<CRat>::variable(v, tr, "t", 0);
    auto S = QuantumAction<CRat>(X * Q + T * Q * Q * (CRat(1) / CRat(2)));
    auto wv = make_vars({even_block("y", 1), even_block("h", 1), even_block("eps", 1)});
    Trunc wt(*wv, 8);
    wt.set(*wv, "h", 1).set(*wv, "eps", 3);
    auto y = Jet<CRat>::variable(wv, wt, "y", 0);
    auto eps = Jet<CRat>::variable(wv, wt, "eps", 0);
    OscillatoryFunction<CRat> w(eps * y * y * (CRat(2) / CRat(5)),
                                Jet<CRat>::constant(wv, wt, CRat(1)));
    CHECK(derivation_check_quantum(S, w, 1).is_zero());
  }
}
