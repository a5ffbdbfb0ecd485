#include <doctest.h>

#include <map>

#include "microformal/thick.hpp"
#include "test_util.hpp"

using namespace microformal;
using testutil::rand_jet;

namespace {

// Independent dense-polynomial oracle in (x, eps), used to cross-check the
// jet-based pullback on the 1-d quadratic model without touching Jet code.
struct Poly2 {
  std::map<std::pair<int, int>, Rat> c;  // (x-degree, eps-degree) -> coeff
  static constexpr int eps_cap = 3;

  static Poly2 var_x() { return Poly2{{{{1, 0}, Rat(1)}}}; }
  static Poly2 scalar(Rat v) { return Poly2{{{{0, 0}, v}}}; }

  Poly2 operator+(const Poly2& o) const {
    Poly2 r = *this;
    for (auto& [k, v] : o.c) {
      r.c[k] += v;
      if (r.c[k] == 0) r.c.erase(k);
    }
    return r;
  }
  Poly2 operator-(const Poly2& o) const { return *this + (o * Rat(-1)); }
  Poly2 operator*(const Rat& s) const {
    Poly2 r;
    if (s == 0) return r;
    for (auto& [k, v] : c) r.c[k] = v * s;
    return r;
  }
  Poly2 operator*(const Poly2& o) const {
    Poly2 r;
    for (auto& [ka, va] : c)
      for (auto& [kb, vb] : o.c) {
        int xd = ka.first + kb.first, ed = ka.second + kb.second;
        if (ed > eps_cap) continue;
        auto key = std::make_pair(xd, ed);
        r.c[key] += va * vb;
        if (r.c[key] == 0) r.c.erase(key);
      }
    return r;
  }
  Poly2 mul_eps() const {
    Poly2 r;
    for (auto& [k, v] : c)
      if (k.second + 1 <= eps_cap) r.c[{k.first, k.second + 1}] = v;
    return r;
  }
};

// Iterations of y = x + s * d(eps g)/dy (y), then f = eps g(y) + S - yq,
// for S = xq + (s/2) q^2 and g = (a/2) y^2.
Poly2 oracle_quadratic_pullback(Rat s, Rat a) {
  Poly2 x = Poly2::var_x();
  Poly2 y;
  for (int it = 0; it < Poly2::eps_cap + 2; ++it) y = x + (y * (s * a)).mul_eps();
  Poly2 q = (y * a).mul_eps();
  Poly2 g_of_y = (y * y * (a / 2)).mul_eps();
  Poly2 f = g_of_y + x * q + q * q * (s / 2) - y * q;
  return f;
}

VarsPtr yvars(int n = 1) { return make_vars({even_block("y", n)}); }

Jet<Rat> quad_g(Rat a) {
  auto v = yvars();
  Trunc t(*v);
  auto y = Jet<Rat>::variable(v, t, "y", 0);
  return y * y * (a / 2);
}

GeneratingFunction<Rat> quad_action(Rat s, int deg = 8) {
  auto v = make_vars({even_block("x", 1), even_block("q", 1)});
  Trunc t(*v, deg);
  auto x = Jet<Rat>::variable(v, t, "x", 0);
  auto q = Jet<Rat>::variable(v, t, "q", 0);
  return GeneratingFunction<Rat>(x * q + q * q * (s / 2));
}

Jet<Rat> collapse(const Jet<Rat>& a, const std::string& block) {
  std::map<int, Jet<Rat>> m{
      {a.vars().var(block, 0), Jet<Rat>::constant(a.vars_ptr(), a.trunc(), Rat(1))}};
  return substitute(a, m, true);
}

}  // namespace

TEST_CASE("identity morphism") {
  auto id = identity_morphism<Rat>(1);
  CHECK(id.S0().is_zero());
  CHECK(id.Splus().is_zero());

  auto v = yvars();
  Trunc t(*v);
  auto y = Jet<Rat>::variable(v, t, "y", 0);
  auto g = y * y * y + Rat(2) * y;
  auto pr = pullback(id, g, 3);
  // f = eps * g(x), nothing else
  auto ov = pr.f.vars_ptr();
  auto x = Jet<Rat>::variable(ov, pr.f.trunc(), "x", 0);
  auto eps = Jet<Rat>::variable(ov, pr.f.trunc(), "eps", 0);
  CHECK(pr.f == eps * (x * x * x + Rat(2) * x));

  auto id2 = compose(id, id, 3);
  CHECK(collapse(id2.S, "lam") ==
        embed(identity_morphism<Rat>(1).S, id2.S.vars_ptr(), id2.S.trunc()));
}

TEST_CASE("ordinary maps pull back by substitution") {
  auto xv = make_vars({even_block("x", 1)});
  Trunc xt(*xv);
  auto x = Jet<Rat>::variable(xv, xt, "x", 0);

  SUBCASE("phi(x) = 2x against g = y^2") {
    auto S = from_map<Rat>({x * Rat(2)});
    auto v = yvars();
    Trunc t(*v);
    auto y = Jet<Rat>::variable(v, t, "y", 0);
    auto pr = pullback(S, y * y, 3);
    auto ov = pr.f.vars_ptr();
    auto xo = Jet<Rat>::variable(ov, pr.f.trunc(), "x", 0);
    auto eps = Jet<Rat>::variable(ov, pr.f.trunc(), "eps", 0);
    CHECK(pr.f == eps * xo * xo * Rat(4));
  }

  SUBCASE("random polynomial maps against the substitution oracle") {
    auto rng = testutil::make_rng(31);
    for (int rep = 0; rep < 20; ++rep) {
      auto phi = rand_jet<Rat>(rng, xv, xt, 3, 0, 3);
      auto S = from_map<Rat>({phi});
      auto v = yvars();
      Trunc t(*v);
      auto g = rand_jet<Rat>(rng, v, t, 3, 0, 3);
      auto pr = pullback(S, g, 2);
      auto ov = pr.f.vars_ptr();
      std::map<int, Jet<Rat>> m{{v->var("y", 0), embed(phi, ov, pr.f.trunc())}};
      auto expect = substitute(g, m, ov, pr.f.trunc(), true) *
                    Jet<Rat>::variable(ov, pr.f.trunc(), "eps", 0);
      CHECK(pr.f == expect);
    }
  }
}

TEST_CASE("pullback on the 1-d quadratic model") {
  Rat s(1, 3), a(2, 5);
  auto S = quad_action(s);
  auto g = quad_g(a);
  auto pr = pullback(S, g, 3);

  SUBCASE("matches the hand-rolled iteration oracle") {
    Poly2 expect = oracle_quadratic_pullback(s, a);
    const auto& ov = pr.f.vars();
    for (auto& [k, vref] : expect.c) {
      Monomial m(static_cast<size_t>(ov.total()), 0);
      m[static_cast<size_t>(ov.var("x", 0))] = static_cast<int16_t>(k.first);
      m[static_cast<size_t>(ov.var("eps", 0))] = static_cast<int16_t>(k.second);
      CHECK(pr.f.coeff(m) == vref);
    }
    // and nothing beyond the oracle's support
    for (auto& [m, c] : pr.f.terms()) {
      int xd = m[static_cast<size_t>(ov.var("x", 0))];
      int ed = m[static_cast<size_t>(ov.var("eps", 0))];
      CHECK(expect.c.count({xd, ed}) == 1);
    }
  }

  SUBCASE("closed form of the geometric series") {
    // f = (a/2) x^2 eps (1 + eps a s + (eps a s)^2)
    auto ov = pr.f.vars_ptr();
    auto x = Jet<Rat>::variable(ov, pr.f.trunc(), "x", 0);
    auto eps = Jet<Rat>::variable(ov, pr.f.trunc(), "eps", 0);
    auto expect = (a / 2) * x * x * eps *
                  (Jet<Rat>::constant(ov, pr.f.trunc(), Rat(1)) + eps * (a * s) +
                   eps * eps * (a * s) * (a * s));
    CHECK(pr.f == expect);
  }

  SUBCASE("constant functions shift by S0") {
    auto v = yvars();
    Trunc t(*v);
    auto c = Jet<Rat>::constant(v, t, Rat(7));
    auto prc = pullback(S, c, 2);
    auto eps = Jet<Rat>::variable(prc.f.vars_ptr(), prc.f.trunc(), "eps", 0);
    CHECK(prc.f == eps * Rat(7));  // S0 = 0 here
  }

  SUBCASE("first order in the grading is the ordinary pullback along phi") {
    CHECK(coeff_of_power(pr.f, "eps", 1) ==
          (a / 2) * Jet<Rat>::variable(pr.f.vars_ptr(), pr.f.trunc(), "x", 0) *
              Jet<Rat>::variable(pr.f.vars_ptr(), pr.f.trunc(), "x", 0));
  }

  SUBCASE("odd g is rejected") {
    auto sv = make_vars({Block{"y", 1, {true}}});
    Trunc st(*sv, 3);
    auto th = Jet<Rat>::variable(sv, st, "y", 0);
    auto Sodd = identity_morphism<Rat>(1, {true});
    CHECK_THROWS_AS(pullback(Sodd, th, 2), Error);
  }
}

TEST_CASE("perturbed map") {
  Rat s(1, 2), a(1, 3);
  auto S = quad_action(s);

  SUBCASE("g = 0 gives the underlying map") {
    auto v = yvars();
    Trunc t(*v);
    auto ys = perturbed_map(S, Jet<Rat>::zero(v, t), 2);
    auto x = Jet<Rat>::variable(ys[0].vars_ptr(), ys[0].trunc(), "x", 0);
    CHECK(ys[0] == x);
  }

  SUBCASE("first-order term is S^{ij} d_i g(phi)") {
    auto ys = perturbed_map(S, quad_g(a), 3);
    auto ov = ys[0].vars_ptr();
    auto x = Jet<Rat>::variable(ov, ys[0].trunc(), "x", 0);
    CHECK(coeff_of_power(ys[0], "eps", 0) == x);
    CHECK(coeff_of_power(ys[0], "eps", 1) == s * (a * x));  // S^{11} g'(x)
    // second order from the oracle: y = x (1 + eps a s + (eps a s)^2)
    CHECK(coeff_of_power(ys[0], "eps", 2) == (a * s) * (a * s) * x);
  }
}

TEST_CASE("composition") {
  SUBCASE("graphs compose by substitution") {
    auto xv = make_vars({even_block("x", 1)});
    Trunc xt(*xv);
    auto x = Jet<Rat>::variable(xv, xt, "x", 0);
    auto phi = x * x;                      // M1 -> M2
    auto psi = x + x * x * x;              // M2 -> M3
    auto S21 = from_map<Rat>({phi});
    auto S32 = from_map<Rat>({psi});
    auto S31 = compose(S32, S21, 3);
    std::map<int, Jet<Rat>> m{{xv->var("x", 0), phi}};
    auto S_expect = from_map<Rat>({substitute(psi, m, xv, xt, true)});
    CHECK(collapse(S31.S, "lam") ==
          embed(S_expect.S, S31.S.vars_ptr(), S31.S.trunc()));
  }

  SUBCASE("identity laws up to the grading order") {
    Rat s(2, 7);
    auto S = quad_action(s);
    auto id = identity_morphism<Rat>(1);
    auto left = compose(id, S, 3);
    auto right = compose(S, id, 3);
    auto Se = [&](const GeneratingFunction<Rat>& out) {
      return embed(S.S, out.S.vars_ptr(), out.S.trunc());
    };
    CHECK(collapse(left.S, "lam") == Se(left));
    CHECK(collapse(right.S, "lam") == Se(right));
  }

  SUBCASE("1-d quadratic pair against the closed form") {
    Rat t(1, 2), s(1, 3);
    // S32 = y r + (t/2) y^2, S21 = x q + (s/2) q^2
    auto mv = make_vars({even_block("x", 1), even_block("q", 1)});
    Trunc mt(*mv, 8);
    auto xx = Jet<Rat>::variable(mv, mt, "x", 0);
    auto qq = Jet<Rat>::variable(mv, mt, "q", 0);
    auto S32 = GeneratingFunction<Rat>(xx * qq + xx * xx * (t / 2));
    auto S21 = GeneratingFunction<Rat>(xx * qq + qq * qq * (s / 2));
    auto S31 = compose(S32, S21, 2);

    auto ov = S31.S.vars_ptr();
    auto ot = S31.S.trunc();
    auto X = Jet<Rat>::variable(ov, ot, "x", 0);
    auto R = Jet<Rat>::variable(ov, ot, "q", 0);
    auto L = Jet<Rat>::variable(ov, ot, "lam", 0);
    auto one = Jet<Rat>::constant(ov, ot, Rat(1));
    auto ts = t * s;
    auto geo = one + L * ts + L * L * (ts * ts);
    auto expect = X * R * geo + X * X * ((t / 2) * geo) + R * R * (L * (s / 2) * geo);
    CHECK(S31.S == expect.truncated(ot));
  }

  SUBCASE("functoriality of pullback under composition") {
    auto rng = testutil::make_rng(32);
    for (int rep = 0; rep < 6; ++rep) {
      // random 1-d actions with linear part x q + tails, pre-marked by lam
      auto mv = make_vars({even_block("x", 1), even_block("q", 1), even_block("lam", 1)});
      Trunc mt(*mv, 5);
      mt.set(*mv, "lam", 3);
      auto X = Jet<Rat>::variable(mv, mt, "x", 0);
      auto Q = Jet<Rat>::variable(mv, mt, "q", 0);
      auto mk_action = [&]() {
        auto tail = rand_jet<Rat>(rng, mv, mt, 3, 0, 2);
        // strip q-degree <= 1 and lam content, then mark by lam
        tail = tail - component(tail, "q", 0) - component(tail, "q", 1);
        tail = coeff_of_power(tail, "lam", 0);
        Jet<Rat> s = X * Q + tail * Jet<Rat>::variable(mv, mt, "lam", 0);
        return GeneratingFunction<Rat>(s);
      };
      auto S21 = mk_action();
      auto S32 = mk_action();
      auto v = yvars();
      Trunc t(*v);
      auto g = rand_jet<Rat>(rng, v, t, 3, 0, 3);

      auto S31 = compose(S32, S21, 3, ComposeMode::formal, true);
      auto lhs = pullback(S31, g, 3, "eps");

      auto inner = pullback(S32, g, 3, "eps");
      auto mid = rename_block(inner.f, "x", "y");
      auto rhs = pullback(S21, mid, 3, "");

      CHECK(lhs.f == rhs.f);
    }
  }
}

TEST_CASE("derivative of the pullback") {
  SUBCASE("identity and graph cases vanish exactly") {
    auto id = identity_morphism<Rat>(1);
    auto v = yvars();
    Trunc t(*v);
    auto y = Jet<Rat>::variable(v, t, "y", 0);
    CHECK(derivative_check(id, y * y, y * y * y * y, 3).is_zero());

    auto xv = make_vars({even_block("x", 1)});
    Trunc xt(*xv);
    auto x = Jet<Rat>::variable(xv, xt, "x", 0);
    auto S = from_map<Rat>({x + x * x});
    CHECK(derivative_check(S, y * y, y + y * y, 3).is_zero());
  }

  SUBCASE("1-d quadratic case vanishes through order 3") {
    auto S = quad_action(Rat(1, 3));
    auto v = yvars();
    Trunc t(*v);
    auto y = Jet<Rat>::variable(v, t, "y", 0);
    CHECK(derivative_check(S, y * y * (Rat(1) / 2), y * y, 3).is_zero());
  }

  SUBCASE("finite-difference oracle in numeric mode") {
    double s = 0.3, a = 0.4, tau = 1e-6;
    auto mv = make_vars({even_block("x", 1), even_block("q", 1)});
    Trunc mt(*mv, 10);
    auto X = Jet<CD>::variable(mv, mt, "x", 0);
    auto Q = Jet<CD>::variable(mv, mt, "q", 0);
    auto S = GeneratingFunction<CD>(X * Q + Q * Q * CD(s / 2));
    auto v = yvars();
    Trunc t(*v, 10);
    auto y = Jet<CD>::variable(v, t, "y", 0);
    auto g = y * y * CD(a / 2);
    auto dg = y * y * y;

    std::vector<CD> x0{CD(0.7, 0.0)};
    auto fp = pullback_numeric(S, g + dg * CD(tau), x0, 4);
    auto fm = pullback_numeric(S, g - dg * CD(tau), x0, 4);
    auto fd = (fp.f - fm.f) / CD(2 * tau);

    auto base = pullback_numeric(S, g, x0, 4);
    std::map<int, Jet<CD>> m{{v->var("y", 0), base.y_series[0]}};
    auto rhs = substitute(dg, m, base.f.vars_ptr(), base.f.trunc(), true);
    CHECK(testutil::max_abs_diff(fd, rhs) <= 1e-6);
  }
}

TEST_CASE("Hamilton-Jacobi residual") {
  auto hv = make_vars({even_block("x", 1), even_block("p", 1)});
  Trunc ht(*hv);
  auto x = Jet<Rat>::variable(hv, ht, "x", 0);
  auto p = Jet<Rat>::variable(hv, ht, "p", 0);
  auto H = (p * p + x * x) / Rat(2);

  SUBCASE("identity relates H to itself") {
    auto id = identity_morphism<Rat>(1);
    CHECK(hamilton_jacobi_residual(id, H, H).is_zero());
  }

  SUBCASE("perturbed pair is detected") {
    auto id = identity_morphism<Rat>(1);
    auto H2 = H + x * (Rat(1) / 100);
    CHECK(!hamilton_jacobi_residual(id, H, H2).is_zero());
  }
}

TEST_CASE("numeric pullback against the summed formal series") {
  double s = 0.1, a = 0.2;
  auto mv = make_vars({even_block("x", 1), even_block("q", 1)});
  Trunc mt(*mv, 12);
  auto X = Jet<CD>::variable(mv, mt, "x", 0);
  auto Q = Jet<CD>::variable(mv, mt, "q", 0);
  auto S = GeneratingFunction<CD>(X * Q + Q * Q * CD(s / 2));
  auto v = yvars();
  Trunc t(*v, 12);
  auto y = Jet<CD>::variable(v, t, "y", 0);
  auto g = y * y * CD(a / 2);

  std::vector<CD> x0{CD(1.0, 0.0)};
  auto num = pullback_numeric(S, g, x0, 3);

  // closed form f = (a/2) x^2 / (1 - a s), recentered at x0 = 1
  double k = 0.5 * a / (1.0 - a * s);
  auto ov = num.f.vars_ptr();
  auto xi = Jet<CD>::variable(ov, num.f.trunc(), "x", 0);
  auto expect = (Jet<CD>::constant(ov, num.f.trunc(), CD(1.0)) + xi) *
                (Jet<CD>::constant(ov, num.f.trunc(), CD(1.0)) + xi) * CD(k);
  CHECK(testutil::max_abs_diff(num.f, expect) <= 1e-11);
}
