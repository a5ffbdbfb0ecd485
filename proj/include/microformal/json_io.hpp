#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "microformal/generating.hpp"
#include "microformal/grassmann.hpp"
#include "microformal/jet.hpp"
#include "microformal/quantum.hpp"
#include "microformal/spinor.hpp"
#include "microformal/supermatrix.hpp"
#include "microformal/weyl.hpp"

namespace microformal {

using Json = nlohmann::ordered_json;

[[noreturn]] inline void parse_fail(const std::string& msg) { fail(ErrorKind::parse, msg); }

namespace detail {

inline Rat rat_from_json(const Json& j) {
  if (j.is_number_integer()) return Rat(j.get<long long>());
  if (j.is_string()) return Rat(j.get<std::string>());
  parse_fail("expected an integer or a string rational");
}

template <class F>
struct CoeffJson;

template <>
struct CoeffJson<Rat> {
  static void put(Json& term, const Rat& c) {
    term["num"] = boost::multiprecision::numerator(c).str();
    term["den"] = boost::multiprecision::denominator(c).str();
  }
  static Rat get(const Json& term) {
    if (term.contains("num"))
      return rat_from_json(term.at("num")) / rat_from_json(term.contains("den") ? term.at("den") : Json(1));
    if (term.contains("re")) return Rat(term.at("re").get<double>());
    parse_fail("rational coefficient needs num/den");
  }
};

template <>
struct CoeffJson<CRat> {
  static void put(Json& term, const CRat& c) {
    Json re, im;
    re["num"] = boost::multiprecision::numerator(c.re).str();
    re["den"] = boost::multiprecision::denominator(c.re).str();
    term["re"] = re;
    if (c.im != 0) {
      im["num"] = boost::multiprecision::numerator(c.im).str();
      im["den"] = boost::multiprecision::denominator(c.im).str();
      term["im"] = im;
    }
  }
  static CRat get(const Json& term) {
    auto part = [&](const char* key) -> Rat {
      if (!term.contains(key)) return Rat(0);
      const Json& p = term.at(key);
      if (p.is_object())
        return rat_from_json(p.at("num")) / rat_from_json(p.contains("den") ? p.at("den") : Json(1));
      return rat_from_json(p);
    };
    if (term.contains("num")) return CRat(CoeffJson<Rat>::get(term));
    return CRat(part("re"), part("im"));
  }
};

template <>
struct CoeffJson<CD> {
  static void put(Json& term, const CD& c) {
    term["re"] = c.real();
    if (c.imag() != 0.0) term["im"] = c.imag();
  }
  static CD get(const Json& term) {
    double re = 0.0, im = 0.0;
    auto num = [&](const Json& p) -> double {
      if (p.is_object()) {
        Rat r = rat_from_json(p.at("num")) / rat_from_json(p.contains("den") ? p.at("den") : Json(1));
        return static_cast<double>(r);
      }
      return p.get<double>();
    };
    if (term.contains("num"))
      return CD(static_cast<double>(rat_from_json(term.at("num")) /
                                    rat_from_json(term.contains("den") ? term.at("den") : Json(1))),
                0.0);
    if (term.contains("re")) re = num(term.at("re"));
    if (term.contains("im")) im = num(term.at("im"));
    return CD(re, im);
  }
};

}  // namespace detail

template <class F>
Json to_json(const Jet<F>& a) {
  const VariableSpec& v = a.vars();
  Json vars = Json::array();
  for (int b = 0; b < v.block_count(); ++b) {
    Json blk;
    blk["name"] = v.block(b).name;
    blk["dim"] = v.block(b).dim;
    Json odd = Json::array();
    for (bool o : v.block(b).odd) odd.push_back(o);
    blk["odd"] = odd;
    vars.push_back(blk);
  }
  Json trunc;
  for (int b = 0; b < v.block_count(); ++b) {
    int maxd = a.trunc().max_deg[static_cast<size_t>(b)];
    int mind = a.trunc().min_deg[static_cast<size_t>(b)];
    if (mind == 0)
      trunc[v.block(b).name] = maxd;
    else
      trunc[v.block(b).name] = Json::array({mind, maxd});
  }
  Json terms = Json::array();
  for (const auto& [m, c] : a.terms()) {
    Json term;
    Json exp;
    for (int b = 0; b < v.block_count(); ++b) {
      Json e = Json::array();
      bool nonzero = false;
      for (int i = 0; i < v.block(b).dim; ++i) {
        e.push_back(m[static_cast<size_t>(v.offset(b) + i)]);
        nonzero |= m[static_cast<size_t>(v.offset(b) + i)] != 0;
      }
      if (nonzero) exp[v.block(b).name] = e;
    }
    term["exp"] = exp;
    detail::CoeffJson<F>::put(term, c);
    terms.push_back(term);
  }
  Json j;
  j["vars"] = vars;
  j["trunc"] = trunc;
  j["terms"] = terms;
  return j;
}

template <class F>
Jet<F> jet_from_json(const Json& j) {
  if (!j.contains("vars") || !j.at("vars").is_array()) parse_fail("jet needs a 'vars' array");
  std::vector<Block> blocks;
  for (const Json& blk : j.at("vars")) {
    Block b;
    b.name = blk.at("name").get<std::string>();
    b.dim = blk.at("dim").get<int>();
    if (blk.contains("odd"))
      for (const Json& o : blk.at("odd")) b.odd.push_back(o.get<bool>());
    blocks.push_back(std::move(b));
  }
  VarsPtr vars;
  try {
    vars = make_vars(std::move(blocks));
  } catch (const Error& e) {
    parse_fail(std::string("bad variable spec: ") + e.what());
  }
  Trunc tr(*vars);
  if (j.contains("trunc")) {
    for (auto it = j.at("trunc").begin(); it != j.at("trunc").end(); ++it) {
      int b = vars->find_block(it.key());
      if (b < 0) parse_fail("truncation names unknown block '" + it.key() + "'");
      if (it.value().is_array()) {
        tr.min_deg[static_cast<size_t>(b)] = it.value().at(0).get<int>();
        tr.max_deg[static_cast<size_t>(b)] = it.value().at(1).get<int>();
      } else {
        tr.max_deg[static_cast<size_t>(b)] = it.value().get<int>();
      }
    }
  }
  Jet<F> a(vars, tr);
  if (!j.contains("terms")) return a;
  for (const Json& term : j.at("terms")) {
    Monomial m(static_cast<size_t>(vars->total()), 0);
    if (term.contains("exp")) {
      for (auto it = term.at("exp").begin(); it != term.at("exp").end(); ++it) {
        int b = vars->find_block(it.key());
        if (b < 0) parse_fail("term exponent names unknown block '" + it.key() + "'");
        const Json& e = it.value();
        if (static_cast<int>(e.size()) != vars->block(b).dim)
          parse_fail("exponent arity mismatch in block '" + it.key() + "'");
        for (int i = 0; i < vars->block(b).dim; ++i)
          m[static_cast<size_t>(vars->offset(b) + i)] = static_cast<int16_t>(e.at(static_cast<size_t>(i)).get<int>());
      }
    }
    try {
      a.add_term(m, detail::CoeffJson<F>::get(term));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::parse) throw;
      parse_fail(std::string("bad term: ") + e.what());
    }
  }
  return a;
}

template <class F>
Json to_json(const GeneratingFunction<F>& g) {
  Json j = to_json(g.S);
  j["n1"] = g.n1();
  j["n2"] = g.n2();
  return j;
}

template <class F>
GeneratingFunction<F> generating_from_json(const Json& j) {
  try {
    return GeneratingFunction<F>(jet_from_json<F>(j));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse) throw;
    parse_fail(std::string("bad generating function: ") + e.what());
  }
}

template <class F>
Json to_json(const QuantumAction<F>& g) {
  return to_json(g.S);
}

template <class F>
QuantumAction<F> quantum_action_from_json(const Json& j) {
  try {
    return QuantumAction<F>(jet_from_json<F>(j));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse) throw;
    parse_fail(std::string("bad quantum action: ") + e.what());
  }
}

template <class F>
Json to_json(const OscillatoryFunction<F>& w) {
  Json j;
  j["phase"] = to_json(w.phase);
  j["amplitude"] = to_json(w.amplitude);
  return j;
}

template <class F>
OscillatoryFunction<F> oscillatory_from_json(const Json& j) {
  try {
    return OscillatoryFunction<F>(jet_from_json<F>(j.at("phase")),
                                  jet_from_json<F>(j.at("amplitude")));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse) throw;
    parse_fail(std::string("bad oscillatory function: ") + e.what());
  }
}

template <class F>
Json to_json(const Grassmann<F>& g) {
  Json terms = Json::array();
  for (const auto& [mask, c] : g.terms()) {
    Json t;
    t["mask"] = mask;
    detail::CoeffJson<F>::put(t, c);
    terms.push_back(t);
  }
  Json j;
  j["gens"] = g.gens();
  j["terms"] = terms;
  return j;
}

template <class F>
Grassmann<F> grassmann_from_json(const Json& j, int default_gens = 0) {
  // plain numbers mean a body-only element
  if (j.is_number() || j.is_string() ||
      (j.is_object() && !j.contains("terms") && (j.contains("re") || j.contains("num")))) {
    return Grassmann<F>(default_gens, detail::CoeffJson<F>::get(j.is_object() ? j : Json{{"re", j}}));
  }
  int gens = j.contains("gens") ? j.at("gens").get<int>() : default_gens;
  Grassmann<F> g(gens);
  if (j.contains("terms"))
    for (const Json& t : j.at("terms")) {
      uint32_t mask = t.at("mask").get<uint32_t>();
      try {
        g.add_term(mask, detail::CoeffJson<F>::get(t));
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::parse) throw;
        parse_fail(std::string("bad Grassmann term: ") + e.what());
      }
    }
  return g;
}

template <class F>
Json to_json(const SuperMatrix<F>& m) {
  Json rows = Json::array();
  for (size_t i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (size_t k = 0; k < m.cols(); ++k) row.push_back(to_json(m.at(i, k)));
    rows.push_back(row);
  }
  Json j;
  j["row_parity"] = Json::array();
  j["col_parity"] = Json::array();
  for (size_t i = 0; i < m.rows(); ++i) j["row_parity"].push_back(m.row_parity(i));
  for (size_t i = 0; i < m.cols(); ++i) j["col_parity"].push_back(m.col_parity(i));
  j["gens"] = m.gens();
  j["entries"] = rows;
  return j;
}

template <class F>
SuperMatrix<F> supermatrix_from_json(const Json& j) {
  std::vector<int> rp, cp;
  for (const Json& p : j.at("row_parity")) rp.push_back(p.get<int>());
  for (const Json& p : j.at("col_parity")) cp.push_back(p.get<int>());
  int gens = j.contains("gens") ? j.at("gens").get<int>() : 0;
  SuperMatrix<F> m(rp, cp, gens);
  const Json& rows = j.at("entries");
  if (rows.size() != rp.size()) parse_fail("supermatrix row count mismatch");
  for (size_t i = 0; i < rp.size(); ++i) {
    if (rows.at(i).size() != cp.size()) parse_fail("supermatrix column count mismatch");
    for (size_t k = 0; k < cp.size(); ++k)
      m.at(i, k) = grassmann_from_json<F>(rows.at(i).at(k), gens);
  }
  return m;
}

template <class F>
Json to_json(const QuadraticAction<F>& a) {
  Json j;
  if (a.s0.size() == 1) {
    j["s0"] = to_json(a.s0[0]);
  } else {
    Json s0 = Json::array();
    for (const auto& g : a.s0) s0.push_back(to_json(g));
    j["s0"] = s0;
  }
  auto vec = [&](const std::vector<Grassmann<F>>& v) {
    Json out = Json::array();
    for (const auto& g : v) out.push_back(to_json(g));
    return out;
  };
  auto matx = [&](const std::vector<std::vector<Grassmann<F>>>& m) {
    Json out = Json::array();
    for (const auto& row : m) out.push_back(vec(row));
    return out;
  };
  j["S_a"] = vec(a.Sa);
  j["S_i"] = vec(a.Si);
  j["S_ab"] = matx(a.Sab);
  j["S_a_i"] = matx(a.Sai);
  j["S_ij"] = matx(a.Sij);
  j["parities"] = Json{{"source", a.src_par}, {"target", a.tgt_par}};
  j["gens"] = a.gens;
  return j;
}

template <class F>
QuadraticAction<F> quadratic_action_from_json(const Json& j) {
  QuadraticAction<F> a;
  if (!j.contains("parities")) parse_fail("quadratic action needs 'parities'");
  for (const Json& p : j.at("parities").at("source")) a.src_par.push_back(p.get<int>());
  for (const Json& p : j.at("parities").at("target")) a.tgt_par.push_back(p.get<int>());
  a.gens = j.contains("gens") ? j.at("gens").get<int>() : 0;
  a = [&] {
    QuadraticAction<F> z = QuadraticAction<F>::zero(a.gens, a.src_par, a.tgt_par);
    return z;
  }();
  auto getg = [&](const Json& v) { return grassmann_from_json<F>(v, a.gens); };
  if (j.contains("s0")) {
    if (j.at("s0").is_array() && (j.at("s0").empty() || !j.at("s0").at(0).is_number())) {
      a.s0.clear();
      for (const Json& g : j.at("s0")) a.s0.push_back(getg(g));
      if (a.s0.empty()) a.s0.emplace_back(a.gens);
    } else {
      a.s0[0] = getg(j.at("s0"));
    }
  }
  auto vec = [&](const char* key, std::vector<Grassmann<F>>& out) {
    if (!j.contains(key)) return;
    const Json& v = j.at(key);
    if (v.size() != out.size()) parse_fail(std::string(key) + ": arity mismatch");
    for (size_t i = 0; i < out.size(); ++i) out[i] = getg(v.at(i));
  };
  auto matx = [&](const char* key, std::vector<std::vector<Grassmann<F>>>& out) {
    if (!j.contains(key)) return;
    const Json& v = j.at(key);
    if (v.size() != out.size()) parse_fail(std::string(key) + ": row arity mismatch");
    for (size_t i = 0; i < out.size(); ++i) {
      if (v.at(i).size() != out[i].size()) parse_fail(std::string(key) + ": column arity mismatch");
      for (size_t k = 0; k < out[i].size(); ++k) out[i][k] = getg(v.at(i).at(k));
    }
  };
  vec("S_a", a.Sa);
  vec("S_i", a.Si);
  matx("S_ab", a.Sab);
  matx("S_a_i", a.Sai);
  matx("S_ij", a.Sij);
  try {
    a.normalize();
  } catch (const Error& e) {
    parse_fail(std::string("bad quadratic action: ") + e.what());
  }
  return a;
}

template <class F>
Json weyl_to_json(const WeylElement<F>& w) {
  const VariableSpec& v = w.vars();
  Json j;
  j["pairs"] = w.pairs();
  Json odd = Json::array();
  for (int a = 0; a < w.pairs(); ++a) odd.push_back(w.pair_odd(a));
  j["odd"] = odd;
  Json terms = Json::array();
  for (const auto& [m, c] : w.rep().terms()) {
    Json t;
    Json xe = Json::array(), pe = Json::array();
    for (int a = 0; a < w.pairs(); ++a) {
      xe.push_back(m[static_cast<size_t>(v.var("x", a))]);
      pe.push_back(m[static_cast<size_t>(v.var("p", a))]);
    }
    t["x"] = xe;
    t["p"] = pe;
    t["h"] = m[static_cast<size_t>(v.var("h", 0))];
    detail::CoeffJson<F>::put(t, c);
    terms.push_back(t);
  }
  j["terms"] = terms;
  return j;
}

template <class F>
WeylElement<F> weyl_from_json(const Json& j) {
  int n = j.at("pairs").get<int>();
  std::vector<bool> odd;
  if (j.contains("odd"))
    for (const Json& o : j.at("odd")) odd.push_back(o.get<bool>());
  VarsPtr v = WeylElement<F>::make_spec(n, odd);
  Trunc tr(*v);
  Jet<F> rep(v, tr);
  if (j.contains("terms"))
    for (const Json& t : j.at("terms")) {
      Monomial m(static_cast<size_t>(v->total()), 0);
      for (int a = 0; a < n; ++a) {
        m[static_cast<size_t>(v->var("x", a))] = static_cast<int16_t>(t.at("x").at(static_cast<size_t>(a)).get<int>());
        m[static_cast<size_t>(v->var("p", a))] = static_cast<int16_t>(t.at("p").at(static_cast<size_t>(a)).get<int>());
      }
      m[static_cast<size_t>(v->var("h", 0))] =
          static_cast<int16_t>(t.contains("h") ? t.at("h").get<int>() : 0);
      try {
        rep.add_term(m, detail::CoeffJson<F>::get(t));
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::parse) throw;
        parse_fail(std::string("bad Weyl term: ") + e.what());
      }
    }
  return WeylElement<F>(std::move(rep));
}

}  // namespace microformal
