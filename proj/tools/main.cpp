// microformal: batch calculator for thick-morphism calculus.
// Subcommands mirror the library modules; inputs are JSON documents, outputs
// JSON or CSV on stdout or --out.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "microformal/dynamics.hpp"
#include "microformal/json_io.hpp"
#include "microformal/quantum.hpp"
#include "microformal/spinor.hpp"
#include "microformal/thick.hpp"
#include "microformal/weyl.hpp"

using namespace microformal;

namespace {

struct RunConfig {
  std::string in_path;
  std::string out_path;
  std::string format = "json";
  std::string hamiltonian;  // preset name or path for dynamics
  std::string mode = "formal";
  int order = 3;
  int steps = 1000;
  int trunc_x = 6;
  int trunc_q = 6;
  int trunc_hbar = 2;
  double tol = 1e-12;
  double T = 1.0;
  bool compare = false;
};

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) parse_fail("cannot open input file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    parse_fail(std::string("invalid JSON: ") + e.what());
  }
  return j;
}

void write_text(const RunConfig& cfg, const std::string& text) {
  if (cfg.out_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
    return;
  }
  std::ofstream out(cfg.out_path);
  require(static_cast<bool>(out), ErrorKind::domain, "cannot open output file " + cfg.out_path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << "\n";
}

void write_json(const RunConfig& cfg, const Json& j) { write_text(cfg, j.dump(2)); }

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// built-in Hamiltonians for the dynamics subcommands
Jet<CD> hamiltonian_from(const RunConfig& cfg, const Json* doc) {
  if (!cfg.hamiltonian.empty()) {
    auto v = make_vars({even_block("x", 1), even_block("p", 1)});
    Trunc t(*v);
    auto x = Jet<CD>::variable(v, t, "x", 0);
    auto p = Jet<CD>::variable(v, t, "p", 0);
    if (cfg.hamiltonian == "halfP2") return p * p * CD(0.5);
    if (cfg.hamiltonian == "harmonic") return (p * p + x * x) * CD(0.5);
    return jet_from_json<CD>(read_json(cfg.hamiltonian));
  }
  if (doc && doc->contains("H")) return jet_from_json<CD>(doc->at("H"));
  parse_fail("no Hamiltonian: pass --H halfP2|harmonic|file.json or an 'H' entry");
}

int run_thick_pullback(const RunConfig& cfg) {
  Json doc = read_json(cfg.in_path);
  auto S = generating_from_json<CD>(doc.at("S"));
  auto g = jet_from_json<CD>(doc.at("g"));
  Json out;
  if (cfg.mode == "numeric") {
    std::vector<CD> x0;
    if (doc.contains("center"))
      for (const Json& c : doc.at("center")) x0.emplace_back(c.get<double>(), 0.0);
    else
      x0.assign(static_cast<size_t>(S.n1()), CD(0.0, 0.0));
    auto pr = pullback_numeric(S, g, x0, cfg.trunc_x, cfg.tol);
    out["f"] = to_json(pr.f);
    out["numeric"] = true;
  } else {
    auto pr = pullback(S, g, cfg.order);
    out["f"] = to_json(pr.f);
    Json ys = Json::array(), qs = Json::array();
    for (const auto& y : pr.y_series) ys.push_back(to_json(y));
    for (const auto& q : pr.q_series) qs.push_back(to_json(q));
    out["y_series"] = ys;
    out["q_series"] = qs;
  }
  write_json(cfg, out);
  return 0;
}

int run_thick_compose(const RunConfig& cfg) {
  Json doc = read_json(cfg.in_path);
  auto S32 = generating_from_json<CD>(doc.at("S32"));
  auto S21 = generating_from_json<CD>(doc.at("S21"));
  GeneratingFunction<CD> out = [&] {
    if (cfg.mode == "quadratic") return compose_quadratic(S32, S21);
    if (cfg.mode == "numeric")
      return compose(S32, S21, cfg.order, ComposeMode::numeric, false, cfg.tol);
    return compose(S32, S21, cfg.order, ComposeMode::formal);
  }();
  write_json(cfg, to_json(out));
  return 0;
}

int run_quantum_pullback(const RunConfig& cfg) {
  Json doc = read_json(cfg.in_path);
  auto S = quantum_action_from_json<CD>(doc.at("S"));
  auto w = oscillatory_from_json<CD>(doc.at("w"));
  auto u = quantum_pullback(S, w, cfg.trunc_hbar);
  Json out;
  out["phase"] = to_json(u.phase);
  out["amplitude"] = to_json(u.amplitude);
  write_json(cfg, out);
  return 0;
}

int run_quantum_compose(const RunConfig& cfg) {
  Json doc = read_json(cfg.in_path);
  auto S32 = quantum_action_from_json<CD>(doc.at("S32"));
  auto S21 = quantum_action_from_json<CD>(doc.at("S21"));
  auto out = quantum_compose_first_order(S32, S21, cfg.order);
  write_json(cfg, to_json(out));
  return 0;
}

int run_weyl(const RunConfig& cfg, const std::string& op) {
  Json doc = read_json(cfg.in_path);
  if (op == "cocycle") {
    auto H1 = jet_from_json<CD>(doc.at("H1"));
    auto H2 = jet_from_json<CD>(doc.at("H2"));
    CD s = doc.contains("s") ? detail::CoeffJson<CD>::get(doc.at("s")) : CD(0.0, 0.0);
    CD c = cocycle_defect(H1, H2, s);
    Json out;
    out["s"] = s.real();
    out["c_re"] = c.real();
    out["c_im"] = c.imag();
    write_json(cfg, out);
    return 0;
  }
  auto a = weyl_from_json<CD>(doc.at("a"));
  auto b = weyl_from_json<CD>(doc.at("b"));
  WeylElement<CD> r = (op == "mul") ? a * b : quantum_poisson(a, b);
  write_json(cfg, weyl_to_json(r));
  return 0;
}

int run_dyn_evolve_f(const RunConfig& cfg) {
  std::optional<Json> doc;
  if (!cfg.in_path.empty()) doc = read_json(cfg.in_path);
  Jet<CD> H = hamiltonian_from(cfg, doc ? &*doc : nullptr);
  if (!doc || !doc->contains("f0"))
    parse_fail("dynamics evolve-f needs an 'f0' jet in the input file");
  Jet<CD> f0 = jet_from_json<CD>(doc->at("f0"));
  auto f = evolve_function(H, f0, cfg.T, cfg.steps);
  write_json(cfg, to_json(f));
  return 0;
}

int run_dyn_evolve_s(const RunConfig& cfg) {
  std::optional<Json> doc;
  if (!cfg.in_path.empty()) doc = read_json(cfg.in_path);
  Jet<CD> H = hamiltonian_from(cfg, doc ? &*doc : nullptr);
  auto S = evolve_action(H, cfg.T, cfg.steps, cfg.trunc_x, cfg.trunc_q);
  write_json(cfg, to_json(S));
  return 0;
}

int run_dyn_flow_action(const RunConfig& cfg) {
  std::optional<Json> doc;
  if (!cfg.in_path.empty()) doc = read_json(cfg.in_path);
  Jet<CD> H = hamiltonian_from(cfg, doc ? &*doc : nullptr);
  std::vector<double> xs, qs;
  if (doc && doc->contains("x_grid")) {
    for (const Json& v : doc->at("x_grid")) xs.push_back(v.get<double>());
    for (const Json& v : doc->at("q_grid")) qs.push_back(v.get<double>());
  } else {
    for (int i = 0; i < 9; ++i) {
      xs.push_back(-1.0 + 0.25 * i);
      qs.push_back(-1.0 + 0.25 * i);
    }
  }
  auto samples = action_from_flow(H, cfg.T, xs, qs, cfg.steps);

  std::optional<GeneratingFunction<CD>> ref;
  if (cfg.compare) ref = evolve_action(H, cfg.T, cfg.steps, cfg.trunc_x, cfg.trunc_q);
  auto eval_ref = [&](double x, double q) {
    const VariableSpec& v = ref->S.vars();
    CD acc(0, 0);
    for (const auto& [m, c] : ref->S.terms()) {
      CD t = c;
      for (int k = 0; k < m[static_cast<size_t>(v.var("x", 0))]; ++k) t *= x;
      for (int k = 0; k < m[static_cast<size_t>(v.var("q", 0))]; ++k) t *= q;
      acc += t;
    }
    return acc.real();
  };

  if (cfg.format == "csv") {
    std::ostringstream os;
    os << "x,q,S" << (cfg.compare ? ",ref,abs_diff" : "") << "\n";
    double worst = 0.0;
    for (size_t i = 0; i < xs.size(); ++i)
      for (size_t j = 0; j < qs.size(); ++j) {
        os << fmt_double(xs[i]) << "," << fmt_double(qs[j]) << ","
           << fmt_double(samples.S[i][j].real());
        if (cfg.compare) {
          double r = eval_ref(xs[i], qs[j]);
          double d = std::abs(samples.S[i][j].real() - r);
          worst = std::max(worst, d);
          os << "," << fmt_double(r) << "," << fmt_double(d);
        }
        os << "\n";
      }
    if (cfg.compare) os << "# max_abs_diff," << fmt_double(worst) << "\n";
    os << "# sympl_drift," << fmt_double(samples.sympl_drift) << "\n";
    write_text(cfg, os.str());
    return 0;
  }

  Json out;
  out["x_grid"] = xs;
  out["q_grid"] = qs;
  Json rows = Json::array();
  double worst = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    Json row = Json::array();
    for (size_t j = 0; j < qs.size(); ++j) {
      row.push_back(samples.S[i][j].real());
      if (cfg.compare)
        worst = std::max(worst, std::abs(samples.S[i][j].real() - eval_ref(xs[i], qs[j])));
    }
    rows.push_back(row);
  }
  out["S"] = rows;
  out["sympl_drift"] = samples.sympl_drift;
  if (cfg.compare) out["max_abs_diff"] = worst;
  write_json(cfg, out);
  return 0;
}

int run_dyn_schrodinger(const RunConfig& cfg) {
  Json doc = read_json(cfg.in_path);
  Jet<CD> H = hamiltonian_from(cfg, &doc);
  auto w0 = oscillatory_from_json<CD>(doc.at("w"));
  auto w = schrodinger_evolve(H, w0, cfg.T, cfg.steps, cfg.trunc_hbar);
  Json out;
  out["phase"] = to_json(w.phase);
  out["amplitude"] = to_json(w.amplitude);
  write_json(cfg, out);
  return 0;
}

int run_spinor_compose(const RunConfig& cfg, bool quantum) {
  Json doc = read_json(cfg.in_path);
  auto S32 = quadratic_action_from_json<CD>(doc.at("S32"));
  auto S21 = quadratic_action_from_json<CD>(doc.at("S21"));
  auto out = quantum ? compose_quantum(S32, S21) : compose_classical(S32, S21);
  write_json(cfg, to_json(out));
  return 0;
}

int run_spinor_cocycle(const RunConfig& cfg) {
  Json doc = read_json(cfg.in_path);
  auto S32 = quadratic_action_from_json<CD>(doc.at("S32"));
  auto S21 = quadratic_action_from_json<CD>(doc.at("S21"));
  auto c = cocycle(S32, S21);
  Json out;
  out["c"] = to_json(c);
  out["c_via_strlog"] = to_json(cocycle_via_strlog(S32, S21, 200));
  write_json(cfg, out);
  return 0;
}

int run_spinor_intertwine(const RunConfig& cfg) {
  Json doc = read_json(cfg.in_path);
  auto S = quadratic_action_from_json<CD>(doc.at("S"));
  int eps = doc.contains("eps") ? doc.at("eps").get<int>() : 0;
  std::vector<Grassmann<CD>> B, C;
  for (const Json& b : doc.at("B")) B.push_back(grassmann_from_json<CD>(b, S.gens));
  for (const Json& c : doc.at("C")) C.push_back(grassmann_from_json<CD>(c, S.gens));
  Grassmann<CD> K1 =
      doc.contains("K1") ? grassmann_from_json<CD>(doc.at("K1"), S.gens) : Grassmann<CD>(S.gens);
  auto [d1, d2] = intertwine_solve(S, B, C, K1, eps);
  Json out;
  auto vec = [](const std::vector<Grassmann<CD>>& v) {
    Json a = Json::array();
    for (const auto& g : v) a.push_back(to_json(g));
    return a;
  };
  out["A"] = vec(d1.A);
  out["D"] = vec(d2.B);
  out["K2"] = to_json(d2.K);
  write_json(cfg, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"microformal: thick-morphism calculus (jets, Weyl algebra, quadratic actions)"};
  app.require_subcommand(1);

  RunConfig cfg;
  auto add_common = [&](CLI::App* c, bool needs_in = true) {
    auto* opt = c->add_option("--in", cfg.in_path, "input JSON file");
    if (needs_in) opt->required();
    c->add_option("--out", cfg.out_path, "output path (default stdout)");
    c->add_option("--format", cfg.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c->add_option("--order", cfg.order, "formal expansion order");
    c->add_option("--steps", cfg.steps, "integrator step count");
    c->add_option("--tol", cfg.tol, "numeric tolerance");
    c->add_option("--trunc-x", cfg.trunc_x, "x-degree bound");
    c->add_option("--trunc-q", cfg.trunc_q, "q-degree bound");
    c->add_option("--trunc-hbar", cfg.trunc_hbar, "hbar-degree bound");
    c->add_option("--T", cfg.T, "evolution time");
    c->add_option("--mode", cfg.mode, "formal|numeric|quadratic|quantum");
  };

  auto* thick = app.add_subcommand("thick", "classical thick morphisms");
  thick->require_subcommand(1);
  add_common(thick->add_subcommand("pullback", "nonlinear pullback of a function"));
  add_common(thick->add_subcommand("compose", "composition of generating functions"));

  auto* quantum = app.add_subcommand("quantum", "quantum thick morphisms");
  quantum->require_subcommand(1);
  add_common(quantum->add_subcommand("pullback", "pullback of an oscillatory wave function"));
  add_common(quantum->add_subcommand("compose", "composition, exact through hbar^1"));

  auto* weyl = app.add_subcommand("weyl", "Weyl algebra");
  weyl->require_subcommand(1);
  add_common(weyl->add_subcommand("mul", "normal-ordered product"));
  add_common(weyl->add_subcommand("bracket", "quantum Poisson bracket"));
  add_common(weyl->add_subcommand("cocycle", "s-ordering cocycle defect"));

  auto* dyn = app.add_subcommand("dynamics", "one-parameter families");
  dyn->require_subcommand(1);
  auto* ef = dyn->add_subcommand("evolve-f", "Hamilton-Jacobi evolution of a function");
  auto* es = dyn->add_subcommand("evolve-s", "evolution of the generating function");
  auto* fa = dyn->add_subcommand("flow-action", "action samples from the Hamiltonian flow");
  auto* sc = dyn->add_subcommand("schrodinger", "Schrodinger evolution of a wave function");
  add_common(ef);
  add_common(es, /*needs_in=*/false);
  add_common(fa, /*needs_in=*/false);
  add_common(sc);
  for (auto* c : {ef, es, fa, sc})
    c->add_option("--H", cfg.hamiltonian, "Hamiltonian: halfP2|harmonic|file.json");
  fa->add_flag("--compare", cfg.compare, "emit max-abs-difference against evolve-s");

  auto* spinor = app.add_subcommand("spinor", "quadratic actions and linear relations");
  spinor->require_subcommand(1);
  add_common(spinor->add_subcommand("compose", "classical composition (use --mode quantum)"));
  add_common(spinor->add_subcommand("cocycle", "Berezinian quantum correction"));
  add_common(spinor->add_subcommand("intertwine", "solve the intertwining system"));

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* picked = app.get_subcommands().at(0);
    CLI::App* inner = picked->get_subcommands().at(0);
    const std::string& group = picked->get_name();
    const std::string& op = inner->get_name();
    if (group == "thick" && op == "pullback") return run_thick_pullback(cfg);
    if (group == "thick" && op == "compose") return run_thick_compose(cfg);
    if (group == "quantum" && op == "pullback") return run_quantum_pullback(cfg);
    if (group == "quantum" && op == "compose") return run_quantum_compose(cfg);
    if (group == "weyl") return run_weyl(cfg, op);
    if (group == "dynamics" && op == "evolve-f") return run_dyn_evolve_f(cfg);
    if (group == "dynamics" && op == "evolve-s") return run_dyn_evolve_s(cfg);
    if (group == "dynamics" && op == "flow-action") return run_dyn_flow_action(cfg);
    if (group == "dynamics" && op == "schrodinger") return run_dyn_schrodinger(cfg);
    if (group == "spinor" && op == "compose") return run_spinor_compose(cfg, cfg.mode == "quantum");
    if (group == "spinor" && op == "cocycle") return run_spinor_cocycle(cfg);
    if (group == "spinor" && op == "intertwine") return run_spinor_intertwine(cfg);
    std::cerr << "unknown subcommand\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::parse:
        return 2;
      case ErrorKind::internal:
        return 4;
      default:
        return 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
