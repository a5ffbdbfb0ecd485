#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "microformal/json_io.hpp"
#include "test_util.hpp"

using namespace microformal;
using testutil::rand_grassmann;
using testutil::rand_jet;

namespace {

std::string tmp_path(const std::string& name) {
  return std::string(MICROFORMAL_TEST_TMP) + "/" + name;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(static_cast<bool>(out));
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(static_cast<bool>(in));
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_cli(const std::string& args, const std::string& out_name) {
  std::string cmd = std::string(MICROFORMAL_CLI_PATH) + " " + args + " > " +
                    tmp_path(out_name) + " 2> " + tmp_path(out_name + ".err");
  return std::system(cmd.c_str()) / 256;
}

}  // namespace

TEST_CASE("jet JSON round trips") {
  auto vars = make_vars({even_block("x", 2), odd_block("th", 2), even_block("h", 1)});
  Trunc tr(*vars, 4);
  tr.set(*vars, "h", 3, -1);
  auto rng = testutil::make_rng(91);

  SUBCASE("exact rationals") {
    for (int rep = 0; rep < 10; ++rep) {
      auto a = rand_jet<Rat>(rng, vars, tr, 6);
      CHECK(jet_from_json<Rat>(to_json(a)) == a);
    }
  }
  SUBCASE("Gaussian rationals") {
    for (int rep = 0; rep < 10; ++rep) {
      auto a = rand_jet<CRat>(rng, vars, tr, 6);
      CHECK(jet_from_json<CRat>(to_json(a)) == a);
    }
  }
  SUBCASE("complex doubles") {
    for (int rep = 0; rep < 10; ++rep) {
      auto a = rand_jet<CD>(rng, vars, tr, 6);
      CHECK(jet_from_json<CD>(to_json(a)) == a);
    }
  }
}

TEST_CASE("structured values round-trip") {
  auto rng = testutil::make_rng(92);

  SUBCASE("grassmann numbers and supermatrices") {
    for (int rep = 0; rep < 8; ++rep) {
      auto g = rand_grassmann<CRat>(rng, 4, 4);
      CHECK(grassmann_from_json<CRat>(to_json(g)) == g);
    }
    SuperMatrix<CRat> m({0, 1}, {0, 1}, 3);
    m.at(0, 0) = rand_grassmann<CRat>(rng, 3, 2, 0);
    m.at(0, 1) = rand_grassmann<CRat>(rng, 3, 2, 1);
    m.at(1, 0) = rand_grassmann<CRat>(rng, 3, 2, 1);
    m.at(1, 1) = rand_grassmann<CRat>(rng, 3, 2, 0);
    CHECK(supermatrix_from_json<CRat>(to_json(m)) == m);
  }

  SUBCASE("generating function keeps dimensions") {
    auto v = make_vars({even_block("x", 2), even_block("q", 1)});
    Trunc t(*v, 3);
    auto s = Jet<CD>::variable(v, t, "x", 0) * Jet<CD>::variable(v, t, "q", 0);
    auto g = GeneratingFunction<CD>(s);
    Json j = to_json(g);
    CHECK(j.at("n1") == 2);
    CHECK(j.at("n2") == 1);
    CHECK(generating_from_json<CD>(j).S == g.S);
  }

  SUBCASE("quadratic actions") {
    auto a = QuadraticAction<CRat>::identity(3, {0, 1});
    a.s0[0] = rand_grassmann<CRat>(rng, 3, 2, 0);
    a.Sa[1] = rand_grassmann<CRat>(rng, 3, 2, 1);
    a.Sij[0][1] = rand_grassmann<CRat>(rng, 3, 1, 1);
    a.Sij[1][0] = rand_grassmann<CRat>(rng, 3, 1, 1);
    a.normalize();
    CHECK(quadratic_action_from_json<CRat>(to_json(a)) == a);
  }

  SUBCASE("weyl elements") {
    auto w = WeylElement<CRat>::make_spec(2, {false, true});
    auto a = WeylElement<CRat>::xhat(w, 0) * WeylElement<CRat>::phat(w, 0) +
             WeylElement<CRat>::hbar(w) * CRat(Rat(1, 3));
    CHECK(weyl_from_json<CRat>(weyl_to_json(a)) == a);
  }
}

TEST_CASE("parse failures carry the parse kind") {
  auto bad = [](const char* text) {
    try {
      jet_from_json<CD>(Json::parse(text));
      return false;
    } catch (const Error& e) {
      return e.kind() == ErrorKind::parse;
    }
  };
  CHECK(bad("{\"terms\":[]}"));
  CHECK(bad("{\"vars\":[{\"name\":\"x\",\"dim\":1}],\"trunc\":{\"y\":2},\"terms\":[]}"));
  CHECK(bad("{\"vars\":[{\"name\":\"x\",\"dim\":1}],\"terms\":[{\"exp\":{\"x\":[1,2]},\"re\":1}]}"));
}

TEST_CASE("command line interface") {
  SUBCASE("free-particle action evolution") {
    int rc = run_cli("dynamics evolve-s --H halfP2 --T 0.5 --steps 200 --trunc-x 2 --trunc-q 2",
                     "evs.json");
    CHECK(rc == 0);
    Json j = Json::parse(read_file(tmp_path("evs.json")));
    auto S = jet_from_json<CD>(j);
    const VariableSpec& v = S.vars();
    Monomial xq(static_cast<size_t>(v.total()), 0);
    xq[static_cast<size_t>(v.var("x", 0))] = 1;
    xq[static_cast<size_t>(v.var("q", 0))] = 1;
    Monomial qq(static_cast<size_t>(v.total()), 0);
    qq[static_cast<size_t>(v.var("q", 0))] = 2;
    CHECK(std::abs(S.coeff(xq) - CD(1.0)) <= 1e-13);
    CHECK(std::abs(S.coeff(qq) - CD(0.25)) <= 1e-13);
  }

  SUBCASE("identity pullback returns the input function") {
    Json doc;
    auto id = identity_morphism<CD>(1);
    doc["S"] = to_json(id);
    auto yv = make_vars({even_block("y", 1)});
    Trunc yt(*yv, 5);
    auto y = Jet<CD>::variable(yv, yt, "y", 0);
    doc["g"] = to_json(y * y + y * CD(2.0));
    write_file(tmp_path("pb_in.json"), doc.dump());
    int rc = run_cli("thick pullback --in " + tmp_path("pb_in.json") + " --order 2", "pb.json");
    CHECK(rc == 0);
    Json j = Json::parse(read_file(tmp_path("pb.json")));
    auto f = jet_from_json<CD>(j.at("f"));
    auto ov = f.vars_ptr();
    auto x = Jet<CD>::variable(ov, f.trunc(), "x", 0);
    auto eps = Jet<CD>::variable(ov, f.trunc(), "eps", 0);
    CHECK(f == eps * (x * x + x * CD(2.0)));
  }

  SUBCASE("the 1-d quantum correction reproduces log(3/4)/2") {
    Json doc;
    QuadraticAction<CD> T32 = QuadraticAction<CD>::identity(0, {0});
    T32.Sab[0][0] = Grassmann<CD>(0, CD(0.5));
    QuadraticAction<CD> S21 = QuadraticAction<CD>::identity(0, {0});
    S21.Sij[0][0] = Grassmann<CD>(0, CD(0.5));
    doc["S32"] = to_json(T32);
    doc["S21"] = to_json(S21);
    write_file(tmp_path("cc_in.json"), doc.dump());
    int rc = run_cli("spinor cocycle --in " + tmp_path("cc_in.json"), "cc.json");
    CHECK(rc == 0);
    Json j = Json::parse(read_file(tmp_path("cc.json")));
    auto c = grassmann_from_json<CD>(j.at("c"));
    CHECK(std::abs(c.body().real() - 0.5 * std::log(0.75)) <= 1e-12);
    auto c2 = grassmann_from_json<CD>(j.at("c_via_strlog"));
    CHECK(std::abs(c.body() - c2.body()) <= 1e-10);
  }

  SUBCASE("determinism: identical runs produce identical bytes") {
    int rc1 = run_cli("dynamics flow-action --H harmonic --T 0.3 --steps 150 --format csv "
                      "--compare --trunc-x 4 --trunc-q 4",
                      "fa1.csv");
    int rc2 = run_cli("dynamics flow-action --H harmonic --T 0.3 --steps 150 --format csv "
                      "--compare --trunc-x 4 --trunc-q 4",
                      "fa2.csv");
    CHECK(rc1 == 0);
    CHECK(rc2 == 0);
    CHECK(read_file(tmp_path("fa1.csv")) == read_file(tmp_path("fa2.csv")));
  }

  SUBCASE("exit codes distinguish parse and domain errors") {
    write_file(tmp_path("broken.json"), "{not json");
    CHECK(run_cli("thick pullback --in " + tmp_path("broken.json"), "x1.json") == 2);

    // singular quadratic composition: transversality failure -> exit 3
    Json doc;
    QuadraticAction<CD> T32 = QuadraticAction<CD>::identity(0, {0});
    T32.Sab[0][0] = Grassmann<CD>(0, CD(1.0));
    QuadraticAction<CD> S21 = QuadraticAction<CD>::identity(0, {0});
    S21.Sij[0][0] = Grassmann<CD>(0, CD(1.0));
    doc["S32"] = to_json(T32);
    doc["S21"] = to_json(S21);
    write_file(tmp_path("sing.json"), doc.dump());
    CHECK(run_cli("spinor compose --in " + tmp_path("sing.json"), "x2.json") == 3);
  }
}
