#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "microformal/grassmann.hpp"
#include "microformal/jet.hpp"

namespace testutil {

uint64_t corpus_seed();

inline std::mt19937_64 make_rng(uint64_t salt = 0) { return std::mt19937_64(corpus_seed() ^ salt); }

inline microformal::Rat rand_rat(std::mt19937_64& rng, int num_range = 6, int den_max = 4) {
  std::uniform_int_distribution<int> num(-num_range, num_range);
  std::uniform_int_distribution<int> den(1, den_max);
  return microformal::Rat(num(rng)) / microformal::Rat(den(rng));
}

template <class F>
F rand_scalar(std::mt19937_64& rng);

template <>
inline microformal::Rat rand_scalar<microformal::Rat>(std::mt19937_64& rng) {
  return rand_rat(rng);
}
template <>
inline microformal::CRat rand_scalar<microformal::CRat>(std::mt19937_64& rng) {
  return microformal::CRat(rand_rat(rng), rand_rat(rng, 3, 3));
}
template <>
inline microformal::CD rand_scalar<microformal::CD>(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return microformal::CD(u(rng), u(rng));
}

// Random jet with terms inside the truncation window; optional homogeneous
// parity filter (0 or 1; -1 for no filter).
template <class F>
microformal::Jet<F> rand_jet(std::mt19937_64& rng, microformal::VarsPtr vars,
                             const microformal::Trunc& tr, int terms, int parity = -1,
                             int max_exp = 2) {
  using namespace microformal;
  Jet<F> j(vars, tr);
  std::uniform_int_distribution<int> expd(0, max_exp);
  int tries = terms * 8;
  int placed = 0;
  while (placed < terms && tries-- > 0) {
    Monomial m(static_cast<size_t>(vars->total()), 0);
    for (int v = 0; v < vars->total(); ++v) {
      int e = expd(rng);
      if (vars->odd(v)) e = e & 1;
      m[static_cast<size_t>(v)] = static_cast<int16_t>(e);
    }
    bool ok = true;
    for (int b = 0; b < vars->block_count() && ok; ++b) {
      int d = block_degree(*vars, m, b);
      if (d > tr.max_deg[static_cast<size_t>(b)] || d < tr.min_deg[static_cast<size_t>(b)])
        ok = false;
    }
    if (!ok) continue;
    if (parity >= 0 && monomial_parity(*vars, m) != parity) continue;
    j.add_term(m, rand_scalar<F>(rng));
    ++placed;
  }
  return j;
}

template <class F>
microformal::Grassmann<F> rand_grassmann(std::mt19937_64& rng, int gens, int terms,
                                         int parity = -1, bool soul_only = false) {
  using namespace microformal;
  Grassmann<F> g(gens);
  std::uniform_int_distribution<uint32_t> maskd(0, (uint32_t(1) << gens) - 1);
  int tries = terms * 8;
  int placed = 0;
  while (placed < terms && tries-- > 0) {
    uint32_t m = maskd(rng);
    if (soul_only && m == 0) continue;
    if (parity >= 0 && (std::popcount(m) & 1) != parity) continue;
    g.add_term(m, rand_scalar<F>(rng));
    ++placed;
  }
  return g;
}

// max |coefficient| of the difference, for numeric comparisons
template <class F>
double max_abs_diff(const microformal::Jet<F>& a, const microformal::Jet<F>& b) {
  return (a - b).max_abs_coeff();
}

}  // namespace testutil
