#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "microformal/errors.hpp"

namespace microformal {

// One named group of variables. All variables in a block share a truncation
// bound (bound on the block's total degree), not a parity: parities are per
// variable.
struct Block {
  std::string name;
  int dim = 0;
  std::vector<bool> odd;  // empty means all even
};

inline Block even_block(std::string name, int dim) { return Block{std::move(name), dim, {}}; }
inline Block odd_block(std::string name, int dim) {
  return Block{std::move(name), dim, std::vector<bool>(static_cast<size_t>(dim), true)};
}

class VariableSpec {
 public:
  explicit VariableSpec(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
    int off = 0;
    for (size_t b = 0; b < blocks_.size(); ++b) {
      auto& blk = blocks_[b];
      require(blk.dim >= 0, ErrorKind::shape, "block dimension must be >= 0");
      if (blk.odd.empty()) blk.odd.assign(static_cast<size_t>(blk.dim), false);
      require(static_cast<int>(blk.odd.size()) == blk.dim, ErrorKind::shape,
              "parity flags must match block dimension");
      for (size_t c = 0; c < b; ++c)
        require(blocks_[c].name != blk.name, ErrorKind::shape,
                "duplicate block name '" + blk.name + "'");
      offset_.push_back(off);
      for (int i = 0; i < blk.dim; ++i) {
        odd_.push_back(blk.odd[static_cast<size_t>(i)]);
        block_of_.push_back(static_cast<int>(b));
      }
      off += blk.dim;
    }
    total_ = off;
  }

  int total() const { return total_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  const Block& block(int b) const { return blocks_[static_cast<size_t>(b)]; }
  int offset(int b) const { return offset_[static_cast<size_t>(b)]; }
  int block_of(int v) const { return block_of_[static_cast<size_t>(v)]; }
  bool odd(int v) const { return odd_[static_cast<size_t>(v)]; }

  int find_block(const std::string& name) const {
    for (size_t b = 0; b < blocks_.size(); ++b)
      if (blocks_[b].name == name) return static_cast<int>(b);
    return -1;
  }
  int block_index(const std::string& name) const {
    int b = find_block(name);
    require(b >= 0, ErrorKind::shape, "no block named '" + name + "'");
    return b;
  }
  // Global index of the i-th variable of a named block.
  int var(const std::string& name, int i) const {
    int b = block_index(name);
    require(i >= 0 && i < block(b).dim, ErrorKind::shape, "variable index out of range");
    return offset(b) + i;
  }

  std::string var_name(int v) const {
    int b = block_of(v);
    const Block& blk = block(b);
    if (blk.dim == 1) return blk.name;
    return blk.name + std::to_string(v - offset(b));
  }

  bool same(const VariableSpec& o) const {
    if (total_ != o.total_ || blocks_.size() != o.blocks_.size()) return false;
    for (size_t b = 0; b < blocks_.size(); ++b) {
      if (blocks_[b].name != o.blocks_[b].name || blocks_[b].dim != o.blocks_[b].dim ||
          blocks_[b].odd != o.blocks_[b].odd)
        return false;
    }
    return true;
  }

 private:
  std::vector<Block> blocks_;
  std::vector<int> offset_;
  std::vector<bool> odd_;
  std::vector<int> block_of_;
  int total_ = 0;
};

using VarsPtr = std::shared_ptr<const VariableSpec>;

inline VarsPtr make_vars(std::vector<Block> blocks) {
  return std::make_shared<const VariableSpec>(std::move(blocks));
}

// Per-block degree window. max_deg is the truncation bound on the block's
// total degree; min_deg below zero turns the block into a Laurent direction
// (used internally for 1/hbar bookkeeping).
struct Trunc {
  static constexpr int unbounded = 1 << 20;

  std::vector<int> max_deg;
  std::vector<int> min_deg;

  Trunc() = default;
  explicit Trunc(const VariableSpec& vars, int default_max = unbounded)
      : max_deg(static_cast<size_t>(vars.block_count()), default_max),
        min_deg(static_cast<size_t>(vars.block_count()), 0) {}

  Trunc& set(const VariableSpec& vars, const std::string& block, int max_d, int min_d = 0) {
    int b = vars.block_index(block);
    max_deg[static_cast<size_t>(b)] = max_d;
    min_deg[static_cast<size_t>(b)] = min_d;
    return *this;
  }
  int max_of(const VariableSpec& vars, const std::string& block) const {
    return max_deg[static_cast<size_t>(vars.block_index(block))];
  }

  bool operator==(const Trunc& o) const { return max_deg == o.max_deg && min_deg == o.min_deg; }

  // Guarantee intersection: the window on which both operands are trusted.
  static Trunc meet(const Trunc& a, const Trunc& b) {
    require(a.max_deg.size() == b.max_deg.size(), ErrorKind::shape, "truncation arity mismatch");
    Trunc r = a;
    for (size_t i = 0; i < r.max_deg.size(); ++i) {
      r.max_deg[i] = std::min(a.max_deg[i], b.max_deg[i]);
      r.min_deg[i] = std::max(a.min_deg[i], b.min_deg[i]);
    }
    return r;
  }
};

// Exponent vector over all variables of a spec, canonical order = ascending
// global index. Odd exponents are 0/1.
using Monomial = std::vector<int16_t>;

struct MonoLess {
  const VariableSpec* vars = nullptr;
  bool operator()(const Monomial& a, const Monomial& b) const {
    for (int blk = 0; blk < vars->block_count(); ++blk) {
      int off = vars->offset(blk), d = vars->block(blk).dim;
      int da = 0, db = 0;
      for (int i = 0; i < d; ++i) {
        da += a[static_cast<size_t>(off + i)];
        db += b[static_cast<size_t>(off + i)];
      }
      if (da != db) return da < db;
    }
    return a < b;
  }
};

inline int block_degree(const VariableSpec& vars, const Monomial& m, int blk) {
  int off = vars.offset(blk), d = vars.block(blk).dim, s = 0;
  for (int i = 0; i < d; ++i) s += m[static_cast<size_t>(off + i)];
  return s;
}

inline int monomial_parity(const VariableSpec& vars, const Monomial& m) {
  int p = 0;
  for (int v = 0; v < vars.total(); ++v)
    if (vars.odd(v) && (m[static_cast<size_t>(v)] & 1)) p ^= 1;
  return p;
}

struct SpecUnion {
  VarsPtr vars;
  Trunc trunc;
};

// Union of several specs (blocks matched by name, first-seen order) followed
// by fresh blocks with explicit degree windows.
inline SpecUnion merge_specs(
    const std::vector<std::pair<const VariableSpec*, const Trunc*>>& parts,
    const std::vector<Block>& fresh = {},
    const std::vector<std::pair<int, int>>& fresh_bounds = {}) {
  std::vector<Block> blocks;
  std::vector<std::pair<int, int>> bounds;
  for (const auto& [sv, st] : parts) {
    for (int b = 0; b < sv->block_count(); ++b) {
      const Block& blk = sv->block(b);
      int maxd = st->max_deg[static_cast<size_t>(b)];
      int mind = st->min_deg[static_cast<size_t>(b)];
      bool found = false;
      for (size_t k = 0; k < blocks.size(); ++k) {
        if (blocks[k].name != blk.name) continue;
        require(blocks[k].dim == blk.dim && blocks[k].odd == blk.odd, ErrorKind::shape,
                "merge_specs: block '" + blk.name + "' inconsistent between operands");
        bounds[k].first = std::min(bounds[k].first, maxd);
        bounds[k].second = std::max(bounds[k].second, mind);
        found = true;
        break;
      }
      if (!found) {
        blocks.push_back(blk);
        bounds.emplace_back(maxd, mind);
      }
    }
  }
  for (size_t k = 0; k < fresh.size(); ++k) {
    blocks.push_back(fresh[k]);
    bounds.push_back(k < fresh_bounds.size() ? fresh_bounds[k]
                                             : std::make_pair(Trunc::unbounded, 0));
  }
  VarsPtr vars = make_vars(blocks);
  Trunc tr(*vars);
  for (size_t k = 0; k < bounds.size(); ++k) {
    tr.max_deg[k] = bounds[k].first;
    tr.min_deg[k] = bounds[k].second;
  }
  return {vars, tr};
}

// The spec minus the named blocks (used to strip solved auxiliary variables
// from results).
inline SpecUnion drop_blocks(const VariableSpec& vars, const Trunc& tr,
                             const std::vector<std::string>& names) {
  std::vector<Block> blocks;
  std::vector<std::pair<int, int>> bounds;
  for (int b = 0; b < vars.block_count(); ++b) {
    bool drop = false;
    for (const auto& n : names)
      if (vars.block(b).name == n) drop = true;
    if (drop) continue;
    blocks.push_back(vars.block(b));
    bounds.emplace_back(tr.max_deg[static_cast<size_t>(b)], tr.min_deg[static_cast<size_t>(b)]);
  }
  VarsPtr v = make_vars(blocks);
  Trunc t(*v);
  for (size_t k = 0; k < bounds.size(); ++k) {
    t.max_deg[k] = bounds[k].first;
    t.min_deg[k] = bounds[k].second;
  }
  return {v, t};
}

}  // namespace microformal
