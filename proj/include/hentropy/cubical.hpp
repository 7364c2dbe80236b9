#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "hentropy/box_cover.hpp"
#include "hentropy/errors.hpp"

namespace hentropy {

using BigInt = boost::multiprecision::cpp_int;

// Elementary cells of the planar cubical grid. Vertex (i,j) is the lower-left
// corner of box (i,j); H(i,j) runs from vertex (i,j) to (i+1,j) and V(i,j)
// from (i,j) to (i,j+1).
enum class CellType : std::uint8_t { Vertex = 0, HEdge = 1, VEdge = 2, Square = 3 };

struct Cell {
  std::int32_t i = 0, j = 0;
  CellType type = CellType::Vertex;

  int dim() const { return type == CellType::Vertex ? 0 : (type == CellType::Square ? 2 : 1); }
  std::uint64_t key() const {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i) + (1u << 30)) << 33) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(j) + (1u << 30)) << 2) |
           static_cast<std::uint64_t>(type);
  }
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

inline Cell vertex_cell(std::int32_t i, std::int32_t j) { return {i, j, CellType::Vertex}; }
inline Cell square_cell(BoxId b) { return {b.i, b.j, CellType::Square}; }

/// Oriented boundary as (cell, coefficient) pairs.
inline std::vector<std::pair<Cell, int>> boundary(const Cell& c) {
  switch (c.type) {
    case CellType::Vertex: return {};
    case CellType::HEdge: return {{vertex_cell(c.i + 1, c.j), 1}, {vertex_cell(c.i, c.j), -1}};
    case CellType::VEdge: return {{vertex_cell(c.i, c.j + 1), 1}, {vertex_cell(c.i, c.j), -1}};
    case CellType::Square:
      return {{Cell{c.i, c.j, CellType::HEdge}, 1},
              {Cell{c.i + 1, c.j, CellType::VEdge}, 1},
              {Cell{c.i, c.j + 1, CellType::HEdge}, -1},
              {Cell{c.i, c.j, CellType::VEdge}, -1}};
  }
  return {};
}

/// All faces of a closed square, itself included.
inline std::vector<Cell> closed_cells(BoxId b) {
  return {square_cell(b),
          Cell{b.i, b.j, CellType::HEdge},
          Cell{b.i, b.j + 1, CellType::HEdge},
          Cell{b.i, b.j, CellType::VEdge},
          Cell{b.i + 1, b.j, CellType::VEdge},
          vertex_cell(b.i, b.j),
          vertex_cell(b.i + 1, b.j),
          vertex_cell(b.i, b.j + 1),
          vertex_cell(b.i + 1, b.j + 1)};
}

/// Squares whose closure contains the cell.
inline std::vector<BoxId> cofaces_squares(const Cell& c) {
  switch (c.type) {
    case CellType::Square: return {BoxId{c.i, c.j}};
    case CellType::HEdge: return {BoxId{c.i, c.j - 1}, BoxId{c.i, c.j}};
    case CellType::VEdge: return {BoxId{c.i - 1, c.j}, BoxId{c.i, c.j}};
    case CellType::Vertex:
      return {BoxId{c.i - 1, c.j - 1}, BoxId{c.i - 1, c.j}, BoxId{c.i, c.j - 1}, BoxId{c.i, c.j}};
  }
  return {};
}

/// Integer chain with sparse support, kept ordered for reproducible output.
using Chain = std::map<Cell, std::int64_t>;

inline void chain_add(Chain& c, const Cell& cell, std::int64_t v) {
  if (v == 0) return;
  auto [it, fresh] = c.try_emplace(cell, v);
  if (!fresh && (it->second += v) == 0) c.erase(it);
}

inline Chain chain_boundary(const Chain& c) {
  Chain out;
  for (const auto& [cell, v] : c)
    for (const auto& [f, s] : boundary(cell)) chain_add(out, f, s * v);
  return out;
}

/// Full cubical set given by its squares; lower cells are the faces.
class CubicalSet {
 public:
  CubicalSet() = default;
  explicit CubicalSet(std::vector<BoxId> squares) : squares_(std::move(squares)) {
    std::sort(squares_.begin(), squares_.end());
    squares_.erase(std::unique(squares_.begin(), squares_.end()), squares_.end());
    for (BoxId b : squares_) set_.insert(b.key());
  }
  const std::vector<BoxId>& squares() const { return squares_; }
  bool empty() const { return squares_.empty(); }
  bool has_square(BoxId b) const { return set_.count(b.key()) != 0; }
  bool has_cell(const Cell& c) const {
    for (BoxId b : cofaces_squares(c))
      if (has_square(b)) return true;
    return false;
  }
  /// Faces in canonical order (dimension, then coordinates).
  std::vector<Cell> cells(int dim) const {
    std::vector<Cell> out;
    for (BoxId b : squares_)
      for (const Cell& c : closed_cells(b))
        if (c.dim() == dim) out.push_back(c);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  long euler_characteristic() const {
    return static_cast<long>(cells(0).size()) - static_cast<long>(cells(1).size()) + static_cast<long>(squares_.size());
  }
  bool connected() const;

 private:
  std::vector<BoxId> squares_;
  std::unordered_set<std::uint64_t> set_;
};

inline bool CubicalSet::connected() const {
  if (squares_.empty()) return false;
  std::unordered_set<std::uint64_t> seen{squares_[0].key()};
  std::vector<BoxId> stack{squares_[0]};
  while (!stack.empty()) {
    BoxId b = stack.back();
    stack.pop_back();
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        BoxId n{b.i + di, b.j + dj};
        if (has_square(n) && seen.insert(n.key()).second) stack.push_back(n);
      }
  }
  return seen.size() == squares_.size();
}

/// In the plane a full cubical set has trivial reduced homology exactly when
/// it is connected with Euler characteristic one.
inline bool is_acyclic(const CubicalSet& s) { return s.connected() && s.euler_characteristic() == 1; }

// ---------------------------------------------------------------------------
// Smith normal form over the integers.

using BigMatrix = std::vector<std::vector<BigInt>>;

struct SmithForm {
  std::size_t rows = 0, cols = 0, rank = 0;
  std::vector<BigInt> diagonal;  // positive invariant factors d_0 | d_1 | ...
  BigMatrix u, u_inv;            // row transform: D = U * M * V
};

inline BigMatrix identity_matrix(std::size_t n) {
  BigMatrix m(n, std::vector<BigInt>(n, 0));
  for (std::size_t k = 0; k < n; ++k) m[k][k] = 1;
  return m;
}

/// Deterministic Smith normal form: the pivot is always the entry of
/// smallest absolute value, earliest in row-major order on ties.
inline SmithForm smith_normal_form(BigMatrix m, std::size_t rows, std::size_t cols) {
  SmithForm out;
  out.rows = rows;
  out.cols = cols;
  out.u = identity_matrix(rows);
  out.u_inv = identity_matrix(rows);

  auto swap_rows = [&](std::size_t a, std::size_t b) {
    if (a == b) return;
    std::swap(m[a], m[b]);
    std::swap(out.u[a], out.u[b]);
    for (auto& row : out.u_inv) std::swap(row[a], row[b]);
  };
  auto swap_cols = [&](std::size_t a, std::size_t b) {
    if (a == b) return;
    for (auto& row : m) std::swap(row[a], row[b]);
  };
  // row_dst -= q * row_src
  auto row_axpy = [&](std::size_t dst, std::size_t src, const BigInt& q) {
    if (q == 0) return;
    for (std::size_t c = 0; c < cols; ++c) m[dst][c] -= q * m[src][c];
    for (std::size_t c = 0; c < rows; ++c) out.u[dst][c] -= q * out.u[src][c];
    for (std::size_t r = 0; r < rows; ++r) out.u_inv[r][src] += q * out.u_inv[r][dst];
  };
  auto col_axpy = [&](std::size_t dst, std::size_t src, const BigInt& q) {
    if (q == 0) return;
    for (std::size_t r = 0; r < rows; ++r) m[r][dst] -= q * m[r][src];
  };
  auto negate_row = [&](std::size_t r) {
    for (auto& v : m[r]) v = -v;
    for (auto& v : out.u[r]) v = -v;
    for (auto& row : out.u_inv) row[r] = -row[r];
  };

  std::size_t t = 0;
  while (t < rows && t < cols) {
    bool found = false;
    std::size_t pr = 0, pc = 0;
    BigInt best;
    for (std::size_t r = t; r < rows; ++r)
      for (std::size_t c = t; c < cols; ++c)
        if (m[r][c] != 0 && (!found || abs(m[r][c]) < best)) {
          found = true;
          best = abs(m[r][c]);
          pr = r;
          pc = c;
        }
    if (!found) break;
    swap_rows(t, pr);
    swap_cols(t, pc);
    for (;;) {
      bool clean = true;
      for (std::size_t r = t + 1; r < rows; ++r) row_axpy(r, t, m[r][t] / m[t][t]);
      for (std::size_t c = t + 1; c < cols; ++c) col_axpy(c, t, m[t][c] / m[t][t]);
      // A nonzero remainder is smaller than the pivot; move it into place.
      std::size_t br = 0, bc = 0;
      bool rem = false;
      BigInt small;
      for (std::size_t r = t + 1; r < rows; ++r)
        if (m[r][t] != 0 && (!rem || abs(m[r][t]) < small)) {
          rem = true;
          small = abs(m[r][t]);
          br = r;
          bc = t;
        }
      for (std::size_t c = t + 1; c < cols; ++c)
        if (m[t][c] != 0 && (!rem || abs(m[t][c]) < small)) {
          rem = true;
          small = abs(m[t][c]);
          br = t;
          bc = c;
        }
      if (rem) {
        swap_rows(t, br);
        swap_cols(t, bc);
        clean = false;
      } else {
        // Divisibility: fold in a row whose entry the pivot does not divide.
        for (std::size_t r = t + 1; r < rows && clean; ++r)
          for (std::size_t c = t + 1; c < cols; ++c)
            if (m[r][c] % m[t][t] != 0) {
              row_axpy(t, r, BigInt(-1));
              clean = false;
              break;
            }
      }
      if (clean) break;
    }
    if (m[t][t] < 0) negate_row(t);
    out.diagonal.push_back(m[t][t]);
    ++t;
  }
  out.rank = out.diagonal.size();
  return out;
}

// ---------------------------------------------------------------------------
// Relative homology H_k(X, A) of full cubical sets A ⊆ X in the plane.
//
// The quotient X/A is handled as a graph with one ground vertex for A. A
// spanning forest gives cycle coordinates (coefficients on cotree edges); a
// spanning forest of the dual graph eliminates most square relations by unit
// pivots, leaving a small residual matrix for the Smith form.

class RelativeHomology {
 public:
  RelativeHomology(const CubicalSet& x, const CubicalSet& a) { compute(x, a); }

  std::size_t rank(int k) const { return k == 0 ? h0_ : (k == 1 ? h1_ : (k == 2 ? h2_ : 0)); }
  const std::vector<BigInt>& torsion1() const { return torsion_; }

  /// Relative 1-cycles representing the free generators of H1.
  const std::vector<Chain>& generators() const { return generators_; }

  /// Whether the edge is a cell of X not lying in A.
  bool is_relative_edge(const Cell& e) const { return edge_index_.count(e.key()) != 0; }

  /// Coordinates of a relative 1-cycle in the generator basis; the free part
  /// only (torsion classes project to zero).
  std::vector<BigInt> coordinates(const Chain& z) const {
    std::map<std::uint32_t, BigInt> xl;
    for (const auto& [cell, v] : z) {
      if (cell.dim() != 1) continue;
      auto it = edge_index_.find(cell.key());
      if (it == edge_index_.end()) continue;
      std::uint32_t e = it->second;
      if (tree_edge_[e]) continue;
      std::uint32_t ct = cotree_slot_[e];
      if (l_slot_[ct] != kNone) {
        xl[l_slot_[ct]] += v;
      } else {
        for (const auto& [l, c] : expr_[ct]) xl[l] += BigInt(c) * v;
      }
    }
    std::vector<BigInt> out(h1_, 0);
    for (std::size_t g = 0; g < h1_; ++g) {
      std::size_t row = snf_.rank + g;
      BigInt acc = 0;
      for (const auto& [l, v] : xl) acc += snf_.u[row][l] * v;
      out[g] = acc;
    }
    return out;
  }

 private:
  static constexpr std::uint32_t kNone = UINT32_MAX;
  using Sparse = std::vector<std::pair<std::uint32_t, std::int64_t>>;

  static void sparse_axpy(Sparse& acc, const Sparse& x, std::int64_t s) {
    Sparse out;
    out.reserve(acc.size() + x.size());
    std::size_t p = 0, q = 0;
    while (p < acc.size() || q < x.size()) {
      if (q == x.size() || (p < acc.size() && acc[p].first < x[q].first)) {
        out.push_back(acc[p++]);
      } else if (p == acc.size() || x[q].first < acc[p].first) {
        std::int64_t v;
        if (__builtin_mul_overflow(x[q].second, s, &v)) fail(ErrorKind::ChainSolveFailure, "coefficient overflow");
        out.emplace_back(x[q].first, v);
        ++q;
      } else {
        std::int64_t v;
        if (__builtin_mul_overflow(x[q].second, s, &v) || __builtin_add_overflow(acc[p].second, v, &v))
          fail(ErrorKind::ChainSolveFailure, "coefficient overflow");
        if (v != 0) out.emplace_back(x[q].first, v);
        ++p;
        ++q;
      }
    }
    acc.swap(out);
  }

  void compute(const CubicalSet& x, const CubicalSet& a) {
    for (BoxId b : a.squares())
      if (!x.has_square(b)) fail(ErrorKind::InvalidArgument, "A must be a subset of X");
    std::vector<BoxId> rel_squares;
    for (BoxId b : x.squares())
      if (!a.has_square(b)) rel_squares.push_back(b);

    std::vector<Cell> verts, edges;
    for (const Cell& c : x.cells(0))
      if (!a.has_cell(c)) verts.push_back(c);
    for (const Cell& c : x.cells(1))
      if (!a.has_cell(c)) edges.push_back(c);

    const bool ground = !a.empty();
    const std::uint32_t nv = static_cast<std::uint32_t>(verts.size());
    const std::uint32_t gnode = nv;  // ground vertex id, valid when `ground`
    std::unordered_map<std::uint64_t, std::uint32_t> vidx;
    for (std::uint32_t k = 0; k < nv; ++k) vidx.emplace(verts[k].key(), k);
    for (std::uint32_t k = 0; k < edges.size(); ++k) edge_index_.emplace(edges[k].key(), k);
    auto vertex_node = [&](const Cell& v) {
      auto it = vidx.find(v.key());
      return it == vidx.end() ? gnode : it->second;
    };

    // Edge endpoints (tail, head) in the quotient graph.
    const std::uint32_t ne = static_cast<std::uint32_t>(edges.size());
    std::vector<std::uint32_t> tail(ne), head(ne);
    const std::uint32_t nodes = nv + (ground ? 1 : 0);
    std::vector<std::vector<std::uint32_t>> incident(nodes);
    for (std::uint32_t e = 0; e < ne; ++e) {
      auto bd = boundary(edges[e]);
      head[e] = vertex_node(bd[0].first);
      tail[e] = vertex_node(bd[1].first);
      incident[tail[e]].push_back(e);
      if (head[e] != tail[e]) incident[head[e]].push_back(e);
    }

    // Spanning forest, ground first.
    tree_edge_.assign(ne, false);
    parent_edge_.assign(nodes, kNone);
    parent_node_.assign(nodes, kNone);
    depth_.assign(nodes, 0);
    std::vector<bool> seen(nodes, false);
    std::size_t components = 0;
    auto bfs = [&](std::uint32_t root) {
      ++components;
      seen[root] = true;
      std::vector<std::uint32_t> queue{root};
      for (std::size_t q = 0; q < queue.size(); ++q) {
        std::uint32_t v = queue[q];
        for (auto e : incident[v]) {
          std::uint32_t w = tail[e] == v ? head[e] : tail[e];
          if (seen[w]) continue;
          seen[w] = true;
          tree_edge_[e] = true;
          parent_edge_[w] = e;
          parent_node_[w] = v;
          depth_[w] = depth_[v] + 1;
          queue.push_back(w);
        }
      }
    };
    if (ground) bfs(gnode);
    for (std::uint32_t v = 0; v < nv; ++v)
      if (!seen[v]) bfs(v);
    h0_ = components - (ground ? 1 : 0);

    // Cotree edges and the dual graph (squares plus an outer node).
    cotree_slot_.assign(ne, kNone);
    std::vector<std::uint32_t> cotree;
    for (std::uint32_t e = 0; e < ne; ++e)
      if (!tree_edge_[e]) {
        cotree_slot_[e] = static_cast<std::uint32_t>(cotree.size());
        cotree.push_back(e);
      }
    const std::uint32_t nsq = static_cast<std::uint32_t>(rel_squares.size());
    const std::uint32_t outer = nsq;
    std::unordered_map<std::uint64_t, std::uint32_t> sidx;
    for (std::uint32_t k = 0; k < nsq; ++k) sidx.emplace(rel_squares[k].key(), k);
    std::vector<std::vector<std::uint32_t>> dual_inc(nsq + 1);  // cotree slots
    std::vector<std::pair<std::uint32_t, std::uint32_t>> dual_ends(cotree.size());
    for (std::uint32_t ct = 0; ct < cotree.size(); ++ct) {
      std::uint32_t ends[2] = {outer, outer};
      int k = 0;
      for (BoxId b : cofaces_squares(edges[cotree[ct]])) {
        auto it = sidx.find(b.key());
        if (it != sidx.end()) ends[k++] = it->second;
      }
      dual_ends[ct] = {ends[0], ends[1]};
      dual_inc[ends[0]].push_back(ct);
      if (ends[1] != ends[0]) dual_inc[ends[1]].push_back(ct);
    }
    std::vector<std::uint32_t> sq_parent(nsq + 1, kNone), order;
    std::vector<bool> dseen(nsq + 1, false), dual_tree(cotree.size(), false);
    auto dbfs = [&](std::uint32_t root) {
      dseen[root] = true;
      std::size_t start = order.size();
      order.push_back(root);
      for (std::size_t q = start; q < order.size(); ++q) {
        std::uint32_t s = order[q];
        for (auto ct : dual_inc[s]) {
          auto [p, r] = dual_ends[ct];
          std::uint32_t w = p == s ? r : p;
          if (dseen[w]) continue;
          dseen[w] = true;
          dual_tree[ct] = true;
          sq_parent[w] = ct;
          order.push_back(w);
        }
      }
    };
    dbfs(outer);
    for (std::uint32_t s = 0; s < nsq; ++s)
      if (!dseen[s]) dbfs(s);

    l_slot_.assign(cotree.size(), kNone);
    std::uint32_t nl = 0;
    for (std::uint32_t ct = 0; ct < cotree.size(); ++ct)
      if (!dual_tree[ct]) l_slot_[ct] = nl++;

    // Eliminate squares from the leaves of the dual forest upward.
    expr_.assign(cotree.size(), {});
    std::vector<Sparse> residual;
    for (std::size_t q = order.size(); q-- > 0;) {
      std::uint32_t s = order[q];
      if (s == outer) continue;
      Sparse rel;
      std::int64_t pivot_sign = 0;
      std::uint32_t pivot = sq_parent[s];
      for (const auto& [e, sign] : boundary(square_cell(rel_squares[s]))) {
        auto it = edge_index_.find(e.key());
        if (it == edge_index_.end() || tree_edge_[it->second]) continue;
        std::uint32_t ct = cotree_slot_[it->second];
        if (ct == pivot) {
          pivot_sign = sign;
        } else if (l_slot_[ct] != kNone) {
          sparse_axpy(rel, Sparse{{l_slot_[ct], 1}}, sign);
        } else {
          sparse_axpy(rel, expr_[ct], sign);
        }
      }
      if (pivot == kNone) {
        residual.push_back(std::move(rel));
      } else {
        // pivot_sign * e_pivot + rel = 0 in homology, pivot_sign = ±1.
        Sparse ex;
        sparse_axpy(ex, rel, -pivot_sign);
        expr_[pivot] = std::move(ex);
      }
    }

    BigMatrix m(nl, std::vector<BigInt>(residual.size(), 0));
    for (std::size_t c = 0; c < residual.size(); ++c)
      for (const auto& [l, v] : residual[c]) m[l][c] = v;
    snf_ = smith_normal_form(std::move(m), nl, residual.size());
    h1_ = nl - snf_.rank;
    h2_ = residual.size() - snf_.rank;
    for (const auto& d : snf_.diagonal)
      if (d > 1) torsion_.push_back(d);

    // Generator representatives: L-coordinates from the columns of U^{-1}.
    std::vector<std::uint32_t> l_edge(nl);
    for (std::uint32_t ct = 0; ct < cotree.size(); ++ct)
      if (l_slot_[ct] != kNone) l_edge[l_slot_[ct]] = cotree[ct];
    for (std::size_t g = 0; g < h1_; ++g) {
      Chain z;
      for (std::uint32_t l = 0; l < nl; ++l) {
        const BigInt& c = snf_.u_inv[l][snf_.rank + g];
        if (c == 0) continue;
        std::int64_t cv = static_cast<std::int64_t>(c);
        add_fundamental_cycle(z, edges, tail, head, l_edge[l], cv);
      }
      generators_.push_back(std::move(z));
    }
  }

  // c * (e + tree path from head(e) back to tail(e)).
  void add_fundamental_cycle(Chain& z, const std::vector<Cell>& edges, const std::vector<std::uint32_t>& tail,
                             const std::vector<std::uint32_t>& head, std::uint32_t e, std::int64_t c) const {
    chain_add(z, edges[e], c);
    std::uint32_t u = head[e], v = tail[e];
    // Walking up from u traverses tree edges towards the root; each step from
    // w to its parent contributes -orientation relative to w.
    auto step = [&](std::uint32_t w, std::int64_t sign) {
      std::uint32_t pe = parent_edge_[w];
      // Edge oriented tail->head; moving from w to parent.
      std::int64_t dir = head[pe] == w ? -1 : 1;
      chain_add(z, edges[pe], sign * dir * c);
      return parent_node_[w];
    };
    while (depth_[u] > depth_[v]) u = step(u, 1);
    while (depth_[v] > depth_[u]) v = step(v, -1);
    while (u != v) {
      u = step(u, 1);
      v = step(v, -1);
    }
  }

  std::size_t h0_ = 0, h1_ = 0, h2_ = 0;
  std::vector<BigInt> torsion_;
  std::vector<Chain> generators_;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_index_;
  std::vector<bool> tree_edge_;
  std::vector<std::uint32_t> parent_edge_, parent_node_, depth_;
  std::vector<std::uint32_t> cotree_slot_, l_slot_;
  std::vector<Sparse> expr_;
  SmithForm snf_;
};

}  // namespace hentropy
