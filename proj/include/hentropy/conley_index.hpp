#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hentropy/box_map.hpp"
#include "hentropy/cubical.hpp"

namespace hentropy {

/// Combinatorial index pair. `interior` is P1 \ P0 (the invariant boxes S);
/// `images` holds F(Q) for every square of P1, in p1.squares() order.
struct IndexPair {
  GridSpec grid;
  std::vector<BoxId> interior;
  CubicalSet p1, p0;
  std::vector<std::vector<BoxId>> images;

  const std::vector<BoxId>* image_of(BoxId q) const {
    const auto& sq = p1.squares();
    auto it = std::lower_bound(sq.begin(), sq.end(), q);
    if (it == sq.end() || *it != q) return nullptr;
    return &images[static_cast<std::size_t>(it - sq.begin())];
  }
};

/// P1 = S ∪ P0 where S is the invariant box set and P0 starts as F(S) \ S
/// and is closed under F for boxes touching S, so the index map can be read
/// off without an excision inverse. The no-return check F(P0) ∩ S = ∅ also
/// guarantees that the invariant set of |S| stays off its boundary.
inline IndexPair build_index_pair(const BoxMap& full, const BoxMap& inv) {
  if (inv.empty()) fail(ErrorKind::EmptyInvariantSet, "no invariant boxes at this resolution");
  const GridSpec& g = full.grid();
  BoxRange valid = g.valid_range();
  BoxRange inner{valid.i0 + 1, valid.i1 - 1, valid.j0 + 1, valid.j1 - 1};
  std::unordered_set<std::uint64_t> in_s;
  for (BoxId b : inv.boxes()) {
    if (!inner.contains(b)) fail(ErrorKind::IsolationFailure, "invariant boxes reach the window boundary");
    in_s.insert(b.key());
  }
  auto touches_s = [&](BoxId b) {
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj)
        if (in_s.count(BoxId{b.i + di, b.j + dj}.key())) return true;
    return false;
  };
  auto image = [&](BoxId b) {
    auto k = full.index_of(b);
    if (!k) fail(ErrorKind::InvalidArgument, "box missing from the outer approximation");
    return full.edges(b);
  };

  std::unordered_set<std::uint64_t> in_p0;
  std::vector<BoxId> p0;
  for (BoxId s : inv.boxes())
    for (BoxId t : image(s))
      if (!in_s.count(t.key()) && in_p0.insert(t.key()).second) p0.push_back(t);
  for (std::size_t k = 0; k < p0.size(); ++k) {
    for (BoxId t : image(p0[k])) {
      if (in_s.count(t.key()))
        fail(ErrorKind::IsolationFailure, "exit box returns to the invariant set");
      if (!in_p0.count(t.key()) && touches_s(t)) {
        in_p0.insert(t.key());
        p0.push_back(t);
      }
    }
  }

  std::vector<BoxId> p1 = inv.boxes();
  p1.insert(p1.end(), p0.begin(), p0.end());
  IndexPair pair{g, inv.boxes(), CubicalSet(p1), CubicalSet(p0), {}};
  for (BoxId q : pair.p1.squares()) pair.images.push_back(image(q));
  return pair;
}

inline IndexPair build_index_pair(const BoxMap& full) { return build_index_pair(full, invariant_part(full)); }

/// Brute-force re-check of the combinatorial conditions.
inline bool index_pair_conditions_hold(const IndexPair& pair) {
  std::unordered_set<std::uint64_t> s;
  for (BoxId b : pair.interior) s.insert(b.key());
  for (BoxId q : pair.p1.squares()) {
    bool interior = s.count(q.key()) != 0;
    if (interior == pair.p0.has_square(q)) return false;
    for (BoxId t : *pair.image_of(q)) {
      if (interior && !pair.p1.has_square(t)) return false;
      if (!interior && s.count(t.key())) return false;
    }
  }
  return true;
}

inline RelativeHomology relative_homology(const IndexPair& pair) { return RelativeHomology(pair.p1, pair.p0); }

// ---------------------------------------------------------------------------
// Chain selector for a multivalued cubical map given by its carriers. A
// carrier is a cubical complex: a sorted list of cells closed under faces.

using CellList = std::vector<Cell>;

/// Every face of every listed square, sorted.
inline CellList closure_cells(const std::vector<BoxId>& boxes) {
  CellList out;
  out.reserve(boxes.size() * 4 + 8);
  for (BoxId b : boxes)
    for (const Cell& c : closed_cells(b)) out.push_back(c);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline CellList intersect_cells(const CellList& a, const CellList& b) {
  CellList out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

/// Connected with Euler characteristic one; for planar complexes this is
/// trivial reduced homology.
inline bool complex_is_acyclic(const CellList& cells) {
  long chi = 0;
  std::unordered_map<std::uint64_t, std::uint32_t> vid;
  for (const Cell& c : cells) {
    chi += (c.dim() % 2 == 0) ? 1 : -1;
    if (c.dim() == 0) vid.emplace(c.key(), static_cast<std::uint32_t>(vid.size()));
  }
  if (vid.empty() || chi != 1) return false;
  std::vector<std::uint32_t> parent(vid.size());
  for (std::uint32_t k = 0; k < parent.size(); ++k) parent[k] = k;
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t groups = vid.size();
  for (const Cell& c : cells) {
    if (c.dim() != 1) continue;
    auto bd = boundary(c);
    std::uint32_t x = find(vid.at(bd[0].first.key())), y = find(vid.at(bd[1].first.key()));
    if (x != y) {
      parent[x] = y;
      --groups;
    }
  }
  return groups == 1;
}

class ChainSelector {
 public:
  using CarrierFn = std::function<CellList(const Cell&)>;

  explicit ChainSelector(CarrierFn carrier) : carrier_(std::move(carrier)) {}

  /// Carrier complex of a cell; throws NonAcyclicCarrier unless it is
  /// connected with Euler characteristic one.
  const CellList& carrier(const Cell& c) {
    auto it = carriers_.find(c.key());
    if (it != carriers_.end()) return it->second;
    CellList cells = carrier_(c);
    if (!complex_is_acyclic(cells))
      fail(ErrorKind::NonAcyclicCarrier,
           "carrier of cell (" + std::to_string(c.i) + "," + std::to_string(c.j) + ") is not acyclic");
    return carriers_.emplace(c.key(), std::move(cells)).first->second;
  }

  const Chain& image(const Cell& c) {
    auto it = images_.find(c.key());
    if (it != images_.end()) return it->second;
    Chain out;
    const CellList& car = carrier(c);
    if (c.dim() == 0) {
      // Least vertex; vertices sort before edges at equal coordinates.
      for (const Cell& v : car)
        if (v.dim() == 0) {
          out[v] = 1;
          break;
        }
    } else if (c.dim() == 1) {
      auto bd = boundary(c);
      Cell from = image(bd[1].first).begin()->first;
      Cell to = image(bd[0].first).begin()->first;
      out = path(car, from, to);
    } else {
      Chain target;
      for (const auto& [f, s] : boundary(c))
        for (const auto& [e, v] : image(f)) chain_add(target, e, s * v);
      out = fill(car, target);
    }
    return images_.emplace(c.key(), std::move(out)).first->second;
  }

  /// Exact check of the chain-map identity together with carrier containment.
  bool commutes(const Cell& c) {
    Chain lhs = chain_boundary(image(c));
    Chain rhs;
    for (const auto& [f, s] : boundary(c))
      for (const auto& [e, v] : image(f)) chain_add(rhs, e, s * v);
    if (lhs != rhs) return false;
    const auto& car = carrier(c);
    for (const auto& [e, v] : image(c))
      if (!std::binary_search(car.begin(), car.end(), e)) return false;
    return true;
  }

  Chain apply(const Chain& z) {
    Chain out;
    for (const auto& [c, v] : z)
      for (const auto& [e, w] : image(c)) chain_add(out, e, v * w);
    return out;
  }

 private:
  static bool has(const CellList& car, const Cell& e) { return std::binary_search(car.begin(), car.end(), e); }

  // Shortest path in the carrier's 1-skeleton, neighbours tried in
  // lexicographic order of the next vertex.
  static Chain path(const CellList& car, const Cell& from, const Cell& to) {
    Chain out;
    if (from == to) return out;
    struct Step {
      Cell prev, edge;
      int sign;
    };
    std::map<Cell, Step> parent;
    std::vector<Cell> queue{from};
    parent.emplace(from, Step{from, from, 0});
    for (std::size_t q = 0; q < queue.size(); ++q) {
      Cell v = queue[q];
      const std::pair<Cell, std::pair<Cell, int>> nbrs[4] = {
          {vertex_cell(v.i - 1, v.j), {Cell{v.i - 1, v.j, CellType::HEdge}, -1}},
          {vertex_cell(v.i, v.j - 1), {Cell{v.i, v.j - 1, CellType::VEdge}, -1}},
          {vertex_cell(v.i, v.j + 1), {Cell{v.i, v.j, CellType::VEdge}, 1}},
          {vertex_cell(v.i + 1, v.j), {Cell{v.i, v.j, CellType::HEdge}, 1}},
      };
      for (const auto& [w, es] : nbrs) {
        if (parent.count(w) || !has(car, es.first)) continue;
        parent.emplace(w, Step{v, es.first, es.second});
        if (w == to) {
          for (Cell x = to; x != from;) {
            const Step& s = parent.at(x);
            chain_add(out, s.edge, s.sign);
            x = s.prev;
          }
          return out;
        }
        queue.push_back(w);
      }
    }
    fail(ErrorKind::ChainSolveFailure, "carrier 1-skeleton is disconnected");
  }

  // 2-chain with boundary `target`: the coefficient of each square is the
  // winding number of the cycle around the square's centre.
  static Chain fill(const CellList& car, const Chain& target) {
    std::map<std::int32_t, std::vector<std::pair<std::int32_t, std::int64_t>>> columns;
    for (const auto& [e, v] : target) {
      if (e.dim() != 1) fail(ErrorKind::ChainSolveFailure, "boundary target is not a 1-chain");
      if (e.type == CellType::HEdge) columns[e.i].push_back({e.j, v});
    }
    Chain out;
    for (auto& [i, hs] : columns) {
      std::sort(hs.begin(), hs.end());
      std::int64_t w = 0;
      for (std::size_t k = hs.size(); k-- > 0;) {
        w -= hs[k].second;
        std::int32_t top = hs[k].first, bottom = k > 0 ? hs[k - 1].first : top;
        if (w == 0) continue;
        for (std::int32_t j = bottom; j < top; ++j) {
          Cell sq{i, j, CellType::Square};
          if (!has(car, sq)) fail(ErrorKind::NonAcyclicCarrier, "filling leaves the carrier");
          out[sq] = w;
        }
      }
      if (w != 0) fail(ErrorKind::ChainSolveFailure, "target is not a cycle");
    }
    if (chain_boundary(out) != target) fail(ErrorKind::ChainSolveFailure, "filling does not match its boundary");
    return out;
  }

  CarrierFn carrier_;
  std::unordered_map<std::uint64_t, CellList> carriers_;
  std::unordered_map<std::uint64_t, Chain> images_;
};

/// Carrier of a cell: intersection of |F(Q)| over the P1 squares Q whose
/// closure contains it.
inline ChainSelector::CarrierFn pair_carrier(const IndexPair& pair) {
  return [&pair](const Cell& c) {
    std::optional<CellList> acc;
    for (BoxId q : cofaces_squares(c)) {
      const auto* img = pair.image_of(q);
      if (!img) continue;
      CellList cells = closure_cells(*img);
      acc = acc ? intersect_cells(*acc, cells) : std::move(cells);
    }
    return acc.value_or(CellList{});
  };
}

struct ComponentIndex {
  std::vector<BoxId> boxes;  // squares of this spatial component of S
  CubicalSet x, a;           // (S_c ∪ P0_c, P0_c)
  RelativeHomology homology;
  std::size_t first_generator = 0;
};

struct IndexMap {
  std::vector<ComponentIndex> components;
  std::vector<std::size_t> generator_component;
  // matrix[target][source] on the free H1 generators (column-as-source).
  std::vector<std::vector<BigInt>> matrix;
  std::size_t cells_checked = 0;

  std::size_t generators() const { return generator_component.size(); }
};

/// Index map on H1, computed per spatial component of S so that every
/// generator lives in exactly one component. When `check_squares` is set
/// the chain selector is extended over every square of S and the chain-map
/// identity is verified there too.
inline IndexMap induced_index_map(const IndexPair& pair, bool check_squares = true) {
  IndexMap out;
  std::vector<std::vector<BoxId>> comps = spatial_components(pair.interior);
  std::unordered_map<std::uint64_t, std::uint32_t> comp_of_box;
  for (std::uint32_t c = 0; c < comps.size(); ++c)
    for (BoxId b : comps[c]) comp_of_box.emplace(b.key(), c);

  std::vector<std::vector<BoxId>> exits(comps.size());
  for (BoxId q : pair.p0.squares()) {
    std::vector<std::uint32_t> seen;
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        auto it = comp_of_box.find(BoxId{q.i + di, q.j + dj}.key());
        if (it != comp_of_box.end() && std::find(seen.begin(), seen.end(), it->second) == seen.end()) {
          seen.push_back(it->second);
          exits[it->second].push_back(q);
        }
      }
  }

  std::unordered_map<std::uint64_t, std::uint32_t> comp_of_edge;
  for (std::uint32_t c = 0; c < comps.size(); ++c) {
    std::vector<BoxId> xs = comps[c];
    xs.insert(xs.end(), exits[c].begin(), exits[c].end());
    CubicalSet x(xs), a(exits[c]);
    RelativeHomology h(x, a);
    out.components.push_back(ComponentIndex{comps[c], std::move(x), std::move(a), std::move(h), out.generator_component.size()});
    for (std::size_t g = 0; g < out.components.back().homology.rank(1); ++g) out.generator_component.push_back(c);
    for (const Cell& e : out.components.back().x.cells(1))
      if (out.components.back().homology.is_relative_edge(e)) comp_of_edge.emplace(e.key(), c);
  }

  ChainSelector phi(pair_carrier(pair));
  const std::size_t n = out.generators();
  out.matrix.assign(n, std::vector<BigInt>(n, 0));
  for (std::size_t c = 0; c < out.components.size(); ++c) {
    const auto& comp = out.components[c];
    for (std::size_t g = 0; g < comp.homology.rank(1); ++g) {
      const Chain& z = comp.homology.generators()[g];
      for (const auto& [e, v] : z) {
        if (!phi.commutes(e)) fail(ErrorKind::ChainSolveFailure, "chain map identity fails on an edge");
        ++out.cells_checked;
      }
      Chain fz = phi.apply(z);
      std::map<std::uint32_t, Chain> split;
      for (const auto& [e, v] : fz) {
        auto it = comp_of_edge.find(e.key());
        if (it != comp_of_edge.end()) split[it->second][e] = v;
      }
      std::size_t src = comp.first_generator + g;
      for (const auto& [tc, part] : split) {
        const auto& target = out.components[tc];
        std::vector<BigInt> coords = target.homology.coordinates(part);
        for (std::size_t k = 0; k < coords.size(); ++k) out.matrix[target.first_generator + k][src] = coords[k];
      }
    }
  }
  if (check_squares) {
    for (BoxId q : pair.interior) {
      if (!phi.commutes(square_cell(q))) fail(ErrorKind::ChainSolveFailure, "chain map identity fails on a square");
      ++out.cells_checked;
    }
  }
  return out;
}

}  // namespace hentropy
