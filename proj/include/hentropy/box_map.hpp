#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hentropy/box_cover.hpp"
#include "hentropy/graph.hpp"

namespace hentropy {

/// Combinatorial outer approximation: a digraph on grid boxes. Boxes are
/// stored in ascending id order and edges as sorted index lists.
class BoxMap {
 public:
  BoxMap(GridSpec grid, std::vector<BoxId> boxes, Csr edges, std::vector<std::uint8_t> escape,
         double a = std::numeric_limits<double>::quiet_NaN(), double b = std::numeric_limits<double>::quiet_NaN())
      : grid_(std::move(grid)), boxes_(std::move(boxes)), edges_(std::move(edges)), escape_(std::move(escape)), a_(a), b_(b) {
    if (edges_.size() != boxes_.size() || escape_.size() != boxes_.size())
      fail(ErrorKind::InvalidArgument, "box map arrays disagree in size");
  }

  /// Builds a map from explicit edge lists; targets not listed as keys
  /// become active boxes without out-edges.
  static BoxMap from_edges(const GridSpec& g, const std::map<BoxId, std::vector<BoxId>>& edges,
                           const std::set<BoxId>& escaping = {}) {
    std::set<BoxId> all;
    for (const auto& [s, ts] : edges) {
      all.insert(s);
      all.insert(ts.begin(), ts.end());
    }
    all.insert(escaping.begin(), escaping.end());
    std::vector<BoxId> boxes(all.begin(), all.end());
    auto idx = [&](BoxId id) {
      return static_cast<std::uint32_t>(std::lower_bound(boxes.begin(), boxes.end(), id) - boxes.begin());
    };
    Csr csr;
    std::vector<std::uint8_t> esc(boxes.size(), 0);
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      auto it = edges.find(boxes[k]);
      std::vector<std::uint32_t> t;
      if (it != edges.end())
        for (BoxId id : it->second) t.push_back(idx(id));
      std::sort(t.begin(), t.end());
      t.erase(std::unique(t.begin(), t.end()), t.end());
      csr.targets.insert(csr.targets.end(), t.begin(), t.end());
      csr.offsets.push_back(static_cast<std::uint32_t>(csr.targets.size()));
      esc[k] = escaping.count(boxes[k]) ? 1 : 0;
    }
    return BoxMap(g, std::move(boxes), std::move(csr), std::move(esc));
  }

  const GridSpec& grid() const { return grid_; }
  double a() const { return a_; }
  double b() const { return b_; }
  std::size_t size() const { return boxes_.size(); }
  bool empty() const { return boxes_.empty(); }
  const std::vector<BoxId>& boxes() const { return boxes_; }
  BoxId box(std::size_t k) const { return boxes_[k]; }
  const Csr& csr() const { return edges_; }
  std::span<const std::uint32_t> out(std::size_t k) const { return edges_.out(k); }
  bool escapes(std::size_t k) const { return escape_[k] != 0; }
  const std::vector<std::uint8_t>& escape_flags() const { return escape_; }
  std::size_t edge_count() const { return edges_.targets.size(); }

  std::optional<std::uint32_t> index_of(BoxId id) const {
    auto it = std::lower_bound(boxes_.begin(), boxes_.end(), id);
    if (it == boxes_.end() || *it != id) return std::nullopt;
    return static_cast<std::uint32_t>(it - boxes_.begin());
  }
  bool contains(BoxId id) const { return index_of(id).has_value(); }

  std::vector<BoxId> edges(BoxId id) const {
    std::vector<BoxId> out_ids;
    if (auto k = index_of(id))
      for (auto t : out(*k)) out_ids.push_back(boxes_[t]);
    return out_ids;
  }

  /// Sub-map on the boxes with keep[k] set; edges leaving the set are dropped.
  BoxMap restricted(const std::vector<bool>& keep) const {
    std::vector<std::uint32_t> remap(size(), UINT32_MAX);
    std::vector<BoxId> nb;
    for (std::size_t k = 0; k < size(); ++k)
      if (keep[k]) {
        remap[k] = static_cast<std::uint32_t>(nb.size());
        nb.push_back(boxes_[k]);
      }
    Csr csr;
    std::vector<std::uint8_t> esc;
    for (std::size_t k = 0; k < size(); ++k) {
      if (!keep[k]) continue;
      for (auto t : out(k))
        if (keep[t]) csr.targets.push_back(remap[t]);
      csr.offsets.push_back(static_cast<std::uint32_t>(csr.targets.size()));
      esc.push_back(escape_[k]);
    }
    return BoxMap(grid_, std::move(nb), std::move(csr), std::move(esc), a_, b_);
  }

  friend bool operator==(const BoxMap& x, const BoxMap& y) {
    auto same = [](double p, double q) { return (std::isnan(p) && std::isnan(q)) || p == q; };
    return x.grid_ == y.grid_ && x.boxes_ == y.boxes_ && x.edges_.offsets == y.edges_.offsets &&
           x.edges_.targets == y.edges_.targets && x.escape_ == y.escape_ && same(x.a_, y.a_) && same(x.b_, y.b_);
  }

 private:
  GridSpec grid_;
  std::vector<BoxId> boxes_;
  Csr edges_;
  std::vector<std::uint8_t> escape_;
  double a_, b_;
};

/// Every valid box meeting the enclosure of f(box), with the box split
/// into `pieces` vertical slices first (0 picks a count from |x| so each
/// slice's image is about one box wide). Sorted ascending.
/// `escapes` is set when some enclosure is not inside the union of valid boxes.
inline std::vector<BoxId> image_boxes(const GridSpec& g, BoxId id, double a, double b, bool* escapes = nullptr,
                                      int pieces = 0) {
  Rect2 box = box_of(g, id);
  if (pieces <= 0) {
    double m = std::max(std::abs(box.x.lo()), std::abs(box.x.hi()));
    pieces = static_cast<int>(std::clamp(std::ceil(2.0 * m) + 1.0, 1.0, 64.0));
  }
  const BoxRange valid = g.valid_range();
  bool esc = false;
  std::vector<BoxId> out;
  Interval lo(box.x.lo()), width = Interval(box.x.hi()) - lo;
  for (int k = 0; k < pieces; ++k) {
    // slices are outward rounded, so consecutive ones overlap and cover
    double x0 = k == 0 ? box.x.lo() : (lo + width * Interval(k) / Interval(pieces)).lo();
    double x1 = k + 1 == pieces ? box.x.hi() : (lo + width * Interval(k + 1) / Interval(pieces)).hi();
    Rect2 enc = henon_enclosure({Interval(x0, x1), box.y}, a, b);
    if (!g.inner_window().contains(enc)) esc = true;
    intersect(meeting_range(g, enc), valid).for_each([&](BoxId t) { out.push_back(t); });
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (escapes) *escapes = esc;
  return out;
}

/// Image range of a box as a single rectangle: every valid box meeting the
/// enclosure of f(box).
inline BoxRange image_range(const GridSpec& g, BoxId id, double a, double b, bool* escapes = nullptr) {
  Rect2 enc = henon_enclosure(box_of(g, id), a, b);
  if (escapes) *escapes = !g.inner_window().contains(enc);
  return intersect(meeting_range(g, enc), g.valid_range());
}

/// Forward closure of the seed boxes under the outer approximation of the
/// Henon map, restricted to the window.
inline BoxMap build_boxmap_from(const GridSpec& g, double a, double b, std::vector<BoxId> seeds, std::size_t max_boxes,
                                int pieces = 0) {
  if (max_boxes < 1) fail(ErrorKind::InvalidArgument, "max_boxes must be positive");
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  index.reserve(seeds.size() * 4);
  std::vector<BoxId> order;
  std::vector<std::vector<BoxId>> images;
  std::vector<std::uint8_t> esc;
  auto add = [&](BoxId id) {
    auto [it, fresh] = index.try_emplace(id.key(), static_cast<std::uint32_t>(order.size()));
    if (!fresh) return;
    if (order.size() >= max_boxes)
      fail(ErrorKind::BudgetExceeded, "outer approximation needs more than " + std::to_string(max_boxes) + " boxes");
    order.push_back(id);
  };
  for (BoxId s : seeds)
    if (g.is_valid(s)) add(s);
  for (std::size_t k = 0; k < order.size(); ++k) {
    bool e = false;
    std::vector<BoxId> img = image_boxes(g, order[k], a, b, &e, pieces);
    esc.push_back(e ? 1 : 0);
    for (BoxId t : img) add(t);
    images.push_back(std::move(img));
  }

  std::vector<std::uint32_t> perm(order.size());
  for (std::uint32_t k = 0; k < perm.size(); ++k) perm[k] = k;
  std::sort(perm.begin(), perm.end(), [&](auto x, auto y) { return order[x] < order[y]; });
  std::vector<std::uint32_t> rank(order.size());
  for (std::uint32_t k = 0; k < perm.size(); ++k) rank[perm[k]] = k;

  std::vector<BoxId> boxes(order.size());
  std::vector<std::uint8_t> flags(order.size());
  Csr csr;
  csr.offsets.reserve(order.size() + 1);
  for (std::uint32_t k = 0; k < perm.size(); ++k) {
    std::uint32_t src = perm[k];
    boxes[k] = order[src];
    flags[k] = esc[src];
    std::size_t start = csr.targets.size();
    for (BoxId t : images[src]) csr.targets.push_back(rank[index.at(t.key())]);
    std::sort(csr.targets.begin() + static_cast<std::ptrdiff_t>(start), csr.targets.end());
    csr.offsets.push_back(static_cast<std::uint32_t>(csr.targets.size()));
  }
  return BoxMap(g, std::move(boxes), std::move(csr), std::move(flags), a, b);
}

/// Closure of cover(seed) under the outer approximation.
inline BoxMap build_boxmap(const GridSpec& g, double a, double b, const Rect2& seed, std::size_t max_boxes,
                           int pieces = 0) {
  if (max_boxes < 1) fail(ErrorKind::InvalidArgument, "max_boxes must be positive");
  std::vector<BoxId> seeds = cover(g, seed);
  if (seeds.size() > max_boxes)
    fail(ErrorKind::BudgetExceeded, "seed cover alone exceeds " + std::to_string(max_boxes) + " boxes");
  return build_boxmap_from(g, a, b, std::move(seeds), max_boxes, pieces);
}

/// Largest sub-map where every box has an in-edge and an out-edge inside the
/// set and no escape flag; obtained by repeatedly deleting offenders.
inline BoxMap invariant_part(const BoxMap& m) {
  const std::size_t n = m.size();
  Csr rev = m.csr().transposed();
  std::vector<bool> alive(n, true);
  std::vector<std::uint32_t> indeg(n, 0), outdeg(n, 0), queue;
  for (std::size_t k = 0; k < n; ++k)
    if (m.escapes(k)) alive[k] = false;
  for (std::size_t k = 0; k < n; ++k) {
    if (!alive[k]) continue;
    for (auto t : m.out(k))
      if (alive[t]) {
        ++outdeg[k];
        ++indeg[t];
      }
  }
  for (std::uint32_t k = 0; k < n; ++k)
    if (alive[k] && (indeg[k] == 0 || outdeg[k] == 0)) {
      alive[k] = false;
      queue.push_back(k);
    }
  for (std::size_t q = 0; q < queue.size(); ++q) {
    std::uint32_t v = queue[q];
    for (auto t : m.out(v))
      if (alive[t] && --indeg[t] == 0) {
        alive[t] = false;
        queue.push_back(t);
      }
    for (auto s : rev.out(v))
      if (alive[s] && --outdeg[s] == 0) {
        alive[s] = false;
        queue.push_back(s);
      }
  }
  // Escaping boxes were dead from the start; their neighbours still need
  // their degrees reduced, which the counts above already reflect.
  return m.restricted(alive);
}

struct BoxScc {
  std::vector<BoxId> boxes;
  bool cyclic = false;
};

inline std::vector<BoxScc> scc_partition(const BoxMap& m) {
  SccPartition p = strongly_connected_components(m.csr());
  std::vector<BoxScc> out(p.members.size());
  for (std::size_t c = 0; c < p.members.size(); ++c) {
    out[c].cyclic = p.cyclic[c];
    for (auto v : p.members[c]) out[c].boxes.push_back(m.box(v));
  }
  return out;
}

/// Components under closed-box contact (shared edge or corner), each sorted,
/// ordered by their smallest box.
inline std::vector<std::vector<BoxId>> spatial_components(std::vector<BoxId> s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  std::unordered_map<std::uint64_t, std::uint32_t> where;
  where.reserve(s.size() * 2);
  for (std::uint32_t k = 0; k < s.size(); ++k) where.emplace(s[k].key(), k);
  std::vector<std::int32_t> label(s.size(), -1);
  std::vector<std::vector<BoxId>> comps;
  std::vector<std::uint32_t> stack;
  for (std::uint32_t k = 0; k < s.size(); ++k) {
    if (label[k] >= 0) continue;
    std::int32_t c = static_cast<std::int32_t>(comps.size());
    comps.emplace_back();
    label[k] = c;
    stack.push_back(k);
    while (!stack.empty()) {
      std::uint32_t v = stack.back();
      stack.pop_back();
      comps[c].push_back(s[v]);
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          auto it = where.find(BoxId{s[v].i + di, s[v].j + dj}.key());
          if (it != where.end() && label[it->second] < 0) {
            label[it->second] = c;
            stack.push_back(it->second);
          }
        }
    }
    std::sort(comps[c].begin(), comps[c].end());
  }
  return comps;
}

inline std::vector<std::vector<BoxId>> spatial_components(const std::vector<BoxId>& s, const GridSpec&) {
  return spatial_components(s);
}

}  // namespace hentropy
