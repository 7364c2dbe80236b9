#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "hentropy/box_map.hpp"

using namespace hentropy;

namespace {

Rect2 b0() { return {Interval(-4, 4), Interval(-4, 4)}; }
Rect2 win() { return {Interval(-5, 5), Interval(-5, 5)}; }

GridSpec small_grid() {
  Rect2 b{Interval(-8, 8), Interval(-8, 8)};
  return GridSpec(b, Rational(16), b);
}

struct Digraph {
  int n = 0;
  std::vector<std::vector<bool>> adj;
  std::vector<bool> escape;
};

Digraph random_digraph(std::mt19937& rng, int n, int density) {
  Digraph d{n, std::vector<std::vector<bool>>(n, std::vector<bool>(n, false)), std::vector<bool>(n, false)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) d.adj[i][j] = static_cast<int>(rng() % 100) < density;
    d.escape[i] = rng() % 10 == 0;
  }
  return d;
}

BoxMap to_boxmap(const Digraph& d) {
  std::map<BoxId, std::vector<BoxId>> edges;
  std::set<BoxId> esc;
  for (int i = 0; i < d.n; ++i) {
    edges[{i, 0}];
    for (int j = 0; j < d.n; ++j)
      if (d.adj[i][j]) edges[{i, 0}].push_back({j, 0});
    if (d.escape[i]) esc.insert({i, 0});
  }
  return BoxMap::from_edges(small_grid(), edges, esc);
}

// Largest vertex set in which every vertex keeps an in- and an out-edge:
// the union of all such sets, found by scanning every subset.
std::set<int> invariant_oracle(const Digraph& d) {
  std::set<int> best;
  for (unsigned mask = 1; mask < (1u << d.n); ++mask) {
    bool ok = true;
    for (int v = 0; v < d.n && ok; ++v) {
      if (!(mask >> v & 1)) continue;
      if (d.escape[v]) ok = false;
      bool in = false, out = false;
      for (int w = 0; w < d.n; ++w) {
        if (!(mask >> w & 1)) continue;
        in = in || d.adj[w][v];
        out = out || d.adj[v][w];
      }
      ok = ok && in && out;
    }
    if (ok)
      for (int v = 0; v < d.n; ++v)
        if (mask >> v & 1) best.insert(v);
  }
  return best;
}

}  // namespace

TEST_CASE("edges re-check against the enclosure") {
  GridSpec g(b0(), Rational(4), win());
  BoxMap m = build_boxmap(g, 5.4, -1.0, b0(), 100000);
  REQUIRE(!m.empty());
  for (std::size_t k = 0; k < m.size(); ++k) {
    BoxId q = m.box(k);
    bool esc = false;
    std::vector<BoxId> img = image_boxes(g, q, 5.4, -1.0, &esc);
    CHECK(m.edges(q) == img);
    CHECK(m.escapes(k) == esc);
    // Slicing only ever removes boxes from the single-rectangle image.
    std::vector<BoxId> whole = intersect(meeting_range(g, henon_enclosure(box_of(g, q), 5.4, -1.0)), g.valid_range()).ids();
    CHECK(std::includes(whole.begin(), whole.end(), img.begin(), img.end()));
  }
}

TEST_CASE("images leaving the window set the escape flag") {
  GridSpec g(b0(), Rational(4), win());
  BoxMap m = build_boxmap(g, 5.4, -1.0, b0(), 100000);
  bool any = false;
  for (std::size_t k = 0; k < m.size(); ++k) {
    Rect2 e = henon_enclosure(box_of(g, m.box(k)), 5.4, -1.0);
    if (!win().contains(e)) CHECK(m.escapes(k));
    any = any || m.escapes(k);
  }
  CHECK(any);
}

TEST_CASE("sampled orbits follow the edges") {
  GridSpec g(b0(), Rational(32), win());
  BoxMap m = build_boxmap(g, 5.4, -1.0, b0(), 1'000'000);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t k = 0; k < m.size(); k += 3) {
    Rect2 q = box_of(g, m.box(k));
    for (int s = 0; s < 4; ++s) {
      Point2 p{q.x.lo() + u(rng) * q.x.width(), q.y.lo() + u(rng) * q.y.width()};
      Point2 f = henon_point(p, 5.4, -1.0);
      if (!g.inner_window().contains(f)) continue;
      bool hit = false;
      for (BoxId t : m.edges(m.box(k))) hit = hit || box_of(g, t).contains(f);
      CHECK(hit);
    }
  }
}

TEST_CASE("construction is deterministic") {
  GridSpec g(b0(), Rational(16, 3) * Rational(4), win());
  CHECK(build_boxmap(g, 5.4, -1.0, b0(), 100000) == build_boxmap(g, 5.4, -1.0, b0(), 100000));
}

TEST_CASE("budget is enforced") {
  GridSpec g(b0(), Rational(64), win());
  try {
    build_boxmap(g, 5.4, -1.0, b0(), 10);
    FAIL("expected budget_exceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BudgetExceeded);
  }
}

TEST_CASE("invariant part of small graphs") {
  GridSpec g = small_grid();
  BoxMap chain = BoxMap::from_edges(g, {{{0, 0}, {{1, 0}}}, {{1, 0}, {{2, 0}}}});
  CHECK(invariant_part(chain).empty());
  BoxMap loop = BoxMap::from_edges(g, {{{0, 0}, {{0, 0}, {1, 0}}}});
  BoxMap inv = invariant_part(loop);
  CHECK(inv.boxes() == std::vector<BoxId>{{0, 0}});
  CHECK(inv.edges({0, 0}) == std::vector<BoxId>{{0, 0}});
}

TEST_CASE("invariant part matches the subset oracle") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 150; ++trial) {
    int n = 1 + static_cast<int>(rng() % 12);
    Digraph d = random_digraph(rng, n, 5 + static_cast<int>(rng() % 25));
    BoxMap m = to_boxmap(d);
    BoxMap inv = invariant_part(m);
    std::set<int> got;
    for (BoxId b : inv.boxes()) got.insert(b.i);
    CHECK(got == invariant_oracle(d));
    CHECK(invariant_part(inv) == inv);
  }
}

TEST_CASE("boxes on cycles survive trimming") {
  GridSpec g(b0(), Rational(32), win());
  BoxMap m = build_boxmap(g, 5.4, -1.0, b0(), 1'000'000);
  BoxMap inv = invariant_part(m);
  for (const BoxScc& c : scc_partition(m)) {
    if (!c.cyclic) continue;
    bool escapes = false;
    for (BoxId b : c.boxes) escapes = escapes || m.escapes(*m.index_of(b));
    if (escapes) continue;
    for (BoxId b : c.boxes) CHECK(inv.contains(b));
  }
}

TEST_CASE("scc examples") {
  GridSpec g = small_grid();
  BoxMap two = BoxMap::from_edges(g, {{{0, 0}, {{1, 0}}}, {{1, 0}, {{0, 0}}}, {{2, 0}, {{3, 0}}}, {{3, 0}, {{2, 0}}}});
  auto s = scc_partition(two);
  REQUIRE(s.size() == 2);
  CHECK(s[0].cyclic);
  CHECK(s[1].cyclic);
  BoxMap dag = BoxMap::from_edges(g, {{{0, 0}, {{1, 0}, {2, 0}}}, {{1, 0}, {{2, 0}}}});
  auto t = scc_partition(dag);
  CHECK(t.size() == 3);
  for (const auto& c : t) CHECK(!c.cyclic);
}

TEST_CASE("scc matches transitive closure") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 1 + static_cast<int>(rng() % 14);
    Digraph d = random_digraph(rng, n, 8 + static_cast<int>(rng() % 20));
    auto reach = d.adj;
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (reach[i][k] && reach[k][j]) reach[i][j] = true;
    BoxMap m = to_boxmap(d);
    std::vector<int> comp(n, -1);
    std::vector<bool> cyc(n);
    auto parts = scc_partition(m);
    for (std::size_t c = 0; c < parts.size(); ++c)
      for (BoxId b : parts[c].boxes) {
        comp[b.i] = static_cast<int>(c);
        cyc[b.i] = parts[c].cyclic;
      }
    for (int i = 0; i < n; ++i) {
      CHECK(cyc[i] == reach[i][i]);
      for (int j = 0; j < n; ++j) CHECK((comp[i] == comp[j]) == (i == j || (reach[i][j] && reach[j][i])));
    }
  }
}

TEST_CASE("spatial components examples") {
  CHECK(spatial_components({{0, 0}, {1, 1}}).size() == 1);
  CHECK(spatial_components({{0, 0}, {2, 0}}).size() == 2);
  CHECK(spatial_components({}).empty());
}

TEST_CASE("spatial components match a flood fill") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 12;
    std::vector<std::vector<int>> cell(n, std::vector<int>(n, 0));
    std::vector<BoxId> s;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (static_cast<int>(rng() % 100) < 30) {
          cell[i][j] = 1;
          s.push_back({i - 5, j - 5});
        }
    int count = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (cell[i][j] != 1) continue;
        ++count;
        std::vector<std::pair<int, int>> st{{i, j}};
        cell[i][j] = 2;
        while (!st.empty()) {
          auto [x, y] = st.back();
          st.pop_back();
          for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy) {
              int u = x + dx, v = y + dy;
              if (u < 0 || v < 0 || u >= n || v >= n || cell[u][v] != 1) continue;
              cell[u][v] = 2;
              st.push_back({u, v});
            }
        }
      }
    auto comps = spatial_components(s);
    CHECK(static_cast<int>(comps.size()) == count);
    std::size_t total = 0;
    for (const auto& c : comps) total += c.size();
    CHECK(total == s.size());
  }
}
