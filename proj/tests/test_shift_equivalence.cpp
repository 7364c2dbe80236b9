#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>
#include <set>

#include "hentropy/shift_equivalence.hpp"

using namespace hentropy;

namespace {

using Edges = std::set<std::pair<std::size_t, std::size_t>>;  // (source, target)

Edges edges_of(const IntMatrix& m) {
  Edges e;
  for (std::size_t t = 0; t < m.size(); ++t)
    for (std::size_t s = 0; s < m.size(); ++s)
      if (m(t, s) != 0) e.insert({s, t});
  return e;
}

std::set<std::size_t> image(const Edges& e, std::size_t v) {
  std::set<std::size_t> out;
  for (auto [s, t] : e)
    if (s == v) out.insert(t);
  return out;
}

std::set<std::size_t> preimage(const Edges& e, std::size_t v) {
  std::set<std::size_t> out;
  for (auto [s, t] : e)
    if (t == v) out.insert(s);
  return out;
}

bool disjoint(const std::set<std::size_t>& x, const std::set<std::size_t>& y) {
  for (auto v : x)
    if (y.count(v)) return false;
  return true;
}

// Set-theoretic forward condition on a 0/1 graph.
bool forward_oracle(const IntMatrix& m, std::size_t i, std::size_t j) {
  if (i == j) return false;
  Edges e = edges_of(m);
  return image(e, i) == image(e, j) && disjoint(preimage(e, i), preimage(e, j));
}

// Spectral radius as the largest over irreducible diagonal blocks, whose
// Perron roots are simple and therefore well conditioned. Blocks come from
// a Floyd-Warshall reachability closure.
double sp(const IntMatrix& m) {
  const std::size_t n = m.size();
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r[i][j] = m(i, j) != 0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = true;
  double best = 0.0;
  std::vector<bool> done(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (done[v] || !r[v][v]) continue;
    std::vector<std::size_t> block;
    for (std::size_t w = 0; w < n; ++w)
      if (r[v][w] && r[w][v]) block.push_back(w), done[w] = true;
    const auto b = static_cast<Eigen::Index>(block.size());
    Eigen::MatrixXd a(b, b);
    for (Eigen::Index i = 0; i < b; ++i)
      for (Eigen::Index j = 0; j < b; ++j) a(i, j) = static_cast<double>(m(block[i], block[j]));
    best = std::max(best, a.eigenvalues().cwiseAbs().maxCoeff());
  }
  return best;
}

// Characteristic polynomial by Faddeev-LeVerrier, exact in integers;
// coefficients of x^n, x^(n-1), ..., x^0.
std::vector<std::int64_t> charpoly(const IntMatrix& a) {
  const std::size_t n = a.size();
  std::vector<std::int64_t> c(n + 1, 0);
  c[0] = 1;
  IntMatrix mk(n);  // M_0 = 0
  for (std::size_t k = 1; k <= n; ++k) {
    IntMatrix next(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        std::int64_t v = (i == j) ? c[k - 1] : 0;
        for (std::size_t l = 0; l < n; ++l) v += a(i, l) * mk(l, j);
        next(i, j) = v;
      }
    mk = next;
    std::int64_t tr = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < n; ++l) tr += a(i, l) * mk(l, i);
    REQUIRE(tr % static_cast<std::int64_t>(k) == 0);
    c[k] = -tr / static_cast<std::int64_t>(k);
  }
  return c;
}

// Equal nonzero spectra: the polynomials agree up to a power of x.
bool same_nonzero_spectrum(const IntMatrix& a, const IntMatrix& b) {
  auto strip = [](std::vector<std::int64_t> c) {
    while (c.size() > 1 && c.back() == 0) c.pop_back();
    return c;
  };
  return strip(charpoly(a)) == strip(charpoly(b));
}

IntMatrix random_matrix(std::mt19937& rng, std::size_t n, double density) {
  std::bernoulli_distribution coin(density);
  IntMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = coin(rng) ? 1 : 0;
  return m;
}

// In-split of vertex v of a random matrix: the copy gets v's image and a
// share of its preimages, so (v, copy) satisfies the forward condition.
IntMatrix random_split(std::mt19937& rng, std::size_t n) {
  IntMatrix base = random_matrix(rng, n - 1, 0.45);
  std::size_t v = rng() % (n - 1);
  IntMatrix m(n);
  for (std::size_t t = 0; t + 1 < n; ++t)
    for (std::size_t s = 0; s + 1 < n; ++s) m(t, s) = base(t, s);
  for (std::size_t t = 0; t + 1 < n; ++t) m(t, n - 1) = base(t, v);
  for (std::size_t s = 0; s < n; ++s)
    if (m(v, s) && rng() % 2) {
      m(v, s) = 0;
      m(n - 1, s) = 1;
    }
  if (base(v, v)) m(n - 1, n - 1) = m(n - 1, v), m(v, n - 1) = m(v, v);
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return m.permuted(p);
}

IntMatrix random_any(std::mt19937& rng, std::size_t nmax) {
  std::size_t n = 2 + rng() % (nmax - 1);
  if (rng() % 2) return random_split(rng, n);
  double density = 0.15 + 0.1 * static_cast<double>(rng() % 4);
  return random_matrix(rng, n, density);
}

// Figure 3 in row-as-source order a, b, c.
IntMatrix figure3() { return load_matrix(std::string(HENTROPY_DATA_DIR) + "/figure3.txt"); }

}  // namespace

TEST_CASE("Figure 3 forward amalgamation") {
  IntMatrix a = figure3();
  CHECK(forward_condition(a, 0, 2));
  CHECK_FALSE(backward_condition(a, 0, 2));
  Amalgamation am = amalgamate(a, 0, 2, Direction::Forward);
  // merged symbol ac = 0, b = 1: ac->ac, ac->b, b->ac
  CHECK(edges_of(am.result) == Edges{{0, 0}, {0, 1}, {1, 0}});
  Reduction r = reduce(a, Strategy::Greedy);
  CHECK(r.result.size() == 2);
  CHECK(r.certificate.steps.size() == 1);
  CHECK(r.certificate.steps[0].kind == "forward");
  CHECK(r.certificate.verify());
  Reduction e = reduce(a, Strategy::Exhaustive);
  CHECK(e.result.size() == 2);
}

TEST_CASE("full 2-shift admits no amalgamation") {
  IntMatrix f{{1, 1}, {1, 1}};
  CHECK_FALSE(forward_condition(f, 0, 1));
  CHECK_FALSE(backward_condition(f, 0, 1));
  CHECK_FALSE(forward_condition(f, 0, 0));
  CHECK(reduce(f, Strategy::Greedy).result == f);
  CHECK(reduce(f, Strategy::Exhaustive).certificate.steps.empty());
  CHECK_THROWS_AS(amalgamate(f, 0, 1, Direction::Forward), Error);
}

TEST_CASE("two-symbol hand-computed product") {
  // 0->0 and 1->0: same image {0}, preimages {0} and {} disjoint
  IntMatrix a{{1, 1}, {0, 0}};
  Amalgamation am = amalgamate(a, 0, 1, Direction::Forward);
  CHECK(am.result == IntMatrix{{1}});
  CHECK(am.step.r == Mat(IntMatrix{{1, 1}, {0, 0}}) * Mat(IntMatrix{{1, 0}, {0, 1}}) * [] {
    Mat x(2, 1);
    x(0, 0) = 1;
    return x;
  }());
  // 0->0 and 0->1 seen backwards: same preimage {0}, images {0} and {} disjoint
  IntMatrix b{{1, 0}, {1, 0}};
  Amalgamation bm = amalgamate(b, 0, 1, Direction::Backward);
  CHECK(bm.result == IntMatrix{{1}});
}

TEST_CASE("conditions agree with the set oracle") {
  // every 0/1 matrix with n <= 3, then random ones with n = 4, 5
  for (std::size_t n = 1; n <= 3; ++n)
    for (std::uint32_t bits = 0; bits < (1u << (n * n)); ++bits) {
      IntMatrix m(n);
      for (std::size_t k = 0; k < n * n; ++k) m(k / n, k % n) = (bits >> k) & 1;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          CHECK(forward_condition(m, i, j) == forward_oracle(m, i, j));
          CHECK(backward_condition(m, i, j) == forward_oracle(m.transpose(), i, j));
        }
    }
  std::mt19937 rng(17);
  for (int trial = 0; trial < 400; ++trial) {
    IntMatrix m = trial % 2 ? random_split(rng, 4 + trial % 2) : random_matrix(rng, 4 + trial % 2, 0.3);
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t j = 0; j < m.size(); ++j) CHECK(forward_condition(m, i, j) == forward_oracle(m, i, j));
  }
}

TEST_CASE("backward condition is the forward condition of the transpose") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    IntMatrix m = random_any(rng, 8);
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t j = 0; j < m.size(); ++j)
        CHECK(backward_condition(m, i, j) == forward_condition(m.transpose(), i, j));
  }
}

TEST_CASE("random amalgamations are exact elementary equivalences") {
  std::mt19937 rng(29);
  std::size_t tested = 0;
  for (int trial = 0; trial < 600; ++trial) {
    IntMatrix a = random_any(rng, 8);
    double spa = sp(a);
    for (auto [d, i, j] : valid_amalgamations(a)) {
      Amalgamation am = amalgamate(a, i, j, d);
      CHECK(am.step.r * am.step.s == Mat(a));
      CHECK(am.step.s * am.step.r == Mat(am.result));
      CHECK(std::abs(sp(am.result) - spa) <= 1e-9);
      CHECK(same_nonzero_spectrum(a, am.result));
      // graph quotient: j collapses onto i, later symbols shift down
      auto q = [&](std::size_t v) { return v == j ? i : (v > j ? v - 1 : v); };
      Edges quotient;
      for (auto [s, t] : edges_of(a)) quotient.insert({q(s), q(t)});
      CHECK(edges_of(am.result) == quotient);
      CHECK(am.result.is_binary());
      ++tested;
    }
  }
  CHECK(tested >= 500);
}

TEST_CASE("exhaustive reduction is never larger than greedy") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    IntMatrix a = random_any(rng, 7);
    Reduction g = reduce(a, Strategy::Greedy);
    Reduction e = reduce(a, Strategy::Exhaustive);
    CHECK(e.result.size() <= g.result.size());
    CHECK(g.certificate.verify());
    CHECK(e.certificate.verify());
    CHECK(std::abs(sp(g.result) - sp(a)) <= 1e-9);
    CHECK(std::abs(sp(e.result) - sp(a)) <= 1e-9);
  }
  CHECK_THROWS_AS(reduce(IntMatrix(17), Strategy::Exhaustive), Error);
}

TEST_CASE("canonical form is a permutation invariant") {
  std::mt19937 rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    IntMatrix a = random_any(rng, 8);
    std::vector<std::size_t> p(a.size());
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    CHECK(canonical_key(a) == canonical_key(a.permuted(p)));
    auto iso = find_isomorphism(a, a.permuted(p));
    REQUIRE(iso);
    CHECK(a.permuted(*iso) == a.permuted(p));
  }
}

TEST_CASE("conjugacy up to permutation") {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    IntMatrix a = random_any(rng, 8);
    std::vector<std::size_t> p(a.size());
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    Conjugacy c = conjugate_up_to_permutation(a, a.permuted(p));
    CHECK(c.certificate.verify());
    CHECK(c.certificate.start == a);
    CHECK(c.certificate.end() == a.permuted(p));
  }
  try {
    conjugate_up_to_permutation(IntMatrix{{1, 1}, {1, 1}}, IntMatrix{{0, 1}, {1, 1}});
    FAIL("expected NotDecided");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotDecided);
    CHECK(std::string(e.what()).find("0.693147") != std::string::npos);
    CHECK(std::string(e.what()).find("0.481212") != std::string::npos);
  }
}

TEST_CASE("region tracking keeps every box") {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    IntMatrix a = random_split(rng, 3 + trial % 6);
    std::vector<std::vector<int>> regions(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) regions[k] = {static_cast<int>(2 * k), static_cast<int>(2 * k + 1)};
    Reduction r = reduce(a, Strategy::Exhaustive);
    auto merged = track_regions(r.certificate, regions);
    CHECK(merged.size() == r.result.size());
    std::vector<int> all;
    for (auto& g : merged) all.insert(all.end(), g.begin(), g.end());
    std::sort(all.begin(), all.end());
    CHECK(all.size() == 2 * a.size());
    for (std::size_t k = 0; k < all.size(); ++k) CHECK(all[k] == static_cast<int>(k));
  }
}

TEST_CASE("certificate JSON round trip and tamper detection") {
  std::mt19937 rng(47);
  IntMatrix a = random_split(rng, 6);
  Reduction r = reduce(a, Strategy::Greedy);
  REQUIRE(!r.certificate.steps.empty());
  SSECertificate back = certificate_from_json(nlohmann::json::parse(certificate_to_json(r.certificate).dump()));
  CHECK(back.verify());
  CHECK(back.end() == r.result);
  back.steps.back().s(0, 0) += 1;
  REQUIRE(back.first_failure().has_value());
  CHECK(*back.first_failure() == back.steps.size() - 1);
}
