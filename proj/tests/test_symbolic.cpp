#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>
#include <sstream>

#include "hentropy/symbolic.hpp"

using namespace hentropy;

namespace {

// Independent oracle: largest eigenvalue modulus from a dense eigensolver.
double log_sp_oracle(const IntMatrix& m) {
  const auto n = static_cast<Eigen::Index>(m.size());
  if (n == 0) return 0.0;
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = static_cast<double>(m(i, j));
  double sp = a.eigenvalues().cwiseAbs().maxCoeff();
  return sp > 1e-12 ? std::log(sp) : -INFINITY;
}

IntMatrix tdms() { return load_matrix(std::string(HENTROPY_DATA_DIR) + "/tdms.txt"); }

}  // namespace

TEST_CASE("full 2-shift") {
  EntropyBound b = entropy_lower_bound(IntMatrix{{1, 1}, {1, 1}});
  CHECK(b.value >= 0.69314);
  CHECK(b.value <= std::log(2.0));
  CHECK(std::abs(entropy_estimate(IntMatrix{{1, 1}, {1, 1}}) - std::log(2.0)) < 1e-6);
}

TEST_CASE("golden mean shift") {
  EntropyBound b = entropy_lower_bound(IntMatrix{{0, 1}, {1, 1}});
  double exact = std::log((1.0 + std::sqrt(5.0)) / 2.0);
  CHECK(std::abs(b.value - exact) < 1e-4);
  CHECK(b.value <= exact);
  CHECK(verify_entropy_witness(IntMatrix{{0, 1}, {1, 1}}, b));
}

TEST_CASE("T_DMS entropy") {
  IntMatrix t = tdms();
  REQUIRE(t.size() == 8);
  EntropyBound b = entropy_lower_bound(t);
  CHECK(std::abs(b.value - 0.6774) <= 5e-5);
  CHECK(b.value <= log_sp_oracle(t));
  CHECK(std::abs(entropy_estimate(t) - 0.6774) < 1e-4);
}

TEST_CASE("permutation and acyclic matrices") {
  IntMatrix perm{{0, 1, 0}, {0, 0, 1}, {1, 0, 0}};
  CHECK(entropy_lower_bound(perm).value == 0.0);
  CHECK(std::abs(entropy_estimate(perm)) < 1e-9);
  IntMatrix dag{{0, 0}, {1, 0}};
  EntropyBound b = entropy_lower_bound(dag);
  CHECK(b.value == 0.0);
  CHECK(b.scc.empty());
}

TEST_CASE("log enclosure contains the true logarithm") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  for (int k = 0; k < 20000; ++k) {
    double x = std::exp(u(rng));
    Interval l = log_enclosure(x);
    long double ref = std::log(static_cast<long double>(x));
    CHECK(static_cast<long double>(l.lo()) <= ref);
    CHECK(static_cast<long double>(l.hi()) >= ref);
    CHECK(l.width() < 1e-13 * std::max(1.0, std::abs(l.lo())));
  }
}

TEST_CASE("bound is stable under transpose and symbol permutation") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 8;
    IntMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = rng() % 100 < 40;
    std::vector<std::size_t> p(n);
    for (std::size_t k = 0; k < n; ++k) p[k] = k;
    std::shuffle(p.begin(), p.end(), rng);
    double v = entropy_lower_bound(m).value;
    double oracle = log_sp_oracle(m);
    CHECK(v <= std::max(0.0, oracle) + 1e-12);
    CHECK(v <= entropy_estimate(m) + 1e-9);
    CHECK(std::abs(entropy_lower_bound(m.transpose()).value - v) < 1e-6);
    CHECK(std::abs(entropy_lower_bound(m.permuted(p)).value - v) < 1e-6);
  }
}

TEST_CASE("matrix file format") {
  std::istringstream ok("2\n1 1\n0 1\n");
  IntMatrix m = parse_matrix(ok);
  // Row = source: 0 -> 0, 0 -> 1, 1 -> 1.
  CHECK(m(0, 0) == 1);
  CHECK(m(1, 0) == 1);
  CHECK(m(0, 1) == 0);
  CHECK(format_matrix(m) == "2\n1 1\n0 1\n");
  std::istringstream bad("2\n1 1\n0 2\n");
  try {
    parse_matrix(bad, "bad.txt");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK(std::string(e.what()).find("bad.txt:3") != std::string::npos);
  }
}
