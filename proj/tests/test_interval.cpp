#include <catch2/catch_amalgamated.hpp>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <random>

#include "hentropy/interval.hpp"

using namespace hentropy;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

// a - x^2 + b y is exact in 166 bits for double inputs.
Big henon_x_exact(double x, double y, double a, double b) {
  return Big(a) - Big(x) * Big(x) + Big(b) * Big(y);
}

bool encloses(const Interval& iv, const Big& v) { return Big(iv.lo()) <= v && v <= Big(iv.hi()); }

}  // namespace

TEST_CASE("interval arithmetic examples") {
  CHECK(Interval(1, 2) + Interval(3, 4) == Interval(4, 6));
  CHECK(sqr(Interval(-1, 2)) == Interval(0, 4));
  CHECK(Interval(1, 2) * Interval(-3, 1) == Interval(-6, 2));
  CHECK(-Interval(1, 2) == Interval(-2, -1));
  CHECK(Interval(1, 2) - Interval(3, 4) == Interval(-3, -1));
  CHECK(scale(-2.0, Interval(1, 3)) == Interval(-6, -2));
}

TEST_CASE("sqr is tighter than mul") {
  Interval i(-1, 2);
  CHECK((i * i).contains(sqr(i)));
  CHECK(!(sqr(i) == i * i));
  Interval p(0.5, 3);
  CHECK(sqr(p).contains(Interval(0.25, 9)));
}

TEST_CASE("inexact operations round outward") {
  Interval s = Interval(0.1) + Interval(0.2);
  CHECK(encloses(s, Big(0.1) + Big(0.2)));
  CHECK(s.lo() < s.hi());
  Interval q = Interval(1.0) / Interval(3.0);
  CHECK(encloses(q, Big(1) / Big(3)));
  Interval m = Interval(0.1) * Interval(0.7);
  CHECK(encloses(m, Big(0.1) * Big(0.7)));
}

TEST_CASE("enclosure of the origin") {
  Rect2 e = henon_enclosure({Interval(0.0), Interval(0.0)}, 5.4, -1.0);
  CHECK(e.x.contains(5.4));
  CHECK(e.y.contains(0.0));
  CHECK(e.x.hi() <= std::nextafter(std::nextafter(5.4, 10.0), 10.0));
  CHECK(e.x.lo() >= std::nextafter(std::nextafter(5.4, 0.0), 0.0));
}

TEST_CASE("enclosure of the unit square") {
  Rect2 e = henon_enclosure({Interval(0, 1), Interval(0, 1)}, 5.4, -1.0);
  // Exact endpoints a - 2 and a for the double nearest 5.4.
  CHECK(encloses(e.x, Big(5.4) - 2));
  CHECK(encloses(e.x, Big(5.4)));
  CHECK(e.x.width() < 2.0 + 1e-12);
  CHECK(e.y.contains(Interval(0, 1)));
}

TEST_CASE("enclosure is monotone in the box") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-4, 4), w(0, 1);
  for (int k = 0; k < 2000; ++k) {
    double x0 = u(rng), y0 = u(rng);
    Rect2 big{Interval(x0, x0 + 2 * w(rng) + 0.01), Interval(y0, y0 + 2 * w(rng) + 0.01)};
    double fx = w(rng), fy = w(rng);
    double xl = big.x.lo() + fx * big.x.width() * 0.5, yl = big.y.lo() + fy * big.y.width() * 0.5;
    Rect2 small{Interval(xl, std::min(big.x.hi(), xl + 0.1)), Interval(yl, std::min(big.y.hi(), yl + 0.1))};
    REQUIRE(big.contains(small));
    CHECK(henon_enclosure(big, 5.4, -1).contains(henon_enclosure(small, 5.4, -1)));
  }
}

TEST_CASE("sampled points land in the enclosure") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> center(-5, 5), unit(0, 1), pa(4.0, 6.5), pb(-1.5, 1.5), lw(-12, 0.5);
  long violations = 0;
  for (int k = 0; k < 200000; ++k) {
    double wx = std::pow(10.0, lw(rng)), wy = std::pow(10.0, lw(rng));
    double cx = center(rng), cy = center(rng);
    Rect2 box{Interval(cx, cx + wx), Interval(cy, cy + wy)};
    double a = pa(rng), b = pb(rng);
    if (k % 7 == 0) b = -1.0;
    Rect2 e = henon_enclosure(box, a, b);
    for (int s = 0; s < 5; ++s) {
      double x = s == 0 ? box.x.lo() : s == 1 ? box.x.hi() : std::min(box.x.hi(), box.x.lo() + unit(rng) * wx);
      double y = s == 0 ? box.y.hi() : s == 1 ? box.y.lo() : std::min(box.y.hi(), box.y.lo() + unit(rng) * wy);
      if (!encloses(e.x, henon_x_exact(x, y, a, b)) || !e.y.contains(x)) ++violations;
    }
  }
  CHECK(violations == 0);
}
