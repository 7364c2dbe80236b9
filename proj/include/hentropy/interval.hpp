#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "hentropy/errors.hpp"

namespace hentropy {

// Directed rounding is emulated with error-free transformations: each
// operation is evaluated in round-to-nearest, the exact rounding error is
// recovered (TwoSum / FMA residual), and the result is moved one ulp outward
// only when the error points that way. Exact operations stay exact.
namespace rounding {

inline constexpr const char* kMechanism = "error-free-transform directed rounding";

// Below this magnitude FMA residuals may lose exactness to gradual underflow,
// so results are widened unconditionally.
inline constexpr double kTiny = 0x1p-960;

inline double next_down(double x) { return std::nextafter(x, -std::numeric_limits<double>::infinity()); }
inline double next_up(double x) { return std::nextafter(x, std::numeric_limits<double>::infinity()); }

inline void require_finite(double x, const char* op) {
  if (!std::isfinite(x)) fail(ErrorKind::EnclosureOverflow, std::string("non-finite endpoint in ") + op);
}

/// Returns (s, e) with s = fl(a + b) and a + b = s + e exactly.
inline std::pair<double, double> two_sum(double a, double b) {
  double s = a + b;
  double bp = s - a;
  double ap = s - bp;
  return {s, (a - ap) + (b - bp)};
}

inline double add_down(double a, double b) {
  auto [s, e] = two_sum(a, b);
  require_finite(s, "add");
  return e < 0.0 ? next_down(s) : s;
}

inline double add_up(double a, double b) {
  auto [s, e] = two_sum(a, b);
  require_finite(s, "add");
  return e > 0.0 ? next_up(s) : s;
}

inline double mul_down(double a, double b) {
  double p = a * b;
  require_finite(p, "mul");
  if (a == 0.0 || b == 0.0) return 0.0;
  if (std::fabs(p) < kTiny) return next_down(p);
  double e = std::fma(a, b, -p);
  return e < 0.0 ? next_down(p) : p;
}

inline double mul_up(double a, double b) {
  double p = a * b;
  require_finite(p, "mul");
  if (a == 0.0 || b == 0.0) return 0.0;
  if (std::fabs(p) < kTiny) return next_up(p);
  double e = std::fma(a, b, -p);
  return e > 0.0 ? next_up(p) : p;
}

// The remainder a - q*b of a correctly rounded quotient is representable, so
// the FMA below is exact away from underflow.
inline int div_error_sign(double a, double b, double q) {
  double r = std::fma(-q, b, a);
  if (r == 0.0) return 0;
  return ((r > 0.0) == (b > 0.0)) ? 1 : -1;
}

inline double div_down(double a, double b) {
  if (b == 0.0) fail(ErrorKind::InvalidArgument, "division by zero");
  double q = a / b;
  require_finite(q, "div");
  if (a == 0.0) return 0.0;
  if (std::fabs(q) < kTiny) return next_down(q);
  return div_error_sign(a, b, q) < 0 ? next_down(q) : q;
}

inline double div_up(double a, double b) {
  if (b == 0.0) fail(ErrorKind::InvalidArgument, "division by zero");
  double q = a / b;
  require_finite(q, "div");
  if (a == 0.0) return 0.0;
  if (std::fabs(q) < kTiny) return next_up(q);
  return div_error_sign(a, b, q) > 0 ? next_up(q) : q;
}

}  // namespace rounding

/// Closed interval [lo, hi] with finite endpoints.
class Interval {
 public:
  constexpr Interval() = default;
  constexpr explicit Interval(double point) : lo_(point), hi_(point) {}
  Interval(double lo, double hi) : lo_(lo), hi_(hi) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
      fail(ErrorKind::InvalidArgument, "interval requires finite lo <= hi");
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double width() const { return hi_ - lo_; }
  double mid() const { return 0.5 * (lo_ + hi_); }

  bool contains(double x) const { return lo_ <= x && x <= hi_; }
  bool contains(const Interval& o) const { return lo_ <= o.lo_ && o.hi_ <= hi_; }
  bool contains_zero() const { return lo_ <= 0.0 && 0.0 <= hi_; }
  bool intersects(const Interval& o) const { return lo_ <= o.hi_ && o.lo_ <= hi_; }

  friend bool operator==(const Interval&, const Interval&) = default;

 private:
  double lo_ = 0.0;
  double hi_ = 0.0;
};

inline std::ostream& operator<<(std::ostream& os, const Interval& iv) {
  return os << '[' << iv.lo() << ", " << iv.hi() << ']';
}

inline Interval operator+(const Interval& a, const Interval& b) {
  return {rounding::add_down(a.lo(), b.lo()), rounding::add_up(a.hi(), b.hi())};
}

inline Interval operator-(const Interval& a) { return {-a.hi(), -a.lo()}; }

inline Interval operator-(const Interval& a, const Interval& b) {
  return {rounding::add_down(a.lo(), -b.hi()), rounding::add_up(a.hi(), -b.lo())};
}

inline Interval operator*(const Interval& a, const Interval& b) {
  using rounding::mul_down;
  using rounding::mul_up;
  double lo = std::min({mul_down(a.lo(), b.lo()), mul_down(a.lo(), b.hi()), mul_down(a.hi(), b.lo()),
                        mul_down(a.hi(), b.hi())});
  double hi = std::max({mul_up(a.lo(), b.lo()), mul_up(a.lo(), b.hi()), mul_up(a.hi(), b.lo()),
                        mul_up(a.hi(), b.hi())});
  return {lo, hi};
}

/// Tight square range; lower bound 0 when the interval spans zero.
inline Interval sqr(const Interval& a) {
  using rounding::mul_down;
  using rounding::mul_up;
  if (a.lo() >= 0.0) return {mul_down(a.lo(), a.lo()), mul_up(a.hi(), a.hi())};
  if (a.hi() <= 0.0) return {mul_down(a.hi(), a.hi()), mul_up(a.lo(), a.lo())};
  return {0.0, std::max(mul_up(a.lo(), a.lo()), mul_up(a.hi(), a.hi()))};
}

inline Interval scale(double c, const Interval& a) {
  if (!std::isfinite(c)) fail(ErrorKind::InvalidArgument, "non-finite scale constant");
  if (c >= 0.0) return {rounding::mul_down(c, a.lo()), rounding::mul_up(c, a.hi())};
  return {rounding::mul_down(c, a.hi()), rounding::mul_up(c, a.lo())};
}

/// Division by an interval that does not contain zero.
inline Interval operator/(const Interval& a, const Interval& b) {
  if (b.contains_zero()) fail(ErrorKind::InvalidArgument, "interval division by an interval containing zero");
  using rounding::div_down;
  using rounding::div_up;
  double lo = std::min({div_down(a.lo(), b.lo()), div_down(a.lo(), b.hi()), div_down(a.hi(), b.lo()),
                        div_down(a.hi(), b.hi())});
  double hi = std::max({div_up(a.lo(), b.lo()), div_up(a.lo(), b.hi()), div_up(a.hi(), b.lo()),
                        div_up(a.hi(), b.hi())});
  return {lo, hi};
}

inline Interval hull(const Interval& a, const Interval& b) {
  return {std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi())};
}

enum class ArithOp { Add, Sub, Neg, Mul, Sqr, Scale };

/// Single entry point over the elementary operations. For Scale the constant
/// is `c`; unary operations ignore `b`.
inline Interval iv_arith(ArithOp op, const Interval& a, const Interval& b = Interval{}, double c = 0.0) {
  switch (op) {
    case ArithOp::Add: return a + b;
    case ArithOp::Sub: return a - b;
    case ArithOp::Neg: return -a;
    case ArithOp::Mul: return a * b;
    case ArithOp::Sqr: return sqr(a);
    case ArithOp::Scale: return scale(c, a);
  }
  return a;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box in the (x, y) phase plane.
struct Rect2 {
  Interval x;
  Interval y;

  bool contains(Point2 p) const { return x.contains(p.x) && y.contains(p.y); }
  bool contains(const Rect2& o) const { return x.contains(o.x) && y.contains(o.y); }
  bool intersects(const Rect2& o) const { return x.intersects(o.x) && y.intersects(o.y); }

  friend bool operator==(const Rect2&, const Rect2&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Rect2& r) { return os << r.x << 'x' << r.y; }

inline Rect2 hull(const Rect2& a, const Rect2& b) { return {hull(a.x, b.x), hull(a.y, b.y)}; }

/// Rigorous enclosure of f_{a,b}(x, y) = (a - x^2 + b y, x) over a box.
inline Rect2 henon_enclosure(const Rect2& box, double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b)) fail(ErrorKind::InvalidArgument, "Henon parameters must be finite");
  Interval xnew = Interval(a) - sqr(box.x) + scale(b, box.y);
  return {xnew, box.x};
}

/// Plain double evaluation, used for sampling oracles and orbit plots.
inline Point2 henon_point(Point2 p, double a, double b) { return {a - p.x * p.x + b * p.y, p.x}; }

}  // namespace hentropy
