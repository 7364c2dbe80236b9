#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>

#include "hentropy/errors.hpp"

namespace hentropy {

/// Small exact rational p/q with q > 0, always stored in lowest terms.
/// Used for grid resolutions, where denominators stay tiny.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1) : num_(num), den_(den) {
    if (den_ == 0) fail(ErrorKind::InvalidArgument, "rational with zero denominator");
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  std::string to_string() const {
    return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
  }

  /// Accepts "p", "p/q", or a decimal such as "5.5" (converted exactly when
  /// the decimal has at most 9 fractional digits).
  static Rational parse(std::string_view text) {
    auto parse_int = [&](std::string_view s) -> std::int64_t {
      if (s.empty()) fail(ErrorKind::ParseError, "empty rational component in '" + std::string(text) + "'");
      std::size_t pos = 0;
      bool neg = false;
      if (s[0] == '-' || s[0] == '+') {
        neg = s[0] == '-';
        pos = 1;
      }
      if (pos >= s.size()) fail(ErrorKind::ParseError, "bad rational '" + std::string(text) + "'");
      std::int64_t v = 0;
      for (; pos < s.size(); ++pos) {
        char c = s[pos];
        if (c < '0' || c > '9') fail(ErrorKind::ParseError, "bad rational '" + std::string(text) + "'");
        v = v * 10 + (c - '0');
        if (v > (std::int64_t{1} << 50)) fail(ErrorKind::ParseError, "rational too large '" + std::string(text) + "'");
      }
      return neg ? -v : v;
    };
    auto slash = text.find('/');
    if (slash != std::string_view::npos) return {parse_int(text.substr(0, slash)), parse_int(text.substr(slash + 1))};
    auto dot = text.find('.');
    if (dot == std::string_view::npos) return {parse_int(text), 1};
    std::string_view frac = text.substr(dot + 1);
    if (frac.size() > 9) fail(ErrorKind::ParseError, "too many decimals in '" + std::string(text) + "'");
    std::int64_t scale = 1;
    for (std::size_t k = 0; k < frac.size(); ++k) scale *= 10;
    std::string whole(text.substr(0, dot));
    bool neg = !whole.empty() && whole[0] == '-';
    if (whole.empty() || whole == "-" || whole == "+") whole += "0";
    std::int64_t ip = parse_int(whole);
    std::int64_t fp = frac.empty() ? 0 : parse_int(frac);
    std::int64_t n = (ip < 0 ? -ip : ip) * scale + fp;
    return {neg ? -n : n, scale};
  }

  friend Rational operator*(const Rational& a, const Rational& b) {
    return {a.num_ * b.num_, a.den_ * b.den_};
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) fail(ErrorKind::InvalidArgument, "rational division by zero");
    return {a.num_ * b.den_, a.den_ * b.num_};
  }
  friend bool operator==(const Rational& a, const Rational& b) { return a.num_ == b.num_ && a.den_ == b.den_; }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    __int128 l = static_cast<__int128>(a.num_) * b.den_;
    __int128 r = static_cast<__int128>(b.num_) * a.den_;
    return l < r ? std::strong_ordering::less : (l > r ? std::strong_ordering::greater : std::strong_ordering::equal);
  }

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

inline std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.to_string(); }

/// Closest rational to x with denominator at most max_den; ties go to the
/// smaller denominator. Walks the continued-fraction convergents and the
/// best semiconvergent, like Python's Fraction.limit_denominator.
inline Rational nearest_rational(long double x, std::int64_t max_den) {
  if (max_den < 1) fail(ErrorKind::InvalidArgument, "max_den must be positive");
  bool neg = x < 0;
  if (neg) x = -x;
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  long double rest = x;
  for (int iter = 0; iter < 64; ++iter) {
    long double a_f = std::floor(rest);
    std::int64_t a = static_cast<std::int64_t>(a_f);
    std::int64_t q2 = q0 + a * q1;
    if (q2 > max_den) break;
    std::int64_t p2 = p0 + a * p1;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    long double frac = rest - a_f;
    if (frac < 1e-15L) break;
    rest = 1.0L / frac;
  }
  // Best semiconvergent below the cap.
  std::int64_t k = (max_den - q0) / q1;
  std::int64_t ps = p0 + k * p1, qs = q0 + k * q1;
  long double d1 = std::fabs(x - static_cast<long double>(p1) / q1);
  long double ds = std::fabs(x - static_cast<long double>(ps) / qs);
  Rational best = (ds < d1 || (ds == d1 && qs < q1)) ? Rational(ps, qs) : Rational(p1, q1);
  return neg ? Rational(-best.num(), best.den()) : best;
}

}  // namespace hentropy
