#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <vector>

#include "hentropy/errors.hpp"
#include "hentropy/interval.hpp"
#include "hentropy/rational.hpp"

namespace hentropy {

/// Lattice coordinates of a grid box relative to the grid anchor.
struct BoxId {
  std::int32_t i = 0;
  std::int32_t j = 0;

  friend auto operator<=>(const BoxId&, const BoxId&) = default;

  std::uint64_t key() const {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) | static_cast<std::uint32_t>(j);
  }
  static BoxId from_key(std::uint64_t k) {
    return {static_cast<std::int32_t>(static_cast<std::uint32_t>(k >> 32)),
            static_cast<std::int32_t>(static_cast<std::uint32_t>(k & 0xffffffffu))};
  }
};

struct BoxIdHash {
  std::size_t operator()(const BoxId& b) const noexcept {
    std::uint64_t x = b.key() * 0x9e3779b97f4a7c15ULL;
    return static_cast<std::size_t>(x ^ (x >> 29));
  }
};

/// Two closed grid boxes touch (share at least a corner) or coincide.
inline bool boxes_touch(BoxId a, BoxId b) { return std::abs(a.i - b.i) <= 1 && std::abs(a.j - b.j) <= 1; }

/// Inclusive index rectangle [i0, i1] x [j0, j1]; empty when i0 > i1 or j0 > j1.
struct BoxRange {
  std::int32_t i0 = 0, i1 = -1, j0 = 0, j1 = -1;

  bool empty() const { return i0 > i1 || j0 > j1; }
  std::int64_t size() const { return empty() ? 0 : std::int64_t(i1 - i0 + 1) * (j1 - j0 + 1); }
  bool contains(BoxId b) const { return i0 <= b.i && b.i <= i1 && j0 <= b.j && b.j <= j1; }

  template <typename F>
  void for_each(F&& f) const {
    for (std::int32_t i = i0; i <= i1; ++i)
      for (std::int32_t j = j0; j <= j1; ++j) f(BoxId{i, j});
  }
  std::vector<BoxId> ids() const {
    std::vector<BoxId> out;
    out.reserve(static_cast<std::size_t>(size()));
    for_each([&](BoxId b) { out.push_back(b); });
    return out;
  }
};

inline BoxRange intersect(const BoxRange& a, const BoxRange& b) {
  return {std::max(a.i0, b.i0), std::min(a.i1, b.i1), std::max(a.j0, b.j0), std::min(a.j1, b.j1)};
}

/// Uniform grid over the plane. Box side per axis is side(B0) / resolution and
/// the lattice is anchored at the centre of B0, so box (0,0) has its lower-left
/// corner there. Only boxes lying inside `window` are valid.
class GridSpec {
 public:
  GridSpec(const Rect2& b0, Rational resolution, const Rect2& window)
      : b0_(b0), resolution_(resolution), window_(window) {
    if (resolution.num() <= 0) fail(ErrorKind::InvalidArgument, "resolution must be positive");
    if (!(b0.x.width() > 0.0) || !(b0.y.width() > 0.0)) fail(ErrorKind::InvalidArgument, "B0 must have positive size");
    if (!window.contains(b0)) fail(ErrorKind::InvalidArgument, "B0 must lie inside the window");
    for (int axis = 0; axis < 2; ++axis) {
      const Interval& side = axis == 0 ? b0.x : b0.y;
      Axis& ax = axes_[axis];
      ax.center = (Interval(side.lo()) + Interval(side.hi())) / Interval(2.0);
      ax.width = Interval(side.hi()) - Interval(side.lo());
      ax.step = ax.width * Interval(static_cast<double>(resolution.den())) /
                Interval(static_cast<double>(resolution.num()));
      if (!(ax.step.lo() > 0.0)) fail(ErrorKind::InvalidArgument, "box width underflow");
      ax.approx_center = ax.center.mid();
      ax.approx_step = ax.step.mid();
      const Interval& win = axis == 0 ? window.x : window.y;
      // Valid boxes lie entirely inside the window.
      ax.valid_lo = first_line_at_or_above(ax, win.lo());
      ax.valid_hi = last_line_at_or_below(ax, win.hi()) - 1;
      if (ax.valid_lo > ax.valid_hi) fail(ErrorKind::InvalidArgument, "window holds no grid box");
    }
    inner_window_ = {Interval(line(0, axes_[0].valid_lo).hi(), line(0, axes_[0].valid_hi + 1).lo()),
                     Interval(line(1, axes_[1].valid_lo).hi(), line(1, axes_[1].valid_hi + 1).lo())};
  }

  /// Window defaulting to B0 grown by a quarter of its half-width per side.
  static Rect2 default_window(const Rect2& b0) {
    double gx = 0.25 * 0.5 * b0.x.width(), gy = 0.25 * 0.5 * b0.y.width();
    return {Interval(b0.x.lo() - gx, b0.x.hi() + gx), Interval(b0.y.lo() - gy, b0.y.hi() + gy)};
  }

  const Rect2& b0() const { return b0_; }
  const Rational& resolution() const { return resolution_; }
  const Rect2& window() const { return window_; }
  /// Union of all valid boxes (conservatively rounded inward).
  const Rect2& inner_window() const { return inner_window_; }
  BoxRange valid_range() const { return {axes_[0].valid_lo, axes_[0].valid_hi, axes_[1].valid_lo, axes_[1].valid_hi}; }
  bool is_valid(BoxId id) const { return valid_range().contains(id); }
  /// Box side per axis as an enclosure of the exact value.
  const Interval& step(int axis) const { return axes_[axis].step; }

  /// Enclosure of the k-th lattice line along the given axis.
  Interval line(int axis, std::int64_t k) const {
    const Axis& ax = axes_[axis];
    return ax.center + Interval(static_cast<double>(k)) * ax.step;
  }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.b0_ == b.b0_ && a.resolution_ == b.resolution_ && a.window_ == b.window_;
  }

 private:
  struct Axis {
    Interval center, width, step;
    double approx_center = 0.0, approx_step = 1.0;
    std::int32_t valid_lo = 0, valid_hi = -1;
  };

  std::int64_t guess(const Axis& ax, double v) const {
    return static_cast<std::int64_t>(std::floor((v - ax.approx_center) / ax.approx_step));
  }
  Interval line_of(const Axis& ax, std::int64_t k) const {
    return ax.center + Interval(static_cast<double>(k)) * ax.step;
  }
  std::int32_t first_line_at_or_above(const Axis& ax, double v) const {
    std::int64_t k = guess(ax, v) - 1;
    while (line_of(ax, k).lo() < v) ++k;
    while (line_of(ax, k - 1).lo() >= v) --k;
    return static_cast<std::int32_t>(k);
  }
  std::int32_t last_line_at_or_below(const Axis& ax, double v) const {
    std::int64_t k = guess(ax, v) + 1;
    while (line_of(ax, k).hi() > v) --k;
    while (line_of(ax, k + 1).hi() <= v) ++k;
    return static_cast<std::int32_t>(k);
  }


 public:
  // Largest k whose line is certainly <= v.
  std::int64_t floor_index(int axis, double v) const {
    const Axis& ax = axes_[axis];
    std::int64_t k = guess(ax, v) + 1;
    while (line_of(ax, k).hi() > v) --k;
    while (line_of(ax, k + 1).hi() <= v) ++k;
    return k;
  }
  // Smallest k whose line is certainly >= v.
  std::int64_t ceil_index(int axis, double v) const {
    const Axis& ax = axes_[axis];
    std::int64_t k = guess(ax, v);
    while (line_of(ax, k).lo() < v) ++k;
    while (line_of(ax, k - 1).lo() >= v) --k;
    return k;
  }
  // Smallest k whose line could be >= v.
  std::int64_t ceil_index_loose(int axis, double v) const {
    const Axis& ax = axes_[axis];
    std::int64_t k = guess(ax, v);
    while (line_of(ax, k).hi() < v) ++k;
    while (line_of(ax, k - 1).hi() >= v) --k;
    return k;
  }
  // Largest k whose line could be <= v.
  std::int64_t floor_index_loose(int axis, double v) const {
    const Axis& ax = axes_[axis];
    std::int64_t k = guess(ax, v) + 1;
    while (line_of(ax, k).lo() > v) --k;
    while (line_of(ax, k + 1).lo() <= v) ++k;
    return k;
  }

 private:
  Rect2 b0_;
  Rational resolution_;
  Rect2 window_;
  Rect2 inner_window_;
  Axis axes_[2];
};

/// Closed box of the grid (outward-rounded when the lattice lines are inexact).
inline Rect2 box_of(const GridSpec& g, BoxId id) {
  Interval xl = g.line(0, id.i), xh = g.line(0, std::int64_t(id.i) + 1);
  Interval yl = g.line(1, id.j), yh = g.line(1, std::int64_t(id.j) + 1);
  return {Interval(xl.lo(), xh.hi()), Interval(yl.lo(), yh.hi())};
}

inline std::int32_t clamp32(std::int64_t v) {
  return static_cast<std::int32_t>(std::clamp<std::int64_t>(v, INT32_MIN / 2, INT32_MAX / 2));
}

/// Index rectangle of the minimal set of boxes whose union contains R
/// (half-open convention: a rectangle edge lying on a lattice line does not
/// pull in the neighbouring box). Not clipped to the window.
inline BoxRange minimal_range(const GridSpec& g, const Rect2& r) {
  BoxRange out;
  out.i0 = clamp32(g.floor_index(0, r.x.lo()));
  out.i1 = clamp32(std::max<std::int64_t>(g.ceil_index(0, r.x.hi()) - 1, out.i0));
  out.j0 = clamp32(g.floor_index(1, r.y.lo()));
  out.j1 = clamp32(std::max<std::int64_t>(g.ceil_index(1, r.y.hi()) - 1, out.j0));
  return out;
}

/// Index rectangle of every closed box that meets the closed rectangle R.
/// Not clipped to the window.
inline BoxRange meeting_range(const GridSpec& g, const Rect2& r) {
  BoxRange out;
  out.i0 = clamp32(g.ceil_index_loose(0, r.x.lo()) - 1);
  out.i1 = clamp32(g.floor_index_loose(0, r.x.hi()));
  out.j0 = clamp32(g.ceil_index_loose(1, r.y.lo()) - 1);
  out.j1 = clamp32(g.floor_index_loose(1, r.y.hi()));
  return out;
}

/// Minimal ordered set of valid boxes covering R ∩ window.
inline std::vector<BoxId> cover(const GridSpec& g, const Rect2& r) {
  const Rect2& w = g.inner_window();
  if (!r.intersects(w)) fail(ErrorKind::EmptyCover, "rectangle misses the computational window");
  Rect2 clipped{Interval(std::max(r.x.lo(), w.x.lo()), std::min(r.x.hi(), w.x.hi())),
                Interval(std::max(r.y.lo(), w.y.lo()), std::min(r.y.hi(), w.y.hi()))};
  BoxRange range = intersect(minimal_range(g, clipped), g.valid_range());
  if (range.empty()) fail(ErrorKind::EmptyCover, "rectangle misses the computational window");
  return range.ids();
}

/// Ordered set of valid boxes meeting the closed rectangle R.
inline std::vector<BoxId> meeting(const GridSpec& g, const Rect2& r) {
  return intersect(meeting_range(g, r), g.valid_range()).ids();
}

/// r_k = r_min * 2^(k/m), each rounded to the nearest rational with
/// denominator <= 64, until the first entry >= r_max.
inline std::vector<Rational> resolution_schedule(Rational r_min, Rational r_max, int steps_per_doubling) {
  if (!(r_min.num() > 0) || !(r_min < r_max)) fail(ErrorKind::InvalidArgument, "need 0 < r_min < r_max");
  if (steps_per_doubling < 1) fail(ErrorKind::InvalidArgument, "steps_per_doubling must be >= 1");
  std::vector<Rational> out;
  for (int k = 0;; ++k) {
    int whole = k / steps_per_doubling, part = k % steps_per_doubling;
    long double v = static_cast<long double>(r_min.num()) / r_min.den() * std::ldexp(1.0L, whole) *
                    std::exp2(static_cast<long double>(part) / steps_per_doubling);
    Rational r = nearest_rational(v, 64);
    if (out.empty() || out.back() < r) out.push_back(r);
    if (!(r < r_max)) break;
    if (k > 100000) fail(ErrorKind::InvalidArgument, "schedule too long");
  }
  return out;
}

}  // namespace hentropy
