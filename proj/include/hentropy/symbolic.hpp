#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <map>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hentropy/conley_index.hpp"
#include "hentropy/digest.hpp"
#include "hentropy/graph.hpp"
#include "hentropy/interval.hpp"

namespace hentropy {

/// Square nonnegative integer matrix. For transition matrices entry
/// (i, j) = 1 means symbol j can be followed by symbol i (column = source).
class IntMatrix {
 public:
  IntMatrix() = default;
  explicit IntMatrix(std::size_t n) : n_(n), a_(n * n, 0) {}
  IntMatrix(std::initializer_list<std::initializer_list<std::int64_t>> rows) : n_(rows.size()), a_() {
    for (const auto& r : rows) {
      if (r.size() != n_) fail(ErrorKind::InvalidArgument, "matrix must be square");
      a_.insert(a_.end(), r.begin(), r.end());
    }
  }

  std::size_t size() const { return n_; }
  std::int64_t& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  std::int64_t operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  const std::vector<std::int64_t>& data() const { return a_; }

  IntMatrix transpose() const {
    IntMatrix t(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }
  bool is_binary() const {
    return std::all_of(a_.begin(), a_.end(), [](auto v) { return v == 0 || v == 1; });
  }
  /// Relabel symbols: result(p[i], p[j]) = this(i, j).
  IntMatrix permuted(const std::vector<std::size_t>& p) const {
    IntMatrix out(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) out(p[i], p[j]) = (*this)(i, j);
    return out;
  }
  /// Graph with an arc j -> i for every nonzero entry (i, j).
  Csr source_graph() const {
    Csr g;
    for (std::size_t j = 0; j < n_; ++j) {
      for (std::size_t i = 0; i < n_; ++i)
        if ((*this)(i, j) != 0) g.targets.push_back(static_cast<std::uint32_t>(i));
      g.offsets.push_back(static_cast<std::uint32_t>(g.targets.size()));
    }
    return g;
  }
  std::string digest() const {
    Fnv1a h;
    h.add(static_cast<std::uint64_t>(n_));
    for (auto v : a_) h.add(static_cast<std::uint64_t>(v));
    return h.hex();
  }

  friend bool operator==(const IntMatrix&, const IntMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::int64_t> a_;
};

using TransitionMatrix = IntMatrix;

inline IntMatrix operator*(const IntMatrix& x, const IntMatrix& y) {
  IntMatrix out(x.size());
  std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      std::int64_t a = x(i, k);
      if (a == 0) continue;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += a * y(k, j);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix text format: first line n, then n rows of n entries, row = source.

/// With `multiplicities` set, any nonnegative integer entry is accepted
/// (run directories store multigraph matrices that way).
inline TransitionMatrix parse_matrix(std::istream& in, const std::string& name = "<input>", bool multiplicities = false) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  auto err = [&](const std::string& what) {
    fail(ErrorKind::ParseError, name + ":" + std::to_string(lineno) + ": " + what);
  };
  if (!next_line()) err("missing dimension line");
  std::istringstream head(line);
  long long n = -1;
  std::string extra;
  if (!(head >> n) || n < 0 || (head >> extra)) err("expected a single nonnegative dimension");
  TransitionMatrix m(static_cast<std::size_t>(n));
  for (long long r = 0; r < n; ++r) {
    if (!next_line()) err("expected " + std::to_string(n) + " rows, found " + std::to_string(r));
    std::istringstream row(line);
    std::string tok;
    long long c = 0;
    while (row >> tok) {
      std::int64_t v = 0;
      if (multiplicities) {
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size() || v < 0) err("entry '" + tok + "' is not a nonnegative integer");
      } else {
        if (tok != "0" && tok != "1") err("entry '" + tok + "' is not 0 or 1");
        v = tok == "1" ? 1 : 0;
      }
      if (c >= n) err("row has more than " + std::to_string(n) + " entries");
      m(static_cast<std::size_t>(c), static_cast<std::size_t>(r)) = v;
      ++c;
    }
    if (c != n) err("row has " + std::to_string(c) + " entries, expected " + std::to_string(n));
  }
  if (next_line()) err("unexpected trailing content");
  return m;
}

inline TransitionMatrix load_matrix(const std::string& path, bool multiplicities = false) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ParseError, "cannot open " + path);
  return parse_matrix(in, path, multiplicities);
}

inline std::string format_matrix(const TransitionMatrix& m) {
  std::ostringstream out;
  out << m.size() << '\n';
  for (std::size_t s = 0; s < m.size(); ++s) {
    for (std::size_t t = 0; t < m.size(); ++t) out << (t ? " " : "") << m(t, s);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Certified logarithm.

namespace detail {

inline int bit_length(const BigInt& v) { return v == 0 ? 0 : static_cast<int>(boost::multiprecision::msb(v)) + 1; }

/// Largest double d = m * 2^-s with d <= p/q, m < 2^53 (p, q > 0).
inline double rational_floor_double(const BigInt& p, const BigInt& q) {
  int s = 52 - (bit_length(p) - bit_length(q));
  for (;;) {
    BigInt m = s >= 0 ? BigInt(p << s) / q : p / BigInt(q << -s);
    if (m >= (BigInt(1) << 53)) {
      --s;
      continue;
    }
    return std::ldexp(static_cast<double>(m), -s);
  }
}

}  // namespace detail

inline constexpr double kLn2Lo = 0x1.62e42fefa39efp-1;

/// Enclosure of log(x) for a positive double x, via x = t * 2^e with
/// t in [1, 2) and log t = 2 atanh((t-1)/(t+1)) summed for 30 terms.
inline Interval log_enclosure(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) fail(ErrorKind::InvalidArgument, "log of a non-positive value");
  int e = 0;
  double f = std::frexp(x, &e);
  double t = 2.0 * f;
  --e;
  Interval ti(t);
  Interval z = (ti - Interval(1.0)) / (ti + Interval(1.0));
  Interval z2 = z * z, term = z, sum(0.0);
  for (int k = 0; k < 30; ++k) {
    sum = sum + term / Interval(static_cast<double>(2 * k + 1));
    term = term * z2;
  }
  // Tail of the series: below z^61 / (61 (1 - z^2)) with z <= 1/3.
  double tail = rounding::mul_up(term.hi(), 9.0 / 8.0 / 61.0 + 1e-12);
  Interval series = scale(2.0, Interval(sum.lo(), rounding::add_up(sum.hi(), tail)));
  Interval ln2(kLn2Lo, rounding::next_up(kLn2Lo));
  return scale(static_cast<double>(e), ln2) + series;
}

/// Downward-rounded log(p/q) for positive integers p, q.
inline double log_lower(const BigInt& p, const BigInt& q) {
  if (p <= 0 || q <= 0) fail(ErrorKind::InvalidArgument, "log_lower needs a positive rational");
  return log_enclosure(detail::rational_floor_double(p, q)).lo();
}

// ---------------------------------------------------------------------------
// Entropy bounds.

struct EntropyBound {
  double value = 0.0;                 // certified lower bound of log sp
  BigInt beta_num = 0, beta_den = 1;  // exact Collatz-Wielandt ratio
  std::vector<BigInt> witness;        // positive vector on the SCC
  std::vector<std::size_t> scc;       // symbols of the witness SCC
  double estimate = 0.0;              // non-rigorous log sp
};

namespace detail {

inline std::vector<long double> power_iterate(const IntMatrix& m, const std::vector<std::size_t>& idx, int iterations,
                                              long double shift) {
  const std::size_t k = idx.size();
  std::vector<long double> v(k, 1.0L), w(k);
  for (int it = 0; it < iterations; ++it) {
    long double mx = 0;
    for (std::size_t r = 0; r < k; ++r) {
      long double acc = shift * v[r];
      for (std::size_t c = 0; c < k; ++c) acc += static_cast<long double>(m(idx[r], idx[c])) * v[c];
      w[r] = acc;
      mx = std::max(mx, acc);
    }
    if (!(mx > 0)) break;
    for (std::size_t r = 0; r < k; ++r) v[r] = w[r] / mx;
  }
  return v;
}

/// Exact min_i (Mv)_i / v_i over the SCC for the integer rounding of v.
inline std::pair<BigInt, BigInt> collatz_wielandt(const IntMatrix& m, const std::vector<std::size_t>& idx,
                                                  const std::vector<long double>& vf, std::vector<BigInt>& v) {
  const std::size_t k = idx.size();
  long double mx = *std::max_element(vf.begin(), vf.end());
  v.assign(k, 0);
  for (std::size_t r = 0; r < k; ++r) {
    long double scaled = std::floor(std::ldexp(vf[r] / mx, 60));
    v[r] = scaled < 1.0L ? BigInt(1) : BigInt(static_cast<unsigned long long>(scaled));
  }
  BigInt best_num = -1, best_den = 1;
  for (std::size_t r = 0; r < k; ++r) {
    BigInt acc = 0;
    for (std::size_t c = 0; c < k; ++c) {
      auto a = m(idx[r], idx[c]);
      if (a != 0) acc += BigInt(a) * v[c];
    }
    if (best_num < 0 || acc * best_den < best_num * v[r]) {
      best_num = acc;
      best_den = v[r];
    }
  }
  return {best_num, best_den};
}

inline long double spectral_estimate(const IntMatrix& m, const std::vector<std::size_t>& idx, int iterations) {
  // Shifting by the identity keeps periodic components from oscillating.
  std::vector<long double> v = power_iterate(m, idx, iterations, 1.0L);
  long double num = 0, den = 0;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    long double acc = 0;
    for (std::size_t c = 0; c < idx.size(); ++c) acc += static_cast<long double>(m(idx[r], idx[c])) * v[c];
    num += acc;
    den += v[r];
  }
  return den > 0 ? num / den : 0.0L;
}

}  // namespace detail

/// Non-rigorous log spectral radius, for plots.
inline double entropy_estimate(const IntMatrix& m, int iterations = 4000) {
  SccPartition p = strongly_connected_components(m.source_graph());
  long double best = 0;
  for (std::size_t c = 0; c < p.members.size(); ++c) {
    if (!p.cyclic[c]) continue;
    std::vector<std::size_t> idx(p.members[c].begin(), p.members[c].end());
    best = std::max(best, detail::spectral_estimate(m, idx, iterations));
  }
  return best > 0 ? static_cast<double>(std::log(best)) : 0.0;
}

/// Certified lower bound on log sp(A): on every cyclic SCC a rounded power
/// iterate v gives sp >= min (Av)_i / v_i exactly; the best ratio's log is
/// rounded down. Matrices without cycles give 0 with an empty witness.
inline EntropyBound entropy_lower_bound(const IntMatrix& m, int iterations = 60) {
  for (auto v : m.data())
    if (v < 0) fail(ErrorKind::InvalidArgument, "matrix must be nonnegative");
  EntropyBound out;
  SccPartition p = strongly_connected_components(m.source_graph());
  bool have = false;
  for (std::size_t c = 0; c < p.members.size(); ++c) {
    if (!p.cyclic[c]) continue;
    std::vector<std::size_t> idx(p.members[c].begin(), p.members[c].end());
    for (long double shift : {0.0L, 1.0L}) {
      std::vector<BigInt> v;
      auto [num, den] = detail::collatz_wielandt(m, idx, detail::power_iterate(m, idx, iterations, shift), v);
      if (!have || num * out.beta_den > out.beta_num * den) {
        have = true;
        out.beta_num = num;
        out.beta_den = den;
        out.witness = v;
        out.scc = idx;
      }
    }
  }
  out.estimate = entropy_estimate(m);
  if (!have) return out;
  // Any cyclic integer matrix has sp >= 1, so a ratio below one still
  // certifies zero entropy.
  if (out.beta_num <= out.beta_den) {
    out.value = 0.0;
  } else {
    out.value = std::max(0.0, log_lower(out.beta_num, out.beta_den));
  }
  return out;
}

/// Re-checks a stored witness: min (Av)_i / v_i over the SCC equals the
/// recorded ratio and every v_i is positive.
inline bool verify_entropy_witness(const IntMatrix& m, const EntropyBound& b) {
  if (b.scc.empty()) return b.value == 0.0;
  if (b.witness.size() != b.scc.size()) return false;
  BigInt best_num = -1, best_den = 1;
  for (std::size_t r = 0; r < b.scc.size(); ++r) {
    if (b.witness[r] <= 0) return false;
    BigInt acc = 0;
    for (std::size_t c = 0; c < b.scc.size(); ++c) acc += BigInt(m(b.scc[r], b.scc[c])) * b.witness[c];
    if (best_num < 0 || acc * best_den < best_num * b.witness[r]) {
      best_num = acc;
      best_den = b.witness[r];
    }
  }
  return best_num * b.beta_den == b.beta_num * best_den;
}

// ---------------------------------------------------------------------------
// Verified subshift from index-map data.

enum class ExtractionRule {
  SingleGenerator,  // one generator per region, entries in {0, ±1}
  SignedTrace,      // any free H1, block signs made uniform by a gauge
};

inline std::string_view to_string(ExtractionRule r) {
  return r == ExtractionRule::SingleGenerator ? "single-generator" : "signed-trace";
}

struct VerifiedSubshift {
  TransitionMatrix matrix;
  std::vector<std::vector<BoxId>> regions;  // symbol -> boxes
  std::vector<std::size_t> symbol_component;  // symbol -> index-map component
  std::vector<std::vector<std::size_t>> symbol_generators;
  std::vector<std::vector<int>> signs;      // sign of the block between symbols, 0 when absent
  bool regions_disjoint = true;             // no two symbols share a component
  ExtractionRule rule = ExtractionRule::SingleGenerator;
  std::size_t dropped_components = 0;
  std::size_t discarded_generators = 0;
  std::size_t dropped_blocks = 0;
  std::string note;
};

namespace detail {

/// Keeps the symbols lying on a bi-infinite path (in- and out-edge inside).
inline std::vector<std::size_t> essential_symbols(const IntMatrix& m) {
  const std::size_t n = m.size();
  std::vector<bool> alive(n, true);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t v = 0; v < n; ++v) {
      if (!alive[v]) continue;
      bool in = false, out = false;
      for (std::size_t u = 0; u < n && !(in && out); ++u) {
        if (!alive[u]) continue;
        in = in || m(v, u) != 0;
        out = out || m(u, v) != 0;
      }
      if (!in || !out) alive[v] = false, changed = true;
    }
  }
  std::vector<std::size_t> keep;
  for (std::size_t v = 0; v < n; ++v)
    if (alive[v]) keep.push_back(v);
  return keep;
}

/// Incremental GF(2) system; each stored row's pivot is its lowest set bit.
class Gf2System {
 public:
  explicit Gf2System(std::size_t vars) : words_((vars + 64) / 64), rhs_bit_(vars) {}

  using Row = std::vector<std::uint64_t>;
  Row row() const { return Row(words_, 0); }
  void flip(Row& r, std::size_t v) const { r[v / 64] ^= std::uint64_t{1} << (v % 64); }

  /// Adds all rows or none; false when they contradict the system.
  bool add_all(std::vector<Row> rows) {
    std::vector<std::pair<std::size_t, Row>> fresh;
    for (Row& r : rows) {
      std::size_t p = reduce(r, fresh);
      if (p == rhs_bit_) {
        if (bit(r, rhs_bit_)) return false;
        continue;
      }
      fresh.emplace_back(p, std::move(r));
    }
    for (auto& [p, r] : fresh) pivots_.emplace(p, std::move(r));
    return true;
  }

  /// A solution with free variables set to zero.
  std::vector<int> solve(std::size_t vars) const {
    std::vector<int> x(vars, 0);
    for (auto it = pivots_.rbegin(); it != pivots_.rend(); ++it) {
      const Row& r = it->second;
      int v = bit(r, rhs_bit_) ? 1 : 0;
      for (std::size_t k = it->first + 1; k < vars; ++k)
        if (bit(r, k)) v ^= x[k];
      x[it->first] = v;
    }
    return x;
  }

  std::size_t rhs_bit() const { return rhs_bit_; }

 private:
  static bool bit(const Row& r, std::size_t v) { return (r[v / 64] >> (v % 64)) & 1; }

  std::size_t reduce(Row& r, const std::vector<std::pair<std::size_t, Row>>& fresh) const {
    for (;;) {
      std::size_t p = rhs_bit_;
      for (std::size_t w = 0; w < words_; ++w)
        if (r[w]) {
          p = w * 64 + static_cast<std::size_t>(std::countr_zero(r[w]));
          break;
        }
      if (p >= rhs_bit_) return rhs_bit_;
      const Row* hit = nullptr;
      if (auto it = pivots_.find(p); it != pivots_.end()) hit = &it->second;
      for (const auto& [q, f] : fresh)
        if (q == p) hit = &f;
      if (!hit) return p;
      for (std::size_t w = 0; w < words_; ++w) r[w] ^= (*hit)[w];
    }
  }

  std::size_t words_, rhs_bit_;
  std::map<std::size_t, Row> pivots_;
};

inline bool homology_is_free_h1(const RelativeHomology& h) {
  return h.rank(1) >= 1 && h.rank(0) == 0 && h.rank(2) == 0 && h.torsion1().empty();
}

}  // namespace detail

/// Conservative extraction: a component is used only when its relative
/// homology is exactly H1 = Z (no H0, H2 or torsion). Components touching
/// index-map entries of magnitude above one are dropped one at a time
/// (the one with most such entries first) and the rest re-checked.
inline VerifiedSubshift extract_single_generator(const IndexMap& im) {
  VerifiedSubshift out;
  std::vector<std::size_t> used;
  for (std::size_t c = 0; c < im.components.size(); ++c) {
    const auto& h = im.components[c].homology;
    if (h.rank(1) == 1 && detail::homology_is_free_h1(h)) {
      used.push_back(c);
    } else {
      ++out.dropped_components;
      out.discarded_generators += h.rank(1);
    }
  }
  for (;;) {
    std::vector<std::size_t> bad(used.size(), 0);
    bool any = false;
    for (std::size_t x = 0; x < used.size(); ++x)
      for (std::size_t y = 0; y < used.size(); ++y) {
        const BigInt& v = im.matrix[im.components[used[x]].first_generator][im.components[used[y]].first_generator];
        if (abs(v) > 1) {
          ++bad[x];
          ++bad[y];
          any = true;
        }
      }
    if (!any) break;
    std::size_t worst = static_cast<std::size_t>(std::max_element(bad.begin(), bad.end()) - bad.begin());
    used.erase(used.begin() + static_cast<std::ptrdiff_t>(worst));
    ++out.dropped_components;
    ++out.discarded_generators;
  }
  if (used.empty()) fail(ErrorKind::Unverifiable, "no component carries a single verifiable generator");
  const std::size_t n = used.size();
  out.matrix = TransitionMatrix(n);
  out.signs.assign(n, std::vector<int>(n, 0));
  for (std::size_t x = 0; x < n; ++x) {
    out.regions.push_back(im.components[used[x]].boxes);
    out.symbol_component.push_back(used[x]);
    out.symbol_generators.push_back({im.components[used[x]].first_generator});
    for (std::size_t y = 0; y < n; ++y) {
      const BigInt& v = im.matrix[im.components[used[x]].first_generator][im.components[used[y]].first_generator];
      out.matrix(x, y) = v != 0 ? 1 : 0;
      out.signs[x][y] = v > 0 ? 1 : (v < 0 ? -1 : 0);
    }
  }
  if (out.discarded_generators > 0)
    out.note = "discarded " + std::to_string(out.discarded_generators) + " generator(s) from " +
               std::to_string(out.dropped_components) + " component(s)";
  return out;
}

/// Extraction for regions with several generators. A gauge (one sign per
/// generator) is solved over GF(2) so that all entries of each kept block
/// share one sign; blocks that cannot be brought into line are dropped.
/// Along any periodic region word every closed lift then contributes with
/// the same sign, so the trace is nonzero exactly when a closed lift exists.
/// The symbolic system is the sofic shift of region labels of the generator
/// graph, presented right-resolvingly by the subset construction; its
/// states are the symbols.
inline VerifiedSubshift extract_signed_trace(const IndexMap& im, std::size_t max_states = 200'000) {
  VerifiedSubshift out;
  out.rule = ExtractionRule::SignedTrace;
  std::vector<std::size_t> used;
  std::vector<std::size_t> region_of_gen(im.generators(), SIZE_MAX);
  for (std::size_t c = 0; c < im.components.size(); ++c) {
    const auto& comp = im.components[c];
    if (detail::homology_is_free_h1(comp.homology)) {
      for (std::size_t g = 0; g < comp.homology.rank(1); ++g) region_of_gen[comp.first_generator + g] = used.size();
      used.push_back(c);
    } else {
      ++out.dropped_components;
      out.discarded_generators += comp.homology.rank(1);
    }
  }
  if (used.empty()) fail(ErrorKind::Unverifiable, "no component has free first homology only");

  // blocks in deterministic (target region, source region) order
  const std::size_t ng = im.generators();
  struct Entry { std::size_t tgt, src; int sign; };
  std::map<std::pair<std::size_t, std::size_t>, std::vector<Entry>> blocks;
  for (std::size_t t = 0; t < ng; ++t)
    for (std::size_t s = 0; s < ng; ++s) {
      const BigInt& v = im.matrix[t][s];
      if (v == 0 || region_of_gen[t] == SIZE_MAX || region_of_gen[s] == SIZE_MAX) continue;
      blocks[{region_of_gen[t], region_of_gen[s]}].push_back({t, s, v > 0 ? 1 : -1});
    }
  detail::Gf2System sys(ng);
  std::vector<std::pair<std::size_t, std::size_t>> kept;
  // single-entry blocks impose nothing; process larger blocks smallest first
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (const auto& [key, entries] : blocks) order.push_back(key);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return blocks[x].size() < blocks[y].size(); });
  for (const auto& key : order) {
    const auto& entries = blocks[key];
    std::vector<detail::Gf2System::Row> rows;
    for (std::size_t k = 1; k < entries.size(); ++k) {
      auto r = sys.row();
      sys.flip(r, entries[0].tgt);
      sys.flip(r, entries[0].src);
      sys.flip(r, entries[k].tgt);
      sys.flip(r, entries[k].src);
      if (entries[0].sign != entries[k].sign) sys.flip(r, sys.rhs_bit());
      rows.push_back(std::move(r));
    }
    if (sys.add_all(std::move(rows))) kept.push_back(key);
    else ++out.dropped_blocks;
  }
  std::vector<int> gauge = sys.solve(ng);
  std::map<std::pair<std::size_t, std::size_t>, int> block_sign;
  std::vector<std::vector<std::size_t>> succ(ng);
  for (const auto& key : kept) {
    const auto& entries = blocks[key];
    auto twisted = [&](const Entry& e) { return e.sign * ((gauge[e.tgt] ^ gauge[e.src]) ? -1 : 1); };
    int tau = twisted(entries[0]);
    for (const Entry& e : entries) {
      if (twisted(e) != tau) fail(ErrorKind::ChainSolveFailure, "gauge solution does not unify a block's signs");
      succ[e.src].push_back(e.tgt);
    }
    block_sign[key] = tau;
  }

  // subset construction from the set of all used generators
  const std::size_t nr = used.size();
  std::vector<std::vector<std::size_t>> gens_of(nr);
  for (std::size_t g = 0; g < ng; ++g)
    if (region_of_gen[g] != SIZE_MAX) gens_of[region_of_gen[g]].push_back(g);
  std::map<std::vector<std::size_t>, std::size_t> state_id;
  std::vector<std::vector<std::size_t>> states;
  std::vector<std::pair<std::size_t, std::size_t>> arcs;  // (source state, target state)
  std::vector<std::size_t> all;
  for (std::size_t g = 0; g < ng; ++g)
    if (region_of_gen[g] != SIZE_MAX) all.push_back(g);
  state_id[all] = 0;
  states.push_back(all);
  for (std::size_t k = 0; k < states.size(); ++k) {
    std::map<std::size_t, std::vector<std::size_t>> by_region;
    for (std::size_t g : states[k])
      for (std::size_t t : succ[g]) by_region[region_of_gen[t]].push_back(t);
    for (auto& [r, set] : by_region) {
      std::sort(set.begin(), set.end());
      set.erase(std::unique(set.begin(), set.end()), set.end());
      auto [it, fresh] = state_id.try_emplace(set, states.size());
      if (fresh) {
        if (states.size() >= max_states)
          fail(ErrorKind::SearchBudgetExceeded, "subset construction exceeds " + std::to_string(max_states) + " states");
        states.push_back(set);
      }
      arcs.emplace_back(k, it->second);
    }
  }
  IntMatrix d(states.size());
  for (auto [s, t] : arcs) d(t, s) = 1;
  std::vector<std::size_t> live = detail::essential_symbols(d);
  if (live.empty()) fail(ErrorKind::Unverifiable, "verified generator graph has no cycle");

  // Merge states with equal futures (Moore refinement, seeded by region), which
  // keeps the presentation right-resolving and presents the same shift.
  std::vector<std::size_t> label(live.size()), cls(live.size());
  for (std::size_t k = 0; k < live.size(); ++k) label[k] = region_of_gen[states[live[k]].front()];
  {
    std::map<std::size_t, std::size_t> ids;
    for (std::size_t k = 0; k < live.size(); ++k) cls[k] = ids.try_emplace(label[k], ids.size()).first->second;
  }
  std::vector<std::vector<std::size_t>> live_succ(live.size());
  for (std::size_t x = 0; x < live.size(); ++x)
    for (std::size_t y = 0; y < live.size(); ++y)
      if (d(live[y], live[x])) live_succ[x].push_back(y);
  for (std::size_t classes = 0;;) {
    std::map<std::vector<std::size_t>, std::size_t> ids;
    std::vector<std::size_t> next(live.size());
    for (std::size_t k = 0; k < live.size(); ++k) {
      std::vector<std::size_t> key{cls[k]};
      for (std::size_t t : live_succ[k]) key.push_back(cls[t]);
      std::sort(key.begin() + 1, key.end());
      next[k] = ids.try_emplace(key, ids.size()).first->second;
    }
    cls = std::move(next);
    if (ids.size() == classes) break;
    classes = ids.size();
  }
  std::size_t nstates = *std::max_element(cls.begin(), cls.end()) + 1;
  IntMatrix dm(nstates);
  std::vector<std::size_t> rep(nstates, SIZE_MAX);
  for (std::size_t k = 0; k < live.size(); ++k) {
    if (rep[cls[k]] == SIZE_MAX) rep[cls[k]] = k;
    for (std::size_t t : live_succ[k]) dm(cls[t], cls[k]) = 1;
  }
  std::vector<std::size_t> keep = detail::essential_symbols(dm);
  std::vector<std::vector<std::size_t>> merged(nstates);
  for (std::size_t k = 0; k < live.size(); ++k) {
    auto& g = merged[cls[k]];
    g.insert(g.end(), states[live[k]].begin(), states[live[k]].end());
  }
  for (auto& g : merged) {
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
  }

  const std::size_t n = keep.size();
  out.matrix = TransitionMatrix(n);
  out.signs.assign(n, std::vector<int>(n, 0));
  std::vector<std::size_t> comp_count(im.components.size(), 0);
  for (std::size_t x = 0; x < n; ++x) {
    std::size_t r = label[rep[keep[x]]];
    out.symbol_component.push_back(used[r]);
    out.symbol_generators.push_back(merged[keep[x]]);
    out.regions.push_back(im.components[used[r]].boxes);
    if (++comp_count[used[r]] > 1) out.regions_disjoint = false;
  }
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      if (dm(keep[x], keep[y])) {
        out.matrix(x, y) = 1;
        out.signs[x][y] = block_sign.at({label[rep[keep[x]]], label[rep[keep[y]]]});
      }
  std::size_t multi = 0;
  for (std::size_t r = 0; r < nr; ++r) multi += gens_of[r].size() > 1;
  out.note = std::to_string(nr) + " region(s), " + std::to_string(multi) + " with several generators";
  if (out.dropped_blocks) out.note += ", " + std::to_string(out.dropped_blocks) + " sign-inconsistent block(s) dropped";
  if (out.discarded_generators)
    out.note += ", discarded " + std::to_string(out.discarded_generators) + " generator(s) from " +
                std::to_string(out.dropped_components) + " component(s)";
  if (!out.regions_disjoint) out.note += ", symbols share regions";
  return out;
}

inline VerifiedSubshift extract_subshift(const IndexMap& im, ExtractionRule rule = ExtractionRule::SingleGenerator) {
  return rule == ExtractionRule::SingleGenerator ? extract_single_generator(im) : extract_signed_trace(im);
}

}  // namespace hentropy
