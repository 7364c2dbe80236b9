#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "hentropy/symbolic.hpp"

namespace hentropy {

/// Dense rectangular integer matrix for the (R, S) factors.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<std::int64_t> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0) {}
  explicit Mat(const IntMatrix& m) : Mat(m.size(), m.size()) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) (*this)(i, j) = m(i, j);
  }
  std::int64_t& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  std::int64_t operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  Mat transpose() const {
    Mat t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }
  IntMatrix square() const {
    if (rows != cols) fail(ErrorKind::InvalidArgument, "matrix is not square");
    IntMatrix m(rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) m(i, j) = (*this)(i, j);
    return m;
  }
  friend bool operator==(const Mat&, const Mat&) = default;
};

inline Mat operator*(const Mat& x, const Mat& y) {
  if (x.cols != y.rows) fail(ErrorKind::InvalidArgument, "matrix shapes do not chain");
  Mat out(x.rows, y.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t k = 0; k < x.cols; ++k) {
      std::int64_t v = x(i, k);
      if (v == 0) continue;
      for (std::size_t j = 0; j < y.cols; ++j) out(i, j) += v * y(k, j);
    }
  return out;
}

enum class Direction { Forward, Backward };

inline bool forward_condition(const IntMatrix& a, std::size_t i, std::size_t j) {
  if (i == j) return false;
  const std::size_t n = a.size();
  std::int64_t dot = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (a(k, i) != a(k, j)) return false;  // same image: A e_i = A e_j
    dot += a(i, k) * a(j, k);              // preimages: rows i and j
  }
  return dot == 0;
}

inline bool backward_condition(const IntMatrix& a, std::size_t i, std::size_t j) {
  if (i == j) return false;
  const std::size_t n = a.size();
  std::int64_t dot = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (a(i, k) != a(j, k)) return false;
    dot += a(k, i) * a(k, j);
  }
  return dot == 0;
}

inline bool amalgamation_condition(const IntMatrix& a, std::size_t i, std::size_t j, Direction d) {
  return d == Direction::Forward ? forward_condition(a, i, j) : backward_condition(a, i, j);
}

/// One elementary strong shift equivalence A = R S, B = S R. `kept` and
/// `removed` record the merged symbols (removed = npos for permutations).
struct SseStep {
  std::string kind;  // "forward", "backward" or "permute"
  std::size_t kept = 0, removed = 0;
  std::vector<std::size_t> permutation;
  Mat r, s;
};

struct SSECertificate {
  IntMatrix start;
  std::vector<SseStep> steps;
  std::vector<IntMatrix> chain;  // A_0 = start, A_1, ..., A_k

  const IntMatrix& end() const { return chain.empty() ? start : chain.back(); }

  /// Index of the first failing step, or nullopt when every step checks.
  std::optional<std::size_t> first_failure() const {
    if (chain.size() != steps.size() + 1 || !(chain.front() == start)) return 0;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const SseStep& st = steps[k];
      if (st.r.cols != st.s.rows || st.s.cols != st.r.rows) return k;
      Mat prev(chain[k]), next(chain[k + 1]);
      if (!(st.r * st.s == prev) || !(st.s * st.r == next)) return k;
    }
    return std::nullopt;
  }
  bool verify() const { return !first_failure().has_value(); }

  void append(const SSECertificate& other) {
    if (!(other.start == end())) fail(ErrorKind::InvalidArgument, "certificates do not chain");
    steps.insert(steps.end(), other.steps.begin(), other.steps.end());
    chain.insert(chain.end(), other.chain.begin() + 1, other.chain.end());
  }

  /// The same chain walked backwards: each (R, S) becomes (S, R).
  SSECertificate reversed() const {
    SSECertificate out;
    out.start = end();
    out.chain.assign(chain.rbegin(), chain.rend());
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
      SseStep st = *it;
      std::swap(st.r, st.s);
      st.kind = "reverse-" + st.kind;
      out.steps.push_back(std::move(st));
    }
    return out;
  }
};

inline SSECertificate trivial_certificate(const IntMatrix& a) { return SSECertificate{a, {}, {a}}; }

struct Amalgamation {
  IntMatrix result;
  SseStep step;
};

/// Merges symbol max(i,j) into min(i,j) using the X, Y of the elementary
/// equivalence; R S = A and S R = B are checked before returning.
inline Amalgamation amalgamate(const IntMatrix& a, std::size_t i, std::size_t j, Direction d) {
  const std::size_t n = a.size();
  if (i >= n || j >= n) fail(ErrorKind::InvalidArgument, "symbol out of range");
  if (!amalgamation_condition(a, i, j, d))
    fail(ErrorKind::ConditionNotSatisfied, std::string(d == Direction::Forward ? "forward" : "backward") +
                                               " condition fails for symbols " + std::to_string(i) + ", " +
                                               std::to_string(j));
  if (i > j) std::swap(i, j);
  Mat x(n, n - 1), y(n - 1, n), am(a);
  for (std::size_t k = 0; k < n; ++k) {
    if (k < j) {
      x(k, k) = 1;
      y(k, k) = 1;
    } else if (k > j) {
      x(k, k - 1) = 1;
      y(k - 1, k) = 1;
    }
  }
  y(i, j) = 1;
  Amalgamation out;
  out.step.kept = i;
  out.step.removed = j;
  Mat b;
  if (d == Direction::Forward) {
    out.step.kind = "forward";
    out.step.r = am * x;
    out.step.s = y;
    b = y * am * x;
  } else {
    out.step.kind = "backward";
    out.step.r = y.transpose();
    out.step.s = x.transpose() * am;
    b = x.transpose() * am * y.transpose();
  }
  if (!(out.step.r * out.step.s == am) || !(out.step.s * out.step.r == b))
    fail(ErrorKind::ConditionNotSatisfied, "elementary equivalence check failed");
  out.result = b.square();
  return out;
}

/// Permutation as an elementary equivalence: B = P A P^{-1} with
/// (R, S) = (P^{-1}, P A); B(p[i], p[j]) = A(i, j).
inline Amalgamation permute_step(const IntMatrix& a, const std::vector<std::size_t>& p) {
  const std::size_t n = a.size();
  Mat pm(n, n), pinv(n, n), am(a);
  for (std::size_t k = 0; k < n; ++k) {
    pm(p[k], k) = 1;
    pinv(k, p[k]) = 1;
  }
  Amalgamation out;
  out.step.kind = "permute";
  out.step.permutation = p;
  out.step.r = pinv;
  out.step.s = pm * am;
  out.result = a.permuted(p);
  return out;
}

/// All valid (direction, i, j) triples with i < j, forward first.
inline std::vector<std::tuple<Direction, std::size_t, std::size_t>> valid_amalgamations(const IntMatrix& a) {
  std::vector<std::tuple<Direction, std::size_t, std::size_t>> out;
  for (Direction d : {Direction::Forward, Direction::Backward})
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = i + 1; j < a.size(); ++j)
        if (amalgamation_condition(a, i, j, d)) out.emplace_back(d, i, j);
  return out;
}

// ---------------------------------------------------------------------------
// Canonical form under symbol permutation.

namespace detail {

struct VertexInvariant {
  std::int64_t loop, in, out;
  auto operator<=>(const VertexInvariant&) const = default;
};

inline std::vector<VertexInvariant> invariants(const IntMatrix& a) {
  std::vector<VertexInvariant> inv(a.size(), {0, 0, 0});
  for (std::size_t i = 0; i < a.size(); ++i) {
    inv[i].loop = a(i, i);
    for (std::size_t j = 0; j < a.size(); ++j) {
      inv[i].in += a(i, j);
      inv[i].out += a(j, i);
    }
  }
  return inv;
}

class Canonicalizer {
 public:
  Canonicalizer(const IntMatrix& a, std::size_t budget) : a_(a), budget_(budget) {
    inv_ = invariants(a);
    std::vector<VertexInvariant> sorted = inv_;
    std::sort(sorted.begin(), sorted.end());
    slot_class_ = sorted;
  }

  /// Vertex order whose placement string is lexicographically least.
  std::vector<std::size_t> run() {
    const std::size_t n = a_.size();
    std::vector<std::size_t> order;
    std::vector<bool> used(n, false);
    std::vector<std::int64_t> prefix;
    recurse(order, used, prefix);
    return best_order_;
  }

 private:
  void recurse(std::vector<std::size_t>& order, std::vector<bool>& used, std::vector<std::int64_t>& prefix) {
    if (++steps_ > budget_) fail(ErrorKind::SearchBudgetExceeded, "canonical form search budget exhausted");
    const std::size_t k = order.size();
    if (k == a_.size()) {
      if (!have_best_ || prefix < best_) {
        best_ = prefix;
        best_order_ = order;
        have_best_ = true;
      }
      return;
    }
    for (std::size_t v = 0; v < a_.size(); ++v) {
      if (used[v] || !(inv_[v] == slot_class_[k])) continue;
      std::size_t mark = prefix.size();
      prefix.push_back(a_(v, v));
      for (std::size_t l = 0; l < k; ++l) {
        prefix.push_back(a_(v, order[l]));
        prefix.push_back(a_(order[l], v));
      }
      // Prune when the prefix already exceeds the best string.
      bool worse = false;
      if (have_best_) {
        auto cmp = std::lexicographical_compare_three_way(prefix.begin(), prefix.end(), best_.begin(),
                                                          best_.begin() + static_cast<std::ptrdiff_t>(prefix.size()));
        worse = cmp > 0;
      }
      if (!worse) {
        used[v] = true;
        order.push_back(v);
        recurse(order, used, prefix);
        order.pop_back();
        used[v] = false;
      }
      prefix.resize(mark);
    }
  }

  const IntMatrix& a_;
  std::size_t budget_, steps_ = 0;
  std::vector<VertexInvariant> inv_, slot_class_;
  std::vector<std::int64_t> best_;
  std::vector<std::size_t> best_order_;
  bool have_best_ = false;
};

}  // namespace detail

/// Canonical representative: the relabelling with lexicographically least
/// placement string, vertex classes ordered by (loop, in-degree, out-degree).
inline IntMatrix canonical_form(const IntMatrix& a, std::size_t budget = 2'000'000) {
  std::vector<std::size_t> order = detail::Canonicalizer(a, budget).run();
  std::vector<std::size_t> p(a.size());
  for (std::size_t k = 0; k < order.size(); ++k) p[order[k]] = k;
  return a.permuted(p);
}

inline std::string canonical_key(const IntMatrix& a, std::size_t budget = 2'000'000) {
  IntMatrix c = canonical_form(a, budget);
  std::string key = std::to_string(c.size()) + ":";
  for (auto v : c.data()) key += static_cast<char>('0' + v);
  return key;
}

/// Permutation p with b = a.permuted(p), found by backtracking with degree
/// and loop pruning.
inline std::optional<std::vector<std::size_t>> find_isomorphism(const IntMatrix& a, const IntMatrix& b,
                                                                std::size_t budget = 50'000'000) {
  const std::size_t n = a.size();
  if (b.size() != n) return std::nullopt;
  auto ia = detail::invariants(a), ib = detail::invariants(b);
  {
    auto sa = ia, sb = ib;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return std::nullopt;
  }
  std::vector<std::size_t> p(n, SIZE_MAX);
  std::vector<bool> taken(n, false);
  std::size_t steps = 0;
  std::function<bool(std::size_t)> go = [&](std::size_t v) -> bool {
    if (++steps > budget) fail(ErrorKind::SearchBudgetExceeded, "isomorphism search budget exhausted");
    if (v == n) return true;
    for (std::size_t w = 0; w < n; ++w) {
      if (taken[w] || !(ia[v] == ib[w])) continue;
      bool ok = true;
      for (std::size_t u = 0; u < v && ok; ++u)
        ok = a(v, u) == b(w, p[u]) && a(u, v) == b(p[u], w);
      if (!ok) continue;
      p[v] = w;
      taken[w] = true;
      if (go(v + 1)) return true;
      taken[w] = false;
    }
    p[v] = SIZE_MAX;
    return false;
  };
  if (!go(0)) return std::nullopt;
  return p;
}

// ---------------------------------------------------------------------------
// Reduction.

enum class Strategy { Greedy, Exhaustive };

struct Reduction {
  IntMatrix result;
  SSECertificate certificate;
  std::size_t states_explored = 0;
};

inline SSECertificate apply_amalgamations(const IntMatrix& a,
                                          const std::vector<std::tuple<Direction, std::size_t, std::size_t>>& seq) {
  SSECertificate cert = trivial_certificate(a);
  IntMatrix cur = a;
  for (const auto& [d, i, j] : seq) {
    Amalgamation am = amalgamate(cur, i, j, d);
    cert.steps.push_back(am.step);
    cert.chain.push_back(am.result);
    cur = am.result;
  }
  return cert;
}

inline Reduction reduce_greedy(const IntMatrix& a) {
  Reduction out{a, trivial_certificate(a), 0};
  for (;;) {
    auto moves = valid_amalgamations(out.result);
    ++out.states_explored;
    if (moves.empty()) break;
    auto [d, i, j] = moves.front();
    Amalgamation am = amalgamate(out.result, i, j, d);
    out.certificate.steps.push_back(am.step);
    out.certificate.chain.push_back(am.result);
    out.result = am.result;
  }
  return out;
}

/// Depth-first search over amalgamation orders, memoised on canonical form;
/// returns a smallest reachable matrix (ties: least canonical key).
inline Reduction reduce_exhaustive(const IntMatrix& a, std::size_t node_limit = 16, std::size_t state_budget = 200'000) {
  if (a.size() > node_limit)
    fail(ErrorKind::SearchBudgetExceeded, "exhaustive reduction limited to " + std::to_string(node_limit) + " symbols");
  using Move = std::tuple<Direction, std::size_t, std::size_t>;
  std::unordered_set<std::string> seen;
  std::vector<Move> path, best_path;
  std::size_t best_size = a.size();
  std::string best_key = canonical_key(a);
  std::size_t states = 0;
  std::function<void(const IntMatrix&)> dfs = [&](const IntMatrix& m) {
    if (++states > state_budget) fail(ErrorKind::SearchBudgetExceeded, "reduction state budget exhausted");
    for (const auto& mv : valid_amalgamations(m)) {
      auto [d, i, j] = mv;
      IntMatrix next = amalgamate(m, i, j, d).result;
      std::string key = canonical_key(next);
      if (!seen.insert(key).second) continue;
      path.push_back(mv);
      if (next.size() < best_size || (next.size() == best_size && key < best_key)) {
        best_size = next.size();
        best_key = key;
        best_path = path;
      }
      dfs(next);
      path.pop_back();
    }
  };
  seen.insert(best_key);
  dfs(a);
  Reduction out;
  out.certificate = apply_amalgamations(a, best_path);
  out.result = out.certificate.end();
  out.states_explored = states;
  return out;
}

inline Reduction reduce(const IntMatrix& a, Strategy s, std::size_t node_limit = 16) {
  Reduction r = s == Strategy::Greedy ? reduce_greedy(a) : reduce_exhaustive(a, node_limit);
  if (!r.certificate.verify()) fail(ErrorKind::ConditionNotSatisfied, "reduction certificate failed to verify");
  return r;
}

/// Greedy first when the matrix exceeds the exhaustive limit, then exhaustive.
inline Reduction reduce_best_effort(const IntMatrix& a, std::size_t node_limit = 16) {
  Reduction g = reduce_greedy(a);
  if (g.result.size() > node_limit) return g;
  Reduction e = reduce_exhaustive(a.size() <= node_limit ? a : g.result, node_limit);
  if (a.size() > node_limit) {
    SSECertificate cert = g.certificate;
    cert.append(e.certificate);
    e.certificate = std::move(cert);
  }
  return e;
}

struct Conjugacy {
  SSECertificate certificate;  // a -> ... -> b
  std::vector<std::size_t> permutation;
  std::size_t reduced_size = 0;
};

/// Reduces both matrices and matches the reduced forms up to relabelling.
/// Failure is NotDecided, never a disproof.
inline Conjugacy conjugate_up_to_permutation(const IntMatrix& a, const IntMatrix& b, std::size_t node_limit = 16) {
  Reduction ra = reduce_best_effort(a, node_limit), rb = reduce_best_effort(b, node_limit);
  auto describe = [&]() {
    char buf[160];
    std::snprintf(buf, sizeof buf, "reduced sizes %zu vs %zu, entropy estimates %.6f vs %.6f", ra.result.size(),
                  rb.result.size(), entropy_estimate(a), entropy_estimate(b));
    return std::string(buf);
  };
  if (ra.result.size() != rb.result.size()) fail(ErrorKind::NotDecided, describe());
  auto p = find_isomorphism(ra.result, rb.result);
  if (!p) fail(ErrorKind::NotDecided, "no relabelling matches: " + describe());
  Conjugacy out;
  out.certificate = ra.certificate;
  Amalgamation perm = permute_step(ra.result, *p);
  out.certificate.steps.push_back(perm.step);
  out.certificate.chain.push_back(perm.result);
  out.certificate.append(rb.certificate.reversed());
  out.permutation = *p;
  out.reduced_size = ra.result.size();
  if (!out.certificate.verify()) fail(ErrorKind::NotDecided, "assembled certificate failed to verify");
  return out;
}

/// Randomised descents: each run applies uniformly chosen valid
/// amalgamations until none is left or the size reaches the target's, and
/// checks for a relabelling of `target`. Deterministic for a given seed.
/// Returns the chain ending exactly at `target`.
inline std::optional<Conjugacy> amalgamate_onto(const IntMatrix& a, const IntMatrix& target, std::size_t runs = 5000,
                                                std::uint64_t seed = 1) {
  using Move = std::tuple<Direction, std::size_t, std::size_t>;
  if (a.size() < target.size()) return std::nullopt;
  std::mt19937_64 rng(seed);
  std::unordered_set<std::string> tried;
  for (std::size_t run = 0; run < runs; ++run) {
    IntMatrix m = a;
    std::vector<Move> path;
    while (m.size() > target.size()) {
      auto moves = valid_amalgamations(m);
      if (moves.empty()) break;
      const Move& mv = moves[rng() % moves.size()];
      m = amalgamate(m, std::get<1>(mv), std::get<2>(mv), std::get<0>(mv)).result;
      path.push_back(mv);
    }
    if (m.size() != target.size() || !tried.insert(m.digest()).second) continue;
    auto p = find_isomorphism(m, target);
    if (!p) continue;
    Conjugacy out;
    out.certificate = apply_amalgamations(a, path);
    Amalgamation perm = permute_step(out.certificate.end(), *p);
    out.certificate.steps.push_back(perm.step);
    out.certificate.chain.push_back(perm.result);
    out.permutation = *p;
    out.reduced_size = target.size();
    return out;
  }
  return std::nullopt;
}

/// The chain between the transposes: (R, S) becomes (S^T, R^T), so forward
/// and backward steps trade places.
inline SSECertificate transposed(const SSECertificate& c) {
  SSECertificate out;
  out.start = c.start.transpose();
  for (const IntMatrix& m : c.chain) out.chain.push_back(m.transpose());
  for (SseStep st : c.steps) {
    Mat r = st.s.transpose(), s = st.r.transpose();
    st.r = std::move(r);
    st.s = std::move(s);
    if (st.kind.ends_with("forward"))
      st.kind.replace(st.kind.size() - 7, 7, "backward");
    else if (st.kind.ends_with("backward"))
      st.kind.replace(st.kind.size() - 8, 8, "forward");
    out.steps.push_back(std::move(st));
  }
  return out;
}

/// Symbol regions carried along a certificate: merged symbols take the
/// union of their regions and permutations relabel.
template <typename Region>
std::vector<Region> track_regions(const SSECertificate& cert, std::vector<Region> regions) {
  for (const SseStep& st : cert.steps) {
    if (st.kind == "forward" || st.kind == "backward") {
      Region& keep = regions[st.kept];
      keep.insert(keep.end(), regions[st.removed].begin(), regions[st.removed].end());
      std::sort(keep.begin(), keep.end());
      regions.erase(regions.begin() + static_cast<std::ptrdiff_t>(st.removed));
    } else if (st.kind == "permute") {
      std::vector<Region> next(regions.size());
      for (std::size_t k = 0; k < regions.size(); ++k) next[st.permutation[k]] = std::move(regions[k]);
      regions = std::move(next);
    } else {
      fail(ErrorKind::InvalidArgument, "regions can only follow amalgamations and permutations");
    }
  }
  return regions;
}

// ---------------------------------------------------------------------------
// JSON form of certificates.

inline nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", rows}};
}

inline Mat mat_from_json(const nlohmann::json& j) {
  Mat m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto& data = j.at("data");
  if (data.size() != m.rows) fail(ErrorKind::ParseError, "matrix row count mismatch");
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (data[i].size() != m.cols) fail(ErrorKind::ParseError, "matrix column count mismatch");
    for (std::size_t k = 0; k < m.cols; ++k) m(i, k) = data[i][k].get<std::int64_t>();
  }
  return m;
}

inline nlohmann::json certificate_to_json(const SSECertificate& c) {
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t k = 0; k < c.steps.size(); ++k) {
    const SseStep& st = c.steps[k];
    nlohmann::json s = {{"kind", st.kind}, {"R", mat_to_json(st.r)}, {"S", mat_to_json(st.s)},
                        {"result", mat_to_json(Mat(c.chain[k + 1]))}};
    if (st.kind == "permute" || st.kind == "reverse-permute") s["permutation"] = st.permutation;
    else s["merged"] = {st.kept, st.removed};
    steps.push_back(s);
  }
  return {{"convention", "column-as-source"}, {"start", mat_to_json(Mat(c.start))}, {"steps", steps}};
}

inline SSECertificate certificate_from_json(const nlohmann::json& j) {
  SSECertificate c;
  c.start = mat_from_json(j.at("start")).square();
  c.chain.push_back(c.start);
  for (const auto& s : j.at("steps")) {
    SseStep st;
    st.kind = s.at("kind").get<std::string>();
    st.r = mat_from_json(s.at("R"));
    st.s = mat_from_json(s.at("S"));
    if (s.contains("merged")) {
      st.kept = s["merged"][0].get<std::size_t>();
      st.removed = s["merged"][1].get<std::size_t>();
    }
    if (s.contains("permutation")) st.permutation = s["permutation"].get<std::vector<std::size_t>>();
    c.steps.push_back(std::move(st));
    c.chain.push_back(mat_from_json(s.at("result")).square());
  }
  return c;
}

}  // namespace hentropy
