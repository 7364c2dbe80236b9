#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "hentropy/box_map.hpp"
#include "hentropy/conley_index.hpp"
#include "hentropy/digest.hpp"
#include "hentropy/shift_equivalence.hpp"
#include "hentropy/symbolic.hpp"

namespace hentropy {

inline constexpr const char* kCodeVersion = "hentropy-pipeline-3";

// log 2 + 1e-6: a quadratic Henon map has entropy at most log 2.
inline constexpr double kDegreeGuard = 0.69314818055994530942;

inline Rect2 default_b0() { return {Interval(-4.0, 4.0), Interval(-4.0, 4.0)}; }
inline Rect2 default_window() { return {Interval(-5.0, 5.0), Interval(-5.0, 5.0)}; }

struct RunConfig {
  double a = 0.0, b = 0.0;
  Rational resolution{64, 1};
  Rect2 b0 = default_b0();
  Rect2 window = default_window();
  std::size_t budget = 20'000'000;
  ExtractionRule rule = ExtractionRule::SignedTrace;
};

inline std::string hexfloat(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

/// Cache key: parameters (bit-exact), grid, rule and code version. The box
/// budget is not part of it; a budget_exceeded record is re-run when a
/// larger budget is asked for.
inline std::string run_key(const RunConfig& c) {
  Fnv1a h;
  h.add(kCodeVersion).add("|").add(hexfloat(c.a)).add("|").add(hexfloat(c.b)).add("|").add(c.resolution.to_string());
  for (const Rect2* r : {&c.b0, &c.window})
    for (const Interval* i : {&r->x, &r->y}) h.add("|").add(hexfloat(i->lo())).add(",").add(hexfloat(i->hi()));
  h.add("|").add(to_string(c.rule));
  return h.hex();
}

/// Coarse-to-fine resolutions ending at r, halving down to [16, 32).
inline std::vector<Rational> cascade_levels(Rational r) {
  std::vector<Rational> out{r};
  while (!(out.back() / Rational(2) < Rational(16))) out.push_back(out.back() / Rational(2));
  std::reverse(out.begin(), out.end());
  return out;
}

enum class Outcome { Bound, Unverifiable, IsolationFailure, BudgetExceeded };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Bound: return "bound";
    case Outcome::Unverifiable: return "unverifiable";
    case Outcome::IsolationFailure: return "isolation_failure";
    case Outcome::BudgetExceeded: return "budget_exceeded";
  }
  return "unknown";
}

inline Outcome outcome_from_string(std::string_view s) {
  for (Outcome o : {Outcome::Bound, Outcome::Unverifiable, Outcome::IsolationFailure, Outcome::BudgetExceeded})
    if (to_string(o) == s) return o;
  fail(ErrorKind::ParseError, "unknown outcome '" + std::string(s) + "'");
}

struct RunRecord {
  RunConfig config;
  std::string key;
  std::vector<Rational> cascade;
  std::size_t boxes = 0, invariant_boxes = 0, components = 0, generators = 0, symbols = 0;
  Outcome outcome = Outcome::Unverifiable;
  std::string reason;
  double bound = 0.0;
  double estimate = 0.0;
  std::string beta;  // "p/q"
  std::vector<std::string> witness;
  std::vector<std::size_t> witness_scc;
  std::string matrix_digest;
  bool regions_disjoint = false;
  std::string note;
  double seconds = 0.0;
};

namespace detail {

inline nlohmann::json rect_json(const Rect2& r) { return {{r.x.lo(), r.x.hi()}, {r.y.lo(), r.y.hi()}}; }

inline Rect2 rect_from_json(const nlohmann::json& j) {
  return {Interval(j.at(0).at(0).get<double>(), j.at(0).at(1).get<double>()),
          Interval(j.at(1).at(0).get<double>(), j.at(1).at(1).get<double>())};
}

}  // namespace detail

inline nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j;
  j["key"] = r.key;
  j["code_version"] = kCodeVersion;
  j["a"] = r.config.a;
  j["b"] = r.config.b;
  j["a_hex"] = hexfloat(r.config.a);
  j["b_hex"] = hexfloat(r.config.b);
  j["grid"] = {{"b0", detail::rect_json(r.config.b0)},
               {"window", detail::rect_json(r.config.window)},
               {"resolution", r.config.resolution.to_string()},
               {"anchoring", "box (0,0) has its lower-left corner at the centre of B0"}};
  j["rule"] = std::string(to_string(r.config.rule));
  j["budget"] = r.config.budget;
  j["rounding"] = rounding::kMechanism;
  std::vector<std::string> cas;
  for (const Rational& q : r.cascade) cas.push_back(q.to_string());
  j["cascade"] = cas;
  j["boxes"] = r.boxes;
  j["invariant_boxes"] = r.invariant_boxes;
  j["components"] = r.components;
  j["generators"] = r.generators;
  j["symbols"] = r.symbols;
  j["outcome"] = std::string(to_string(r.outcome));
  if (r.outcome == Outcome::Bound) {
    j["bound"] = r.bound;
    j["estimate"] = r.estimate;
    j["witness"] = {{"beta", r.beta}, {"vector", r.witness}, {"scc", r.witness_scc}, {"matrix_digest", r.matrix_digest}};
    j["regions_disjoint"] = r.regions_disjoint;
  } else {
    j["reason"] = r.reason;
  }
  j["note"] = r.note;
  j["seconds"] = r.seconds;
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.key = j.at("key").get<std::string>();
  r.config.a = j.at("a").get<double>();
  r.config.b = j.at("b").get<double>();
  const auto& g = j.at("grid");
  r.config.b0 = detail::rect_from_json(g.at("b0"));
  r.config.window = detail::rect_from_json(g.at("window"));
  r.config.resolution = Rational::parse(g.at("resolution").get<std::string>());
  r.config.rule = j.at("rule").get<std::string>() == "single-generator" ? ExtractionRule::SingleGenerator
                                                                       : ExtractionRule::SignedTrace;
  r.config.budget = j.at("budget").get<std::size_t>();
  for (const auto& s : j.at("cascade")) r.cascade.push_back(Rational::parse(s.get<std::string>()));
  r.boxes = j.at("boxes").get<std::size_t>();
  r.invariant_boxes = j.at("invariant_boxes").get<std::size_t>();
  r.components = j.at("components").get<std::size_t>();
  r.generators = j.at("generators").get<std::size_t>();
  r.symbols = j.at("symbols").get<std::size_t>();
  r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  if (r.outcome == Outcome::Bound) {
    r.bound = j.at("bound").get<double>();
    r.estimate = j.at("estimate").get<double>();
    const auto& w = j.at("witness");
    r.beta = w.at("beta").get<std::string>();
    r.witness = w.at("vector").get<std::vector<std::string>>();
    r.witness_scc = w.at("scc").get<std::vector<std::size_t>>();
    r.matrix_digest = w.at("matrix_digest").get<std::string>();
    r.regions_disjoint = j.at("regions_disjoint").get<bool>();
  } else {
    r.reason = j.at("reason").get<std::string>();
  }
  r.note = j.value("note", "");
  r.seconds = j.at("seconds").get<double>();
  return r;
}

struct RunResult {
  RunRecord record;
  std::optional<VerifiedSubshift> subshift;
};

/// One pipeline run. Every library error becomes an outcome; nothing
/// escapes except std::bad_alloc and friends.
inline RunResult compute_run(const RunConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  RunResult out;
  RunRecord& rec = out.record;
  rec.config = cfg;
  rec.key = run_key(cfg);
  rec.cascade = cascade_levels(cfg.resolution);
  try {
    std::optional<GridSpec> prev;
    std::vector<BoxId> prev_inv;
    std::optional<BoxMap> full, inv;
    for (const Rational& level : rec.cascade) {
      GridSpec g(cfg.b0, level, cfg.window);
      if (!prev) {
        full.emplace(build_boxmap(g, cfg.a, cfg.b, cfg.b0, cfg.budget));
      } else {
        // Every box meeting the invariant set meets some coarse invariant box.
        std::vector<BoxId> seeds;
        for (BoxId c : prev_inv)
          for (BoxId f : meeting(g, box_of(*prev, c)))
            for (int di = -1; di <= 1; ++di)
              for (int dj = -1; dj <= 1; ++dj) seeds.push_back({f.i + di, f.j + dj});
        std::sort(seeds.begin(), seeds.end());
        seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
        full.emplace(build_boxmap_from(g, cfg.a, cfg.b, std::move(seeds), cfg.budget));
      }
      inv.emplace(invariant_part(*full));
      if (inv->empty()) fail(ErrorKind::EmptyInvariantSet, "no invariant boxes at resolution " + level.to_string());
      prev = g;
      prev_inv = inv->boxes();
    }
    rec.boxes = full->size();
    rec.invariant_boxes = inv->size();
    IndexPair pair = build_index_pair(*full, *inv);
    IndexMap im = induced_index_map(pair, false);
    rec.components = im.components.size();
    rec.generators = im.generators();
    VerifiedSubshift vs = extract_subshift(im, cfg.rule);
    EntropyBound eb = entropy_lower_bound(vs.matrix);
    rec.symbols = vs.matrix.size();
    rec.note = vs.note;
    if (eb.value > kDegreeGuard) {
      rec.outcome = Outcome::Unverifiable;
      rec.reason = "degree guard: bound exceeds log 2";
    } else {
      rec.outcome = Outcome::Bound;
      rec.bound = eb.value;
      rec.estimate = eb.estimate;
      rec.beta = eb.beta_num.str() + "/" + eb.beta_den.str();
      for (const BigInt& v : eb.witness) rec.witness.push_back(v.str());
      rec.witness_scc = eb.scc;
      rec.matrix_digest = vs.matrix.digest();
      rec.regions_disjoint = vs.regions_disjoint;
      out.subshift = std::move(vs);
    }
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::BudgetExceeded: rec.outcome = Outcome::BudgetExceeded; break;
      case ErrorKind::IsolationFailure: rec.outcome = Outcome::IsolationFailure; break;
      default: rec.outcome = Outcome::Unverifiable; break;
    }
    rec.reason = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Run store: <root>/<key>/{record.json, matrix.txt, regions.json}.

inline std::filesystem::path default_cache_root() {
  if (const char* env = std::getenv("HENTROPY_CACHE_DIR"); env && *env) return env;
  return "hentropy-cache";
}

inline nlohmann::json regions_json(const VerifiedSubshift& vs) {
  nlohmann::json syms = nlohmann::json::array();
  for (const auto& reg : vs.regions) {
    nlohmann::json boxes = nlohmann::json::array();
    for (BoxId b : reg) boxes.push_back({b.i, b.j});
    syms.push_back(boxes);
  }
  return {{"symbols", syms}, {"symbol_component", vs.symbol_component}};
}

inline std::vector<std::vector<BoxId>> regions_from_json(const nlohmann::json& j) {
  std::vector<std::vector<BoxId>> out;
  for (const auto& reg : j.at("symbols")) {
    out.emplace_back();
    for (const auto& b : reg) out.back().push_back({b.at(0).get<std::int32_t>(), b.at(1).get<std::int32_t>()});
  }
  return out;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) fail(ErrorKind::ParseError, "cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, p.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + p.string());
}

class RunStore {
 public:
  explicit RunStore(std::filesystem::path root = default_cache_root()) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path dir(const std::string& key) const { return root_ / key; }

  std::optional<RunRecord> load(const std::string& key) const {
    auto p = dir(key) / "record.json";
    if (!std::filesystem::exists(p)) return std::nullopt;
    return record_from_json(read_json(p));
  }

  /// Writes into a scratch directory and renames it into place, so a killed
  /// run never leaves a partial record and an existing record is never
  /// replaced.
  void store(const RunResult& r) const {
    std::filesystem::create_directories(root_);
    auto final_dir = dir(r.record.key);
    if (std::filesystem::exists(final_dir / "record.json")) return;
    auto tmp = root_ / (".tmp-" + r.record.key + "-" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    std::filesystem::remove_all(tmp);
    std::filesystem::create_directories(tmp);
    if (r.subshift) {
      write_text(tmp / "matrix.txt", format_matrix(r.subshift->matrix));
      write_text(tmp / "regions.json", regions_json(*r.subshift).dump() + "\n");
    }
    write_text(tmp / "record.json", to_json(r.record).dump(2) + "\n");
    std::error_code ec;
    if (std::filesystem::exists(final_dir)) std::filesystem::remove_all(final_dir, ec);
    std::filesystem::rename(tmp, final_dir, ec);
    if (ec) std::filesystem::remove_all(tmp);
  }

  /// Cached record when present (budget_exceeded records are retried when
  /// the budget grew), otherwise a fresh computation that is persisted.
  RunRecord run(const RunConfig& cfg, bool* cached = nullptr) const {
    std::string key = run_key(cfg);
    if (auto r = load(key)) {
      if (!(r->outcome == Outcome::BudgetExceeded && r->config.budget < cfg.budget)) {
        if (cached) *cached = true;
        return *r;
      }
      std::error_code ec;
      std::filesystem::remove_all(dir(key), ec);
    }
    if (cached) *cached = false;
    RunResult res = compute_run(cfg);
    store(res);
    return res.record;
  }

 private:
  std::filesystem::path root_;
};

/// Re-derives a run's certified ratio from its stored matrix and witness.
inline bool verify_run_witness(const std::filesystem::path& run_dir) {
  RunRecord r = record_from_json(read_json(run_dir / "record.json"));
  if (r.outcome != Outcome::Bound) return false;
  IntMatrix m = load_matrix((run_dir / "matrix.txt").string(), true);
  if (m.digest() != r.matrix_digest) return false;
  EntropyBound eb;
  auto slash = r.beta.find('/');
  eb.beta_num = BigInt(r.beta.substr(0, slash));
  eb.beta_den = BigInt(r.beta.substr(slash + 1));
  for (const auto& w : r.witness) eb.witness.push_back(BigInt(w));
  eb.scc = r.witness_scc;
  eb.value = r.bound;
  if (!verify_entropy_witness(m, eb)) return false;
  if (r.witness_scc.empty()) return r.bound == 0.0;
  if (eb.beta_num <= eb.beta_den) return r.bound == 0.0;
  return r.bound <= log_lower(eb.beta_num, eb.beta_den);
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepResult {
  std::vector<RunRecord> records;  // schedule order
  std::size_t computed = 0;
  std::optional<double> max_bound;
};

/// Runs the schedule on a bounded worker pool; records come back in
/// schedule order regardless of completion order.
inline SweepResult run_sweep(const RunStore& store, const RunConfig& base, Rational r_min, Rational r_max,
                             int steps_per_doubling, unsigned jobs = 1,
                             const std::function<void(const RunRecord&, bool)>& progress = {}) {
  std::vector<Rational> sched = resolution_schedule(r_min, r_max, steps_per_doubling);
  SweepResult out;
  out.records.resize(sched.size());
  std::atomic<std::size_t> next{0}, computed{0};
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t k = next++;
      if (k >= sched.size()) return;
      RunConfig cfg = base;
      cfg.resolution = sched[k];
      bool cached = false;
      RunRecord rec = store.run(cfg, &cached);
      if (!cached) ++computed;
      std::lock_guard<std::mutex> lock(mu);
      out.records[k] = rec;
      if (progress) progress(rec, cached);
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(sched.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  out.computed = computed;
  for (const auto& r : out.records)
    if (r.outcome == Outcome::Bound && (!out.max_bound || r.bound > *out.max_bound)) out.max_bound = r.bound;
  return out;
}

inline std::string format_bound(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

inline std::string sweep_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "resolution,boxes,outcome,bound,seconds\n";
  for (const auto& r : records) {
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.3f", r.seconds);
    out << r.config.resolution.to_string() << ',' << r.boxes << ',' << to_string(r.outcome) << ','
        << (r.outcome == Outcome::Bound ? format_bound(r.bound) : "") << ',' << secs << '\n';
  }
  return out.str();
}

/// Bound against log2(resolution), with the maximum as a horizontal line.
inline std::string sweep_svg(const std::vector<RunRecord>& records, const std::string& title) {
  const double W = 800, H = 500, L = 70, R = 30, T = 40, B = 60;
  double xmin = 1e300, xmax = -1e300, ymax = 0.0;
  std::optional<double> best;
  for (const auto& r : records) {
    double x = std::log2(r.config.resolution.to_double());
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    if (r.outcome == Outcome::Bound) {
      ymax = std::max(ymax, r.bound);
      if (!best || r.bound > *best) best = r.bound;
    }
  }
  if (!(xmax > xmin)) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  ymax = std::max(0.75, std::ceil(ymax * 10.0) / 10.0);
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - y / ymax * (H - T - B); };
  std::ostringstream s;
  char buf[256];
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
  s << "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  s << "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", L, H - B, W - R, H - B);
  s << buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", L, T, L, H - B);
  s << buf;
  for (int k = static_cast<int>(std::ceil(xmin)); k <= static_cast<int>(std::floor(xmax)); ++k) {
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%g\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">%d</text>\n",
                  px(k), H - B + 18, 1 << k);
    s << buf;
  }
  for (int k = 0; k * 0.1 <= ymax + 1e-9; ++k) {
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%.1f\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">%.1f</text>\n",
                  L - 6, py(k * 0.1) + 4, k * 0.1);
    s << buf;
  }
  s << "<text x=\"400\" y=\"485\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">resolution</text>\n";
  s << "<text x=\"18\" y=\"250\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
       "transform=\"rotate(-90 18 250)\">entropy lower bound</text>\n";
  s << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
  bool first = true;
  for (const auto& r : records) {
    if (r.outcome != Outcome::Bound) continue;
    std::snprintf(buf, sizeof buf, "%s%.1f,%.1f", first ? "" : " ", px(std::log2(r.config.resolution.to_double())),
                  py(r.bound));
    s << buf;
    first = false;
  }
  s << "\"/>\n";
  for (const auto& r : records) {
    double x = px(std::log2(r.config.resolution.to_double()));
    if (r.outcome == Outcome::Bound)
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"2.5\" fill=\"#1f4e9c\"/>\n", x, py(r.bound));
    else
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"2.5\" fill=\"none\" stroke=\"gray\"/>\n", x, py(0));
    s << buf;
  }
  if (best) {
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%.1f\" x2=\"%g\" y2=\"%.1f\" stroke=\"red\"/>\n"
                  "<text x=\"%g\" y=\"%.1f\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" "
                  "fill=\"red\">max %.6f</text>\n",
                  L, py(*best), W - R, py(*best), W - R, py(*best) - 5, *best);
    s << buf;
  }
  s << "</svg>\n";
  return s.str();
}

// ---------------------------------------------------------------------------
// Plateau table.

struct Plateau {
  int index = 0;
  std::string a_min, a_max, representative, paper_bound;
};

struct PlateauTable {
  std::string b;
  std::vector<Plateau> plateaus;
  std::optional<IntMatrix> tdms;
};

inline PlateauTable load_plateau_table(const std::string& path) {
  nlohmann::json j = read_json(path);
  PlateauTable t;
  try {
    t.b = j.at("b").get<std::string>();
    for (const auto& p : j.at("plateaus"))
      t.plateaus.push_back({p.at("index").get<int>(), p.at("a_min").get<std::string>(), p.at("a_max").get<std::string>(),
                            p.at("representative").get<std::string>(), p.at("paper_bound").get<std::string>()});
    if (j.contains("tdms")) {
      const auto& rows = j.at("tdms").at("rows");
      std::ostringstream text;
      text << rows.size() << '\n';
      for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) text << (k ? " " : "") << row[k].get<int>();
        text << '\n';
      }
      std::istringstream in(text.str());
      t.tdms = parse_matrix(in, path);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, path + ": " + e.what());
  }
  return t;
}

// ---------------------------------------------------------------------------
// DMS verification.

struct DmsCandidate {
  std::filesystem::path dir;
  RunRecord record;
};

/// Collects bound records from a run directory, a sweep directory (with a
/// runs.txt listing) or a directory of run directories.
inline std::vector<DmsCandidate> collect_runs(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> dirs;
  if (std::filesystem::exists(path / "record.json")) {
    dirs.push_back(path);
  } else if (std::filesystem::exists(path / "runs.txt")) {
    std::ifstream in(path / "runs.txt");
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) dirs.emplace_back(line);
  } else if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::directory_iterator(path))
      if (e.is_directory() && std::filesystem::exists(e.path() / "record.json")) dirs.push_back(e.path());
  } else {
    fail(ErrorKind::InvalidArgument, "no run records under " + path.string());
  }
  std::vector<DmsCandidate> out;
  for (const auto& d : dirs) {
    RunRecord r = record_from_json(read_json(d / "record.json"));
    if (r.outcome == Outcome::Bound && r.symbols > 0) out.push_back({d, r});
  }
  std::sort(out.begin(), out.end(), [](const DmsCandidate& x, const DmsCandidate& y) {
    if (x.record.bound != y.record.bound) return x.record.bound > y.record.bound;
    if (x.record.symbols != y.record.symbols) return x.record.symbols < y.record.symbols;
    return x.record.key < y.record.key;
  });
  return out;
}

struct DmsAttempt {
  std::filesystem::path dir;
  std::string resolution;
  std::size_t size = 0;
  double estimate = 0.0;
  std::string result;
};

struct DmsVerification {
  bool success = false;
  std::vector<DmsAttempt> attempts;
  std::filesystem::path run_dir;
  RunRecord record;
  std::string orientation;  // "as stored" or "transposed"
  IntMatrix matched;        // the orientation of the target reached
  SSECertificate certificate;
  std::vector<std::size_t> permutation;
  std::vector<std::vector<BoxId>> regions;  // per target symbol
};

/// Restricts the run's matrix to its witness SCC and searches amalgamation
/// orders onto the target or its transpose. Candidates are tried best bound
/// first; every attempt is reported.
inline DmsVerification dms_verify(const std::vector<DmsCandidate>& candidates, const IntMatrix& target,
                                  std::size_t runs = 5000, std::size_t max_candidates = 8) {
  DmsVerification out;
  const double target_h = entropy_estimate(target);
  for (std::size_t c = 0; c < candidates.size() && c < max_candidates; ++c) {
    const DmsCandidate& cand = candidates[c];
    DmsAttempt att;
    att.dir = cand.dir;
    att.resolution = cand.record.config.resolution.to_string();
    IntMatrix full = load_matrix((cand.dir / "matrix.txt").string(), true);
    auto regions_all = regions_from_json(read_json(cand.dir / "regions.json"));
    const auto& scc = cand.record.witness_scc;
    IntMatrix m(scc.size());
    std::vector<std::vector<BoxId>> regions;
    for (std::size_t s = 0; s < scc.size(); ++s) {
      regions.push_back(regions_all.at(scc[s]));
      for (std::size_t t = 0; t < scc.size(); ++t) m(t, s) = full(scc[t], scc[s]);
    }
    att.size = m.size();
    att.estimate = entropy_estimate(m);
    char buf[160];
    if (std::abs(att.estimate - target_h) > 1e-9) {
      std::snprintf(buf, sizeof buf, "not decided: entropy estimates %.6f vs %.6f", att.estimate, target_h);
      att.result = buf;
      out.attempts.push_back(att);
      continue;
    }
    bool done = false;
    // Amalgamation-only chains first: they carry regions along.
    for (int attempt = 0; attempt < 4 && !done; ++attempt) {
      bool transpose = attempt % 2 == 1;
      IntMatrix goal = transpose ? target.transpose() : target;
      std::optional<Conjugacy> conj;
      if (attempt < 2) {
        conj = amalgamate_onto(m, goal, runs);
      } else {
        try {
          conj = conjugate_up_to_permutation(m, goal);
        } catch (const Error&) {
        }
      }
      if (!conj || !conj->certificate.verify() || !(conj->certificate.end() == goal)) continue;
      out.success = true;
      out.run_dir = cand.dir;
      out.record = cand.record;
      out.orientation = transpose ? "transposed" : "as stored";
      out.matched = goal;
      out.certificate = conj->certificate;
      out.permutation = conj->permutation;
      if (attempt < 2) out.regions = track_regions(out.certificate, regions);
      att.result = std::string("matched target ") + out.orientation + " after " +
                   std::to_string(out.certificate.steps.size()) + " steps";
      done = true;
    }
    if (!done) {
      std::snprintf(buf, sizeof buf, "not decided: no amalgamation order reached a relabelling of the target (%zu symbols)",
                    m.size());
      att.result = buf;
    }
    out.attempts.push_back(att);
    if (done) break;
  }
  return out;
}

}  // namespace hentropy
