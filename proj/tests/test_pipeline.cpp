#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "hentropy/pipeline.hpp"

using namespace hentropy;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("hentropy-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig config(double a, Rational r) {
  RunConfig c;
  c.a = a;
  c.b = -1.0;
  c.resolution = r;
  return c;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("cascade levels") {
  CHECK(cascade_levels(Rational(2048)) ==
        std::vector<Rational>{16, 32, 64, 128, 256, 512, 1024, 2048});
  CHECK(cascade_levels(Rational(9413, 52)).front() == Rational(9413, 416));
  CHECK(cascade_levels(Rational(16)) == std::vector<Rational>{16});
  CHECK(cascade_levels(Rational(12)) == std::vector<Rational>{12});
}

TEST_CASE("run keys separate parameters") {
  RunConfig c = config(5.4, Rational(128));
  CHECK(run_key(c) == run_key(config(5.4, Rational(128))));
  CHECK(run_key(c) != run_key(config(std::nextafter(5.4, 6.0), Rational(128))));
  CHECK(run_key(c) != run_key(config(5.4, Rational(256))));
  RunConfig w = c;
  w.window = {Interval(-6, 6), Interval(-6, 6)};
  CHECK(run_key(c) != run_key(w));
  RunConfig budget = c;
  budget.budget = 7;
  CHECK(run_key(c) == run_key(budget));
}

TEST_CASE("a single run at a=5.4") {
  RunResult r = compute_run(config(5.4, Rational(128)));
  REQUIRE(r.record.outcome == Outcome::Bound);
  REQUIRE(r.subshift);
  CHECK(r.record.bound > 0.6);
  CHECK(r.record.bound <= kDegreeGuard);
  CHECK(r.record.bound <= r.record.estimate);
  CHECK(r.record.matrix_digest == r.subshift->matrix.digest());
  EntropyBound eb = entropy_lower_bound(r.subshift->matrix);
  CHECK(eb.value == r.record.bound);
}

TEST_CASE("budget of one box") {
  RunResult r = compute_run([] {
    RunConfig c = config(5.4, Rational(64));
    c.budget = 1;
    return c;
  }());
  CHECK(r.record.outcome == Outcome::BudgetExceeded);
  CHECK(!r.subshift);
}

TEST_CASE("coarse grids and zero-entropy parameters give no positive bound") {
  RunRecord coarse = compute_run(config(5.4, Rational(16))).record;
  CHECK(coarse.outcome != Outcome::Bound);
  RunRecord flat = compute_run(config(0.5, Rational(32))).record;
  CHECK((flat.outcome != Outcome::Bound || flat.bound == 0.0));
}

TEST_CASE("records round-trip through JSON") {
  RunRecord r = compute_run(config(6.0, Rational(128))).record;
  RunRecord back = record_from_json(nlohmann::json::parse(to_json(r).dump()));
  CHECK(to_json(back) == to_json(r));
  RunRecord f = compute_run(config(6.0, Rational(16))).record;
  CHECK(to_json(record_from_json(to_json(f))) == to_json(f));
}

TEST_CASE("store persists, verifies and never rewrites") {
  fs::path root = scratch("store");
  RunStore store(root);
  bool cached = true;
  RunRecord r = store.run(config(6.0, Rational(128)), &cached);
  CHECK(!cached);
  fs::path dir = store.dir(r.key);
  CHECK(fs::exists(dir / "record.json"));
  CHECK(fs::exists(dir / "matrix.txt"));
  CHECK(verify_run_witness(dir));
  auto stamp = fs::last_write_time(dir / "record.json");
  RunRecord again = store.run(config(6.0, Rational(128)), &cached);
  CHECK(cached);
  CHECK(to_json(again) == to_json(r));
  store.store(compute_run(config(6.0, Rational(128))));
  CHECK(fs::last_write_time(dir / "record.json") == stamp);
  // A tampered witness no longer verifies.
  nlohmann::json j = read_json(dir / "record.json");
  j["bound"] = 0.7;
  write_text(dir / "record.json", j.dump());
  CHECK(!verify_run_witness(dir));
  fs::remove_all(root);
}

TEST_CASE("sweep aggregation and resume") {
  fs::path root = scratch("sweep");
  RunStore store(root);
  RunConfig base = config(6.0, Rational(16));
  SweepResult first = run_sweep(store, base, Rational(16), Rational(256), 2, 2);
  CHECK(first.computed == first.records.size());
  std::string csv = sweep_csv(first.records);
  auto rows = lines(csv);
  REQUIRE(rows.size() == first.records.size() + 1);
  CHECK(rows[0] == "resolution,boxes,outcome,bound,seconds");
  double best = 0;
  for (const auto& r : first.records)
    if (r.outcome == Outcome::Bound) best = std::max(best, r.bound);
  REQUIRE(first.max_bound);
  CHECK(*first.max_bound == best);
  CHECK(best > 0.6931);
  SweepResult second = run_sweep(store, base, Rational(16), Rational(256), 2, 1);
  CHECK(second.computed == 0);
  CHECK(sweep_csv(second.records) == csv);
  std::string svg = sweep_svg(first.records, "a = 6");
  CHECK(svg.find("width=\"800\" height=\"500\"") != std::string::npos);
  CHECK(svg.find("stroke=\"red\"") != std::string::npos);
  CHECK(svg.find(">resolution<") != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("bundled plateau table") {
  PlateauTable t = load_plateau_table(std::string(HENTROPY_DATA_DIR) + "/plateaus.json");
  REQUIRE(t.plateaus.size() == 15);
  CHECK(t.b == "-1");
  std::vector<std::string> reps;
  for (const auto& p : t.plateaus) reps.push_back(p.representative);
  CHECK(reps == std::vector<std::string>{"4.5385", "4.5409", "4.5800", "4.6323", "4.6788", "4.7838", "4.8600", "4.9679",
                                         "5.1483", "5.4000", "5.5900", "5.6500", "5.6839", "5.6859", "5.6934"});
  CHECK(t.plateaus[0].paper_bound == "0.6374");
  CHECK(t.plateaus[9].paper_bound == "0.6774");
  CHECK(t.plateaus[9].a_min == "5.1904");
  CHECK(t.plateaus[9].a_max == "5.5366");
  CHECK(t.plateaus[10].paper_bound == "0.6814");
  REQUIRE(t.tdms);
  CHECK(*t.tdms == load_matrix(std::string(HENTROPY_DATA_DIR) + "/tdms.txt"));
}

TEST_CASE("T_DMS reaches itself with the identity") {
  IntMatrix t = load_matrix(std::string(HENTROPY_DATA_DIR) + "/tdms.txt");
  auto c = amalgamate_onto(t, t);
  REQUIRE(c);
  std::vector<std::size_t> id(t.size());
  for (std::size_t k = 0; k < id.size(); ++k) id[k] = k;
  CHECK(c->permutation == id);
  CHECK(c->certificate.verify());
}

TEST_CASE("dms verification on pipeline runs") {
  fs::path root = scratch("dms");
  RunStore store(root);
  IntMatrix t = load_matrix(std::string(HENTROPY_DATA_DIR) + "/tdms.txt");

  RunRecord full = store.run(config(6.0, Rational(128)));
  DmsVerification no = dms_verify(collect_runs(store.dir(full.key)), t, 200);
  CHECK(!no.success);
  REQUIRE(no.attempts.size() == 1);
  CHECK(no.attempts[0].result.find("0.693147") != std::string::npos);
  CHECK(no.attempts[0].result.find("0.677444") != std::string::npos);

  RunRecord dms = store.run(config(5.4, Rational(256)));
  REQUIRE(dms.outcome == Outcome::Bound);
  DmsVerification yes = dms_verify(collect_runs(store.dir(dms.key)), t);
  REQUIRE(yes.success);
  CHECK(yes.certificate.verify());
  CHECK(yes.certificate.end() == yes.matched);
  CHECK((yes.matched == t || yes.matched == t.transpose()));
  REQUIRE(yes.regions.size() == 8);
  // Merged regions partition the witness symbols' boxes.
  auto all = regions_from_json(read_json(store.dir(dms.key) / "regions.json"));
  std::vector<BoxId> expect, got;
  for (auto s : dms.witness_scc) expect.insert(expect.end(), all[s].begin(), all[s].end());
  for (const auto& r : yes.regions) got.insert(got.end(), r.begin(), r.end());
  std::sort(expect.begin(), expect.end());
  std::sort(got.begin(), got.end());
  CHECK(got == expect);
  fs::remove_all(root);
}
