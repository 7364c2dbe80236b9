// hentropy: rigorous entropy lower bounds for Henon maps.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hentropy/pipeline.hpp"

using namespace hentropy;
namespace fs = std::filesystem;

namespace {

std::string data_file(const std::string& name) { return std::string(HENTROPY_DATA_DIR) + "/" + name; }

// Parses a decimal parameter and warns when the double differs from it.
double parse_param(const std::string& name, const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v)) fail(ErrorKind::InvalidArgument, name + ": not a number: " + text);
  // glibc prints the exact binary value, so trailing zeros are the only
  // difference for exactly representable inputs.
  char buf[1100];
  std::snprintf(buf, sizeof buf, "%.1074f", v);
  auto trim = [](std::string s) {
    if (!s.empty() && s[0] == '+') s.erase(0, 1);
    if (s.find('.') != std::string::npos) {
      while (!s.empty() && s.back() == '0') s.pop_back();
      if (!s.empty() && s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
  };
  std::string exact = trim(buf);
  if (text.find_first_of("eE") == std::string::npos && exact != trim(text))
    std::fprintf(stderr, "warning: %s = %s is not exactly representable; using %s\n", name.c_str(), text.c_str(),
                 exact.substr(0, 40).c_str());
  return v;
}

Rect2 parse_rect(const std::string& name, const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(parse_param(name, tok));
  if (v.size() != 4 || !(v[0] < v[1]) || !(v[2] < v[3]))
    fail(ErrorKind::InvalidArgument, name + " expects xlo,xhi,ylo,yhi with lo < hi");
  return {Interval(v[0], v[1]), Interval(v[2], v[3])};
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct GridOptions {
  std::string a, b, b0, window;
  std::size_t budget = 20'000'000;
  std::string rule = "signed-trace";

  RunConfig config() const {
    RunConfig c;
    c.a = parse_param("a", a);
    c.b = parse_param("b", b);
    if (!b0.empty()) c.b0 = parse_rect("b0", b0);
    if (!window.empty()) c.window = parse_rect("window", window);
    c.budget = budget;
    if (rule == "single-generator")
      c.rule = ExtractionRule::SingleGenerator;
    else if (rule != "signed-trace")
      fail(ErrorKind::InvalidArgument, "unknown rule " + rule);
    return c;
  }
};

void add_grid_options(CLI::App* cmd, GridOptions& g) {
  cmd->add_option("--a", g.a, "parameter a")->required();
  cmd->add_option("--b", g.b, "parameter b")->required();
  cmd->add_option("--b0", g.b0, "seed box xlo,xhi,ylo,yhi (default -4,4,-4,4)");
  cmd->add_option("--window", g.window, "computational window (default -5,5,-5,5)");
  cmd->add_option("--budget", g.budget, "maximum boxes per grid level");
  cmd->add_option("--rule", g.rule, "extraction rule: signed-trace or single-generator");
}

void print_record_line(const RunRecord& r, bool cached) {
  std::fprintf(stderr, "r=%-10s boxes=%-8zu %-17s %s%s (%.2fs)%s\n", r.config.resolution.to_string().c_str(), r.boxes,
               std::string(to_string(r.outcome)).c_str(),
               r.outcome == Outcome::Bound ? format_bound(r.bound).c_str() : "",
               r.outcome == Outcome::Bound ? (" symbols=" + std::to_string(r.symbols)).c_str() : "", r.seconds,
               cached ? " cached" : "");
}

int cmd_bound(const GridOptions& g, const std::string& resolution) {
  RunConfig cfg = g.config();
  cfg.resolution = Rational::parse(resolution);
  RunStore store;
  bool cached = false;
  RunRecord r = store.run(cfg, &cached);
  print_record_line(r, cached);
  std::cout << to_json(r).dump(2) << "\n";
  std::fprintf(stderr, "run directory: %s\n", store.dir(r.key).string().c_str());
  return 0;
}

std::string default_sweep_dir(const RunConfig& c, Rational rmin, Rational rmax, int steps) {
  auto clean = [](std::string s) {
    for (char& ch : s)
      if (ch == '/') ch = '_';
    return s;
  };
  return "sweep_a" + fmt("%g", c.a) + "_b" + fmt("%g", c.b) + "_" + clean(rmin.to_string()) + "-" +
         clean(rmax.to_string()) + "_s" + std::to_string(steps);
}

SweepResult do_sweep(const RunStore& store, const RunConfig& cfg, Rational rmin, Rational rmax, int steps, unsigned jobs,
                     const fs::path& out) {
  SweepResult res = run_sweep(store, cfg, rmin, rmax, steps, jobs, print_record_line);
  fs::create_directories(out);
  write_text(out / "sweep.csv", sweep_csv(res.records));
  char title[160];
  std::snprintf(title, sizeof title, "a = %g, b = %g", cfg.a, cfg.b);
  write_text(out / "sweep.svg", sweep_svg(res.records, title));
  std::string runs;
  for (const auto& r : res.records) runs += fs::absolute(store.dir(r.key)).string() + "\n";
  write_text(out / "runs.txt", runs);
  return res;
}

int cmd_sweep(const GridOptions& g, const std::string& rmin_s, const std::string& rmax_s, int steps, unsigned jobs,
              std::string out) {
  RunConfig cfg = g.config();
  Rational rmin = Rational::parse(rmin_s), rmax = Rational::parse(rmax_s);
  if (out.empty()) out = default_sweep_dir(cfg, rmin, rmax, steps);
  RunStore store;
  SweepResult res = do_sweep(store, cfg, rmin, rmax, steps, jobs, out);
  std::cout << sweep_csv(res.records);
  if (res.max_bound)
    std::fprintf(stderr, "max bound %s over %zu runs (%zu computed); output in %s\n", format_bound(*res.max_bound).c_str(),
                 res.records.size(), res.computed, out.c_str());
  else
    std::fprintf(stderr, "no run produced a bound (%zu runs); output in %s\n", res.records.size(), out.c_str());
  return 0;
}

int cmd_plateaus(const std::string& table_path, const std::string& rmin_s, const std::string& rmax_s, int steps,
                 unsigned jobs, std::string out, std::size_t budget) {
  PlateauTable table = load_plateau_table(table_path);
  Rational rmin = Rational::parse(rmin_s), rmax = Rational::parse(rmax_s);
  if (out.empty()) out = "plateaus";
  RunStore store;
  std::string csv = "index,a_min,a_max,representative,paper_bound,computed_bound,gap,best_resolution\n";
  std::printf("%-3s %-18s %-8s %-8s %-11s %-10s %s\n", "#", "interval", "rep", "paper", "computed", "gap", "best r");
  for (const Plateau& p : table.plateaus) {
    GridOptions g;
    g.a = p.representative;
    g.b = table.b;
    g.budget = budget;
    RunConfig cfg = g.config();
    SweepResult res = do_sweep(store, cfg, rmin, rmax, steps, jobs, fs::path(out) / ("plateau_" + std::to_string(p.index)));
    std::string computed, gap, best_r;
    if (res.max_bound) {
      computed = fmt("%.6f", *res.max_bound);
      gap = fmt("%.6f", std::stod(p.paper_bound) - *res.max_bound);
      for (const auto& r : res.records)
        if (r.outcome == Outcome::Bound && r.bound == *res.max_bound) {
          best_r = r.config.resolution.to_string();
          break;
        }
    }
    std::printf("%-3d %-18s %-8s %-8s %-11s %-10s %s\n", p.index, ("[" + p.a_min + ", " + p.a_max + "]").c_str(),
                p.representative.c_str(), p.paper_bound.c_str(), computed.empty() ? "none" : computed.c_str(),
                gap.c_str(), best_r.c_str());
    std::fflush(stdout);
    csv += std::to_string(p.index) + "," + p.a_min + "," + p.a_max + "," + p.representative + "," + p.paper_bound + "," +
           computed + "," + gap + "," + best_r + "\n";
  }
  fs::create_directories(out);
  write_text(fs::path(out) / "plateaus.csv", csv);
  std::fprintf(stderr, "table written to %s\n", (fs::path(out) / "plateaus.csv").string().c_str());
  return 0;
}

std::string region_svg(const std::vector<std::vector<BoxId>>& regions, const GridSpec& g) {
  static const char* colors[] = {"#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a6a600", "#a65628", "#f781bf",
                                 "#666666", "#1b9e77", "#d95f02", "#7570b3"};
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& reg : regions)
    for (BoxId b : reg) {
      Rect2 r = box_of(g, b);
      x0 = std::min(x0, r.x.lo());
      x1 = std::max(x1, r.x.hi());
      y0 = std::min(y0, r.y.lo());
      y1 = std::max(y1, r.y.hi());
    }
  double scale = std::min(700 / (x1 - x0), 440 / (y1 - y0));
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n"
       "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  char buf[200];
  for (std::size_t k = 0; k < regions.size(); ++k) {
    const char* c = colors[k % 12];
    for (BoxId b : regions[k]) {
      Rect2 r = box_of(g, b);
      std::snprintf(buf, sizeof buf, "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"/>\n",
                    50 + (r.x.lo() - x0) * scale, 470 - (r.y.hi() - y0) * scale, r.x.width() * scale,
                    r.y.width() * scale, c);
      s << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"760\" y=\"%zu\" font-family=\"sans-serif\" font-size=\"13\" fill=\"%s\">N%zu</text>\n",
                  30 + 18 * k, c, k + 1);
    s << buf;
  }
  s << "</svg>\n";
  return s.str();
}

int cmd_dms_verify(const std::string& run, const std::string& target_path, std::size_t runs, std::string out) {
  IntMatrix target = load_matrix(target_path);
  auto candidates = collect_runs(run);
  if (candidates.empty()) {
    std::fprintf(stderr, "not decided: no run with a bound under %s\n", run.c_str());
    return 3;
  }
  DmsVerification v = dms_verify(candidates, target, runs);
  for (const auto& a : v.attempts)
    std::printf("run r=%s: %zu symbols, entropy estimate %.6f: %s\n", a.resolution.c_str(), a.size, a.estimate,
                a.result.c_str());
  if (!v.success) {
    std::printf("not decided: target has %zu symbols, entropy estimate %.6f\n", target.size(), entropy_estimate(target));
    return 3;
  }
  if (out.empty()) out = (fs::path(run) / "dms-verify").string();
  fs::create_directories(out);
  nlohmann::json cert = certificate_to_json(v.certificate);
  cert["orientation"] = v.orientation;
  cert["permutation"] = v.permutation;
  cert["run"] = fs::absolute(v.run_dir).string();
  write_text(fs::path(out) / "certificate.json", cert.dump() + "\n");
  GridSpec g(v.record.config.b0, v.record.config.resolution, v.record.config.window);
  if (!v.regions.empty()) {
    nlohmann::json rm;
    rm["grid"] = to_json(v.record)["grid"];
    rm["orientation"] = v.orientation;
    rm["regions"] = nlohmann::json::array();
    for (std::size_t k = 0; k < v.regions.size(); ++k) {
      nlohmann::json boxes = nlohmann::json::array();
      for (BoxId b : v.regions[k]) boxes.push_back({b.i, b.j});
      rm["regions"].push_back({{"name", "N" + std::to_string(k + 1)}, {"boxes", boxes}});
    }
    write_text(fs::path(out) / "region_map.json", rm.dump() + "\n");
    write_text(fs::path(out) / "region_map.svg", region_svg(v.regions, g));
  }
  std::printf("verified: strong shift equivalence from the r=%s matrix (%zu symbols) to T_DMS (%s), %zu steps\n",
              v.record.config.resolution.to_string().c_str(), v.certificate.start.size(), v.orientation.c_str(),
              v.certificate.steps.size());
  std::printf("permutation:");
  for (auto p : v.permutation) std::printf(" %zu", p);
  std::printf("\noutput in %s\n", out.c_str());
  return 0;
}

int cmd_matrix_entropy(const std::vector<std::string>& files) {
  for (const auto& f : files) {
    IntMatrix m = load_matrix(f);
    EntropyBound eb = entropy_lower_bound(m);
    std::printf("%s: %zu symbols, h >= %.10f (certified; beta = %s/%s)\n", f.c_str(), m.size(), eb.value,
                eb.beta_num.str().c_str(), eb.beta_den.str().c_str());
    std::printf("  log sp estimate %.10f, certified slack %.2e\n", eb.estimate, eb.estimate - eb.value);
  }
  return 0;
}

int cmd_matrix_reduce(const std::string& file, const std::string& strategy, std::size_t node_limit,
                      const std::string& cert_out) {
  IntMatrix m = load_matrix(file);
  Reduction r;
  if (strategy == "greedy")
    r = reduce(m, Strategy::Greedy, node_limit);
  else if (strategy == "exhaustive")
    r = reduce(m, Strategy::Exhaustive, node_limit);
  else if (strategy == "best")
    r = reduce_best_effort(m, node_limit);
  else
    fail(ErrorKind::InvalidArgument, "unknown strategy " + strategy);
  std::printf("reduced %zu -> %zu symbols in %zu step(s)\n", m.size(), r.result.size(), r.certificate.steps.size());
  std::printf("%s", format_matrix(r.result).c_str());
  for (std::size_t k = 0; k < r.certificate.steps.size(); ++k) {
    const SseStep& st = r.certificate.steps[k];
    std::printf("step %zu: %s amalgamation of symbols %zu and %zu (kept %zu)\n", k + 1, st.kind.c_str(), st.kept,
                st.removed, st.kept);
  }
  if (!cert_out.empty()) {
    write_text(cert_out, certificate_to_json(r.certificate).dump() + "\n");
    std::printf("certificate written to %s\n", cert_out.c_str());
  }
  return 0;
}

int cmd_matrix_verify(const std::vector<std::string>& files) {
  int rc = 0;
  for (const auto& f : files) {
    SSECertificate c = certificate_from_json(read_json(f));
    if (auto bad = c.first_failure()) {
      std::printf("%s: FAILED at step %zu\n", f.c_str(), *bad);
      rc = 1;
    } else {
      std::printf("%s: ok, %zu steps, %zu -> %zu symbols\n", f.c_str(), c.steps.size(), c.start.size(), c.end().size());
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rigorous topological entropy lower bounds for Henon maps"};
  app.require_subcommand(1);

  GridOptions bound_g;
  std::string resolution;
  auto* bound = app.add_subcommand("bound", "one pipeline run at a fixed resolution");
  add_grid_options(bound, bound_g);
  bound->add_option("--resolution", resolution, "boxes per B0 side, p/q")->required();

  GridOptions sweep_g;
  std::string rmin = "16", rmax = "512", sweep_out;
  int steps = 2;
  unsigned jobs = std::max(1u, std::min(4u, std::thread::hardware_concurrency()));
  auto* sweep = app.add_subcommand("sweep", "runs over a resolution schedule, CSV and SVG output");
  add_grid_options(sweep, sweep_g);
  sweep->add_option("--rmin", rmin, "smallest resolution");
  sweep->add_option("--rmax", rmax, "largest resolution");
  sweep->add_option("--steps-per-doubling", steps, "schedule density");
  sweep->add_option("--jobs", jobs, "worker threads");
  sweep->add_option("--out", sweep_out, "output directory");

  std::string table = data_file("plateaus.json"), p_rmin = "16", p_rmax = "1024", p_out;
  int p_steps = 2;
  std::size_t p_budget = 20'000'000;
  auto* plateaus = app.add_subcommand("plateaus", "sweep every plateau representative and compare with the table");
  plateaus->add_option("--table", table, "plateau table (JSON)");
  plateaus->add_option("--rmin", p_rmin, "smallest resolution");
  plateaus->add_option("--rmax", p_rmax, "largest resolution");
  plateaus->add_option("--steps-per-doubling", p_steps, "schedule density");
  plateaus->add_option("--jobs", jobs, "worker threads");
  plateaus->add_option("--budget", p_budget, "maximum boxes per grid level");
  plateaus->add_option("--out", p_out, "output directory");

  std::string run, target = data_file("tdms.txt"), dms_out;
  std::size_t search_runs = 5000;
  auto* dms = app.add_subcommand("dms-verify", "strong shift equivalence from a run's subshift to T_DMS");
  dms->add_option("--run", run, "run directory, sweep directory, or directory of runs")->required();
  dms->add_option("--target", target, "target matrix file");
  dms->add_option("--search-runs", search_runs, "randomised amalgamation orders per orientation");
  dms->add_option("--out", dms_out, "output directory");

  auto* matrix = app.add_subcommand("matrix", "transition matrix tools");
  matrix->require_subcommand(1);
  std::vector<std::string> ent_files, verify_files;
  std::string reduce_file, strategy = "greedy", cert_out;
  std::size_t node_limit = 16;
  auto* ment = matrix->add_subcommand("entropy", "certified entropy lower bound");
  ment->add_option("files", ent_files)->required();
  auto* mred = matrix->add_subcommand("reduce", "amalgamation reduction with certificate");
  mred->add_option("file", reduce_file)->required();
  mred->add_option("--strategy", strategy, "greedy, exhaustive or best");
  mred->add_option("--node-limit", node_limit, "largest matrix for exhaustive search");
  mred->add_option("--cert", cert_out, "write the certificate as JSON");
  auto* mver = matrix->add_subcommand("verify-cert", "check a certificate chain");
  mver->add_option("files", verify_files)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bound) return cmd_bound(bound_g, resolution);
    if (*sweep) return cmd_sweep(sweep_g, rmin, rmax, steps, jobs, sweep_out);
    if (*plateaus) return cmd_plateaus(table, p_rmin, p_rmax, p_steps, jobs, p_out, p_budget);
    if (*dms) return cmd_dms_verify(run, target, search_runs, dms_out);
    if (*ment) return cmd_matrix_entropy(ent_files);
    if (*mred) return cmd_matrix_reduce(reduce_file, strategy, node_limit, cert_out);
    if (*mver) return cmd_matrix_verify(verify_files);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
