// Runs the desk-scale experiments and prints one PASS/FAIL line per acceptance criterion.
// Exits 0 whenever the runs complete; the verdicts are in the output.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hyplab/lab.hpp"

namespace lab = hyplab::lab;

namespace {

std::string out_dir;
std::map<std::string, lab::ExperimentReport> reports;

const lab::ExperimentReport& run(const std::string& key, const std::string& experiment,
                                 std::initializer_list<std::pair<const char*, std::string>> params = {}) {
  lab::RunConfig c;
  c.experiment = experiment;
  c.out = (std::filesystem::path(out_dir) / key).string();
  c.csv = true;
  for (const auto& [k, v] : params) c.set(k, v);
  std::fprintf(stderr, "running %s ...\n", key.c_str());
  lab::ExperimentReport r = lab::run(c);
  lab::write_report(r);
  std::fprintf(stderr, "  %s finished in %.2f s\n", key.c_str(), r.wall_time);
  return reports[key] = std::move(r);
}

std::string path_in(const std::string& key, const std::string& file) {
  return (std::filesystem::path(out_dir) / key / file).string();
}

struct Verdict {
  bool ok = true;
  std::string detail;

  void require(const lab::ExperimentReport& r, const std::string& check) {
    const lab::Check* c = r.find(check);
    char buf[256];
    if (!c) {
      ok = false;
      std::snprintf(buf, sizeof buf, "%s missing; ", check.c_str());
    } else {
      ok = ok && c->passed;
      std::snprintf(buf, sizeof buf, "%s %s %.4g (%s %.4g); ", check.c_str(), c->passed ? "ok" : "FAILED", c->value, c->relation.c_str(),
                    c->bound);
    }
    detail += buf;
  }

  void condition(bool holds, const std::string& what) {
    ok = ok && holds;
    detail += what + (holds ? " ok; " : " FAILED; ");
  }

  void runtime(double seconds, double limit) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "runtime %.1f s < %.0f s", seconds, limit);
    condition(seconds < limit, buf);
  }
};

int passed = 0;
std::ofstream verdicts;

void report(int id, const std::string& title, const Verdict& v) {
  passed += v.ok;
  char head[128];
  std::snprintf(head, sizeof head, "%s %2d %s: ", v.ok ? "PASS" : "FAIL", id, title.c_str());
  std::printf("%s%s\n", head, v.detail.c_str());
  std::fflush(stdout);
  verdicts << head << v.detail << '\n' << std::flush;
}

}  // namespace

int main(int argc, char** argv) {
  out_dir = argc > 1 ? argv[1] : "acceptance-out";
  try {
    const auto& model = run("model-build", "model-build");
    const auto& census = run("census", "census", {{"R", "12"}});
    const auto& table = run("kernel-table", "kernel-table", {{"D", "4.5"}});
    const auto& kchecks = run("kernel-checks", "kernel-checks", {{"calibration", path_in("kernel-table", "calibration.txt")}});
    const auto& fn = run("fn-stats", "fn-stats", {{"n", "8"}, {"samples", "2000"}});
    const auto& covers3 = run("sample-covers-3", "sample-covers", {{"n", "3"}, {"trials", "100000"}});
    const auto& covers2 = run("sample-covers-2", "sample-covers", {{"n", "2"}, {"trials", "100000"}});
    const auto& ball = run("enum-ball", "enum-ball", {{"R", "12"}});
    const auto& np = run("np-bound", "np-bound",
                         {{"ball", path_in("enum-ball", "ball.txt")}, {"t_grid", "1,2,3,4,5,6"}, {"radii", "6,8,10"}});
    const auto& trace = run("heat-trace", "heat-trace");
    const auto& gap = run("graph-gap", "graph-gap", {{"n", "10"}, {"samples", "50"}, {"eps", "0.5"}});
    const auto& strong = run("strong-conv", "strong-conv", {{"n_list", "4,6,8,10"}, {"samples", "30"}, {"L", "8"}, {"T_list", "4,6,8"}});

    verdicts.open(std::filesystem::path(out_dir) / "acceptance.txt");

    Verdict v1;
    v1.require(model, "model.relator_identity");
    v1.require(model, "model.systole");
    v1.runtime(model.wall_time, 10);
    report(1, "model integrity", v1);

    Verdict v2;
    v2.require(census, "census.growth_slope");
    v2.condition(census.summary.value("size", std::size_t{0}) <= 10000000, "ball size " + std::to_string(census.summary.value("size", 0)) + " <= 1e7");
    v2.runtime(census.wall_time, 300);
    report(2, "growth law", v2);

    Verdict v3;
    v3.require(census, "census.nonprimitive_bound");
    v3.require(census, "census.nonprimitive_rate");
    v3.runtime(census.wall_time, 300);
    report(3, "non-primitive count", v3);

    const double kernel_time = table.wall_time + kchecks.wall_time;
    Verdict v4;
    v4.require(kchecks, "heat.normalization");
    v4.require(kchecks, "heat.semigroup");
    v4.require(kchecks, "heat.gauss_bound_dominates");
    v4.require(kchecks, "heat.hyp_bound_dominates");
    v4.runtime(kernel_time, 120);
    report(4, "kernel oracles", v4);

    Verdict v5;
    v5.require(kchecks, "green.sphere_mass_flat");
    v5.require(kchecks, "green.ancona_stable");
    v5.require(kchecks, "green.harnack_slope");
    v5.runtime(kchecks.wall_time, 120);
    report(5, "Green kernel suite", v5);

    Verdict v6;
    v6.require(fn, "cover.primitive_means_near_one");
    v6.condition(fn.summary.value("words", 0) == 10, "10 primitive words");
    v6.runtime(fn.wall_time, 600);
    report(6, "fixed-point means", v6);

    Verdict v7;
    v7.require(covers3, "cover.acceptance_matches_exhaustive");
    v7.require(covers2, "cover.acceptance_exact_one");
    v7.runtime(covers3.wall_time + covers2.wall_time, 60);
    report(7, "exact uniformity", v7);

    Verdict v8;
    v8.require(np, "trace.nonprimitive_heat_bound");
    v8.require(np, "trace.nonprimitive_green_bound");
    v8.runtime(np.wall_time, 600);
    report(8, "non-primitive trace bound", v8);
    std::fprintf(stderr, "  (ball enumeration for 8 took %.2f s)\n", ball.wall_time);

    Verdict v9;
    v9.require(trace, "trace.trivial_linearity");
    v9.require(trace, "trace.degree_one_exact");
    v9.require(trace, "trace.term_accounting");
    v9.runtime(trace.wall_time, 120);
    report(9, "trace bookkeeping", v9);

    Verdict v10;
    v10.require(gap, "cover.expander_fraction");
    v10.condition(gap.summary.contains("histogram") && !gap.summary["histogram"].empty(), "histogram emitted");
    v10.runtime(gap.wall_time, 300);
    report(10, "expander ensemble", v10);

    Verdict v11;
    v11.require(strong, "strong.median_trend");
    v11.require(strong, "strong.median_bracket");
    v11.runtime(strong.wall_time, 900);
    report(11, "strong-convergence trend", v11);

    // The tail majorant is computed inside the strong-conv run, so its runtime is charged in full.
    Verdict v12;
    v12.require(strong, "heat.tail_decreasing");
    v12.require(strong, "heat.tail_gaussian_rate");
    v12.runtime(strong.wall_time, 300);
    report(12, "heat-operator tail", v12);

    std::printf("%d of 12 criteria passed\n", passed);
    verdicts << passed << " of 12 criteria passed\n";
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance run aborted: %s\n", e.what());
    return 1;
  }
  return 0;
}
