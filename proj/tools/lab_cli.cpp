#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hyplab/lab.hpp"

namespace lab = hyplab::lab;

int main(int argc, char** argv) {
  CLI::App app{"hyplab: numerical laboratory for spectral gaps of random covers of hyperbolic surfaces"};
  std::string subcommand, config_file, out;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  int threads = 0, genus = 0;
  bool csv = false, quiet = false;
  std::string names;
  for (const auto& s : lab::subcommands()) names += (names.empty() ? "" : ", ") + s;
  app.add_option("subcommand", subcommand, "one of: " + names)->required();
  app.add_option("-c,--config", config_file, "flat key=value configuration file");
  app.add_option("-s,--set", sets, "parameter override key=value (repeatable)");
  auto* seed_opt = app.add_option("--seed", seed, "master seed");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  auto* genus_opt = app.add_option("--genus", genus, "surface genus")->check(CLI::Range(2, 8));
  auto* out_opt = app.add_option("--out", out, std::string("output directory (default $") + lab::kOutEnv + " or hyplab-out)");
  app.add_flag("--csv", csv, "also write a CSV table");
  app.add_flag("-q,--quiet", quiet, "do not print the report to stdout");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    lab::RunConfig cfg = config_file.empty() ? lab::RunConfig{} : lab::load_config(config_file);
    cfg.experiment = subcommand;
    if (cfg.out.empty()) cfg.out = lab::default_out_dir();
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw lab::UsageError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (*seed_opt) cfg.seed = seed;
    if (*threads_opt) cfg.threads = threads;
    if (*genus_opt) cfg.genus = genus;
    if (*out_opt) cfg.out = out;
    if (csv) cfg.csv = true;

    const lab::ExperimentReport report = lab::run(cfg);
    lab::write_report(report);
    if (!quiet) std::cout << lab::report_to_jsonl(report);
    for (const auto& c : report.checks)
      std::fprintf(stderr, "%s %s: %.6g (%s %.6g)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.value, c.relation.c_str(), c.bound);
    for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::fprintf(stderr, "%s finished in %.2f s\n", subcommand.c_str(), report.wall_time);
    return lab::exit_code(report);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
