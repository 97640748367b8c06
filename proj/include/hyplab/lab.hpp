#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace hyplab::lab {

inline constexpr const char* kOutEnv = "HYPLAB_OUT";

const std::vector<std::string>& subcommands();

// Flat configuration. Everything except the fixed fields lives in `params` as text, so a
// config written with to_text reads back identically.
struct RunConfig {
  std::string experiment;
  int genus = 2;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;  // output directory; empty means no files
  bool csv = false;
  std::map<std::string, std::string> params;

  bool has(const std::string& key) const { return params.count(key) != 0; }
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  // Sets a fixed field or a parameter from "key=value".
  void set(const std::string& key, const std::string& value);
};

std::string config_to_text(const RunConfig& c);
RunConfig config_from_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

// Default output directory: $HYPLAB_OUT, else "hyplab-out".
std::string default_out_dir();

// One verified inequality or identity, with what it was compared against.
struct Check {
  std::string name;
  bool passed = false;
  double value = 0;
  double bound = 0;
  std::string relation;     // how value is compared with bound, e.g. "<=" or "in [0.85, 1.15]"
  std::string calibration;  // where the constant came from, or "none"
};

nlohmann::json to_json(const Check& c);

struct ExperimentReport {
  RunConfig config;
  std::string input_hash;             // git-style SHA-1 of the config text and every input file read
  std::vector<nlohmann::json> records;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<Check> checks;
  std::vector<std::string> warnings;
  std::vector<std::string> csv_header;
  std::vector<std::vector<double>> csv_rows;
  double wall_time = 0;  // seconds; kept out of the reproducible files

  bool passed() const;
  const Check* find(const std::string& name) const;
};

// Thrown for guard and input problems; maps to exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentReport run(const RunConfig& config);

// Reproducible JSON-lines report: config line, records, summary, checks, warnings.
std::string report_to_jsonl(const ExperimentReport& r);
std::string report_to_csv(const ExperimentReport& r);
// Writes <out>/<experiment>.jsonl, <experiment>.timing.json and, when requested, <experiment>.csv.
void write_report(const ExperimentReport& r);

// blob-style SHA-1 as git computes it, hex encoded.
std::string git_blob_sha1(const std::string& content);

// 0 when every check passed, 2 otherwise.
int exit_code(const ExperimentReport& r);

}  // namespace hyplab::lab
