#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wassdyn/measure.hpp"
#include "wassdyn/noise.hpp"

namespace wassdyn {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kReportSchema = "wassdyn.report/1";

enum class ExperimentKind { Collapse, PitchforkGaussian, NoiseToZero, Discontinuity, LocalCompactness, Custom };

std::string kind_name(ExperimentKind k);

/// Parsed JSON experiment document. `raw` is echoed verbatim into the report.
struct ExperimentConfig {
  nlohmann::json raw;
  std::string name;
  ExperimentKind kind = ExperimentKind::Custom;
  std::vector<KernelSpec> kernels;     // a single kernel or a sweep
  std::vector<DiscreteMeasure> mu0;    // one or more starting measures
  std::optional<double> p;             // order of the operator; default: the kernel's natural order
  std::size_t max_iter = 500;
  double tol = 1e-3;
  std::size_t compression_cap = 256;
  std::optional<std::uint64_t> seed;
  std::vector<Point> anchors;
  nlohmann::json params;   // kind-specific settings
  nlohmann::json expect;   // declared expectations (custom runs)
  std::string report_name = "report.json";
};

/// Validates the document and resolves measure references. Measure files are
/// resolved relative to `base_dir` and must exist.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

/// `dirac:X`, `uniform:A,B,N` (N evenly spaced atoms on [A, B]), or a
/// measure file path; objects `{"atoms": [[w, x1, ...], ...]}` and
/// `{"file": PATH}` are also accepted.
DiscreteMeasure resolve_measure(const nlohmann::json& ref, const std::filesystem::path& base_dir);

struct Verdict {
  std::string id;         // stable within a kind, e.g. "collapse.converged[0][1]"
  std::string criterion;  // acceptance identifier "AC1".."AC13"
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct CsvTable {
  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ExperimentReport {
  nlohmann::json config;
  std::string name;
  std::string kind;
  nlohmann::json metrics = nlohmann::json::object();
  std::vector<Verdict> verdicts;
  std::vector<CsvTable> tables;
  double wall_clock_seconds = 0.0;
  std::string version = kVersion;

  bool passed() const;
  nlohmann::json to_json() const;
};

ExperimentReport run_collapse(const ExperimentConfig& cfg);
ExperimentReport run_pitchfork_gaussian(const ExperimentConfig& cfg);
ExperimentReport run_noise_to_zero(const ExperimentConfig& cfg);
ExperimentReport run_discontinuity(const ExperimentConfig& cfg);
ExperimentReport run_local_compactness(const ExperimentConfig& cfg);
ExperimentReport run_custom(const ExperimentConfig& cfg);

/// Dispatches on cfg.kind and stamps the wall-clock time.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Writes the JSON report plus one CSV file per table into `dir`.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir,
                  const std::string& report_name = "report.json");

std::string table_to_csv(const CsvTable& t);

/// Report JSON with the wall-clock and version fields removed, for
/// determinism comparisons.
nlohmann::json comparable_report(const ExperimentReport& report);

/// {"dim": d, "atoms": [{"x": [...], "w": w}, ...]}
nlohmann::json measure_to_json(const DiscreteMeasure& mu);

/// Worker count: hardware concurrency capped by WASSDYN_THREADS when set.
std::size_t worker_count();

/// Runs body(0..n-1) on up to worker_count() threads. The first exception
/// thrown by any task is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace wassdyn
