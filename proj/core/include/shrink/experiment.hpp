// Experiment manifests, dispatch to the modules, provenance-stamped
// artifacts and gnuplot-style plot data.
#pragma once

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace shrink {

/// A manifest field failed validation; path() names the field
/// ("params.radius", "group").
class ManifestError : public std::invalid_argument {
 public:
  ManifestError(std::string path, const std::string& message)
      : std::invalid_argument(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

enum class ExperimentKind { Enumerate, Exponent, Shrink, Spectral, Boundary, Discrepancy, Ergodic };
std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

/// One experiment. JSON form:
///   {"kind": "enumerate", "group": "sanov.json", "output": "out/",
///    "params": {...}}
/// Relative group and output paths resolve against base_dir (the manifest's
/// directory when loaded from a file).
struct ExperimentManifest {
  ExperimentKind kind = ExperimentKind::Enumerate;
  /// Group presentation file; unused (may be empty) for kind boundary.
  std::filesystem::path group;
  std::filesystem::path output;
  nlohmann::json params = nlohmann::json::object();
  std::filesystem::path base_dir = ".";

  /// Throws ManifestError for unknown kinds, missing fields or missing files.
  static ExperimentManifest from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = ".");
  static ExperimentManifest load(const std::filesystem::path& file);
  nlohmann::json to_json() const;

  std::filesystem::path group_path() const;
  std::filesystem::path output_path() const;
  /// Checks the referenced files and the parameters of the kind.
  void validate() const;
};

/// SHA-256 (hex) of the canonical manifest JSON followed by the group file
/// bytes.
std::string manifest_digest(const ExperimentManifest& m);

struct ExperimentOutcome {
  std::string digest;
  /// Deterministic results (also written to results.json).
  nlohmann::json results;
  /// Wall time, threads and versions (also written to summary.json).
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;
};

/// Validates, runs the owning module and writes artifacts into the output
/// directory. Every artifact carries the manifest digest; apart from
/// summary.json, reruns of one manifest produce byte-identical files.
/// Module errors propagate (BudgetExceeded unchanged).
ExperimentOutcome run_experiment(const ExperimentManifest& m, unsigned threads = 1);

enum class PlotKind { Growth, Spectral, Decay };
PlotKind plot_kind_from_string(const std::string& s);

/// Whitespace-separated columns with a commented header naming each column
/// and its unit. `results` is the results.json of a finished experiment.
/// Throws std::invalid_argument when the results lack the requested table.
std::string emit_plot_data(const nlohmann::json& results, PlotKind kind);

/// The build's `git describe` string.
std::string build_version();

}  // namespace shrink
