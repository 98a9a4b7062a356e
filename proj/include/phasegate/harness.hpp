#pragma once

// Batch pipeline: config -> simulate -> (optional D_p0 selection) -> rescale
// -> reconstruct -> score -> report, with file handoffs between stages.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "phasegate/experiment.hpp"
#include "phasegate/metrics.hpp"
#include "phasegate/tomography.hpp"

namespace phasegate {

struct EmitSet {
  bool counts = true;
  bool choi = true;
  bool states = true;
  bool report = true;

  /// Parses a comma-separated subset of {counts, choi, states, report}.
  static EmitSet parse(const std::string& list);
};

struct RunConfig {
  ExperimentPlan plan = ExperimentPlan::standard();
  NoiseConfig noise;
  std::optional<std::uint64_t> seed;
  bool feed_forward = true;
  std::filesystem::path output_dir = "out";
  EmitSet emit;

  /// Throws ConfigError if no seed was given.
  std::uint64_t require_seed() const;
};

/// JSON config with keys seed, feed_forward, output_dir, emit, plan{phases,
/// input_states, bases}, noise{<NoiseConfig fields>}. Missing keys keep their
/// defaults; unknown keys and bad values throw ConfigError naming the key.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Phase given as radians or as an expression like "pi", "pi/6", "5pi/6", "2*pi/3".
double parse_phase_expression(const std::string& text);

struct PhaseReconstruction {
  ChoiRecord choi;
  std::vector<StateRecord> states;  // six outputs in kAllInputStates order
  bool converged = true;
};

/// Reconstructs every phase of `raw` (unrescaled counts). With feed_forward
/// false only D_p0 events are used. Throws DataFormatError listing missing
/// (phase, input, basis) settings.
std::vector<PhaseReconstruction> reconstruct_table(const CountTable& raw, const NoiseConfig& noise,
                                                   bool feed_forward, const MlOptions& options = {});

/// Scores reconstructions; throws DataFormatError if a phase lacks any of its six states.
std::vector<MeritReport> build_reports(const std::vector<ChoiRecord>& chois,
                                       const std::vector<StateRecord>& states);

/// Writes the CSV form of the reports (both variants, sorted by variant then phase).
void write_report_csv(std::ostream& out, const std::vector<MeritReport>& reports);

/// Human-readable tables per variant plus a paired comparison when both are present.
/// Mismatched phase sets produce a warning on `warn` and only the intersection is compared.
void print_report(std::ostream& out, std::ostream& warn, const std::vector<MeritReport>& reports);

/// Human-readable phase, e.g. "5pi/6".
std::string phase_label(double phi);

/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// Stage entry points used by the CLI. Each returns the files it wrote.
std::vector<std::filesystem::path> cmd_simulate(const RunConfig& config);
std::vector<std::filesystem::path> cmd_reconstruct(const RunConfig& config,
                                                   const std::filesystem::path& counts_csv);
std::vector<MeritReport> cmd_report(const RunConfig& config, const std::filesystem::path& input_dir,
                                    std::ostream& out, std::ostream& warn);
/// simulate + reconstruct (both variants unless feed_forward is false) + report.
std::vector<MeritReport> cmd_pipeline(const RunConfig& config, std::ostream& out, std::ostream& warn);

}  // namespace phasegate
