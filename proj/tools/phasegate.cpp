// Command-line front end: simulate, reconstruct, report, pipeline.
//
// Exit codes: 0 success, 2 config error, 3 data-format error,
// 4 numerical failure (non-convergence).

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "phasegate/errors.hpp"
#include "phasegate/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool no_feed_forward = false;
  std::string out_dir;
  std::string emit;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "Random seed (overrides the config)");
  cmd->add_flag("--no-feed-forward", f.no_feed_forward, "Analyse only D_p0 events (no correction)");
  cmd->add_option("--out", f.out_dir, "Output directory (overrides the config)");
  cmd->add_option("--emit", f.emit, "Comma-separated subset of counts,choi,states,report");
}

phasegate::RunConfig resolve(const CommonFlags& f) {
  phasegate::RunConfig cfg = f.config_path.empty() ? phasegate::RunConfig{} : phasegate::load_run_config(f.config_path);
  if (f.seed) cfg.seed = f.seed;
  if (f.no_feed_forward) cfg.feed_forward = false;
  if (!f.out_dir.empty()) cfg.output_dir = f.out_dir;
  if (!f.emit.empty()) cfg.emit = phasegate::EmitSet::parse(f.emit);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Programmable phase gate: simulation, process tomography and figures of merit"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string counts_path;
  std::string input_dir;

  auto* simulate = app.add_subcommand("simulate", "Generate a coincidence-count CSV");
  add_common(simulate, flags);

  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct Choi matrices and output states from counts");
  add_common(reconstruct, flags);
  reconstruct->add_option("--counts", counts_path, "Count CSV (default: <out>/counts.csv)");

  auto* report = app.add_subcommand("report", "Score reconstructions and print the merit tables");
  add_common(report, flags);
  report->add_option("--in", input_dir, "Directory with choi_*.txt and state_*.txt (default: <out>)");

  auto* pipeline = app.add_subcommand("pipeline", "simulate + reconstruct + report");
  add_common(pipeline, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const auto cfg = resolve(flags);
    if (simulate->parsed()) {
      for (const auto& p : phasegate::cmd_simulate(cfg)) std::cout << "wrote " << p.string() << '\n';
    } else if (reconstruct->parsed()) {
      const auto src = counts_path.empty() ? cfg.output_dir / "counts.csv" : std::filesystem::path(counts_path);
      const auto files = phasegate::cmd_reconstruct(cfg, src);
      std::cout << "wrote " << files.size() << " file(s) to " << cfg.output_dir.string() << '\n';
    } else if (report->parsed()) {
      const auto dir = input_dir.empty() ? cfg.output_dir : std::filesystem::path(input_dir);
      phasegate::cmd_report(cfg, dir, std::cout, std::cerr);
    } else if (pipeline->parsed()) {
      phasegate::cmd_pipeline(cfg, std::cout, std::cerr);
    }
  } catch (const phasegate::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const phasegate::DataFormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const phasegate::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
