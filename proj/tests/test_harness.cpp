#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "phasegate/errors.hpp"
#include "phasegate/harness.hpp"

using namespace phasegate;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("phasegate_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

ExperimentPlan single_phase_plan(double phi) {
  ExperimentPlan plan = ExperimentPlan::standard();
  plan.phases = {ProgramPhase(phi)};
  return plan;
}

NoiseConfig bright_ideal() {
  NoiseConfig n = NoiseConfig::ideal();
  n.pair_rate = 1e5;
  n.interval_s = 1.0;
  n.n_intervals = 2;
  return n;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults") {
    const auto cfg = parse_run_config("{}");
    CHECK_FALSE(cfg.seed.has_value());
    CHECK_THROWS_AS(cfg.require_seed(), ConfigError);
    CHECK(cfg.plan.phases.size() == 7);
    CHECK(cfg.feed_forward);
    CHECK(cfg.noise.visibility == NoiseConfig{}.visibility);
  }
  SUBCASE("full") {
    const auto cfg = parse_run_config(R"({
      "seed": 7, "feed_forward": false, "output_dir": "runs/a", "emit": ["choi", "report"],
      "plan": {"phases": [0, "pi/6", "5pi/6", "2*pi/3", 3.14159], "input_states": ["0", "+i"], "bases": ["Z", "Y"]},
      "noise": {"visibility": 0.9, "n_intervals": 3, "pair_rate": 250}
    })");
    CHECK(cfg.require_seed() == 7);
    CHECK_FALSE(cfg.feed_forward);
    CHECK(cfg.output_dir == fs::path("runs/a"));
    CHECK_FALSE(cfg.emit.counts);
    CHECK(cfg.emit.choi);
    CHECK_FALSE(cfg.emit.states);
    CHECK(cfg.emit.report);
    REQUIRE(cfg.plan.phases.size() == 5);
    CHECK(cfg.plan.phases[1].radians() == doctest::Approx(pi / 6));
    CHECK(cfg.plan.phases[2].radians() == doctest::Approx(5 * pi / 6));
    CHECK(cfg.plan.phases[3].radians() == doctest::Approx(2 * pi / 3));
    CHECK(cfg.plan.input_states == std::vector<InputState>{InputState::Zero, InputState::PlusI});
    CHECK(cfg.plan.bases == std::vector<Basis>{Basis::Z, Basis::Y});
    CHECK(cfg.noise.visibility == 0.9);
    CHECK(cfg.noise.n_intervals == 3);
    CHECK(cfg.noise.eta_p0 == NoiseConfig{}.eta_p0);
  }
  SUBCASE("errors name the field") {
    auto message = [](const std::string& text) {
      try {
        parse_run_config(text);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string("no error");
    };
    CHECK(message(R"({"sed": 1})").find("sed") != std::string::npos);
    CHECK(message(R"({"noise": {"visiblity": 1}})").find("noise.visiblity") != std::string::npos);
    CHECK(message(R"({"noise": {"visibility": 1.5}})").find("visibility") != std::string::npos);
    CHECK(message(R"({"noise": {"eta_p1": 1.2}})").find("eta_p1") != std::string::npos);
    CHECK(message(R"({"seed": -1})").find("seed") != std::string::npos);
    CHECK(message(R"({"plan": {"bases": ["W"]}})").find("plan") != std::string::npos);
    CHECK(message(R"({"plan": {"phases": []}})") != "no error");
    CHECK(message(R"({"emit": ["plots"]})").find("plots") != std::string::npos);
    CHECK(message("{not json") != "no error");
  }
}

TEST_CASE("phase expressions and labels") {
  CHECK(parse_phase_expression("pi") == doctest::Approx(pi));
  CHECK(parse_phase_expression("pi/6") == doctest::Approx(pi / 6));
  CHECK(parse_phase_expression("5pi/6") == doctest::Approx(5 * pi / 6));
  CHECK(parse_phase_expression("2*pi/3") == doctest::Approx(2 * pi / 3));
  CHECK(parse_phase_expression("0.25") == 0.25);
  CHECK_THROWS_AS(parse_phase_expression("tau"), ConfigError);
  CHECK_THROWS_AS(parse_phase_expression("pi/0"), ConfigError);
  CHECK(phase_label(0.0) == "0");
  CHECK(phase_label(pi) == "pi");
  CHECK(phase_label(pi / 6) == "pi/6");
  CHECK(phase_label(5 * pi / 6) == "5pi/6");
  CHECK(phase_label(2 * pi / 3) == "2pi/3");
  CHECK(phase_label(pi / 2) == "pi/2");
}

TEST_CASE("cmd_simulate") {
  TempDir dir("simulate");
  SUBCASE("standard plan has 6048 rows") {
    RunConfig cfg;
    cfg.seed = 1;
    cfg.output_dir = dir.path / "a";
    const auto files = cmd_simulate(cfg);
    REQUIRE(files.size() == 1);
    CHECK(count_lines(slurp(files[0])) == 6048 + 1);

    cfg.output_dir = dir.path / "b";
    CHECK(slurp(cmd_simulate(cfg)[0]) == slurp(files[0]));
    cfg.seed = 2;
    cfg.output_dir = dir.path / "c";
    CHECK(slurp(cmd_simulate(cfg)[0]) != slurp(files[0]));
  }
  SUBCASE("minimal plan has 4 rows") {
    RunConfig cfg;
    cfg.seed = 3;
    cfg.output_dir = dir.path;
    cfg.plan = ExperimentPlan{{ProgramPhase(0.0)}, {InputState::Zero}, {Basis::Z}};
    cfg.noise.n_intervals = 1;
    CHECK(count_lines(slurp(cmd_simulate(cfg)[0])) == 4 + 1);
  }
  SUBCASE("seed is required") {
    RunConfig cfg;
    cfg.output_dir = dir.path;
    CHECK_THROWS_AS(cmd_simulate(cfg), ConfigError);
  }
}

TEST_CASE("noiseless closed loop at pi/2") {
  const NoiseConfig noise = bright_ideal();
  const auto table = simulate_counts(single_phase_plan(pi / 2), noise, 11);
  const auto truth = ideal_choi(ProgramPhase(pi / 2));

  const auto ff = reconstruct_table(table, noise, true);
  REQUIRE(ff.size() == 1);
  CHECK(ff[0].converged);
  const double f_ff = process_fidelity(ChoiMatrix(ff[0].choi.chi), truth);
  CHECK(f_ff >= 0.9999);
  CHECK(ff[0].choi.success_probability == 0.5);

  const auto noff = reconstruct_table(table, noise, false);
  const double f_noff = process_fidelity(ChoiMatrix(noff[0].choi.chi), truth);
  CHECK(f_noff >= 0.9999);
  CHECK(std::abs(f_ff - f_noff) < 1e-4);
  CHECK(noff[0].choi.success_probability == 0.25);

  // Half of the events are used without feed forward.
  const double total = table.total();
  const double kept = select_without_feedforward(table).total();
  CHECK(std::abs(kept - total / 2) < 5 * std::sqrt(total / 4));
}

TEST_CASE("incomplete design lists the missing settings") {
  const NoiseConfig noise = NoiseConfig::ideal();
  const auto table = simulate_counts(single_phase_plan(0.0), noise, 5);
  std::stringstream csv;
  write_counts_csv(csv, table);

  // Drop every Y-basis row.
  std::stringstream truncated;
  std::string line;
  while (std::getline(csv, line))
    if (line.find(",Y,") == std::string::npos) truncated << line << '\n';
  const auto partial = read_counts_csv(truncated);
  try {
    reconstruct_table(partial, noise, true);
    FAIL("expected DataFormatError");
  } catch (const DataFormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("6 missing") != std::string::npos);
    CHECK(msg.find("input_state=+i basis=Y") != std::string::npos);
  }
}

TEST_CASE("external CSV gives the same reconstruction as the in-memory table") {
  NoiseConfig noise;
  noise.n_intervals = 2;
  const auto table = simulate_counts(single_phase_plan(pi / 3), noise, 21);
  std::stringstream csv;
  write_counts_csv(csv, table);
  const auto back = read_counts_csv(csv);
  CHECK(back == table);

  const auto a = reconstruct_table(table, noise, true);
  const auto b = reconstruct_table(back, noise, true);
  CHECK(max_abs_diff(a[0].choi.chi, b[0].choi.chi) == 0.0);
  for (std::size_t k = 0; k < 6; ++k) CHECK(max_abs_diff(a[0].states[k].rho, b[0].states[k].rho) == 0.0);
}

TEST_CASE("reports") {
  auto ideal_records = [](double phi, bool ff) {
    std::pair<ChoiRecord, std::vector<StateRecord>> out;
    out.first = ChoiRecord{phi, ff, ff ? 0.5 : 0.25, 1, 0.0, 0.0, ideal_choi(ProgramPhase(phi)).matrix()};
    for (auto s : kAllInputStates)
      out.second.push_back(StateRecord{phi, s, ff, out.first.success_probability, 1, 0.0,
                                       ideal_output(state_vector(s), ProgramPhase(phi)).density()});
    return out;
  };
  std::vector<ChoiRecord> chois;
  std::vector<StateRecord> states;
  for (double phi : {0.0, pi / 2, pi})
    for (bool ff : {true, false}) {
      auto [c, s] = ideal_records(phi, ff);
      chois.push_back(c);
      states.insert(states.end(), s.begin(), s.end());
    }

  SUBCASE("ideal rows are all ones") {
    const auto reports = build_reports(chois, states);
    REQUIRE(reports.size() == 6);
    for (const auto& r : reports) {
      CHECK(r.F_chi == doctest::Approx(1.0));
      CHECK(r.F_av == doctest::Approx(1.0));
      CHECK(r.F_min == doctest::Approx(1.0));
      CHECK(r.P_av == doctest::Approx(1.0));
      CHECK(r.P_min == doctest::Approx(1.0));
      CHECK(r.success_probability == (r.feed_forward_active ? 0.5 : 0.25));
    }
    std::ostringstream csv;
    write_report_csv(csv, reports);
    CHECK(count_lines(csv.str()) == 7);

    std::ostringstream out, warn;
    print_report(out, warn, reports);
    CHECK(warn.str().empty());
    CHECK(out.str().find("With feed forward (p_succ = 0.50)") != std::string::npos);
    CHECK(out.str().find("Without feed forward (p_succ = 0.25)") != std::string::npos);
    CHECK(out.str().find("max |dF_chi| = 0.0000") != std::string::npos);
  }
  SUBCASE("mismatched phase sets warn and use the intersection") {
    auto [c, s] = ideal_records(pi / 6, true);
    chois.push_back(c);
    states.insert(states.end(), s.begin(), s.end());
    std::ostringstream out, warn;
    print_report(out, warn, build_reports(chois, states));
    CHECK(warn.str().find("4 with, 3 without") != std::string::npos);
    CHECK(warn.str().find("comparing 3 common") != std::string::npos);
  }
  SUBCASE("missing state file") {
    states.pop_back();
    CHECK_THROWS_AS(build_reports(chois, states), DataFormatError);
  }
}

TEST_CASE("pipeline artifacts are deterministic") {
  TempDir dir("pipeline");
  RunConfig cfg;
  cfg.seed = 99;
  cfg.plan.phases = {ProgramPhase(0.0), ProgramPhase(pi)};
  cfg.noise.n_intervals = 2;
  std::ostringstream out, warn;
  cfg.output_dir = dir.path / "a";
  const auto reports = cmd_pipeline(cfg, out, warn);
  CHECK(reports.size() == 4);
  cfg.output_dir = dir.path / "b";
  cmd_pipeline(cfg, out, warn);

  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "a")) {
    ++files;
    CHECK(slurp(e.path()) == slurp(dir.path / "b" / e.path().filename()));
  }
  // counts, report, 2 variants x 2 phases x (1 choi + 6 states)
  CHECK(files == 2 + 2 * 2 * 7);

  // The report stage reproduces the pipeline report from the files alone.
  std::ostringstream out2, warn2;
  cfg.output_dir = dir.path / "c";
  const auto again = cmd_report(cfg, dir.path / "a", out2, warn2);
  REQUIRE(again.size() == reports.size());
  for (std::size_t k = 0; k < reports.size(); ++k) CHECK(again[k].F_chi == doctest::Approx(reports[k].F_chi).epsilon(1e-12));
  CHECK(slurp(dir.path / "c" / "report.csv") == slurp(dir.path / "a" / "report.csv"));
}

TEST_CASE("zero efficiency cannot be rescaled") {
  NoiseConfig noise = NoiseConfig::ideal();
  const auto table = simulate_counts(single_phase_plan(0.0), noise, 4);
  noise.eta_d1 = 0.0;
  CHECK_NOTHROW(noise.validate());
  CHECK_THROWS_WITH_AS(reconstruct_table(table, noise, true), doctest::Contains("eta_d1"), ConfigError);
}
