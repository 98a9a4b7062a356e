#include "phasegate/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "parallel.hpp"
#include "phasegate/errors.hpp"

namespace phasegate {

namespace fs = std::filesystem;
using nlohmann::json;

EmitSet EmitSet::parse(const std::string& list) {
  EmitSet e{false, false, false, false};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
               item.end());
    if (item == "counts") e.counts = true;
    else if (item == "choi") e.choi = true;
    else if (item == "states") e.states = true;
    else if (item == "report") e.report = true;
    else if (!item.empty()) throw ConfigError(fmt::format("emit: unknown artifact '{}'", item));
  }
  return e;
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw ConfigError("seed: a seed is required for simulation (config key 'seed' or --seed)");
  return *seed;
}

double parse_phase_expression(const std::string& text) {
  static const std::regex pattern(R"(^\s*([0-9]*\.?[0-9]*)\s*\*?\s*pi\s*(?:/\s*([0-9]*\.?[0-9]+))?\s*$)");
  std::smatch m;
  if (std::regex_match(text, m, pattern)) {
    const double num = m[1].length() > 0 ? std::stod(m[1].str()) : 1.0;
    const double den = m[2].matched ? std::stod(m[2].str()) : 1.0;
    if (den == 0.0) throw ConfigError(fmt::format("phases: division by zero in '{}'", text));
    return num * std::numbers::pi / den;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError(fmt::format("phases: cannot parse '{}'", text));
  return v;
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(fmt::format("{}: expected an object", where.empty() ? "config" : where));
  for (const auto& [key, _] : obj.items())
    if (!known.count(key))
      throw ConfigError(fmt::format("unknown config key '{}{}'", where.empty() ? "" : where + ".", key));
}

double get_number(const json& obj, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(fmt::format("{}: expected a number", key));
  return v.get<double>();
}

void load_noise(const json& j, NoiseConfig& n) {
  reject_unknown(j,
                 {"eta_p0", "eta_d0", "eta_d1", "eta_p1", "dark_quad", "dark_single", "visibility",
                  "phase_sigma", "pair_rate", "interval_s", "n_intervals", "coincidence_window"},
                 "noise");
  const std::pair<const char*, double*> fields[] = {
      {"eta_p0", &n.eta_p0},           {"eta_d0", &n.eta_d0},
      {"eta_d1", &n.eta_d1},           {"eta_p1", &n.eta_p1},
      {"dark_quad", &n.dark_quad},     {"dark_single", &n.dark_single},
      {"visibility", &n.visibility},   {"phase_sigma", &n.phase_sigma},
      {"pair_rate", &n.pair_rate},     {"interval_s", &n.interval_s},
      {"coincidence_window", &n.coincidence_window}};
  for (auto [key, dst] : fields)
    if (j.contains(key)) *dst = get_number(j, key);
  if (j.contains("n_intervals")) {
    const auto& v = j.at("n_intervals");
    if (!v.is_number_integer() || v.get<long long>() < 1)
      throw ConfigError("n_intervals: expected a positive integer");
    n.n_intervals = v.get<std::size_t>();
  }
  n.validate();
}

void load_plan(const json& j, ExperimentPlan& plan) {
  reject_unknown(j, {"phases", "input_states", "bases"}, "plan");
  auto array_of = [&](const char* key) -> const json& {
    const auto& v = j.at(key);
    if (!v.is_array()) throw ConfigError(fmt::format("{}: expected an array", key));
    return v;
  };
  if (j.contains("phases")) {
    plan.phases.clear();
    for (const auto& p : array_of("phases")) {
      if (p.is_number()) plan.phases.emplace_back(p.get<double>());
      else if (p.is_string()) plan.phases.emplace_back(parse_phase_expression(p.get<std::string>()));
      else throw ConfigError("phases: entries must be numbers or strings");
    }
  }
  try {
    if (j.contains("input_states")) {
      plan.input_states.clear();
      for (const auto& s : array_of("input_states")) plan.input_states.push_back(parse_input_state(s.get<std::string>()));
    }
    if (j.contains("bases")) {
      plan.bases.clear();
      for (const auto& b : array_of("bases")) plan.bases.push_back(parse_basis(b.get<std::string>()));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("plan: {}", e.what()));
  } catch (const json::exception&) {
    throw ConfigError("plan: input_states and bases entries must be strings");
  }
  plan.validate();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  reject_unknown(j, {"seed", "feed_forward", "output_dir", "emit", "plan", "noise"}, "");
  RunConfig cfg;
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<long long>() < 0))
      throw ConfigError("seed: expected a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (j.contains("feed_forward")) {
    if (!j.at("feed_forward").is_boolean()) throw ConfigError("feed_forward: expected true or false");
    cfg.feed_forward = j.at("feed_forward").get<bool>();
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ConfigError("output_dir: expected a string");
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("emit")) {
    const auto& e = j.at("emit");
    if (!e.is_array()) throw ConfigError("emit: expected an array of strings");
    std::string joined;
    for (const auto& item : e) {
      if (!item.is_string()) throw ConfigError("emit: expected an array of strings");
      joined += item.get<std::string>() + ",";
    }
    cfg.emit = EmitSet::parse(joined);
  }
  if (j.contains("plan")) load_plan(j.at("plan"), cfg.plan);
  if (j.contains("noise")) load_noise(j.at("noise"), cfg.noise);
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("config: cannot open '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error(fmt::format("write failed for '{}'", tmp.string()));
  }
  fs::rename(tmp, path);
}

std::string phase_label(double phi) {
  if (std::abs(phi) < 1e-9) return "0";
  for (int den : {1, 2, 3, 4, 6, 12}) {
    const double num = phi * den / std::numbers::pi;
    const double rounded = std::round(num);
    if (std::abs(num - rounded) < 1e-8 && rounded > 0) {
      int n = static_cast<int>(rounded);
      const std::string head = n == 1 ? "pi" : fmt::format("{}pi", n);
      return den == 1 ? head : fmt::format("{}/{}", head, den);
    }
  }
  return fmt::format("{:.6f}", phi);
}

// ---------------------------------------------------------------------------
// Reconstruction

namespace {

void check_design(const CountTable& table) {
  std::vector<std::string> missing;
  for (double phi : table.phases())
    for (auto s : kAllInputStates)
      for (auto b : kAllBases) {
        const bool have_state = std::find(table.states().begin(), table.states().end(), s) != table.states().end();
        const bool have_basis = std::find(table.bases().begin(), table.bases().end(), b) != table.bases().end();
        if (!have_state || !have_basis)
          missing.push_back(fmt::format("phase={:.12g} input_state={} basis={}", phi, label(s), label(b)));
      }
  if (table.phases().empty()) throw DataFormatError("count table contains no phases");
  if (!missing.empty()) {
    std::string msg = fmt::format("incomplete tomography design, {} missing setting(s):", missing.size());
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataFormatError(msg);
  }
}

std::string file_tag(InputState s) {
  switch (s) {
    case InputState::Zero: return "0";
    case InputState::One: return "1";
    case InputState::Plus: return "p";
    case InputState::Minus: return "m";
    case InputState::PlusI: return "pi";
    case InputState::MinusI: return "mi";
  }
  return "x";
}

std::string variant_tag(bool ff) { return ff ? "ff" : "noff"; }

}  // namespace

std::vector<PhaseReconstruction> reconstruct_table(const CountTable& raw, const NoiseConfig& noise,
                                                   bool feed_forward, const MlOptions& options) {
  check_design(raw);
  const std::pair<const char*, double> etas[] = {
      {"eta_p0", noise.eta_p0}, {"eta_p1", noise.eta_p1}, {"eta_d0", noise.eta_d0}, {"eta_d1", noise.eta_d1}};
  for (auto [name, eta] : etas)
    if (!(eta > 0.0)) throw ConfigError(fmt::format("{}: efficiency must be positive to rescale counts", name));
  CountTable table = rescale_efficiencies(feed_forward ? raw : select_without_feedforward(raw), noise);

  std::vector<PhaseReconstruction> out(table.phases().size());
  detail::parallel_for(out.size(), [&](std::size_t ip) {
    const double phi = table.phases()[ip];
    const auto settings = process_settings(table, ip);
    const auto est = ml_reconstruct_process(settings, options);
    PhaseReconstruction& pr = out[ip];
    pr.converged = est.converged;
    pr.choi = ChoiRecord{phi,           feed_forward,       table.success_probability(),
                         est.iterations, est.log_likelihood, est.trace_preservation_deviation,
                         est.chi.matrix()};
    for (auto s : kAllInputStates) {
      const auto st = ml_reconstruct_state(state_counts(table, ip, s), options);
      pr.converged = pr.converged && st.converged;
      pr.states.push_back(StateRecord{phi, s, feed_forward, table.success_probability(), st.iterations,
                                      st.log_likelihood, st.rho});
    }
  });
  return out;
}

std::vector<MeritReport> build_reports(const std::vector<ChoiRecord>& chois, const std::vector<StateRecord>& states) {
  std::vector<MeritReport> reports;
  for (const auto& c : chois) {
    std::vector<CMatrix> outputs;
    for (auto s : kAllInputStates) {
      auto it = std::find_if(states.begin(), states.end(), [&](const StateRecord& r) {
        return r.feed_forward == c.feed_forward && r.input_state == s &&
               canonical_phase_key(r.phase) == canonical_phase_key(c.phase);
      });
      if (it == states.end())
        throw DataFormatError(fmt::format("no {} output state for input {} at phase {:.12g}",
                                          variant_tag(c.feed_forward), label(s), c.phase));
      outputs.push_back(it->rho);
    }
    reports.push_back(merit_report(ChoiMatrix(c.chi), outputs, ProgramPhase(c.phase), c.feed_forward,
                                   c.success_probability));
  }
  std::sort(reports.begin(), reports.end(), [](const MeritReport& a, const MeritReport& b) {
    if (a.feed_forward_active != b.feed_forward_active) return a.feed_forward_active;
    return a.phi < b.phi;
  });
  return reports;
}

void write_report_csv(std::ostream& out, const std::vector<MeritReport>& reports) {
  write_report_csv_header(out);
  for (const auto& r : reports) write_report_csv_row(out, r);
}

void print_report(std::ostream& out, std::ostream& warn, const std::vector<MeritReport>& reports) {
  std::map<double, const MeritReport*> with, without;
  for (const auto& r : reports) (r.feed_forward_active ? with : without)[canonical_phase_key(r.phi)] = &r;

  auto table = [&](const std::map<double, const MeritReport*>& rows, const char* title) {
    if (rows.empty()) return;
    out << fmt::format("{} (p_succ = {:.2f})\n", title, rows.begin()->second->success_probability);
    out << fmt::format("  {:>8}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}\n", "phi", "F_chi", "F_av", "F_min", "P_av",
                       "P_min");
    for (const auto& [_, r] : rows)
      out << fmt::format("  {:>8}  {:7.3f}  {:7.3f}  {:7.3f}  {:7.3f}  {:7.3f}\n", phase_label(r->phi), r->F_chi,
                         r->F_av, r->F_min, r->P_av, r->P_min);
    out << '\n';
  };
  table(with, "With feed forward");
  table(without, "Without feed forward");

  if (with.empty() || without.empty()) return;
  std::vector<double> common;
  for (const auto& [phi, _] : with)
    if (without.count(phi)) common.push_back(phi);
  if (common.size() != with.size() || common.size() != without.size())
    warn << fmt::format("warning: phase sets differ between variants ({} with, {} without); comparing {} common phase(s)\n",
                        with.size(), without.size(), common.size());
  if (common.empty()) return;
  out << "Paired comparison (with - without)\n";
  out << fmt::format("  {:>8}  {:>8}  {:>8}\n", "phi", "dF_chi", "dF_av");
  double worst = 0.0;
  double worst_phi = common.front();
  for (double phi : common) {
    const double d = with[phi]->F_chi - without[phi]->F_chi;
    out << fmt::format("  {:>8}  {:+8.4f}  {:+8.4f}\n", phase_label(phi), d, with[phi]->F_av - without[phi]->F_av);
    if (std::abs(d) > worst) {
      worst = std::abs(d);
      worst_phi = phi;
    }
  }
  out << fmt::format("  max |dF_chi| = {:.4f} at phi = {}\n", worst, phase_label(worst_phi));
}

// ---------------------------------------------------------------------------
// Stages

namespace {

std::vector<fs::path> write_reconstructions(const fs::path& dir, const std::vector<PhaseReconstruction>& recs,
                                            const EmitSet& emit) {
  std::vector<fs::path> written;
  for (std::size_t ip = 0; ip < recs.size(); ++ip) {
    const auto& pr = recs[ip];
    const std::string variant = variant_tag(pr.choi.feed_forward);
    if (emit.choi) {
      std::ostringstream ss;
      write_choi(ss, pr.choi);
      written.push_back(dir / fmt::format("choi_{}_{:02d}.txt", variant, ip));
      write_file_atomic(written.back(), ss.str());
    }
    if (emit.states) {
      for (const auto& st : pr.states) {
        std::ostringstream ss;
        write_state(ss, st);
        written.push_back(dir / fmt::format("state_{}_{:02d}_{}.txt", variant, ip, file_tag(st.input_state)));
        write_file_atomic(written.back(), ss.str());
      }
    }
  }
  return written;
}

void require_converged(const std::vector<PhaseReconstruction>& recs) {
  for (const auto& r : recs)
    if (!r.converged)
      throw NumericalError(fmt::format("maximum-likelihood iteration did not converge at phase {:.12g}", r.choi.phase));
}

std::vector<MeritReport> emit_report(const RunConfig& config, const std::vector<ChoiRecord>& chois,
                                     const std::vector<StateRecord>& states, std::ostream& out, std::ostream& warn) {
  auto reports = build_reports(chois, states);
  if (config.emit.report) {
    std::ostringstream ss;
    write_report_csv(ss, reports);
    write_file_atomic(config.output_dir / "report.csv", ss.str());
  }
  print_report(out, warn, reports);
  return reports;
}

CountTable read_counts_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataFormatError(fmt::format("cannot open count file '{}'", path.string()));
  return read_counts_csv(in);
}

}  // namespace

std::vector<fs::path> cmd_simulate(const RunConfig& config) {
  const auto table = simulate_counts(config.plan, config.noise, config.require_seed());
  std::ostringstream ss;
  write_counts_csv(ss, table);
  const fs::path path = config.output_dir / "counts.csv";
  write_file_atomic(path, ss.str());
  return {path};
}

std::vector<fs::path> cmd_reconstruct(const RunConfig& config, const fs::path& counts_csv) {
  const auto table = read_counts_file(counts_csv);
  const auto recs = reconstruct_table(table, config.noise, config.feed_forward);
  require_converged(recs);
  return write_reconstructions(config.output_dir, recs, config.emit);
}

std::vector<MeritReport> cmd_report(const RunConfig& config, const fs::path& input_dir, std::ostream& out,
                                    std::ostream& warn) {
  std::vector<ChoiRecord> chois;
  std::vector<StateRecord> states;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input_dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    if (f.extension() != ".txt") continue;
    std::ifstream in(f);
    try {
      if (name.rfind("choi_", 0) == 0) chois.push_back(read_choi(in));
      else if (name.rfind("state_", 0) == 0) states.push_back(read_state(in));
    } catch (const DataFormatError& e) {
      throw DataFormatError(fmt::format("{}: {}", f.string(), e.what()));
    }
  }
  if (chois.empty()) throw DataFormatError(fmt::format("no choi_*.txt files in '{}'", input_dir.string()));
  return emit_report(config, chois, states, out, warn);
}

std::vector<MeritReport> cmd_pipeline(const RunConfig& config, std::ostream& out, std::ostream& warn) {
  const auto table = simulate_counts(config.plan, config.noise, config.require_seed());
  if (config.emit.counts) {
    std::ostringstream ss;
    write_counts_csv(ss, table);
    write_file_atomic(config.output_dir / "counts.csv", ss.str());
  }
  std::vector<bool> variants = config.feed_forward ? std::vector<bool>{true, false} : std::vector<bool>{false};
  std::vector<ChoiRecord> chois;
  std::vector<StateRecord> states;
  for (bool ff : variants) {
    const auto recs = reconstruct_table(table, config.noise, ff);
    require_converged(recs);
    write_reconstructions(config.output_dir, recs, config.emit);
    for (const auto& r : recs) {
      chois.push_back(r.choi);
      states.insert(states.end(), r.states.begin(), r.states.end());
    }
  }
  return emit_report(config, chois, states, out, warn);
}

}  // namespace phasegate
