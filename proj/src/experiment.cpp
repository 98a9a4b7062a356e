#include "phasegate/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "parallel.hpp"
#include "phasegate/errors.hpp"

namespace phasegate {

std::string_view label(Basis b) {
  switch (b) {
    case Basis::Z: return "Z";
    case Basis::X: return "X";
    case Basis::Y: return "Y";
  }
  return "?";
}

Basis parse_basis(std::string_view text) {
  for (auto b : kAllBases)
    if (label(b) == text) return b;
  throw std::invalid_argument(fmt::format("unknown basis '{}'", text));
}

std::string_view label(ProgramDetector d) { return d == ProgramDetector::P0 ? "D_p0" : "D_p1"; }
std::string_view label(DataDetector d) { return d == DataDetector::D0 ? "D_d0" : "D_d1"; }

ProgramDetector parse_program_detector(std::string_view text) {
  for (auto d : kProgramDetectors)
    if (label(d) == text) return d;
  throw std::invalid_argument(fmt::format("unknown program detector '{}'", text));
}

DataDetector parse_data_detector(std::string_view text) {
  for (auto d : kDataDetectors)
    if (label(d) == text) return d;
  throw std::invalid_argument(fmt::format("unknown data detector '{}'", text));
}

InputState basis_state(Basis b, DataDetector d) {
  const bool first = d == DataDetector::D0;
  switch (b) {
    case Basis::Z: return first ? InputState::Zero : InputState::One;
    case Basis::X: return first ? InputState::Plus : InputState::Minus;
    case Basis::Y: return first ? InputState::PlusI : InputState::MinusI;
  }
  return InputState::Zero;
}

NoiseConfig NoiseConfig::ideal() {
  NoiseConfig n;
  n.eta_p0 = n.eta_p1 = n.eta_d0 = n.eta_d1 = 1.0;
  n.dark_quad = n.dark_single = 0.0;
  n.visibility = 1.0;
  n.phase_sigma = 0.0;
  return n;
}

void NoiseConfig::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(fmt::format("{} must lie in [0, 1] (got {})", name, v));
  };
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ConfigError(fmt::format("{} must be a finite non-negative number (got {})", name, v));
  };
  unit(eta_p0, "eta_p0");
  unit(eta_d0, "eta_d0");
  unit(eta_d1, "eta_d1");
  unit(eta_p1, "eta_p1");
  nonneg(dark_quad, "dark_quad");
  nonneg(dark_single, "dark_single");
  unit(visibility, "visibility");
  nonneg(phase_sigma, "phase_sigma");
  nonneg(pair_rate, "pair_rate");
  nonneg(interval_s, "interval_s");
  nonneg(coincidence_window, "coincidence_window");
  if (n_intervals < 1) throw ConfigError("n_intervals must be at least 1");
}

ExperimentPlan ExperimentPlan::standard() {
  ExperimentPlan plan;
  for (int k = 0; k <= 6; ++k) plan.phases.emplace_back(k * std::numbers::pi / 6.0);
  plan.input_states.assign(kAllInputStates.begin(), kAllInputStates.end());
  plan.bases.assign(kAllBases.begin(), kAllBases.end());
  return plan;
}

void ExperimentPlan::validate() const {
  if (phases.empty()) throw ConfigError("phases must not be empty");
  if (input_states.empty()) throw ConfigError("input_states must not be empty");
  if (bases.empty()) throw ConfigError("bases must not be empty");
  std::set<double> seen_phases;
  for (const auto& p : phases)
    if (!seen_phases.insert(canonical_phase_key(p.radians())).second)
      throw ConfigError(fmt::format("phases contains a duplicate entry ({})", p.radians()));
  if (std::set<InputState>(input_states.begin(), input_states.end()).size() != input_states.size())
    throw ConfigError("input_states contains a duplicate entry");
  if (std::set<Basis>(bases.begin(), bases.end()).size() != bases.size())
    throw ConfigError("bases contains a duplicate entry");
}

std::array<double, 4> branch_probabilities(const PureQubit& psi_in, ProgramPhase phi, Basis basis,
                                           double visibility) {
  const auto joint = conditional_joint_state(psi_in, phi);
  std::array<double, 4> probs{};
  for (auto p : kProgramDetectors) {
    const auto outcome = p == ProgramDetector::P0 ? ProgramOutcome::Plus : ProgramOutcome::Minus;
    const auto collapsed = measure_program(joint.state, outcome);
    const auto corrected = feed_forward_correct(collapsed.data, outcome);
    CMatrix rho = corrected.density();
    rho(0, 1) *= visibility;
    rho(1, 0) *= visibility;
    for (auto d : kDataDetectors) {
      const auto ket = state_vector(basis_state(basis, d)).ket();
      const double born = std::real(trace_of_product(CMatrix::projector(ket), rho));
      probs[pair_index(p, d)] = collapsed.probability * std::max(born, 0.0);
    }
  }
  return probs;
}

OutcomeProbabilities outcome_probabilities(const PureQubit& psi_in, ProgramPhase phi, Basis basis,
                                           const NoiseConfig& noise) {
  const auto born = branch_probabilities(psi_in, phi, basis, noise.visibility);
  const double event_rate = noise.pair_rate * kPostselectionProbability;
  OutcomeProbabilities out;
  std::array<double, 4> rates{};
  for (auto p : kProgramDetectors)
    for (auto d : kDataDetectors) {
      const std::size_t k = pair_index(p, d);
      const double signal = event_rate * born[k] * noise.efficiency(p) * noise.efficiency(d);
      const double dark = noise.dark_rate(p) * noise.dark_rate(d) * noise.coincidence_window;
      rates[k] = signal + dark;
      out.dark_rate += dark;
      out.total_rate += rates[k];
    }
  if (out.total_rate > 0.0)
    for (std::size_t k = 0; k < 4; ++k) out.p[k] = rates[k] / out.total_rate;
  return out;
}

double canonical_phase_key(double phi) { return std::stod(fmt::format("{:.12g}", phi)); }

CountTable::CountTable(std::vector<double> phases, std::vector<InputState> states,
                       std::vector<Basis> bases, std::size_t n_intervals)
    : phases_(std::move(phases)),
      states_(std::move(states)),
      bases_(std::move(bases)),
      n_intervals_(n_intervals) {
  for (auto& p : phases_) p = canonical_phase_key(p);
  std::sort(phases_.begin(), phases_.end());
  std::sort(states_.begin(), states_.end());
  std::sort(bases_.begin(), bases_.end());
  counts_.assign(phases_.size() * states_.size() * bases_.size() * 4 * n_intervals_, 0.0);
}

std::size_t CountTable::offset(std::size_t phase, std::size_t state, std::size_t basis,
                               ProgramDetector p, DataDetector d, std::size_t interval) const {
  if (phase >= phases_.size() || state >= states_.size() || basis >= bases_.size() ||
      interval >= n_intervals_) {
    throw std::out_of_range("CountTable: index out of range");
  }
  std::size_t k = phase;
  k = k * states_.size() + state;
  k = k * bases_.size() + basis;
  k = k * 4 + pair_index(p, d);
  return k * n_intervals_ + interval;
}

double& CountTable::at(std::size_t phase, std::size_t state, std::size_t basis, ProgramDetector p,
                       DataDetector d, std::size_t interval) {
  return counts_[offset(phase, state, basis, p, d, interval)];
}

double CountTable::at(std::size_t phase, std::size_t state, std::size_t basis, ProgramDetector p,
                      DataDetector d, std::size_t interval) const {
  return counts_[offset(phase, state, basis, p, d, interval)];
}

double CountTable::setting_count(std::size_t phase, std::size_t state, std::size_t basis,
                                 DataDetector d) const {
  double s = 0.0;
  for (auto p : kProgramDetectors)
    for (std::size_t i = 0; i < n_intervals_; ++i) s += at(phase, state, basis, p, d, i);
  return s;
}

double CountTable::total() const {
  double s = 0.0;
  for (double c : counts_) s += c;
  return s;
}

double CountTable::total(ProgramDetector p) const {
  double s = 0.0;
  for (std::size_t a = 0; a < phases_.size(); ++a)
    for (std::size_t b = 0; b < states_.size(); ++b)
      for (std::size_t c = 0; c < bases_.size(); ++c)
        for (auto d : kDataDetectors)
          for (std::size_t i = 0; i < n_intervals_; ++i) s += at(a, b, c, p, d, i);
  return s;
}

std::size_t CountTable::phase_index(double phi) const {
  const double key = canonical_phase_key(phi);
  for (std::size_t i = 0; i < phases_.size(); ++i)
    if (phases_[i] == key) return i;
  throw std::out_of_range(fmt::format("CountTable: phase {} not present", phi));
}

std::size_t CountTable::state_index(InputState s) const {
  auto it = std::find(states_.begin(), states_.end(), s);
  if (it == states_.end()) throw std::out_of_range(fmt::format("CountTable: state {} not present", label(s)));
  return static_cast<std::size_t>(it - states_.begin());
}

std::size_t CountTable::basis_index(Basis b) const {
  auto it = std::find(bases_.begin(), bases_.end(), b);
  if (it == bases_.end()) throw std::out_of_range(fmt::format("CountTable: basis {} not present", label(b)));
  return static_cast<std::size_t>(it - bases_.begin());
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stage) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(seed) ^ h) ^ index);
}

namespace {

template <class Rng>
std::uint64_t draw_poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<std::uint64_t>(mean)(rng);
}

template <class Rng>
std::uint64_t draw_binomial(Rng& rng, std::uint64_t n, double p) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<std::uint64_t>(n, p)(rng);
}

}  // namespace

CountTable simulate_counts(const ExperimentPlan& plan, const NoiseConfig& noise, std::uint64_t seed) {
  plan.validate();
  noise.validate();
  std::vector<double> phase_values;
  for (const auto& p : plan.phases) phase_values.push_back(p.radians());
  CountTable table(phase_values, plan.input_states, plan.bases, noise.n_intervals);

  const std::size_t n_states = plan.input_states.size();
  const std::size_t n_bases = plan.bases.size();
  const std::size_t n_settings = plan.phases.size() * n_states * n_bases;
  const double mean_events = noise.pair_rate * noise.interval_s * kPostselectionProbability;

  // Each setting writes a disjoint slice of the table and owns its generator.
  detail::parallel_for(n_settings, [&](std::size_t setting) {
    const std::size_t ip = setting / (n_states * n_bases);
    const std::size_t is = (setting / n_bases) % n_states;
    const std::size_t ib = setting % n_bases;
    const std::size_t tp = table.phase_index(plan.phases[ip].radians());
    const std::size_t ts = table.state_index(plan.input_states[is]);
    const std::size_t tb = table.basis_index(plan.bases[ib]);
    std::mt19937_64 rng(derive_seed(seed, "simulate", setting));
    std::normal_distribution<double> jitter(0.0, 1.0);
    const PureQubit psi = state_vector(plan.input_states[is]);

    for (std::size_t interval = 0; interval < noise.n_intervals; ++interval) {
      const double error = noise.phase_sigma > 0.0 ? noise.phase_sigma * jitter(rng) : 0.0;
      const auto born = branch_probabilities(psi, ProgramPhase(plan.phases[ip].radians() + error),
                                             plan.bases[ib], noise.visibility);

      // Multinomial over the four detector pairs plus "lost", by sequential binomials.
      std::uint64_t remaining = draw_poisson(rng, mean_events);
      double remaining_p = 1.0;
      for (auto p : kProgramDetectors)
        for (auto d : kDataDetectors) {
          const double q = born[pair_index(p, d)] * noise.efficiency(p) * noise.efficiency(d);
          const std::uint64_t k = remaining_p > 0.0 ? draw_binomial(rng, remaining, q / remaining_p) : 0;
          remaining -= k;
          remaining_p = std::max(remaining_p - q, 0.0);
          const double dark_mean =
              noise.dark_rate(p) * noise.dark_rate(d) * noise.coincidence_window * noise.interval_s;
          table.at(tp, ts, tb, p, d, interval) = static_cast<double>(k + draw_poisson(rng, dark_mean));
        }
    }
  });
  return table;
}

CountTable rescale_efficiencies(const CountTable& counts, const NoiseConfig& noise) {
  for (auto [v, name] : {std::pair{noise.eta_p0, "eta_p0"}, std::pair{noise.eta_p1, "eta_p1"},
                         std::pair{noise.eta_d0, "eta_d0"}, std::pair{noise.eta_d1, "eta_d1"}})
    if (!(v > 0.0)) throw std::invalid_argument(fmt::format("rescale_efficiencies: {} is zero", name));
  CountTable out = counts;
  for (std::size_t a = 0; a < out.phases().size(); ++a)
    for (std::size_t b = 0; b < out.states().size(); ++b)
      for (std::size_t c = 0; c < out.bases().size(); ++c)
        for (auto p : kProgramDetectors)
          for (auto d : kDataDetectors)
            for (std::size_t i = 0; i < out.n_intervals(); ++i)
              out.at(a, b, c, p, d, i) /= noise.efficiency(p) * noise.efficiency(d);
  return out;
}

CountTable select_without_feedforward(const CountTable& counts) {
  CountTable out = counts;
  for (std::size_t a = 0; a < out.phases().size(); ++a)
    for (std::size_t b = 0; b < out.states().size(); ++b)
      for (std::size_t c = 0; c < out.bases().size(); ++c)
        for (auto d : kDataDetectors)
          for (std::size_t i = 0; i < out.n_intervals(); ++i)
            out.at(a, b, c, ProgramDetector::P1, d, i) = 0.0;
  out.set_feed_forward_active(false);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr std::string_view kCsvHeader = "phase,input_state,basis,program_detector,data_detector,interval,count";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, std::size_t line_no, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v))
    throw DataFormatError(fmt::format("line {}: invalid {} '{}'", line_no, what, text));
  return v;
}

}  // namespace

void write_counts_csv(std::ostream& out, const CountTable& table) {
  out << kCsvHeader << '\n';
  for (std::size_t a = 0; a < table.phases().size(); ++a)
    for (std::size_t b = 0; b < table.states().size(); ++b)
      for (std::size_t c = 0; c < table.bases().size(); ++c)
        for (auto p : kProgramDetectors)
          for (auto d : kDataDetectors)
            for (std::size_t i = 0; i < table.n_intervals(); ++i)
              out << fmt::format("{:.12g},{},{},{},{},{},{:.17g}\n", table.phases()[a],
                                 label(table.states()[b]), label(table.bases()[c]), label(p), label(d), i,
                                 table.at(a, b, c, p, d, i));
}

CountTable read_counts_csv(std::istream& in) {
  using Key = std::tuple<double, InputState, Basis, ProgramDetector, DataDetector, std::size_t>;
  std::map<Key, double> cells;
  std::set<double> phases;
  std::set<InputState> states;
  std::set<Basis> bases;
  std::size_t n_intervals = 0;

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kCsvHeader) throw DataFormatError(fmt::format("line {}: expected header '{}'", line_no, kCsvHeader));
      header_seen = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 7)
      throw DataFormatError(fmt::format("line {}: expected 7 fields, found {}", line_no, f.size()));
    Key key;
    try {
      const double phase = canonical_phase_key(ProgramPhase(parse_number(f[0], line_no, "phase")).radians());
      const double interval = parse_number(f[5], line_no, "interval");
      if (interval < 0 || interval != std::floor(interval))
        throw DataFormatError(fmt::format("line {}: interval must be a non-negative integer", line_no));
      key = Key{phase,
                parse_input_state(f[1]),
                parse_basis(f[2]),
                parse_program_detector(f[3]),
                parse_data_detector(f[4]),
                static_cast<std::size_t>(interval)};
    } catch (const std::invalid_argument& e) {
      throw DataFormatError(fmt::format("line {}: {}", line_no, e.what()));
    }
    const double count = parse_number(f[6], line_no, "count");
    if (count < 0.0) throw DataFormatError(fmt::format("line {}: negative count", line_no));
    if (!cells.emplace(key, count).second)
      throw DataFormatError(fmt::format("line {}: duplicate record", line_no));
    phases.insert(std::get<0>(key));
    states.insert(std::get<1>(key));
    bases.insert(std::get<2>(key));
    n_intervals = std::max(n_intervals, std::get<5>(key) + 1);
  }
  if (!header_seen) throw DataFormatError("count file is empty (no header)");

  CountTable table(std::vector<double>(phases.begin(), phases.end()),
                   std::vector<InputState>(states.begin(), states.end()),
                   std::vector<Basis>(bases.begin(), bases.end()), n_intervals);

  std::vector<std::string> missing;
  for (std::size_t a = 0; a < table.phases().size(); ++a)
    for (std::size_t b = 0; b < table.states().size(); ++b)
      for (std::size_t c = 0; c < table.bases().size(); ++c)
        for (auto p : kProgramDetectors)
          for (auto d : kDataDetectors)
            for (std::size_t i = 0; i < n_intervals; ++i) {
              auto it = cells.find(Key{table.phases()[a], table.states()[b], table.bases()[c], p, d, i});
              if (it == cells.end()) {
                missing.push_back(fmt::format("({:.12g},{},{},{},{},{})", table.phases()[a],
                                              label(table.states()[b]), label(table.bases()[c]), label(p),
                                              label(d), i));
              } else {
                table.at(a, b, c, p, d, i) = it->second;
              }
            }
  if (!missing.empty()) {
    std::string msg = fmt::format("count file is missing {} record(s):", missing.size());
    for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 20); ++k) msg += "\n  " + missing[k];
    if (missing.size() > 20) msg += fmt::format("\n  ... and {} more", missing.size() - 20);
    throw DataFormatError(msg);
  }
  return table;
}

}  // namespace phasegate
