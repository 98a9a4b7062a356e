#include "phasegate/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "phasegate/errors.hpp"

namespace phasegate {

ChoiMatrix::ChoiMatrix(CMatrix m) : m_(std::move(m)) {
  if (m_.rows() != 4 || m_.cols() != 4) throw std::invalid_argument("ChoiMatrix: must be 4x4");
  if (!is_hermitian(m_)) throw std::invalid_argument("ChoiMatrix: not Hermitian");
  if (!(m_.trace().real() > 0.0)) throw std::invalid_argument("ChoiMatrix: trace must be positive");
  if (eig_hermitian(m_).values.front() < -1e-10)
    throw std::invalid_argument("ChoiMatrix: not positive semidefinite");
}

CMatrix TomographySetting::effective_operator() const {
  return tensor(rho_in.transpose(), pi_out);
}

MapOutput apply_map(const ChoiMatrix& chi, const CMatrix& rho_in) {
  const CMatrix out = partial_trace(chi.matrix() * tensor(rho_in.transpose(), CMatrix::identity(2)),
                                    Subsystem::A);
  const double w = out.trace().real();
  if (!(w > 1e-15)) throw std::domain_error("apply_map: process annihilates the input state");
  return {out * cplx(1.0 / w), w};
}

double setting_probability(const ChoiMatrix& chi, const TomographySetting& s) {
  return trace_of_product(chi.matrix(), s.effective_operator()).real();
}

namespace {

constexpr double kProbabilityFloor = 1e-12;

struct FixedPointResult {
  CMatrix rho;
  std::size_t iterations = 0;
  double log_likelihood = 0.0;
  bool converged = false;
  std::vector<double> trace;
};

std::vector<double> model_probabilities(const CMatrix& rho, const std::vector<CMatrix>& ops) {
  std::vector<double> p(ops.size());
  for (std::size_t k = 0; k < ops.size(); ++k) p[k] = trace_of_product(rho, ops[k]).real();
  return p;
}

double log_likelihood(const std::vector<double>& p, const std::vector<double>& counts) {
  double ll = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (counts[k] > 0.0) ll += counts[k] * std::log(std::max(p[k], 1e-300));
  return ll;
}

// L(new) - L(old) from probability ratios. Summing log ratios keeps the
// increment accurate even when it is far below the rounding error of L itself.
double log_likelihood_change(const std::vector<double>& p_new, const std::vector<double>& p_old,
                             const std::vector<double>& counts) {
  double d = 0.0;
  for (std::size_t k = 0; k < p_new.size(); ++k) {
    if (counts[k] <= 0.0) continue;
    const double a = std::max(p_new[k], 1e-300), b = std::max(p_old[k], 1e-300);
    d += counts[k] * std::log1p((a - b) / b);
  }
  return d;
}

CMatrix hermitize(const CMatrix& m) { return (m + m.adjoint()) * cplx(0.5); }

CMatrix sandwich_normalized(const CMatrix& a, const CMatrix& rho, double target_trace) {
  CMatrix out = hermitize(a * rho * a.adjoint());
  return out * cplx(target_trace / out.trace().real());
}

struct Candidate {
  CMatrix rho;
  std::vector<double> p;
  double gain = 0.0;
};

Candidate evaluate(CMatrix rho, const std::vector<CMatrix>& ops, const std::vector<double>& counts,
                   const std::vector<double>& p_old) {
  Candidate c{std::move(rho), {}, 0.0};
  c.p = model_probabilities(c.rho, ops);
  c.gain = log_likelihood_change(c.p, p_old, counts);
  return c;
}

// Iterates rho <- N[R rho R]. A step that would lower the likelihood is
// replaced by the diluted step N[(I + eps R) rho (I + eps R)] with eps halved
// until the likelihood does not decrease.
FixedPointResult ml_fixed_point(const std::vector<CMatrix>& ops, const std::vector<double>& counts,
                                double target_trace, const MlOptions& options) {
  const std::size_t dim = ops.front().rows();
  double total = 0.0;
  for (double n : counts) total += n;

  FixedPointResult res;
  res.rho = CMatrix::identity(dim) * cplx(target_trace / static_cast<double>(dim));
  std::vector<double> p = model_probabilities(res.rho, ops);
  res.log_likelihood = log_likelihood(p, counts);
  if (options.record_trace) res.trace.push_back(res.log_likelihood);
  const CMatrix id = CMatrix::identity(dim);

  while (res.iterations < options.max_iterations) {
    CMatrix r(dim, dim);
    for (std::size_t k = 0; k < ops.size(); ++k) {
      if (counts[k] <= 0.0) continue;
      r += ops[k] * cplx(counts[k] / std::max(p[k], kProbabilityFloor));
    }
    r *= cplx(target_trace / total);

    Candidate best = evaluate(sandwich_normalized(r, res.rho, target_trace), ops, counts, p);
    if (best.gain < 0.0) {
      bool accepted = false;
      for (double eps = 1.0; eps > 1e-12; eps *= 0.5) {
        best = evaluate(sandwich_normalized(id + r * cplx(eps), res.rho, target_trace), ops, counts, p);
        if (best.gain >= 0.0) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // No ascent direction left at working precision.
        res.converged = true;
        break;
      }
    }
    ++res.iterations;
    const double update = max_abs_diff(best.rho, res.rho);
    res.rho = std::move(best.rho);
    p = std::move(best.p);
    res.log_likelihood += best.gain;
    if (options.record_trace) res.trace.push_back(res.log_likelihood);
    if (update < options.tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

std::vector<double> hermitian_coordinates(const CMatrix& m) {
  std::vector<double> v;
  const double s = std::sqrt(2.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    v.push_back(m(r, r).real());
    for (std::size_t c = r + 1; c < m.cols(); ++c) {
      v.push_back(s * m(r, c).real());
      v.push_back(s * m(r, c).imag());
    }
  }
  return v;
}

}  // namespace

std::size_t design_rank(std::span<const TomographySetting> settings) {
  if (settings.empty()) return 0;
  std::vector<std::vector<double>> coords;
  for (const auto& s : settings) coords.push_back(hermitian_coordinates(s.effective_operator()));
  const std::size_t n = coords.front().size();
  CMatrix gram(n, n);
  for (const auto& v : coords)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) gram(i, j) += v[i] * v[j];
  const auto eig = eig_hermitian(gram);
  const double top = std::max(eig.values.back(), 1e-300);
  return static_cast<std::size_t>(
      std::count_if(eig.values.begin(), eig.values.end(), [&](double x) { return x > 1e-9 * top; }));
}

ProcessEstimate ml_reconstruct_process(std::span<const TomographySetting> settings,
                                       const MlOptions& options) {
  const std::size_t rank = design_rank(settings);
  if (rank < 16)
    throw DataFormatError(fmt::format("rank-deficient design: effective measurements span {} of 16 dimensions", rank));
  std::vector<CMatrix> ops;
  std::vector<double> counts;
  double total = 0.0;
  for (const auto& s : settings) {
    if (s.count < 0.0) throw DataFormatError("negative count in tomography setting");
    ops.push_back(s.effective_operator());
    counts.push_back(s.count);
    total += s.count;
  }
  if (!(total > 0.0)) throw DataFormatError("ml_reconstruct_process: total count is zero");

  auto fp = ml_fixed_point(ops, counts, 2.0, options);
  const CMatrix tp = partial_trace(fp.rho, Subsystem::B);
  ProcessEstimate est{ChoiMatrix(fp.rho), fp.iterations, fp.log_likelihood, fp.converged, std::move(fp.trace),
                      max_abs_diff(tp, CMatrix::identity(2))};
  return est;
}

StateEstimate ml_reconstruct_state(const StateCounts& counts, const MlOptions& options) {
  std::vector<CMatrix> ops;
  std::vector<double> n;
  double total = 0.0;
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t k = 0; k < 2; ++k) {
      const auto d = k == 0 ? DataDetector::D0 : DataDetector::D1;
      ops.push_back(state_vector(basis_state(kAllBases[b], d)).density());
      if (counts[b][k] < 0.0) throw DataFormatError("negative count in state tomography");
      n.push_back(counts[b][k]);
      total += counts[b][k];
    }
  if (!(total > 0.0)) throw DataFormatError("ml_reconstruct_state: all counts are zero");
  auto fp = ml_fixed_point(ops, n, 1.0, options);
  return {std::move(fp.rho), fp.iterations, fp.log_likelihood, fp.converged, std::move(fp.trace)};
}

std::vector<TomographySetting> process_settings(const CountTable& table, std::size_t phase_index) {
  std::vector<TomographySetting> out;
  for (std::size_t s = 0; s < table.states().size(); ++s) {
    const CMatrix rho_in = state_vector(table.states()[s]).density();
    for (std::size_t b = 0; b < table.bases().size(); ++b)
      for (auto d : kDataDetectors)
        out.push_back({rho_in, state_vector(basis_state(table.bases()[b], d)).density(),
                       table.setting_count(phase_index, s, b, d)});
  }
  return out;
}

StateCounts state_counts(const CountTable& table, std::size_t phase_index, InputState input) {
  const std::size_t s = table.state_index(input);
  StateCounts out{};
  for (std::size_t b = 0; b < 3; ++b) {
    const std::size_t tb = table.basis_index(kAllBases[b]);
    out[b][0] = table.setting_count(phase_index, s, tb, DataDetector::D0);
    out[b][1] = table.setting_count(phase_index, s, tb, DataDetector::D1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text files

namespace {

void write_matrix(std::ostream& out, const CMatrix& m) {
  out << "dimension " << m.rows() << '\n';
  for (const auto& x : m.entries()) out << fmt::format("{:.15g} {:.15g}\n", x.real(), x.imag());
}

struct ParsedFile {
  std::map<std::string, std::string> fields;
  CMatrix matrix;
};

ParsedFile parse_matrix_file(std::istream& in, std::string_view kind) {
  ParsedFile pf;
  std::string line;
  std::size_t line_no = 0;
  bool kind_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ss(line);
    std::string key, value;
    ss >> key >> value;
    if (key == "kind") {
      if (value != kind) throw DataFormatError(fmt::format("line {}: expected kind '{}', found '{}'", line_no, kind, value));
      kind_seen = true;
      continue;
    }
    if (key == "dimension") {
      std::size_t dim = 0;
      try {
        dim = std::stoul(value);
      } catch (const std::exception&) {
        throw DataFormatError(fmt::format("line {}: invalid dimension '{}'", line_no, value));
      }
      if (dim == 0 || dim > 4) throw DataFormatError(fmt::format("line {}: unsupported dimension {}", line_no, dim));
      std::vector<cplx> entries;
      while (entries.size() < dim * dim && std::getline(in, line)) {
        ++line_no;
        std::istringstream es(line);
        double re = 0.0, im = 0.0;
        if (!(es >> re >> im)) throw DataFormatError(fmt::format("line {}: expected 're im' pair", line_no));
        entries.emplace_back(re, im);
      }
      if (entries.size() != dim * dim)
        throw DataFormatError(fmt::format("matrix has {} of {} entries", entries.size(), dim * dim));
      pf.matrix = CMatrix(dim, dim, std::move(entries));
      continue;
    }
    if (value.empty()) throw DataFormatError(fmt::format("line {}: missing value for '{}'", line_no, key));
    pf.fields[key] = value;
  }
  if (!kind_seen) throw DataFormatError(fmt::format("missing 'kind {}' line", kind));
  if (pf.matrix.rows() == 0) throw DataFormatError("missing matrix block");
  return pf;
}

const std::string& field(const ParsedFile& pf, const std::string& key) {
  auto it = pf.fields.find(key);
  if (it == pf.fields.end()) throw DataFormatError(fmt::format("missing field '{}'", key));
  return it->second;
}

double number_field(const ParsedFile& pf, const std::string& key) {
  const auto& v = field(pf, key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw DataFormatError(fmt::format("field '{}' is not a number: '{}'", key, v));
}

}  // namespace

void write_choi(std::ostream& out, const ChoiRecord& rec) {
  out << "# process matrix on H_in (x) H_out, row-major (re im) entries\n";
  out << "kind choi\n";
  out << fmt::format("phase {:.12g}\n", rec.phase);
  out << fmt::format("feed_forward {}\n", rec.feed_forward ? 1 : 0);
  out << fmt::format("success_probability {:.15g}\n", rec.success_probability);
  out << fmt::format("iterations {}\n", rec.iterations);
  out << fmt::format("log_likelihood {:.15g}\n", rec.log_likelihood);
  out << fmt::format("tp_deviation {:.15g}\n", rec.trace_preservation_deviation);
  write_matrix(out, rec.chi);
}

ChoiRecord read_choi(std::istream& in) {
  const auto pf = parse_matrix_file(in, "choi");
  if (pf.matrix.rows() != 4) throw DataFormatError("choi file: dimension must be 4");
  ChoiRecord rec;
  rec.phase = number_field(pf, "phase");
  rec.feed_forward = number_field(pf, "feed_forward") != 0.0;
  rec.success_probability = number_field(pf, "success_probability");
  rec.iterations = static_cast<std::size_t>(number_field(pf, "iterations"));
  rec.log_likelihood = number_field(pf, "log_likelihood");
  rec.trace_preservation_deviation = number_field(pf, "tp_deviation");
  rec.chi = pf.matrix;
  return rec;
}

void write_state(std::ostream& out, const StateRecord& rec) {
  out << "# output density matrix, row-major (re im) entries\n";
  out << "kind state\n";
  out << fmt::format("phase {:.12g}\n", rec.phase);
  out << fmt::format("input_state {}\n", label(rec.input_state));
  out << fmt::format("feed_forward {}\n", rec.feed_forward ? 1 : 0);
  out << fmt::format("success_probability {:.15g}\n", rec.success_probability);
  out << fmt::format("iterations {}\n", rec.iterations);
  out << fmt::format("log_likelihood {:.15g}\n", rec.log_likelihood);
  write_matrix(out, rec.rho);
}

StateRecord read_state(std::istream& in) {
  const auto pf = parse_matrix_file(in, "state");
  if (pf.matrix.rows() != 2) throw DataFormatError("state file: dimension must be 2");
  StateRecord rec;
  rec.phase = number_field(pf, "phase");
  try {
    rec.input_state = parse_input_state(field(pf, "input_state"));
  } catch (const std::invalid_argument& e) {
    throw DataFormatError(e.what());
  }
  rec.feed_forward = number_field(pf, "feed_forward") != 0.0;
  rec.success_probability = number_field(pf, "success_probability");
  rec.iterations = static_cast<std::size_t>(number_field(pf, "iterations"));
  rec.log_likelihood = number_field(pf, "log_likelihood");
  rec.rho = pf.matrix;
  return rec;
}

}  // namespace phasegate
