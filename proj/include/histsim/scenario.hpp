// Copyright 2026 The histsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Scenario files are versioned JSON documents describing a system with its
// measurement schedule, plus the queries to answer about it. Parsing
// validates everything before any history is built. Running produces one
// CSV table per query.
//
// Needs nlohmann/json (json.hpp) on the include path.

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "histsim/history.hpp"
#include "histsim/measurement.hpp"
#include "histsim/pauli.hpp"

namespace histsim::scenario {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;
/// Query values against the Kraus-chain or closed-form oracles.
inline constexpr double kOracleTol = 1e-8;
/// Two-measurement identities checked by `verify`.
inline constexpr double kVerifyTol = 1e-9;
/// Eigenvalue predictions checked by `spectrum`.
inline constexpr double kSpectrumTol = 1e-9;
inline constexpr double kEnvelopeFloor = 1e-8;

struct ProbVsTime {
  std::vector<std::string> memories;
};
struct Joint {
  std::vector<std::string> memories;
  double t = 0.0;
};
struct Conditional {
  Reading later;
  Reading earlier;
};
struct Propagator {
  StateVector initial;
  double t_initial = 0.0;
  StateVector final_state;
  double t_final = 0.0;
};
struct ResidualSweep {
  std::vector<double> widths;
  std::optional<ClockGrid> grid;  // defaults to the scenario grid
};

struct Query {
  std::string name;
  std::string type;
  std::variant<ProbVsTime, Joint, Conditional, Propagator, ResidualSweep> params;
};

struct Scenario {
  std::string name;
  ClockGrid grid;
  Envelope envelope;
  HamiltonianSpec hamiltonian;
  StateVector psi0;
  double t0 = 0.0;
  MeasurementSchedule schedule;
  std::vector<Query> queries;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw ValidationError(path + ": " + msg);
}

/// Runs f and prefixes any validation message with the JSON path.
template <class F>
auto at_path(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PauliParseError& e) {
    fail(path, std::string(e.what()) + " (offset " + std::to_string(e.offset()) + ")");
  } catch (const ValidationError& e) {
    fail(path, e.what());
  }
}

inline void check_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed,
                       std::initializer_list<std::string_view> required = {}) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      fail(path, "unknown key '" + item.key() + "'");
    }
  }
  for (const auto& r : required) {
    if (!j.contains(r)) fail(path, "missing required key '" + std::string(r) + "'");
  }
}

inline std::string child(const std::string& path, std::string_view key) { return path + "." + std::string(key); }
inline std::string child(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "number is not finite");
  return v;
}

inline std::size_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(path, "expected a non-negative integer");
  return j.get<std::size_t>();
}

inline std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline const json& array(const json& j, const std::string& path, bool nonempty = true) {
  if (!j.is_array()) fail(path, "expected an array");
  if (nonempty && j.empty()) fail(path, "array must not be empty");
  return j;
}

inline cplx complex_number(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) fail(path, "expected a [re, im] pair");
  return {number(j[0], child(path, 0)), number(j[1], child(path, 1))};
}

inline Vector complex_vector(const json& j, const std::string& path, std::size_t dim) {
  array(j, path);
  if (j.size() != dim) fail(path, "expected " + std::to_string(dim) + " entries, got " + std::to_string(j.size()));
  Vector v(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) v(static_cast<Eigen::Index>(i)) = complex_number(j[i], child(path, i));
  return v;
}

inline Matrix complex_matrix(const json& j, const std::string& path, std::size_t dim) {
  array(j, path);
  if (j.size() != dim) fail(path, "expected " + std::to_string(dim) + " rows");
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix m(d, d);
  for (std::size_t r = 0; r < dim; ++r) m.row(static_cast<Eigen::Index>(r)) = complex_vector(j[r], child(path, r), dim);
  return m;
}

inline ClockGrid parse_grid(const json& j, const std::string& path) {
  check_keys(j, path, {"N", "t_min", "t_max"}, {"N", "t_min", "t_max"});
  const auto n = count(j["N"], child(path, "N"));
  const double lo = number(j["t_min"], child(path, "t_min"));
  const double hi = number(j["t_max"], child(path, "t_max"));
  return at_path(path, [&] { return ClockGrid(n, lo, hi); });
}

inline Envelope parse_envelope(const json& j, const std::string& path, const ClockGrid& grid) {
  check_keys(j, path, {"kind", "n"}, {"kind"});
  const auto kind = text(j["kind"], child(path, "kind"));
  if (kind == "flat") {
    if (j.contains("n")) fail(path, "a flat envelope takes no width");
    return flat_envelope(grid);
  }
  if (kind == "gaussian") {
    if (!j.contains("n")) fail(path, "a gaussian envelope needs a width 'n'");
    const double n = number(j["n"], child(path, "n"));
    if (!(n > 0)) fail(child(path, "n"), "width must be positive");
    return gaussian_envelope(grid, n);
  }
  fail(child(path, "kind"), "expected 'flat' or 'gaussian', got '" + kind + "'");
}

struct SystemShape {
  std::size_t dim = 0;
  std::optional<std::size_t> qubits;
};

inline Matrix parse_operator(const json& j, const std::string& path, const SystemShape& shape) {
  Matrix m;
  if (j.is_string()) {
    if (!shape.qubits) fail(path, "Pauli expressions need 'system.qubits'");
    m = at_path(path, [&] { return parse_pauli(j.get<std::string>(), *shape.qubits).matrix(*shape.qubits).matrix(); });
  } else {
    m = complex_matrix(j, path, shape.dim);
  }
  if (hermiticity_defect(m) > kHermitianTol) fail(path, "operator is not hermitian");
  return m;
}

inline Waveform parse_waveform(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("kind")) fail(path, "expected an object with a 'kind'");
  const auto kind = text(j["kind"], child(path, "kind"));
  if (kind == "const") {
    check_keys(j, path, {"kind", "value"}, {"value"});
    return Waveform::constant(number(j["value"], child(path, "value")));
  }
  if (kind == "piecewise") {
    check_keys(j, path, {"kind", "starts", "values"}, {"starts", "values"});
    std::vector<double> starts, values;
    const auto sp = child(path, "starts"), vp = child(path, "values");
    for (std::size_t i = 0; i < array(j["starts"], sp).size(); ++i) starts.push_back(number(j["starts"][i], child(sp, i)));
    for (std::size_t i = 0; i < array(j["values"], vp).size(); ++i) values.push_back(number(j["values"][i], child(vp, i)));
    return at_path(path, [&] { return Waveform::piecewise(starts, values); });
  }
  if (kind == "sin") {
    check_keys(j, path, {"kind", "amplitude", "frequency", "phase"}, {"amplitude", "frequency"});
    const double phase = j.contains("phase") ? number(j["phase"], child(path, "phase")) : 0.0;
    return Waveform::sinusoid(number(j["amplitude"], child(path, "amplitude")),
                              number(j["frequency"], child(path, "frequency")), phase);
  }
  fail(child(path, "kind"), "expected 'const', 'piecewise' or 'sin', got '" + kind + "'");
}

inline HamiltonianSpec parse_system(const json& j, const std::string& path, SystemShape& shape) {
  check_keys(j, path, {"qubits", "dim", "hamiltonian", "time_dependent"});
  if (j.contains("qubits") == j.contains("dim")) fail(path, "give exactly one of 'qubits' or 'dim'");
  if (j.contains("qubits")) {
    const auto q = count(j["qubits"], child(path, "qubits"));
    if (q < 1 || q > 10) fail(child(path, "qubits"), "qubit count must lie in 1..10");
    shape.qubits = q;
    shape.dim = std::size_t{1} << q;
  } else {
    shape.dim = count(j["dim"], child(path, "dim"));
    if (shape.dim < 1 || shape.dim > 1024) fail(child(path, "dim"), "dimension must lie in 1..1024");
  }
  const SpaceLabel q{"Q", shape.dim};
  std::vector<HamiltonianTerm> terms;
  if (j.contains("hamiltonian")) {
    terms.push_back({Operator({q}, parse_operator(j["hamiltonian"], child(path, "hamiltonian"), shape)),
                     Waveform::constant()});
  }
  if (j.contains("time_dependent")) {
    const auto tp = child(path, "time_dependent");
    const auto& list = array(j["time_dependent"], tp);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto ip = child(tp, i);
      check_keys(list[i], ip, {"operator", "waveform"}, {"operator", "waveform"});
      terms.push_back({Operator({q}, parse_operator(list[i]["operator"], child(ip, "operator"), shape)),
                       parse_waveform(list[i]["waveform"], child(ip, "waveform"))});
    }
  }
  if (terms.empty()) return HamiltonianSpec::zero(shape.dim);
  return at_path(path, [&] { return HamiltonianSpec(std::move(terms)); });
}

inline StateVector parse_state(const json& j, const std::string& path, std::size_t dim) {
  check_keys(j, path, {"basis", "amplitudes"});
  if (j.contains("basis") == j.contains("amplitudes")) fail(path, "give exactly one of 'basis' or 'amplitudes'");
  const SpaceLabel q{"Q", dim};
  if (j.contains("basis")) {
    return at_path(child(path, "basis"), [&] { return StateVector::basis(q, count(j["basis"], child(path, "basis"))); });
  }
  Vector v = complex_vector(j["amplitudes"], child(path, "amplitudes"), dim);
  if (std::abs(v.norm() - 1.0) > 1e-10) fail(child(path, "amplitudes"), "state must have unit norm");
  return StateVector({q}, std::move(v));
}

inline KrausInstrument parse_instrument(const json& j, const std::string& path, std::size_t dim) {
  check_keys(j, path, {"projective", "basis", "kraus"});
  if (j.size() != 1) fail(path, "give exactly one of 'projective', 'basis' or 'kraus'");
  const SpaceLabel q{"Q", dim};
  if (j.contains("projective")) {
    const auto pp = child(path, "projective");
    const auto name = text(j["projective"], pp);
    std::vector<Vector> basis;
    if (name == "computational") {
      for (std::size_t k = 0; k < dim; ++k) basis.push_back(StateVector::basis(q, k).amplitudes());
    } else if (name == "Z" || name == "X" || name == "Y") {
      if (dim != 2) fail(pp, "basis '" + name + "' needs a two-level system");
      const double s = 1.0 / std::sqrt(2.0);
      const cplx i(0.0, 1.0);
      Vector a(2), b(2);
      if (name == "Z") {
        a << 1, 0;
        b << 0, 1;
      } else if (name == "X") {
        a << s, s;
        b << s, -s;
      } else {
        a << s, s * i;
        b << s, -s * i;
      }
      basis = {a, b};
    } else {
      fail(pp, "expected 'Z', 'X', 'Y' or 'computational', got '" + name + "'");
    }
    return instrument_from_projectors(basis);
  }
  if (j.contains("basis")) {
    const auto bp = child(path, "basis");
    std::vector<Vector> basis;
    for (std::size_t i = 0; i < array(j["basis"], bp).size(); ++i) {
      basis.push_back(complex_vector(j["basis"][i], child(bp, i), dim));
    }
    return at_path(bp, [&] { return instrument_from_projectors(basis); });
  }
  const auto kp = child(path, "kraus");
  std::vector<Operator> ops;
  for (std::size_t i = 0; i < array(j["kraus"], kp).size(); ++i) {
    ops.emplace_back(Factors{q}, complex_matrix(j["kraus"][i], child(kp, i), dim));
  }
  return at_path(kp, [&] { return KrausInstrument(std::move(ops)); });
}

inline void check_time(const Scenario& sc, double t, const std::string& path) {
  if (!sc.grid.contains(t)) fail(path, "time lies outside the clock window");
  if (std::abs(sc.envelope[sc.grid.snap(t)]) < kEnvelopeFloor) fail(path, "clock envelope vanishes at this time");
}

inline const MeasurementEvent& find_event(const Scenario& sc, const std::string& label, const std::string& path) {
  for (const auto& e : sc.schedule.events()) {
    if (e.memory.label() == label) return e;
  }
  fail(path, "no scheduled measurement writes memory '" + label + "'");
}

inline std::vector<std::string> parse_memories(const Scenario& sc, const json& j, const std::string& path) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < array(j, path).size(); ++i) {
    const auto ip = child(path, i);
    auto label = text(j[i], ip);
    (void)find_event(sc, label, ip);
    if (std::find(out.begin(), out.end(), label) != out.end()) fail(ip, "memory '" + label + "' listed twice");
    out.push_back(std::move(label));
  }
  return out;
}

inline Reading parse_reading(const Scenario& sc, const json& j, const std::string& path) {
  check_keys(j, path, {"memory", "outcome", "t"}, {"memory", "outcome", "t"});
  Reading r;
  r.memory = text(j["memory"], child(path, "memory"));
  const auto& ev = find_event(sc, r.memory, child(path, "memory"));
  r.outcome = count(j["outcome"], child(path, "outcome"));
  if (r.outcome >= ev.memory.outcomes()) fail(child(path, "outcome"), "outcome out of range");
  r.t = number(j["t"], child(path, "t"));
  check_time(sc, r.t, child(path, "t"));
  return r;
}

inline bool valid_query_name(const std::string& s) {
  if (s.empty() || s.size() > 64) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; });
}

inline Query parse_query(const Scenario& sc, const json& j, const std::string& path, std::size_t index) {
  if (!j.is_object() || !j.contains("type")) fail(path, "expected an object with a 'type'");
  Query q;
  q.type = text(j["type"], child(path, "type"));
  q.name = j.contains("name") ? text(j["name"], child(path, "name")) : "q" + std::to_string(index) + "_" + q.type;
  if (!valid_query_name(q.name)) fail(child(path, "name"), "names use letters, digits, '_' and '-' only");
  if (q.type == "prob_vs_time") {
    check_keys(j, path, {"type", "name", "memories"}, {"memories"});
    q.params = ProbVsTime{parse_memories(sc, j["memories"], child(path, "memories"))};
  } else if (q.type == "joint") {
    check_keys(j, path, {"type", "name", "memories", "t"}, {"memories", "t"});
    Joint p{parse_memories(sc, j["memories"], child(path, "memories")), number(j["t"], child(path, "t"))};
    check_time(sc, p.t, child(path, "t"));
    q.params = std::move(p);
  } else if (q.type == "conditional") {
    check_keys(j, path, {"type", "name", "later", "earlier"}, {"later", "earlier"});
    Conditional p{parse_reading(sc, j["later"], child(path, "later")),
                  parse_reading(sc, j["earlier"], child(path, "earlier"))};
    if (p.later.memory == p.earlier.memory) fail(path, "conditioning needs two different memories");
    if (p.earlier.t > p.later.t) fail(path, "the earlier reading must not come after the later one");
    q.params = std::move(p);
  } else if (q.type == "propagator") {
    check_keys(j, path, {"type", "name", "initial", "t_initial", "final", "t_final"},
               {"initial", "t_initial", "final", "t_final"});
    Propagator p{parse_state(j["initial"], child(path, "initial"), sc.hamiltonian.dim()),
                 number(j["t_initial"], child(path, "t_initial")),
                 parse_state(j["final"], child(path, "final"), sc.hamiltonian.dim()),
                 number(j["t_final"], child(path, "t_final"))};
    if (!sc.grid.contains(p.t_initial)) fail(child(path, "t_initial"), "time lies outside the clock window");
    if (!sc.grid.contains(p.t_final)) fail(child(path, "t_final"), "time lies outside the clock window");
    q.params = std::move(p);
  } else if (q.type == "residual_sweep") {
    check_keys(j, path, {"type", "name", "n", "grid"}, {"n"});
    ResidualSweep p;
    const auto np = child(path, "n");
    for (std::size_t i = 0; i < array(j["n"], np).size(); ++i) {
      p.widths.push_back(number(j["n"][i], child(np, i)));
      if (!(p.widths.back() > 0)) fail(child(np, i), "width must be positive");
    }
    if (j.contains("grid")) p.grid = parse_grid(j["grid"], child(path, "grid"));
    if (!p.grid.value_or(sc.grid).contains(sc.t0)) fail(path, "t0 lies outside the sweep window");
    q.params = std::move(p);
  } else {
    fail(child(path, "type"), "unknown query type '" + q.type + "'");
  }
  return q;
}

}  // namespace detail

/// Validates a parsed document and builds every object a run needs.
inline Scenario parse_scenario(const json& doc) {
  using namespace detail;
  const std::string root = "$";
  check_keys(doc, root, {"version", "name", "grid", "envelope", "system", "initial_state", "t0", "schedule", "queries"},
             {"version", "grid", "system", "initial_state"});
  if (!doc["version"].is_number_integer() || doc["version"].get<long long>() != kFormatVersion) {
    fail(child(root, "version"), "unsupported format version (expected 1)");
  }
  Scenario sc;
  sc.name = doc.contains("name") ? text(doc["name"], child(root, "name")) : "scenario";
  sc.grid = parse_grid(doc["grid"], child(root, "grid"));
  sc.envelope = doc.contains("envelope") ? parse_envelope(doc["envelope"], child(root, "envelope"), sc.grid)
                                         : flat_envelope(sc.grid);
  SystemShape shape;
  sc.hamiltonian = parse_system(doc["system"], child(root, "system"), shape);
  sc.psi0 = parse_state(doc["initial_state"], child(root, "initial_state"), shape.dim);
  sc.t0 = doc.contains("t0") ? number(doc["t0"], child(root, "t0")) : sc.grid.time(0);
  if (!sc.grid.contains(sc.t0)) fail(child(root, "t0"), "initial time lies outside the clock window");

  std::vector<MeasurementEvent> events;
  if (doc.contains("schedule")) {
    const auto sp = child(root, "schedule");
    const auto& list = array(doc["schedule"], sp, false);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto ip = child(sp, i);
      check_keys(list[i], ip, {"time", "memory", "instrument", "ready"}, {"time", "memory", "instrument"});
      const double t = number(list[i]["time"], child(ip, "time"));
      if (!sc.grid.contains(t)) fail(child(ip, "time"), "measurement time lies outside the clock window");
      if (!(t > sc.t0)) fail(child(ip, "time"), "measurement must come after t0");
      auto instrument = parse_instrument(list[i]["instrument"], child(ip, "instrument"), shape.dim);
      const auto label = text(list[i]["memory"], child(ip, "memory"));
      std::optional<Vector> ready;
      if (list[i].contains("ready")) {
        ready = complex_vector(list[i]["ready"], child(ip, "ready"), instrument.outcomes() + 1);
      }
      auto memory = at_path(child(ip, "memory"), [&] { return MemorySpec(label, instrument.outcomes(), ready); });
      events.push_back({t, std::move(instrument), std::move(memory)});
    }
    sc.schedule = at_path(sp, [&] { return MeasurementSchedule(sc.hamiltonian, std::move(events)); });
  } else {
    sc.schedule = MeasurementSchedule(sc.hamiltonian, {});
  }

  if (doc.contains("queries")) {
    const auto qp = child(root, "queries");
    const auto& list = array(doc["queries"], qp, false);
    for (std::size_t i = 0; i < list.size(); ++i) {
      sc.queries.push_back(parse_query(sc, list[i], child(qp, i), i));
      for (std::size_t k = 0; k + 1 < sc.queries.size(); ++k) {
        if (sc.queries[k].name == sc.queries.back().name) fail(child(qp, i), "duplicate query name");
      }
    }
  }
  return sc;
}

/// Parses JSON text (comments allowed) and validates it.
inline Scenario parse_scenario_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed scenario file: ") + e.what());
  }
  return parse_scenario(doc);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario_text(read_file(path)); }

// ---------------------------------------------------------------- running

struct RunOptions {
  std::size_t substeps = kDefaultSubsteps;
  double tolerance_scale = 1.0;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct QueryResult {
  std::string name;
  std::string type;
  Table table;
  std::optional<double> oracle_deviation;
  std::vector<std::string> warnings;
};

namespace detail {

/// Column labels and assignments over every outcome combination, latest memory first.
inline std::vector<std::pair<std::string, Assignments>> outcome_columns(const Scenario& sc,
                                                                      std::vector<std::string> memories) {
  std::sort(memories.begin(), memories.end(), [](const std::string& a, const std::string& b) {
    return histsim::detail::label_rank(a) < histsim::detail::label_rank(b);
  });
  std::vector<std::pair<std::string, Assignments>> cols{{"", {}}};
  for (const auto& m : memories) {
    const std::size_t outcomes = sc.schedule.event_for(m).memory.outcomes();
    std::vector<std::pair<std::string, Assignments>> next;
    for (const auto& [label, asg] : cols) {
      for (std::size_t a = 0; a < outcomes; ++a) {
        auto extended = asg;
        extended[m] = a;
        const auto term = m + "=" + std::to_string(a);
        next.emplace_back(label.empty() ? term : term + "," + label, std::move(extended));
      }
    }
    cols = std::move(next);
  }
  for (auto& c : cols) c.first = "P(" + c.first + ")";
  return cols;
}

inline void check_finite(const Table& t, const std::string& name) {
  for (const auto& row : t.rows) {
    for (double v : row) {
      if (!std::isfinite(v)) throw NumericalGuardError("query " + name + " produced a non-finite value");
    }
  }
}

}  // namespace detail

inline std::vector<QueryResult> run_queries(const Scenario& sc, const RunOptions& opt) {
  const auto& grid = sc.grid;
  std::optional<HistoryState> measured;
  auto history = [&]() -> const HistoryState& {
    if (!measured) measured = build_measured_history(sc.schedule, sc.psi0, sc.t0, sc.envelope, opt.substeps);
    return *measured;
  };
  auto oracle = [&](const Assignments& a, double t) {
    return oracle_chain_prob(sc.schedule, sc.psi0, a, t, sc.t0, opt.substeps);
  };

  std::vector<QueryResult> out;
  for (const auto& q : sc.queries) {
    QueryResult r{q.name, q.type, {}, std::nullopt, {}};
    double dev = 0.0;
    if (const auto* p = std::get_if<ProbVsTime>(&q.params)) {
      const auto cols = detail::outcome_columns(sc, p->memories);
      r.table.header = {"t"};
      for (const auto& c : cols) r.table.header.push_back(c.first);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (std::abs(sc.envelope[k]) < kEnvelopeFloor) continue;
        const double t = grid.time(k);
        std::vector<double> row{t};
        for (const auto& c : cols) {
          row.push_back(joint_prob(history(), c.second, t));
          dev = std::max(dev, std::abs(row.back() - oracle(c.second, t)));
        }
        r.table.rows.push_back(std::move(row));
      }
      r.oracle_deviation = dev;
    } else if (const auto* p = std::get_if<Joint>(&q.params)) {
      const auto cols = detail::outcome_columns(sc, p->memories);
      const double t = grid.time(grid.snap(p->t));
      r.table.header = {"t"};
      std::vector<double> row{t};
      for (const auto& c : cols) {
        r.table.header.push_back(c.first);
        row.push_back(joint_prob(history(), c.second, t));
        dev = std::max(dev, std::abs(row.back() - oracle(c.second, t)));
      }
      r.table.rows.push_back(std::move(row));
      r.oracle_deviation = dev;
    } else if (const auto* p = std::get_if<Conditional>(&q.params)) {
      const double t2 = grid.time(grid.snap(p->later.t));
      const double t1 = grid.time(grid.snap(p->earlier.t));
      const auto b = p->later.memory + "=" + std::to_string(p->later.outcome);
      const auto a = p->earlier.memory + "=" + std::to_string(p->earlier.outcome);
      r.table.header = {"t", "t_earlier", "P(" + b + "|" + a + ")"};
      const double value = conditional_prob(history(), p->later, p->earlier);
      const double den = oracle({{p->earlier.memory, p->earlier.outcome}}, t1);
      const double num =
          oracle({{p->earlier.memory, p->earlier.outcome}, {p->later.memory, p->later.outcome}}, t2);
      r.table.rows.push_back({t2, t1, value});
      r.oracle_deviation = std::abs(value - num / den);
    } else if (const auto* p = std::get_if<Propagator>(&q.params)) {
      const double tf = grid.time(grid.snap(p->t_final));
      const cplx g = propagator(sc.hamiltonian, p->initial, p->t_initial, p->final_state, p->t_final, grid,
                                opt.substeps);
      const cplx want = p->final_state.amplitudes().dot(
          propagator_matrix(sc.hamiltonian, tf, p->t_initial, opt.substeps) * p->initial.amplitudes());
      r.table.header = {"t", "re", "im"};
      r.table.rows.push_back({tf, g.real(), g.imag()});
      r.oracle_deviation = std::abs(g - want);
    } else if (const auto* p = std::get_if<ResidualSweep>(&q.params)) {
      const ClockGrid g = p->grid.value_or(grid);
      r.table.header = {"n", "residual", "regularized_residual"};
      for (double n : p->widths) {
        const auto env = gaussian_envelope(g, n);
        if (env.warning()) r.warnings.push_back(*env.warning());
        const auto h = build_history(sc.hamiltonian, sc.psi0, sc.t0, env, opt.substeps);
        const auto res = constraint_residual(h, sc.hamiltonian);
        r.table.rows.push_back({n, res.plain, res.regularized});
      }
    }
    detail::check_finite(r.table, q.name);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------- verify and spectrum

/// Grid index of the first usable time at or after the last measurement.
inline std::size_t fault_index(const Scenario& sc) {
  const double last = sc.schedule.events().back().time;
  for (std::size_t k = 0; k < sc.grid.size(); ++k) {
    if (event_has_occurred(sc.grid.time(k), last) && std::abs(sc.envelope[k]) >= kEnvelopeFloor) return k;
  }
  throw ValidationError("no usable grid time after the last measurement to inject a fault into");
}

inline TwoMeasurementReport verify_scenario(const Scenario& sc, const RunOptions& opt, bool inject_fault = false) {
  if (sc.schedule.events().size() < 2) throw ValidationError("verification needs at least two measurement events");
  auto psi = build_measured_history(sc.schedule, sc.psi0, sc.t0, sc.envelope, opt.substeps);
  if (inject_fault) psi = corrupt_branch(psi, fault_index(sc), sc.schedule.events().front().memory.label());
  return check_two_measurement_identities(psi, sc.schedule, sc.psi0, opt.substeps);
}

struct SpectrumReport {
  Eigen::VectorXd eigenvalues;
  std::optional<Eigen::VectorXd> predicted;  // omega_j + E_n for constant H
  Eigen::VectorXd shifted;                   // spectrum of H - shift I
  double shift = 0.0;
  double prediction_deviation = 0.0;
  double shift_deviation = 0.0;
  std::size_t null_count = 0;
};

inline SpectrumReport spectrum_scenario(const Scenario& sc, double shift) {
  SpectrumReport rep;
  rep.shift = shift;
  rep.eigenvalues = constraint_spectrum(sc.hamiltonian, sc.grid);
  rep.shifted = constraint_spectrum(sc.hamiltonian.shifted(-shift), sc.grid);
  rep.shift_deviation = (rep.shifted - (rep.eigenvalues.array() - shift).matrix()).cwiseAbs().maxCoeff();
  if (sc.hamiltonian.is_constant()) {
    const Eigen::VectorXd e =
        Eigen::SelfAdjointEigenSolver<Matrix>(sc.hamiltonian.matrix_at(sc.t0), Eigen::EigenvaluesOnly).eigenvalues();
    std::vector<double> p;
    for (long j = sc.grid.min_frequency_index(); j <= sc.grid.max_frequency_index(); ++j) {
      for (Eigen::Index n = 0; n < e.size(); ++n) p.push_back(sc.grid.frequency(j) + e(n));
    }
    std::sort(p.begin(), p.end());
    rep.predicted = Eigen::Map<Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
    rep.prediction_deviation = (*rep.predicted - rep.eigenvalues).cwiseAbs().maxCoeff();
  }
  for (Eigen::Index i = 0; i < rep.eigenvalues.size(); ++i) {
    if (std::abs(rep.eigenvalues(i)) <= kSpectrumTol) ++rep.null_count;
  }
  return rep;
}

// ---------------------------------------------------------------- output

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
    out += '\n';
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
}

/// 64-bit FNV-1a, enough to tie a manifest to the exact input bytes.
inline std::string fingerprint(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Manifest fields shared by every verb.
inline ordered_json manifest_header(const Scenario& sc, const RunOptions& opt, const std::string& command,
                                    const std::filesystem::path& scenario_path, std::string_view scenario_bytes) {
  ordered_json m;
  m["version"] = kFormatVersion;
  m["command"] = command;
  m["scenario"] = {{"name", sc.name}, {"file", scenario_path.filename().string()},
                   {"fnv1a64", fingerprint(scenario_bytes)}};
  m["grid"] = {{"N", sc.grid.size()}, {"t_min", sc.grid.t_min()}, {"t_max", sc.grid.t_max()},
               {"dt", sc.grid.dt()}};
  const bool flat = sc.envelope.kind() == Envelope::Kind::kFlat;
  m["envelope"] = {{"kind", flat ? "flat" : "gaussian"}};
  if (!flat) m["envelope"]["n"] = sc.envelope.width();
  m["t0"] = sc.t0;
  m["substeps_per_unit_time"] = opt.substeps;
  m["tolerances"] = {{"hermitian", kHermitianTol},
                     {"unitary", kUnitaryTol},
                     {"kraus", kKrausTol},
                     {"conditioning", kEnvelopeFloor},
                     {"tolerance_scale", opt.tolerance_scale},
                     {"oracle", kOracleTol * opt.tolerance_scale},
                     {"verify", kVerifyTol * opt.tolerance_scale},
                     {"spectrum", kSpectrumTol * opt.tolerance_scale}};
  m["warnings"] = ordered_json::array();
  if (sc.envelope.warning()) m["warnings"].push_back(*sc.envelope.warning());
  return m;
}

}  // namespace histsim::scenario
