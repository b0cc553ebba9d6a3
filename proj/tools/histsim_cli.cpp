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

// histsim: command-line front end for scenario files.
//
//   histsim run <scenario>            one CSV per query plus manifest.json
//   histsim verify <scenario>         two-measurement identity report
//   histsim sweep-residual <scenario> constraint residual vs envelope width
//   histsim spectrum <scenario>       constraint-operator eigenvalues
//
// Exit codes: 0 ok, 1 validation error, 2 verification failure,
// 3 numerical guard tripped.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "histsim/scenario.hpp"

namespace fs = std::filesystem;
using namespace histsim;
using namespace histsim::scenario;

namespace {

enum Exit { kOk = 0, kValidation = 1, kVerification = 2, kNumerical = 3 };

struct Common {
  std::string scenario;
  std::string out_dir = "histsim-out";
  double tolerance_scale = 1.0;
  std::size_t substeps = kDefaultSubsteps;
};

struct Loaded {
  Scenario sc;
  std::string bytes;
  RunOptions opt;
  fs::path out;
};

Loaded load(const Common& c) {
  if (!(c.tolerance_scale > 0)) throw ValidationError("--tolerance-scale must be positive");
  if (c.substeps < 1) throw ValidationError("--substeps must be at least 1");
  Loaded l;
  l.bytes = read_file(c.scenario);
  l.sc = parse_scenario_text(l.bytes);
  l.opt = {c.substeps, c.tolerance_scale};
  l.out = c.out_dir;
  std::error_code ec;
  fs::create_directories(l.out, ec);
  if (ec) throw ValidationError("cannot create output directory " + l.out.string() + ": " + ec.message());
  return l;
}

void write_manifest(const Loaded& l, const ordered_json& m) { write_file(l.out / "manifest.json", m.dump(2) + "\n"); }

int cmd_run(const Common& c) {
  const auto l = load(c);
  const auto results = run_queries(l.sc, l.opt);
  auto m = manifest_header(l.sc, l.opt, "run", c.scenario, l.bytes);
  const double tol = kOracleTol * l.opt.tolerance_scale;
  bool ok = true;
  m["queries"] = ordered_json::array();
  for (const auto& r : results) {
    const auto file = r.name + ".csv";
    write_file(l.out / file, to_csv(r.table));
    ordered_json q{{"name", r.name}, {"type", r.type}, {"file", file}, {"rows", r.table.rows.size()},
                   {"columns", r.table.header}};
    if (r.oracle_deviation) {
      const bool pass = *r.oracle_deviation <= tol;
      ok = ok && pass;
      q["oracle_deviation"] = *r.oracle_deviation;
      q["within_tolerance"] = pass;
      std::printf("%-24s %-15s oracle deviation %.3e %s\n", r.name.c_str(), r.type.c_str(), *r.oracle_deviation,
                  pass ? "ok" : "FAIL");
    } else {
      q["oracle_deviation"] = nullptr;
      std::printf("%-24s %-15s %zu rows\n", r.name.c_str(), r.type.c_str(), r.table.rows.size());
    }
    for (const auto& w : r.warnings) m["warnings"].push_back(r.name + ": " + w);
    m["queries"].push_back(std::move(q));
  }
  m["status"] = ok ? "ok" : "oracle deviation above tolerance";
  write_manifest(l, m);
  return ok ? kOk : kVerification;
}

int cmd_verify(const Common& c, bool inject_fault) {
  const auto l = load(c);
  const auto rep = verify_scenario(l.sc, l.opt, inject_fault);
  const double tol = kVerifyTol * l.opt.tolerance_scale;
  const std::pair<const char*, double> rows[] = {{"joint_vs_oracle", rep.joint},
                                                 {"marginal_earlier", rep.marginal_a},
                                                 {"marginal_later", rep.marginal_b},
                                                 {"two_time_joint", rep.two_time},
                                                 {"conditional", rep.conditional}};
  auto m = manifest_header(l.sc, l.opt, "verify", c.scenario, l.bytes);
  m["fault_injected"] = inject_fault;
  m["comparisons"] = rep.comparisons;
  m["identities"] = ordered_json::array();
  bool ok = true;
  for (const auto& [name, dev] : rows) {
    const bool pass = dev <= tol;
    ok = ok && pass;
    std::printf("%-18s max deviation %.3e %s\n", name, dev, pass ? "PASS" : "FAIL");
    m["identities"].push_back({{"name", name}, {"max_deviation", dev}, {"pass", pass}});
  }
  std::printf("%s (%zu comparisons, threshold %.1e)\n", ok ? "verify: PASS" : "verify: FAIL", rep.comparisons, tol);
  m["status"] = ok ? "pass" : "fail";
  write_manifest(l, m);
  return ok ? kOk : kVerification;
}

int cmd_sweep(const Common& c, const std::vector<double>& widths) {
  const auto l = load(c);
  Scenario sc = l.sc;
  sc.queries = {{"residual_sweep", "residual_sweep", ResidualSweep{widths, std::nullopt}}};
  for (double n : widths) {
    if (!(n > 0)) throw ValidationError("--n values must be positive");
  }
  const auto r = run_queries(sc, l.opt).front();
  write_file(l.out / "residual_sweep.csv", to_csv(r.table));
  bool decreasing = true;
  for (std::size_t i = 0; i < r.table.rows.size(); ++i) {
    std::printf("n=%-8g residual %.6e regularized %.6e\n", r.table.rows[i][0], r.table.rows[i][1], r.table.rows[i][2]);
    if (i > 0 && !(r.table.rows[i][1] < r.table.rows[i - 1][1])) decreasing = false;
  }
  auto m = manifest_header(sc, l.opt, "sweep-residual", c.scenario, l.bytes);
  m["file"] = "residual_sweep.csv";
  m["widths"] = widths;
  m["strictly_decreasing"] = decreasing;
  for (const auto& w : r.warnings) m["warnings"].push_back(w);
  write_manifest(l, m);
  return kOk;
}

int cmd_spectrum(const Common& c, double shift) {
  const auto l = load(c);
  const auto rep = spectrum_scenario(l.sc, shift);
  Table t;
  t.header = {"index", "eigenvalue", "shifted"};
  if (rep.predicted) t.header.push_back("predicted");
  for (Eigen::Index i = 0; i < rep.eigenvalues.size(); ++i) {
    std::vector<double> row{static_cast<double>(i), rep.eigenvalues(i), rep.shifted(i)};
    if (rep.predicted) row.push_back((*rep.predicted)(i));
    t.rows.push_back(std::move(row));
  }
  write_file(l.out / "spectrum.csv", to_csv(t));
  const double tol = kSpectrumTol * l.opt.tolerance_scale;
  bool ok = rep.shift_deviation <= tol;
  std::printf("eigenvalues %lld, null %zu\n", static_cast<long long>(rep.eigenvalues.size()), rep.null_count);
  std::printf("shift by %g: max deviation %.3e %s\n", shift, rep.shift_deviation,
              rep.shift_deviation <= tol ? "PASS" : "FAIL");
  auto m = manifest_header(l.sc, l.opt, "spectrum", c.scenario, l.bytes);
  m["file"] = "spectrum.csv";
  m["null_eigenvalues"] = rep.null_count;
  m["shift"] = {{"value", shift}, {"max_deviation", rep.shift_deviation}, {"pass", rep.shift_deviation <= tol}};
  if (rep.predicted) {
    const bool pass = rep.prediction_deviation <= tol;
    ok = ok && pass;
    std::printf("omega_j + E_n prediction: max deviation %.3e %s\n", rep.prediction_deviation, pass ? "PASS" : "FAIL");
    m["prediction"] = {{"max_deviation", rep.prediction_deviation}, {"pass", pass}};
  } else {
    m["prediction"] = nullptr;
  }
  m["status"] = ok ? "pass" : "fail";
  write_manifest(l, m);
  return ok ? kOk : kVerification;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("scenario", c.scenario, "Scenario file (JSON, version 1)")->required();
  sub->add_option("--out-dir", c.out_dir, "Directory for CSV tables and manifest.json")->capture_default_str();
  sub->add_option("--tolerance-scale", c.tolerance_scale, "Multiplier applied to every pass/fail threshold")
      ->capture_default_str();
  sub->add_option("--substeps", c.substeps, "Midpoint steps per unit time for time-dependent evolution")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional-probability quantum dynamics on a discrete clock"};
  app.require_subcommand(1);
  Common common;
  bool inject_fault = false;
  std::vector<double> widths{1.0, 4.0, 16.0};
  double shift = 1.0;

  auto* run = app.add_subcommand("run", "Run every query and write CSV tables");
  add_common(run, common);
  auto* verify = app.add_subcommand("verify", "Check the two-measurement identities against the oracle");
  add_common(verify, common);
  verify->add_flag("--inject-fault", inject_fault, "Corrupt one history branch before checking (self-test)");
  auto* sweep = app.add_subcommand("sweep-residual", "Constraint residual for a range of Gaussian widths");
  add_common(sweep, common);
  sweep->add_option("--n", widths, "Gaussian widths n of exp(-t^2/n)")->capture_default_str();
  auto* spectrum = app.add_subcommand("spectrum", "Constraint-operator eigenvalues and shift check");
  add_common(spectrum, common);
  spectrum->add_option("--shift", shift, "Energy shift for the rigid-shift check")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*run) return cmd_run(common);
    if (*verify) return cmd_verify(common, inject_fault);
    if (*sweep) return cmd_sweep(common, widths);
    return cmd_spectrum(common, shift);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalGuardError& e) {
    std::cerr << "numerical guard: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
}
