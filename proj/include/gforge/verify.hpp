// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance gates over the whole pipeline: exact identities,
// fundamental solutions, the construction, remainder support, operator
// application, decay-exponent reproduction, mode bounds, and the pipeline
// self-tests.  The same runner backs the command-line `verify` subcommand
// and the standalone acceptance binary, so both always agree on what
// "passing" means.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gforge {

// One measured comparison inside a gate.  `limit` is the threshold the
// measurement was held to; exact checks count mismatches against limit 0.
struct GateCheck {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double limit = 0.0;
  std::string note;
};

struct GateResult {
  std::string name;
  bool pass = true;
  double seconds = 0.0;         // wall time; reporting only, never serialized
  double budget_seconds = 0.0;  // 0 = no runtime budget attached
  std::vector<GateCheck> checks;

  void add(const std::string& check, bool ok, double measured, double limit,
           const std::string& note = "");
  bool within_budget() const { return budget_seconds <= 0.0 || seconds <= budget_seconds; }
};

// Headline numbers of the featured family fit, for machine summaries.
struct VerifySummary {
  double s_hat = 0.0;
  double s_target = 0.0;
  double c_hat = 0.0;
  double c0 = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::vector<GateResult> gates;
  bool all_pass = false;    // numeric gates only; budgets are reported apart
  bool budgets_ok = true;   // every budgeted gate finished inside its budget
  VerifySummary summary;
  double total_seconds = 0.0;
};

struct VerifyOptions {
  // Family whose fit populates the summary block; must be one of the three
  // exercised by the exponent gate: (0,1), (0,2), (1,2).
  int feature_n = 0;
  int feature_m = 1;
  int ell_max = 6;  // construction depth of the gated families

  double weak_tol = 1e-6;     // weak residuals, fundamental solutions and rows
  double support_tol = 1e-6;  // remainder coefficients past their window
  double apply_tol = 1e-4;    // operator application mismatch
  double fit_s_rtol = 0.05;   // relative accuracy demanded of the index
  double fit_c_rtol = 0.10;   // and of the rate

  std::ostream* log = nullptr;  // per-gate progress lines when set
};

VerifyReport run_acceptance(const VerifyOptions& opt = {});

}  // namespace gforge
