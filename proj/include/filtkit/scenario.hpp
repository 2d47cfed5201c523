#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "filtkit/kf_bilinear.hpp"
#include "filtkit/kf_cd.hpp"
#include "filtkit/kf_cc.hpp"
#include "filtkit/models.hpp"

namespace filtkit::cli {

// Scenario text is malformed (unreadable file or syntax error); `line` is the
// 1-based line of the first offending character when known.
struct ParseError : std::runtime_error {
  ParseError(int line_, const std::string& msg)
      : std::runtime_error("parse error at line " + std::to_string(line_) + ": " + msg),
        line(line_) {}
  int line;
};

// Scenario parsed but does not describe a runnable problem; one entry per
// offending field, each prefixed with its field path.
struct ValidationError : std::runtime_error {
  explicit ValidationError(std::vector<std::string> issues_);
  std::vector<std::string> issues;
};

enum class FilterKind { Cd, Cc, Bilinear };

struct FilterSelection {
  FilterKind kind = FilterKind::Cd;
  bool use_vec_form = false;
  bool joseph_update = true;
  std::optional<double> ode_substep;
  kf_bilinear::CovarianceForm covariance_form = kf_bilinear::CovarianceForm::AsPrinted;
};

struct VerifyToggles {
  bool theorem1 = true;
  bool theorem2 = true;
  bool appendix = true;
};

struct Scenario {
  std::string name = "scenario";
  std::variant<LinearStateModel, BilinearStateModel> model;
  std::variant<DiscreteMeasurementModel, ContinuousMeasurementModel> measurement;
  GaussianBelief initial_belief;
  Vector truth_x0;
  double horizon = 1.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  FilterSelection filter;
  VerifyToggles verify;

  std::string canonical_text;  // effective scenario with defaults applied
  std::string hash;            // FNV-1a 64 of canonical_text, hex

  const LinearStateModel* linear() const { return std::get_if<LinearStateModel>(&model); }
  const BilinearStateModel* bilinear() const { return std::get_if<BilinearStateModel>(&model); }
  const DiscreteMeasurementModel* discrete() const {
    return std::get_if<DiscreteMeasurementModel>(&measurement);
  }
  const ContinuousMeasurementModel* continuous() const {
    return std::get_if<ContinuousMeasurementModel>(&measurement);
  }
};

// Command-line overrides applied before validation and canonicalization.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<FilterKind> filter;
  std::optional<kf_bilinear::CovarianceForm> covariance_form;
};

// Read and validate a scenario document. Defaults: seed 0, dt 1e-3, belief
// mean 0 / cov I, truth_x0 = belief mean, filter kind implied by the
// measurement type. Throws ParseError or ValidationError.
Scenario load_scenario(const std::string& path, const Overrides& overrides = {});

// Commands; each writes its artifacts under out_dir and returns an exit code.
int cmd_simulate(const Scenario& s, const std::string& out_dir);
int cmd_filter(const Scenario& s, const std::string& out_dir, int mc_runs = 1);
int cmd_stationary(const Scenario& s, const std::string& out_dir);
int cmd_verify(const Scenario& s, const std::string& out_dir, const std::string& which = "all");

// Full argv-driven entry point (argv[0] excluded). Exit codes: 0 success,
// 1 parse/validation failure, 2 numerical failure.
int run_main(const std::vector<std::string>& args);

}  // namespace filtkit::cli
