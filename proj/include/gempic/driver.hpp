#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gempic/integrators.hpp"

namespace gempic {

// Everything a batch run needs. Lengths follow the dimensionless Weibel setup.
struct RunConfig {
  int degree = 3;
  Index3 cells{8, 8, 8};
  bool pec = true;

  MapFamily family = MapFamily::Cartesian;
  MapParams map_params = default_map_params();

  Scenario scenario = Scenario::Kz;
  FieldInit field_init = FieldInit::B2;
  double beta = 1e-3;
  double wavenumber = 1.25;
  double thermal_velocity = 0.01414213562373095;
  double anisotropy = 3.4641016151377544;

  std::size_t particles = 64000;
  std::uint64_t seed = 1;
  double charge = -1.0;
  double mass = 1.0;
  ParticleBoundary boundary = ParticleBoundary::Periodic;

  Integrator integrator = Integrator::HS;
  Composition composition = Composition::Strang;
  double dt = 0.1;
  double t_end = 50.0;

  PreconditionerMode preconditioner = PreconditionerMode::Lumped;
  double mass_tol = 1e-14;
  int mass_maxit = 2000;
  double picard_tol = 1e-12;
  int picard_maxit = 50;
  double schur_tol = 1e-13;
  int schur_maxit = 2000;
  double poisson_tol = 1e-14;

  std::string output_dir = ".";
  int fields_every = 0;
  int snapshot_every = 0;
  int workers = 1;

  static MapParams default_map_params();
  ModelConfig model() const;
  StepConfig step() const;
  WeibelParams weibel() const;
  // Number of steps: floor(t_end / dt) with a relative guard against rounding.
  long steps() const;
};

// Throws ConfigError naming the offending key.
void validate(const RunConfig& cfg);

// Built-in experiment presets.
std::vector<std::string> preset_names();
RunConfig preset(std::string_view name);
std::string preset_description(std::string_view name);

// Flat "key = value" text; '#' starts a comment. A "preset" key selects the
// base configuration, all other keys override it. Without a preset the key
// time.dt is required. Unknown keys and malformed values raise ConfigError
// with the line number. A non-empty preset_override replaces the preset key.
RunConfig parse_config(std::string_view text, const std::string& origin = "<string>",
                       std::string_view preset_override = {});
RunConfig load_config(const std::string& path, std::string_view preset_override = {});
// Applies one "key = value" override on top of cfg.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
// Keys understood by apply_setting, in documentation order.
std::vector<std::string> config_keys();
std::string format_config(const RunConfig& cfg);

struct DiagnosticsRow {
  long step = 0;
  double t = 0.0;
  double kinetic = 0.0;
  double electric = 0.0;
  double magnetic = 0.0;
  std::array<double, 3> magnetic_component{};
  double total = 0.0;
  double gauss = 0.0;     // ||G^T M1 e - Mb0 e + rho||_inf
  double div_b = 0.0;     // ||D b||_inf
  double poynting = 0.0;  // e^T Mb1 b
  std::size_t particles = 0;
  int mass_iterations = 0;
  int picard_iterations = 0;
  int schur_iterations = 0;
  std::size_t crossings = 0;
};

DiagnosticsRow compute_diagnostics(const Discretization& d, const SimState& s,
                                   const StepStats& stats = {}, int workers = 1);
std::string diagnostics_header();
std::string format_row(const DiagnosticsRow& r);

// Initial state of the Weibel run described by cfg.
SimState initial_state(const Discretization& d, const RunConfig& cfg);

struct RunResult {
  std::vector<DiagnosticsRow> rows;
  std::string error;  // empty on success
  bool numerical_failure = false;
};

// Samples, steps to t_end and writes diagnostics.csv (plus optional field
// dumps and particle snapshots) into cfg.output_dir. An error during the
// time loop flushes a diagnostics row of the current state and is reported in
// the result. on_row is called after every row when given.
RunResult run(const RunConfig& cfg,
              const std::function<void(const DiagnosticsRow&)>& on_row = nullptr);

// Coordinate-format dump of e and b.
void write_fields(const std::string& path, const SimState& s, long step);

// Small invariant checks of the discretization for the check command.
struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};
std::vector<CheckResult> self_check();

}  // namespace gempic
