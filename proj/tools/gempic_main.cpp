#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "gempic/driver.hpp"
#include "gempic/errors.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct RunOptions {
  std::string config;
  std::string out;
  std::string preset;
  std::vector<std::string> settings;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int workers = 0;
  bool quiet = false;
  bool print_config = false;
};

gempic::RunConfig build_config(const RunOptions& o) {
  gempic::RunConfig cfg;
  if (!o.config.empty()) {
    cfg = gempic::load_config(o.config, o.preset);
  } else if (!o.preset.empty()) {
    cfg = gempic::preset(o.preset);
  } else {
    throw gempic::ConfigError("run needs --config or --preset");
  }
  for (const std::string& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw gempic::ConfigError("--set expects key=value, got '" + s + "'");
    }
    gempic::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (!o.out.empty()) {
    cfg.output_dir = o.out;
  }
  if (o.has_seed) {
    cfg.seed = o.seed;
  }
  if (o.workers > 0) {
    cfg.workers = o.workers;
  }
  gempic::validate(cfg);
  return cfg;
}

int cmd_run(const RunOptions& o) {
  gempic::RunConfig cfg;
  try {
    cfg = build_config(o);
  } catch (const gempic::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }
  if (o.print_config) {
    std::fputs(gempic::format_config(cfg).c_str(), stdout);
    return 0;
  }
  const long steps = cfg.steps();
  auto progress = [&](const gempic::DiagnosticsRow& r) {
    if (o.quiet) {
      return;
    }
    std::fprintf(stderr, "step %ld/%ld t=%.4g H=%.10e magnetic=%.4e gauss=%.2e divB=%.2e\n", r.step,
                 steps, r.t, r.total, r.magnetic, r.gauss, r.div_b);
  };
  gempic::RunResult result;
  try {
    result = gempic::run(cfg, progress);
  } catch (const gempic::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const gempic::Error& e) {
    std::fprintf(stderr, "numerical failure during setup: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  if (result.numerical_failure) {
    std::fprintf(stderr, "numerical failure: %s\n", result.error.c_str());
    return kExitNumerical;
  }
  if (!o.quiet) {
    std::fprintf(stderr, "wrote %s/diagnostics.csv (%zu rows)\n", cfg.output_dir.c_str(),
                 result.rows.size());
  }
  return 0;
}

int cmd_presets() {
  for (const std::string& name : gempic::preset_names()) {
    std::printf("%-40s %s\n", name.c_str(), gempic::preset_description(name).c_str());
  }
  return 0;
}

int cmd_check() {
  int failed = 0;
  for (const gempic::CheckResult& r : gempic::self_check()) {
    std::printf("%s  %s  [%s]\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    failed += r.passed ? 0 : 1;
  }
  std::printf("%d check(s) failed\n", failed);
  return failed == 0 ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-preserving particle-in-cell simulator on mapped 3D domains"};
  app.require_subcommand(1);

  RunOptions o;
  CLI::App* run = app.add_subcommand("run", "Run a simulation and write diagnostics.csv");
  run->add_option("--config", o.config, "Configuration file (key = value lines)");
  run->add_option("--out", o.out, "Output directory (overrides output.dir)");
  run->add_option("--preset", o.preset, "Built-in preset used as the base configuration");
  run->add_option("--seed", o.seed, "Sampling seed (overrides particles.seed)")
      ->each([&](const std::string&) { o.has_seed = true; });
  run->add_option("--workers", o.workers, "Particle worker threads (overrides run.workers)")
      ->check(CLI::Range(1, 1024));
  run->add_option("--set", o.settings, "Override one key, e.g. --set time.t_end=5");
  run->add_flag("--quiet", o.quiet, "Suppress progress output");
  run->add_flag("--print-config", o.print_config, "Print the resolved configuration and exit");

  app.add_subcommand("presets", "List built-in presets");
  app.add_subcommand("check", "Run the invariant self-test suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (app.got_subcommand("presets")) {
    return cmd_presets();
  }
  if (app.got_subcommand("check")) {
    try {
      return cmd_check();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "check aborted: %s\n", e.what());
      return kExitNumerical;
    }
  }
  return cmd_run(o);
}
