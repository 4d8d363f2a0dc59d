#include "gempic/driver.hpp"

#include <Eigen/Cholesky>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "gempic/errors.hpp"

namespace gempic {

namespace {

constexpr double kWeibelLength = 2.0 * std::numbers::pi / 1.25;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < -2147483647LL || x > 2147483647LL) {
    throw ConfigError(key + ": integer out of range");
  }
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "yes" || v == "1") {
    return true;
  }
  if (v == "false" || v == "off" || v == "no" || v == "0") {
    return false;
  }
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

Index3 to_cells(const std::string& key, const std::string& v) {
  std::string s = v;
  for (char& c : s) {
    if (c == ',' || c == 'x') {
      c = ' ';
    }
  }
  std::istringstream in(s);
  std::vector<std::string> parts;
  for (std::string t; in >> t;) {
    parts.push_back(t);
  }
  if (parts.size() == 1) {
    const int n = to_int(key, parts[0]);
    return {n, n, n};
  }
  if (parts.size() != 3) {
    throw ConfigError(key + ": expected one or three cell counts, got '" + v + "'");
  }
  return {to_int(key, parts[0]), to_int(key, parts[1]), to_int(key, parts[2])};
}

// Converts library parameter errors of enum parsing into config errors.
template <class F>
auto as_config(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ParameterError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"grid.degree", [](RunConfig& c, auto& k, auto& v) { c.degree = to_int(k, v); }},
      {"grid.cells", [](RunConfig& c, auto& k, auto& v) { c.cells = to_cells(k, v); }},
      {"grid.pec", [](RunConfig& c, auto& k, auto& v) { c.pec = to_bool(k, v); }},
      {"map.family",
       [](RunConfig& c, auto& k, auto& v) {
         c.family = as_config(k, [&] { return map_family_from_string(v); });
       }},
      {"map.Lx", [](RunConfig& c, auto& k, auto& v) { c.map_params.Lx = to_double(k, v); }},
      {"map.Ly", [](RunConfig& c, auto& k, auto& v) { c.map_params.Ly = to_double(k, v); }},
      {"map.Lz", [](RunConfig& c, auto& k, auto& v) { c.map_params.Lz = to_double(k, v); }},
      {"map.Lp", [](RunConfig& c, auto& k, auto& v) { c.map_params.Lp = to_double(k, v); }},
      {"map.epsilon",
       [](RunConfig& c, auto& k, auto& v) { c.map_params.epsilon = to_double(k, v); }},
      {"map.r0", [](RunConfig& c, auto& k, auto& v) { c.map_params.r0 = to_double(k, v); }},
      {"map.Lr", [](RunConfig& c, auto& k, auto& v) { c.map_params.Lr = to_double(k, v); }},
      {"weibel.scenario",
       [](RunConfig& c, auto& k, auto& v) {
         c.scenario = as_config(k, [&] { return scenario_from_string(v); });
       }},
      {"weibel.field_init",
       [](RunConfig& c, auto& k, auto& v) {
         c.field_init = as_config(k, [&] { return field_init_from_string(v); });
       }},
      {"weibel.beta", [](RunConfig& c, auto& k, auto& v) { c.beta = to_double(k, v); }},
      {"weibel.wavenumber",
       [](RunConfig& c, auto& k, auto& v) { c.wavenumber = to_double(k, v); }},
      {"weibel.thermal_velocity",
       [](RunConfig& c, auto& k, auto& v) { c.thermal_velocity = to_double(k, v); }},
      {"weibel.anisotropy",
       [](RunConfig& c, auto& k, auto& v) { c.anisotropy = to_double(k, v); }},
      {"particles.count",
       [](RunConfig& c, auto& k, auto& v) {
         const long long n = to_integer(k, v);
         if (n < 0) {
           throw ConfigError(k + ": must not be negative");
         }
         c.particles = static_cast<std::size_t>(n);
       }},
      {"particles.seed",
       [](RunConfig& c, auto& k, auto& v) {
         std::uint64_t s = 0;
         const auto r = std::from_chars(v.data(), v.data() + v.size(), s);
         if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
           throw ConfigError(k + ": expected an unsigned integer, got '" + v + "'");
         }
         c.seed = s;
       }},
      {"particles.charge", [](RunConfig& c, auto& k, auto& v) { c.charge = to_double(k, v); }},
      {"particles.mass", [](RunConfig& c, auto& k, auto& v) { c.mass = to_double(k, v); }},
      {"particles.boundary",
       [](RunConfig& c, auto& k, auto& v) {
         c.boundary = as_config(k, [&] { return particle_boundary_from_string(v); });
       }},
      {"time.integrator",
       [](RunConfig& c, auto& k, auto& v) {
         c.integrator = as_config(k, [&] { return integrator_from_string(v); });
       }},
      {"time.composition",
       [](RunConfig& c, auto& k, auto& v) {
         c.composition = as_config(k, [&] { return composition_from_string(v); });
       }},
      {"time.dt", [](RunConfig& c, auto& k, auto& v) { c.dt = to_double(k, v); }},
      {"time.t_end", [](RunConfig& c, auto& k, auto& v) { c.t_end = to_double(k, v); }},
      {"solver.preconditioner",
       [](RunConfig& c, auto& k, auto& v) {
         c.preconditioner = as_config(k, [&] { return preconditioner_mode_from_string(v); });
       }},
      {"solver.mass_tol", [](RunConfig& c, auto& k, auto& v) { c.mass_tol = to_double(k, v); }},
      {"solver.mass_maxit", [](RunConfig& c, auto& k, auto& v) { c.mass_maxit = to_int(k, v); }},
      {"solver.picard_tol",
       [](RunConfig& c, auto& k, auto& v) { c.picard_tol = to_double(k, v); }},
      {"solver.picard_maxit",
       [](RunConfig& c, auto& k, auto& v) { c.picard_maxit = to_int(k, v); }},
      {"solver.schur_tol", [](RunConfig& c, auto& k, auto& v) { c.schur_tol = to_double(k, v); }},
      {"solver.schur_maxit",
       [](RunConfig& c, auto& k, auto& v) { c.schur_maxit = to_int(k, v); }},
      {"solver.poisson_tol",
       [](RunConfig& c, auto& k, auto& v) { c.poisson_tol = to_double(k, v); }},
      {"output.dir", [](RunConfig& c, auto&, auto& v) { c.output_dir = v; }},
      {"output.fields_every",
       [](RunConfig& c, auto& k, auto& v) { c.fields_every = to_int(k, v); }},
      {"output.snapshot_every",
       [](RunConfig& c, auto& k, auto& v) { c.snapshot_every = to_int(k, v); }},
      {"run.workers", [](RunConfig& c, auto& k, auto& v) { c.workers = to_int(k, v); }},
  };
  return table;
}

struct PresetDef {
  std::string name;
  std::string description;
  std::function<void(RunConfig&)> apply;
};

void radial(RunConfig& c, MapFamily f) {
  c.family = f;
  c.cells = {16, 16, 8};
  c.boundary = ParticleBoundary::Reflect;
  c.scenario = Scenario::Kz;
  c.field_init = FieldInit::B1;
  c.dt = 0.01;
  c.t_end = 5.0;
}

const std::vector<PresetDef>& presets() {
  static const std::vector<PresetDef> table = [] {
    std::vector<PresetDef> t;
    const std::pair<Scenario, FieldInit> cart[] = {
        {Scenario::Kx, FieldInit::B2}, {Scenario::Kx, FieldInit::B3},
        {Scenario::Ky, FieldInit::B1}, {Scenario::Ky, FieldInit::B3},
        {Scenario::Kz, FieldInit::B1}, {Scenario::Kz, FieldInit::B2}};
    for (auto [s, f] : cart) {
      for (auto mode : {ParticleBoundary::Periodic, ParticleBoundary::Reflect}) {
        std::string name = "weibel-cartesian-" + std::string(to_string(s)) + "-" +
                           std::string(to_string(f));
        if (mode == ParticleBoundary::Reflect) {
          name += "-reflect";
        }
        t.push_back({name,
                     "Cartesian 8^3, p=3, HS, dt=0.1, 500 steps, " +
                         std::string(to_string(mode)) + " particles",
                     [s, f, mode](RunConfig& c) {
                       c.scenario = s;
                       c.field_init = f;
                       c.boundary = mode;
                     }});
      }
    }
    for (auto mode : {ParticleBoundary::Periodic, ParticleBoundary::Reflect}) {
      const std::string suffix = mode == ParticleBoundary::Reflect ? "-reflect" : "";
      t.push_back({"weibel-distorted-kz-B1" + suffix,
                   "distorted square grid, epsilon=0.05, Lp=2pi, HS, dt=0.1, " +
                       std::string(to_string(mode)) + " particles",
                   [mode](RunConfig& c) {
                     c.family = MapFamily::Distorted;
                     c.map_params.epsilon = 0.05;
                     c.field_init = FieldInit::B1;
                     c.boundary = mode;
                   }});
      t.push_back({"weibel-deformed-kz-B1" + suffix,
                   "domain-deforming grid, epsilon=0.05, Lp=pi/2, HS, dt=0.1, " +
                       std::string(to_string(mode)) + " particles",
                   [mode](RunConfig& c) {
                     c.family = MapFamily::Distorted;
                     c.map_params.epsilon = 0.05;
                     c.map_params.Lp = 0.5 * std::numbers::pi;
                     c.field_init = FieldInit::B1;
                     c.boundary = mode;
                   }});
    }
    for (MapFamily f : {MapFamily::Cylindrical, MapFamily::Elliptical}) {
      const std::string fam(to_string(f));
      t.push_back({"weibel-" + fam + "-kz-B1",
                   fam + " 16x16x8, r0=0.01, reflecting particles, HS, dt=0.01, 500 steps",
                   [f](RunConfig& c) { radial(c, f); }});
      t.push_back({"weibel-" + fam + "-kz-B1-disgrade",
                   fam + " 16x16x8, r0=0.01, reflecting particles, DisGradE, dt=0.1, 500 steps",
                   [f](RunConfig& c) {
                     radial(c, f);
                     c.integrator = Integrator::DisGradE;
                     c.dt = 0.1;
                     c.t_end = 50.0;
                   }});
    }
    return t;
  }();
  return table;
}

const PresetDef& find_preset(std::string_view name) {
  for (const auto& p : presets()) {
    if (p.name == name) {
      return p;
    }
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (see 'gempic presets')");
}

}  // namespace

MapParams RunConfig::default_map_params() {
  MapParams p;
  p.Lx = p.Ly = p.Lz = kWeibelLength;
  p.Lp = 2.0 * std::numbers::pi;
  p.epsilon = 0.0;
  p.r0 = 0.01;
  p.Lr = kWeibelLength - 0.01;
  return p;
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.degree = degree;
  m.cells = cells;
  m.pec = pec;
  m.family = family;
  m.map_params = map_params;
  m.preconditioner = preconditioner;
  m.mass_tol = mass_tol;
  m.mass_maxit = mass_maxit;
  return m;
}

StepConfig RunConfig::step() const {
  StepConfig s;
  s.dt = dt;
  s.picard_tol = picard_tol;
  s.picard_maxit = picard_maxit;
  s.schur_tol = schur_tol;
  s.schur_maxit = schur_maxit;
  s.boundary = boundary;
  s.composition = composition;
  s.workers = workers;
  return s;
}

WeibelParams RunConfig::weibel() const {
  WeibelParams w;
  w.scenario = scenario;
  w.field_init = field_init;
  w.count = particles;
  w.seed = seed;
  w.beta = beta;
  w.wavenumber = wavenumber;
  w.thermal_velocity = thermal_velocity;
  w.anisotropy = anisotropy;
  w.charge = charge;
  w.mass = mass;
  w.tolerance = poisson_tol;
  return w;
}

long RunConfig::steps() const { return static_cast<long>(std::floor(t_end / dt * (1.0 + 1e-12))); }

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) {
      throw ConfigError(key + ": " + what);
    }
  };
  require(c.degree >= 1 && c.degree <= kMaxDegree, "grid.degree", "must be between 1 and 7");
  for (int d = 0; d < 3; ++d) {
    require(c.cells[d] >= c.degree + 1, "grid.cells", "needs at least degree+1 cells per direction");
  }
  const MapParams& m = c.map_params;
  require(m.Lx > 0 && m.Ly > 0 && m.Lz > 0, "map.Lx", "domain lengths must be positive");
  if (c.family == MapFamily::Cylindrical || c.family == MapFamily::Elliptical) {
    require(m.r0 > 0.0, "map.r0", "radial maps need r0 > 0 (the pole is excluded)");
    require(m.Lr > 0.0, "map.Lr", "must be positive");
  }
  require(c.beta >= 0.0 && std::isfinite(c.beta), "weibel.beta", "must be finite and >= 0");
  require(c.wavenumber > 0.0, "weibel.wavenumber", "must be positive");
  require(c.thermal_velocity > 0.0, "weibel.thermal_velocity", "must be positive");
  require(c.anisotropy > 0.0, "weibel.anisotropy", "must be positive");
  try {
    check_field_init(c.scenario, c.field_init);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("weibel.field_init: ") + e.what());
  }
  require(c.particles >= 1, "particles.count", "must be at least 1");
  require(c.mass > 0.0, "particles.mass", "must be positive");
  require(std::isfinite(c.charge), "particles.charge", "must be finite");
  require(c.dt > 0.0 && std::isfinite(c.dt), "time.dt", "must be positive");
  require(c.t_end >= 0.0 && std::isfinite(c.t_end), "time.t_end", "must be finite and >= 0");
  require(c.t_end == 0.0 || c.t_end >= c.dt * (1.0 - 1e-12), "time.t_end",
          "must be 0 or at least time.dt");
  require(c.mass_tol > 0.0, "solver.mass_tol", "must be positive");
  require(c.picard_tol > 0.0, "solver.picard_tol", "must be positive");
  require(c.schur_tol > 0.0, "solver.schur_tol", "must be positive");
  require(c.poisson_tol > 0.0, "solver.poisson_tol", "must be positive");
  require(c.mass_maxit >= 1, "solver.mass_maxit", "must be positive");
  require(c.picard_maxit >= 1, "solver.picard_maxit", "must be positive");
  require(c.schur_maxit >= 1, "solver.schur_maxit", "must be positive");
  require(c.fields_every >= 0, "output.fields_every", "must be >= 0");
  require(c.snapshot_every >= 0, "output.snapshot_every", "must be >= 0");
  require(c.workers >= 1 && c.workers <= 1024, "run.workers", "must be between 1 and 1024");
  try {
    Mapping(c.family, c.map_params);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("map: ") + e.what());
  }
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : presets()) {
    out.push_back(p.name);
  }
  return out;
}

RunConfig preset(std::string_view name) {
  RunConfig c;
  find_preset(name).apply(c);
  return c;
}

std::string preset_description(std::string_view name) { return find_preset(name).description; }

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [k, set] : setters()) {
    if (k == key) {
      set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out{"preset"};
  for (const auto& [k, set] : setters()) {
    out.push_back(k);
  }
  return out;
}

RunConfig parse_config(std::string_view text, const std::string& origin,
                       std::string_view preset_override) {
  struct Entry {
    int line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::string preset_name;
  std::istringstream in{std::string(text)};
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    const std::string t = trim(line);
    if (t.empty()) {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    Entry e{lineno, trim(t.substr(0, eq)), trim(t.substr(eq + 1))};
    if (e.key.empty() || e.value.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key or value");
    }
    for (const auto& prev : entries) {
      if (prev.key == e.key) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + e.key +
                          "'");
      }
    }
    if (e.key == "preset") {
      preset_name = e.value;
    }
    entries.push_back(std::move(e));
  }
  if (!preset_override.empty()) {
    preset_name = preset_override;
  }
  RunConfig cfg;
  bool has_dt = false;
  if (!preset_name.empty()) {
    cfg = preset(preset_name);
    has_dt = true;
  }
  for (const auto& e : entries) {
    if (e.key == "preset") {
      continue;
    }
    try {
      apply_setting(cfg, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError(origin + ":" + std::to_string(e.line) + ": " + err.what());
    }
    has_dt = has_dt || e.key == "time.dt";
  }
  if (!has_dt) {
    throw ConfigError("time.dt: required (or select a preset)");
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path, std::string_view preset_override) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path, preset_override);
}

std::string format_config(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  const MapParams& m = c.map_params;
  o << "grid.degree = " << c.degree << "\n"
    << "grid.cells = " << c.cells[0] << " " << c.cells[1] << " " << c.cells[2] << "\n"
    << "grid.pec = " << (c.pec ? "true" : "false") << "\n"
    << "map.family = " << to_string(c.family) << "\n"
    << "map.Lx = " << m.Lx << "\nmap.Ly = " << m.Ly << "\nmap.Lz = " << m.Lz << "\n"
    << "map.Lp = " << m.Lp << "\nmap.epsilon = " << m.epsilon << "\n"
    << "map.r0 = " << m.r0 << "\nmap.Lr = " << m.Lr << "\n"
    << "weibel.scenario = " << to_string(c.scenario) << "\n"
    << "weibel.field_init = " << to_string(c.field_init) << "\n"
    << "weibel.beta = " << c.beta << "\nweibel.wavenumber = " << c.wavenumber << "\n"
    << "weibel.thermal_velocity = " << c.thermal_velocity << "\n"
    << "weibel.anisotropy = " << c.anisotropy << "\n"
    << "particles.count = " << c.particles << "\nparticles.seed = " << c.seed << "\n"
    << "particles.charge = " << c.charge << "\nparticles.mass = " << c.mass << "\n"
    << "particles.boundary = " << to_string(c.boundary) << "\n"
    << "time.integrator = " << to_string(c.integrator) << "\n"
    << "time.composition = " << to_string(c.composition) << "\n"
    << "time.dt = " << c.dt << "\ntime.t_end = " << c.t_end << "\n"
    << "solver.preconditioner = " << to_string(c.preconditioner) << "\n"
    << "solver.mass_tol = " << c.mass_tol << "\nsolver.mass_maxit = " << c.mass_maxit << "\n"
    << "solver.picard_tol = " << c.picard_tol << "\nsolver.picard_maxit = " << c.picard_maxit
    << "\n"
    << "solver.schur_tol = " << c.schur_tol << "\nsolver.schur_maxit = " << c.schur_maxit << "\n"
    << "solver.poisson_tol = " << c.poisson_tol << "\n"
    << "output.dir = " << c.output_dir << "\n"
    << "output.fields_every = " << c.fields_every << "\n"
    << "output.snapshot_every = " << c.snapshot_every << "\n"
    << "run.workers = " << c.workers << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Diagnostics

DiagnosticsRow compute_diagnostics(const Discretization& d, const SimState& s,
                                   const StepStats& stats, int workers) {
  const DeRhamSequence& seq = d.seq();
  DiagnosticsRow r;
  r.t = s.t;
  for (const ParticleGroup& g : s.species) {
    r.kinetic += g.kinetic_energy();
    r.particles += g.size();
  }
  const Vector m1e = d.m1() * s.e;
  r.electric = 0.5 * s.e.dot(m1e);
  r.magnetic = 0.5 * s.b.dot(d.m2() * s.b);
  for (int c = 0; c < 3; ++c) {
    const ComponentSpace& cs = seq.component(2, c);
    Vector bc = Vector::Zero(s.b.size());
    bc.segment(cs.offset, cs.active_size()) = s.b.segment(cs.offset, cs.active_size());
    r.magnetic_component[c] = 0.5 * bc.dot(d.m2() * bc);
  }
  r.total = r.kinetic + r.electric + r.magnetic;
  const Vector gauss = seq.grad_transpose(m1e) - d.boundary().zero_form.multiply(s.e) +
                       total_charge(d, s, workers);
  r.gauss = gauss.lpNorm<Eigen::Infinity>();
  r.div_b = seq.div(s.b).lpNorm<Eigen::Infinity>();
  r.poynting = d.boundary().one_form.bilinear(s.e, s.b);
  r.mass_iterations = stats.mass_iterations;
  r.picard_iterations = stats.picard_iterations;
  r.schur_iterations = stats.schur_iterations;
  r.crossings = stats.crossings;
  return r;
}

std::string diagnostics_header() {
  return "step,t,kinetic,electric,magnetic,magnetic_1,magnetic_2,magnetic_3,total,"
         "gauss_residual,div_b,poynting,particles,mass_iterations,picard_iterations,"
         "schur_iterations,crossings";
}

std::string format_row(const DiagnosticsRow& r) {
  char buf[640];
  std::snprintf(buf, sizeof(buf),
                "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%d,%d,"
                "%d,%zu",
                r.step, r.t, r.kinetic, r.electric, r.magnetic, r.magnetic_component[0],
                r.magnetic_component[1], r.magnetic_component[2], r.total, r.gauss, r.div_b,
                r.poynting, r.particles, r.mass_iterations, r.picard_iterations,
                r.schur_iterations, r.crossings);
  return buf;
}

SimState initial_state(const Discretization& d, const RunConfig& cfg) {
  WeibelInit init =
      sample_weibel(d.seq(), d.map(), d.m1_solver(), d.m2_solver(), cfg.weibel(), cfg.workers);
  if (!init.poisson.converged && init.poisson.residual > 100.0 * cfg.poisson_tol) {
    throw NumericalError("initial Poisson solve did not converge (relative residual " +
                         std::to_string(init.poisson.residual) + ")");
  }
  SimState s;
  s.species.push_back(std::move(init.group));
  s.e = std::move(init.e);
  s.b = std::move(init.b);
  s.background = std::move(init.background);
  return s;
}

void write_fields(const std::string& path, const SimState& s, long step) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot open field dump " + path);
  }
  char buf[96];
  out << "# step " << step << "\n";
  std::snprintf(buf, sizeof(buf), "# t %.17g\n", s.t);
  out << buf << "# form index value\n";
  for (Eigen::Index i = 0; i < s.e.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "e %ld %.17g\n", static_cast<long>(i), s.e[i]);
    out << buf;
  }
  for (Eigen::Index i = 0; i < s.b.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "b %ld %.17g\n", static_cast<long>(i), s.b[i]);
    out << buf;
  }
}

RunResult run(const RunConfig& cfg, const std::function<void(const DiagnosticsRow&)>& on_row) {
  validate(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  std::ofstream csv(dir / "diagnostics.csv");
  if (!csv) {
    throw Error("cannot write " + (dir / "diagnostics.csv").string());
  }
  csv << diagnostics_header() << "\n";

  const Discretization d(cfg.model());
  SimState s = initial_state(d, cfg);
  const StepConfig sc = cfg.step();
  RunResult result;
  auto emit = [&](long k, const StepStats& st) {
    DiagnosticsRow row = compute_diagnostics(d, s, st, cfg.workers);
    row.step = k;
    csv << format_row(row) << "\n";
    csv.flush();
    result.rows.push_back(row);
    if (on_row) {
      on_row(row);
    }
  };
  auto dumps = [&](long k) {
    if (cfg.fields_every > 0 && k % cfg.fields_every == 0) {
      write_fields((dir / ("fields_" + std::to_string(k) + ".txt")).string(), s, k);
    }
    if (cfg.snapshot_every > 0 && k % cfg.snapshot_every == 0) {
      write_snapshot((dir / ("particles_" + std::to_string(k) + ".bin")).string(), s.species[0],
                     cfg.seed, s.t);
    }
  };
  emit(0, {});
  dumps(0);
  const long n = cfg.steps();
  for (long k = 1; k <= n; ++k) {
    try {
      const StepStats st = step(cfg.integrator, d, s, sc);
      s.t = k * cfg.dt;
      emit(k, st);
      dumps(k);
    } catch (const Error& e) {
      result.error = e.what();
      result.numerical_failure = true;
      try {
        emit(k, {});
      } catch (const Error&) {
      }
      return result;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Self check

std::vector<CheckResult> self_check() {
  std::vector<CheckResult> out;
  auto add = [&](std::string name, bool ok, std::string detail) {
    out.push_back({std::move(name), ok, std::move(detail)});
  };
  auto fmt = [](double x) {
    char b[32];
    std::snprintf(b, sizeof(b), "%.3g", x);
    return std::string(b);
  };
  std::mt19937_64 rng(12345);
  // Inputs on a 2^-20 grid keep every intermediate exactly representable.
  auto fixed = [&](std::size_t n) {
    std::uniform_int_distribution<int> u(-(1 << 20), 1 << 20);
    Vector v(n);
    for (auto& x : v) {
      x = std::ldexp(static_cast<double>(u(rng)), -20);
    }
    return v;
  };
  auto generic = [&](std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector v(n);
    for (auto& x : v) {
      x = u(rng);
    }
    return v;
  };

  for (bool pec : {false, true}) {
    const DeRhamSequence seq(3, {8, 4, 8}, pec);
    const std::string tag = pec ? " (pec)" : "";
    const Vector x = fixed(seq.dim(0));
    const Vector y = fixed(seq.dim(1));
    const double cg = seq.curl(seq.grad(x)).lpNorm<Eigen::Infinity>();
    const double dc = seq.div(seq.curl(y)).lpNorm<Eigen::Infinity>();
    add("curl grad = 0" + tag, cg == 0.0, "max " + fmt(cg));
    add("div curl = 0" + tag, dc == 0.0, "max " + fmt(dc));
    const Vector a = generic(seq.dim(1));
    const Vector b = generic(seq.dim(2));
    const double adj = std::abs(b.dot(seq.curl(a)) - a.dot(seq.curl_transpose(b)));
    add("curl transpose is the adjoint" + tag, adj <= 1e-12 * (1.0 + std::abs(b.dot(seq.curl(a)))),
        "defect " + fmt(adj));
  }

  const double l = kWeibelLength;
  const std::pair<MapFamily, MapParams> maps[] = {
      {MapFamily::Cartesian, MapParams{l, l, l}},
      {MapFamily::Distorted, MapParams{l, l, l, 2 * std::numbers::pi, 0.05}},
      {MapFamily::Cylindrical, RunConfig::default_map_params()},
      {MapFamily::Elliptical, RunConfig::default_map_params()}};
  for (const auto& [fam, params] : maps) {
    const Mapping map(fam, params);
    const DeRhamSequence seq(2, {4, 4, 4}, true);
    for (int k = 0; k <= 3; ++k) {
      const MassOperator m = assemble_mass(seq, map, k);
      const Eigen::MatrixXd dense = m.matrix.dense();
      const double asym = (dense - dense.transpose()).cwiseAbs().maxCoeff();
      const Eigen::LLT<Eigen::MatrixXd> llt(dense);
      add("M" + std::to_string(k) + " symmetric positive definite, " + std::string(to_string(fam)),
          asym == 0.0 && llt.info() == Eigen::Success, "asymmetry " + fmt(asym));
    }
    const BoundaryMatrices bm = assemble_boundary_matrices(seq, map);
    add("boundary matrices vanish with pec, " + std::string(to_string(fam)),
        bm.zero_form.max_abs() == 0.0 && bm.one_form.max_abs() == 0.0,
        "max " + fmt(std::max(bm.zero_form.max_abs(), bm.one_form.max_abs())));
  }

  {
    // The Cartesian M0 integrand is a polynomial, so a richer rule changes nothing.
    const Mapping map(MapFamily::Cartesian, MapParams{l, 0.5 * l, 2.0 * l});
    const DeRhamSequence seq(3, {5, 4, 6}, true);
    const Eigen::MatrixXd a = assemble_mass(seq, map, 0).matrix.dense();
    const Eigen::MatrixXd b = assemble_mass(seq, map, 0, 9).matrix.dense();
    const double diff = (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
    add("M0 quadrature agrees with a 9-point oracle rule", diff <= 1e-13, "rel " + fmt(diff));
  }

  {
    const Mapping map(MapFamily::Cylindrical, RunConfig::default_map_params());
    const DeRhamSequence seq(3, {8, 8, 8}, true);
    const MassOperator m1 = assemble_mass(seq, map, 1);
    const MassSolver solver(m1, seq, PreconditionerMode::Lumped, 1e-13, 500);
    const Vector rhs = generic(seq.dim(1));
    Vector x = Vector::Zero(rhs.size());
    const SolveReport r = solver.solve(rhs, x);
    const double res = (m1 * x - rhs).norm() / rhs.norm();
    add("preconditioned M1 solve, cylindrical 8^3",
        r.converged && res <= 1e-11,
        std::to_string(r.iterations) + " iterations, residual " + fmt(res));
  }

  {
    const Mapping map(MapFamily::Distorted, MapParams{l, l, l, 2 * std::numbers::pi, 0.05});
    const DeRhamSequence seq(3, {6, 5, 4}, true);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ParticleGroup g;
    g.resize(200);
    for (std::size_t p = 0; p < g.size(); ++p) {
      g.xi[p] = Vec3(u(rng), u(rng), u(rng));
      g.v[p] = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
      g.weight[p] = 1.0;
    }
    const std::vector<Vec3> start = g.xi;
    const Vector rho0 = deposit_charge(g, seq);
    for (std::size_t p = 0; p < g.size(); ++p) {
      g.xi[p] += Vec3(0.6 * (u(rng) - 0.5), 0.6 * (u(rng) - 0.5), 0.6 * (u(rng) - 0.5));
    }
    const auto rec = apply_boundary(g.xi, g.v, start, map, ParticleBoundary::Reflect);
    const Vector j = deposit_current_line(g, start, rec, ParticleBoundary::Reflect, seq);
    const double defect =
        (seq.grad_transpose(j) - (deposit_charge(g, seq) - rho0)).lpNorm<Eigen::Infinity>() /
        rho0.lpNorm<Eigen::Infinity>();
    add("split line-integral deposit conserves charge", defect <= 1e-13,
        std::to_string(rec.size()) + " crossings, rel defect " + fmt(defect));
  }
  return out;
}

}  // namespace gempic
