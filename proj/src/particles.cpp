#include "gempic/particles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "gempic/errors.hpp"
#include "gempic/parallel.hpp"

namespace gempic {

void ParticleGroup::resize(std::size_t n) {
  xi.resize(n, Vec3::Zero());
  v.resize(n, Vec3::Zero());
  weight.resize(n, 0.0);
}

double ParticleGroup::kinetic_energy() const {
  double sum = 0.0;
  for (std::size_t p = 0; p < size(); ++p) {
    sum += weight[p] * v[p].squaredNorm();
  }
  return 0.5 * mass * sum;
}

std::string_view to_string(ParticleBoundary mode) {
  return mode == ParticleBoundary::Reflect ? "reflect" : "periodic";
}

ParticleBoundary particle_boundary_from_string(std::string_view name) {
  if (name == "reflect") {
    return ParticleBoundary::Reflect;
  }
  if (name == "periodic") {
    return ParticleBoundary::Periodic;
  }
  throw ParameterError("unknown particle boundary '" + std::string(name) +
                       "' (expected reflect or periodic)");
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::Kx:
      return "kx";
    case Scenario::Ky:
      return "ky";
    case Scenario::Kz:
      return "kz";
  }
  return "?";
}

std::string_view to_string(FieldInit f) {
  switch (f) {
    case FieldInit::B1:
      return "B1";
    case FieldInit::B2:
      return "B2";
    case FieldInit::B3:
      return "B3";
  }
  return "?";
}

Scenario scenario_from_string(std::string_view name) {
  if (name == "kx") {
    return Scenario::Kx;
  }
  if (name == "ky") {
    return Scenario::Ky;
  }
  if (name == "kz") {
    return Scenario::Kz;
  }
  throw ParameterError("unknown scenario '" + std::string(name) + "' (expected kx, ky or kz)");
}

FieldInit field_init_from_string(std::string_view name) {
  if (name == "B1") {
    return FieldInit::B1;
  }
  if (name == "B2") {
    return FieldInit::B2;
  }
  if (name == "B3") {
    return FieldInit::B3;
  }
  throw ParameterError("unknown field init '" + std::string(name) + "' (expected B1, B2 or B3)");
}

void check_field_init(Scenario s, FieldInit f) {
  const bool ok = (s == Scenario::Kx && (f == FieldInit::B2 || f == FieldInit::B3)) ||
                  (s == Scenario::Ky && (f == FieldInit::B1 || f == FieldInit::B3)) ||
                  (s == Scenario::Kz && (f == FieldInit::B1 || f == FieldInit::B2));
  if (!ok) {
    throw ParameterError("field init " + std::string(to_string(f)) +
                         " is not available for scenario " + std::string(to_string(s)));
  }
}

double wrap_unit(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

Vec3 to_domain(const Vec3& xi) {
  return Vec3(std::clamp(xi[0], 0.0, 1.0), wrap_unit(xi[1]), wrap_unit(xi[2]));
}

ParticleFrame particle_frame(const DeRhamSequence& seq, const Mapping& map, const Vec3& xi) {
  const Vec3 x = to_domain(xi);
  return ParticleFrame{seq.point_basis(x), map.metric(x)};
}

Vec3 eval_vector_form(const DeRhamSequence& seq, int k, const ParticleFrame& f,
                      const double* full) {
  return Vec3(seq.eval_component_full(k, 0, f.basis, full),
              seq.eval_component_full(k, 1, f.basis, full),
              seq.eval_component_full(k, 2, f.basis, full));
}

// ---------------------------------------------------------------------------
// Boundary handling

namespace {

void reflect_velocity(const Mapping& map, const Vec3& point, Vec3& v) {
  const Vec3 n = map.metric(to_domain(point)).inv_transpose.col(0);
  v -= (2.0 * n.dot(v) / n.squaredNorm()) * n;
}

}  // namespace

std::vector<Crossing> apply_boundary(std::span<Vec3> xi, std::span<Vec3> v,
                                     std::span<const Vec3> start, const Mapping& map,
                                     ParticleBoundary mode) {
  if (v.size() != xi.size() || (!start.empty() && start.size() != xi.size())) {
    throw ShapeError("apply_boundary: position, velocity and start arrays differ in length");
  }
  std::vector<Crossing> out;
  for (std::size_t p = 0; p < xi.size(); ++p) {
    Vec3& x = xi[p];
    if (!x.allFinite() || !v[p].allFinite()) {
      throw NumericalError("apply_boundary: non-finite state of particle " + std::to_string(p));
    }
    if (!start.empty()) {
      for (int d = 1; d < 3; ++d) {
        if (std::abs(x[d] - start[p][d]) >= 0.5) {
          throw StepTooLargeError("particle " + std::to_string(p) +
                                  " moved half a period or more along xi" + std::to_string(d + 1));
        }
      }
    }
    int side = -1;
    if (x[0] < 0.0) {
      side = 0;
    } else if (x[0] > 1.0) {
      side = 1;
    }
    if (side >= 0) {
      const double excursion = side == 0 ? -x[0] : x[0] - 1.0;
      if (excursion >= 1.0) {
        throw StepTooLargeError("particle " + std::to_string(p) +
                                " crossed the whole domain in xi1 in one substep");
      }
      Crossing c;
      c.particle = p;
      c.side = side;
      if (!start.empty()) {
        const Vec3& s = start[p];
        c.fraction = std::clamp((side - s[0]) / (x[0] - s[0]), 0.0, 1.0);
        c.point = s + c.fraction * (x - s);
      } else {
        c.fraction = 1.0;
        c.point = x;
      }
      c.point[0] = side;
      if (mode == ParticleBoundary::Reflect) {
        x[0] = side == 0 ? -x[0] : 2.0 - x[0];
        reflect_velocity(map, c.point, v[p]);
      } else {
        x[0] += side == 0 ? 1.0 : -1.0;
        x[0] = std::clamp(x[0], 0.0, 1.0);
      }
      out.push_back(c);
    }
    x[1] = wrap_unit(x[1]);
    x[2] = wrap_unit(x[2]);
  }
  return out;
}

std::vector<Crossing> apply_boundary(ParticleGroup& group, const Mapping& map,
                                     ParticleBoundary mode) {
  return apply_boundary(group.xi, group.v, {}, map, mode);
}

// ---------------------------------------------------------------------------
// Deposition

namespace {

void check_group(const ParticleGroup& g) {
  if (g.v.size() != g.size() || g.weight.size() != g.size()) {
    throw ShapeError("particle group arrays differ in length");
  }
}

// Sums per-worker buffers in worker order.
Vector merge(std::vector<Vector>& buffers) {
  Vector total = std::move(buffers[0]);
  for (std::size_t w = 1; w < buffers.size(); ++w) {
    total += buffers[w];
  }
  return total;
}

// Adds q w times the line integral of Lambda1 along the straight logical
// path a -> b, split at the cell faces crossed in every direction.
void integrate_segment(const DeRhamSequence& seq, const QuadratureRule& rule, const Vec3& a,
                       const Vec3& b, double qw, double* full) {
  const Vec3 delta = b - a;
  if (delta.isZero(0.0)) {
    return;
  }
  std::vector<double> breaks{0.0, 1.0};
  for (int d = 0; d < 3; ++d) {
    if (delta[d] == 0.0) {
      continue;
    }
    const double n = seq.cells()[d];
    const double lo = std::min(a[d], b[d]) * n;
    const double hi = std::max(a[d], b[d]) * n;
    for (double k = std::floor(lo) + 1.0; k < hi; k += 1.0) {
      const double s = (k / n - a[d]) / delta[d];
      if (s > 0.0 && s < 1.0) {
        breaks.push_back(s);
      }
    }
  }
  std::sort(breaks.begin(), breaks.end());
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double s0 = breaks[i];
    const double len = breaks[i + 1] - s0;
    if (len <= 0.0) {
      continue;
    }
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const Vec3 x = a + (s0 + len * rule.nodes[q]) * delta;
      const PointBasis pb = seq.point_basis(to_domain(x));
      const double w = qw * len * rule.weights[q];
      for (int c = 0; c < 3; ++c) {
        if (delta[c] != 0.0) {
          seq.scatter_component_full(1, c, pb, w * delta[c], full);
        }
      }
    }
  }
}

// Nearest periodic image of `end` to `ref` in xi2 and xi3.
Vec3 unwrap_towards(const Vec3& end, const Vec3& ref) {
  Vec3 out = end;
  for (int d = 1; d < 3; ++d) {
    out[d] += std::nearbyint(ref[d] - end[d]);
  }
  return out;
}

}  // namespace

int line_quadrature_points(int degree) { return (3 * degree + 1) / 2; }

Vector deposit_charge(const ParticleGroup& group, const DeRhamSequence& seq, int workers) {
  check_group(group);
  const std::size_t n = seq.full_dim(0);
  std::vector<Vector> buffers(std::max(1, workers), Vector::Zero(n));
  parallel_chunks(group.size(), workers, [&](int w, std::size_t b, std::size_t e) {
    double* full = buffers[w].data();
    for (std::size_t p = b; p < e; ++p) {
      const PointBasis pb = seq.point_basis(to_domain(group.xi[p]));
      seq.scatter_component_full(0, 0, pb, group.charge * group.weight[p], full);
    }
  });
  return seq.restrict_to_active(0, merge(buffers));
}

Vector deposit_current_line(const ParticleGroup& group, std::span<const Vec3> start,
                            std::span<const Crossing> crossings, ParticleBoundary mode,
                            const DeRhamSequence& seq, int workers) {
  check_group(group);
  if (start.size() != group.size()) {
    throw ShapeError("deposit_current_line: start positions do not match the group");
  }
  // crossing index per particle, -1 if none
  std::vector<int> record(group.size(), -1);
  for (std::size_t r = 0; r < crossings.size(); ++r) {
    const Crossing& c = crossings[r];
    if (c.particle >= group.size()) {
      throw ConsistencyError("crossing record refers to particle " + std::to_string(c.particle) +
                             " of " + std::to_string(group.size()));
    }
    if (record[c.particle] >= 0) {
      throw ConsistencyError("more than one crossing recorded for particle " +
                             std::to_string(c.particle));
    }
    if ((c.side != 0 && c.side != 1) || c.point[0] != c.side || !(c.fraction >= 0.0) ||
        !(c.fraction <= 1.0) || !c.point.allFinite()) {
      throw ConsistencyError("malformed crossing record for particle " +
                             std::to_string(c.particle));
    }
    const double s1 = start[c.particle][0];
    if (s1 < 0.0 || s1 > 1.0) {
      throw ConsistencyError("crossing record for particle " + std::to_string(c.particle) +
                             " whose start lies outside the domain");
    }
    record[c.particle] = static_cast<int>(r);
  }
  const QuadratureRule rule = gauss_legendre(line_quadrature_points(seq.degree()));
  const std::size_t n = seq.full_dim(1);
  std::vector<Vector> buffers(std::max(1, workers), Vector::Zero(n));
  parallel_chunks(group.size(), workers, [&](int w, std::size_t b, std::size_t e) {
    double* full = buffers[w].data();
    for (std::size_t p = b; p < e; ++p) {
      const double qw = group.charge * group.weight[p];
      const Vec3& a = start[p];
      if (record[p] < 0) {
        integrate_segment(seq, rule, a, unwrap_towards(group.xi[p], a), qw, full);
        continue;
      }
      const Crossing& c = crossings[record[p]];
      integrate_segment(seq, rule, a, c.point, qw, full);
      Vec3 resume = c.point;
      if (mode == ParticleBoundary::Periodic) {
        resume[0] = 1.0 - c.side;
      }
      integrate_segment(seq, rule, resume, unwrap_towards(group.xi[p], resume), qw, full);
    }
  });
  return seq.restrict_to_active(1, merge(buffers));
}

// ---------------------------------------------------------------------------
// Sampling and initial fields

namespace {

// Independent generator per (seed, particle).
std::mt19937_64 particle_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> key{};
  seq.generate(key.begin(), key.end());
  return std::mt19937_64((static_cast<std::uint64_t>(key[0]) << 32) | key[1]);
}

// Uniform on (0, 1].
double uniform_open(std::mt19937_64& g) {
  return (static_cast<double>(g() >> 11) + 1.0) * 0x1.0p-53;
}

std::array<double, 4> normals4(std::mt19937_64& g) {
  std::array<double, 4> out{};
  for (int k = 0; k < 2; ++k) {
    const double r = std::sqrt(-2.0 * std::log(uniform_open(g)));
    const double t = 2.0 * std::numbers::pi * uniform_open(g);
    out[2 * k] = r * std::cos(t);
    out[2 * k + 1] = r * std::sin(t);
  }
  return out;
}

int wave_axis(Scenario s) { return s == Scenario::Kx ? 0 : (s == Scenario::Ky ? 1 : 2); }

// Vector potential A with curl A equal to the seeded B2 or B3 mode.
Vec3 weibel_potential(const WeibelParams& params, const Vec3& x) {
  const double k = params.wavenumber;
  const double s = params.beta / k * std::sin(k * x[wave_axis(params.scenario)]);
  switch (params.scenario) {
    case Scenario::Kx:
      return params.field_init == FieldInit::B2 ? Vec3(0.0, 0.0, -s) : Vec3(0.0, s, 0.0);
    case Scenario::Ky:
      return Vec3(-s, 0.0, 0.0);
    case Scenario::Kz:
      return Vec3(s, 0.0, 0.0);
  }
  return Vec3::Zero();
}

}  // namespace

ParticleGroup sample_weibel_particles(const Mapping& map, const WeibelParams& params,
                                      int workers) {
  if (params.count < 1) {
    throw ParameterError("sample_weibel: particle count must be at least 1");
  }
  if (!(params.thermal_velocity > 0.0) || !(params.anisotropy > 0.0) || !(params.mass > 0.0)) {
    throw ParameterError("sample_weibel: thermal velocity, anisotropy and mass must be positive");
  }
  ParticleGroup g;
  g.charge = params.charge;
  g.mass = params.mass;
  g.resize(params.count);
  const double omega = map.volume() / static_cast<double>(params.count);
  std::fill(g.weight.begin(), g.weight.end(), omega);
  Vec3 vt = Vec3::Constant(params.thermal_velocity * params.anisotropy);
  vt[wave_axis(params.scenario)] = params.thermal_velocity;
  const double jmax = map.max_abs_det();
  parallel_chunks(params.count, workers, [&](int, std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      std::mt19937_64 rng = particle_rng(params.seed, p);
      Vec3 x;
      for (int tries = 0;; ++tries) {
        if (tries == 100000) {
          throw NumericalError("sample_weibel: rejection sampling does not accept");
        }
        for (int d = 0; d < 3; ++d) {
          x[d] = 1.0 - uniform_open(rng);  // [0, 1)
        }
        if (uniform_open(rng) * jmax <= std::abs(map.det(x))) {
          break;
        }
      }
      const auto z = normals4(rng);
      g.xi[p] = x;
      g.v[p] = Vec3(vt[0] * z[0], vt[1] * z[1], vt[2] * z[2]);
    }
  });
  return g;
}

Vec3 weibel_field(const WeibelParams& params, const MapParams& map_params, const Vec3& x) {
  const double k = params.wavenumber;
  const double c = params.beta * std::cos(k * x[wave_axis(params.scenario)]);
  switch (params.field_init) {
    case FieldInit::B1:
      return Vec3(c * std::sin(std::numbers::pi * x[0] / map_params.Lx), 0.0, 0.0);
    case FieldInit::B2:
      return Vec3(0.0, c, 0.0);
    case FieldInit::B3:
      return Vec3(0.0, 0.0, c);
  }
  return Vec3::Zero();
}

Vector initial_magnetic_field(const DeRhamSequence& seq, const Mapping& map,
                              const MassSolver& m1, const MassSolver& m2,
                              const WeibelParams& params) {
  check_field_init(params.scenario, params.field_init);
  if (params.field_init == FieldInit::B1) {
    const Vector rhs = assemble_load_vector(seq, map, 2, [&](const Vec3& x) {
      return weibel_field(params, map.params(), x);
    });
    Vector b = Vector::Zero(seq.dim(2));
    const SolveReport r = m2.solve(rhs, b);
    if (!r.converged) {
      throw NumericalError("initial magnetic field: M2 projection did not converge");
    }
    return b;
  }
  const Vector rhs = assemble_load_vector(seq, map, 1, [&](const Vec3& x) {
    return weibel_potential(params, x);
  });
  Vector a = Vector::Zero(seq.dim(1));
  const SolveReport r = m1.solve(rhs, a);
  if (!r.converged) {
    throw NumericalError("initial magnetic field: M1 projection did not converge");
  }
  return seq.curl(a);
}

Vector background_charge(const DeRhamSequence& seq, const Mapping& map, double density_charge) {
  return -density_charge * assemble_load_scalar(seq, map, 0, [](const Vec3&) { return 1.0; });
}

PoissonResult solve_poisson(const DeRhamSequence& seq, const MassOperator& m1, const Vector& rho,
                            double tol, int maxit) {
  if (static_cast<std::size_t>(rho.size()) != seq.dim(0)) {
    throw ShapeError("solve_poisson: charge vector has the wrong length");
  }
  const LinearOperator op = [&](const Vector& x, Vector& y) {
    y = seq.grad_transpose(m1 * seq.grad(x));
  };
  Vector phi = Vector::Zero(rho.size());
  PoissonResult out;
  out.report = cg(op, rho, phi, tol, maxit);
  out.e = -seq.grad(phi);
  return out;
}

WeibelInit sample_weibel(const DeRhamSequence& seq, const Mapping& map, const MassSolver& m1,
                         const MassSolver& m2, const WeibelParams& params, int workers) {
  check_field_init(params.scenario, params.field_init);
  WeibelInit out;
  out.group = sample_weibel_particles(map, params, workers);
  out.background = background_charge(seq, map, params.charge);
  const Vector rho = deposit_charge(out.group, seq, workers) + out.background;
  PoissonResult pr = solve_poisson(seq, m1.matrix(), rho, params.tolerance);
  out.e = std::move(pr.e);
  out.poisson = pr.report;
  out.b = initial_magnetic_field(seq, map, m1, m2, params);
  return out;
}

// ---------------------------------------------------------------------------
// Field coupling

ParticleFieldCoupling::ParticleFieldCoupling(const DeRhamSequence& seq, const Mapping& map,
                                             ParticleGroup& group, int workers)
    : seq_(seq), group_(group), workers_(std::max(1, workers)) {
  check_group(group);
  frames_.resize(group.size());
  parallel_chunks(group.size(), workers_, [&](int, std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      frames_[p] = particle_frame(seq, map, group.xi[p]);
    }
  });
}

void ParticleFieldCoupling::apply_mass(const Vector& x, Vector& y) const {
  const Vector xf = seq_.embed(1, x);
  const std::size_t n = seq_.full_dim(1);
  std::vector<Vector> buffers(workers_, Vector::Zero(n));
  const double s = group_.charge * group_.charge / group_.mass;
  parallel_chunks(group_.size(), workers_, [&](int w, std::size_t b, std::size_t e) {
    double* full = buffers[w].data();
    for (std::size_t p = b; p < e; ++p) {
      const ParticleFrame& f = frames_[p];
      const Vec3 u = f.metric.metric_inv * eval_vector_form(seq_, 1, f, xf.data());
      const double wp = s * group_.weight[p];
      for (int c = 0; c < 3; ++c) {
        seq_.scatter_component_full(1, c, f.basis, wp * u[c], full);
      }
    }
  });
  y = seq_.restrict_to_active(1, merge(buffers));
}

Vector ParticleFieldCoupling::current() const {
  const std::size_t n = seq_.full_dim(1);
  std::vector<Vector> buffers(workers_, Vector::Zero(n));
  parallel_chunks(group_.size(), workers_, [&](int w, std::size_t b, std::size_t e) {
    double* full = buffers[w].data();
    for (std::size_t p = b; p < e; ++p) {
      const ParticleFrame& f = frames_[p];
      const Vec3 u = f.metric.inv_transpose.transpose() * group_.v[p];
      const double wp = group_.charge * group_.weight[p];
      for (int c = 0; c < 3; ++c) {
        seq_.scatter_component_full(1, c, f.basis, wp * u[c], full);
      }
    }
  });
  return seq_.restrict_to_active(1, merge(buffers));
}

void ParticleFieldCoupling::kick(const Vector& e, double scale) {
  const Vector ef = seq_.embed(1, e);
  const double s = scale * group_.charge / group_.mass;
  parallel_chunks(group_.size(), workers_, [&](int, std::size_t b, std::size_t end) {
    for (std::size_t p = b; p < end; ++p) {
      const ParticleFrame& f = frames_[p];
      group_.v[p] += s * (f.metric.inv_transpose * eval_vector_form(seq_, 1, f, ef.data()));
    }
  });
}

// ---------------------------------------------------------------------------
// Snapshots

void write_snapshot(const std::string& path, const ParticleGroup& group, std::uint64_t seed,
                    double time) {
  check_group(group);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open snapshot file " + path);
  }
  std::ostringstream head;
  head.precision(17);
  head << "gempic-particles 1\n"
       << "count " << group.size() << "\n"
       << "charge " << group.charge << "\n"
       << "mass " << group.mass << "\n"
       << "seed " << seed << "\n"
       << "time " << time << "\n"
       << "end\n";
  out << head.str();
  for (std::size_t p = 0; p < group.size(); ++p) {
    const std::array<double, 7> rec{group.xi[p][0], group.xi[p][1], group.xi[p][2],
                                    group.v[p][0],  group.v[p][1],  group.v[p][2],
                                    group.weight[p]};
    out.write(reinterpret_cast<const char*>(rec.data()), sizeof(rec));
  }
  if (!out) {
    throw Error("failed writing snapshot file " + path);
  }
}

ParticleGroup read_snapshot(const std::string& path, SnapshotHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open snapshot file " + path);
  }
  SnapshotHeader h;
  std::string line;
  std::getline(in, line);
  if (line != "gempic-particles 1") {
    throw Error("not a particle snapshot: " + path);
  }
  while (std::getline(in, line) && line != "end") {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "count") {
      ls >> h.count;
    } else if (key == "charge") {
      ls >> h.charge;
    } else if (key == "mass") {
      ls >> h.mass;
    } else if (key == "seed") {
      ls >> h.seed;
    } else if (key == "time") {
      ls >> h.time;
    }
  }
  ParticleGroup g;
  g.charge = h.charge;
  g.mass = h.mass;
  g.resize(h.count);
  for (std::size_t p = 0; p < h.count; ++p) {
    std::array<double, 7> rec{};
    in.read(reinterpret_cast<char*>(rec.data()), sizeof(rec));
    if (!in) {
      throw Error("truncated snapshot file " + path);
    }
    g.xi[p] = Vec3(rec[0], rec[1], rec[2]);
    g.v[p] = Vec3(rec[3], rec[4], rec[5]);
    g.weight[p] = rec[6];
  }
  if (header != nullptr) {
    *header = h;
  }
  return g;
}

}  // namespace gempic
