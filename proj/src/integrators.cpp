#include "gempic/integrators.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "gempic/errors.hpp"
#include "gempic/parallel.hpp"

namespace gempic {

Discretization::Discretization(const ModelConfig& cfg)
    : cfg_(cfg),
      seq_(cfg.degree, cfg.cells, cfg.pec),
      map_(cfg.family, cfg.map_params),
      m1_(assemble_mass(seq_, map_, 1)),
      m2_(assemble_mass(seq_, map_, 2)),
      s1_(m1_, seq_, cfg.preconditioner, cfg.mass_tol, cfg.mass_maxit),
      s2_(m2_, seq_, cfg.preconditioner, cfg.mass_tol, cfg.mass_maxit),
      boundary_(assemble_boundary_matrices(seq_, map_)) {}

std::string_view to_string(Integrator i) {
  switch (i) {
    case Integrator::HS:
      return "hs";
    case Integrator::CEF:
      return "cef";
    case Integrator::DisGradE:
      return "disgrade";
  }
  return "?";
}

Integrator integrator_from_string(std::string_view name) {
  if (name == "hs") {
    return Integrator::HS;
  }
  if (name == "cef") {
    return Integrator::CEF;
  }
  if (name == "disgrade") {
    return Integrator::DisGradE;
  }
  throw ParameterError("unknown integrator '" + std::string(name) +
                       "' (expected hs, cef or disgrade)");
}

std::string_view to_string(Composition c) { return c == Composition::Lie ? "lie" : "strang"; }

Composition composition_from_string(std::string_view name) {
  if (name == "lie") {
    return Composition::Lie;
  }
  if (name == "strang") {
    return Composition::Strang;
  }
  throw ParameterError("unknown composition '" + std::string(name) + "' (expected lie or strang)");
}

void StepStats::merge(const StepStats& o) {
  mass_iterations = std::max(mass_iterations, o.mass_iterations);
  picard_iterations = std::max(picard_iterations, o.picard_iterations);
  schur_iterations = std::max(schur_iterations, o.schur_iterations);
  crossings += o.crossings;
}

namespace {

// Solves M1 x = rhs from a zero guess.
Vector solve_m1(const Discretization& d, const Vector& rhs, StepStats& stats) {
  Vector x = Vector::Zero(rhs.size());
  const SolveReport r = d.m1_solver().solve(rhs, x);
  if (!r.converged) {
    throw NumericalError("M1 solve did not converge in " + std::to_string(r.iterations) +
                         " iterations (relative residual " + std::to_string(r.residual) + ")");
  }
  stats.mass_iterations = std::max(stats.mass_iterations, r.iterations);
  return x;
}

// w x b written as the matrix B^ of the logical 2-form components.
Mat3 cross_matrix(const Vec3& b) {
  Mat3 m;
  m << 0.0, b[2], -b[1], -b[2], 0.0, b[0], b[1], -b[0], 0.0;
  return m;
}

[[noreturn]] void picard_failure(std::size_t p, int maxit) {
  throw NumericalError("particle fixed-point iteration did not converge in " +
                       std::to_string(maxit) + " iterations (particle " + std::to_string(p) + ")");
}

// Per-worker maxima of iteration counts.
struct WorkerMax {
  std::vector<int> v;
  explicit WorkerMax(int workers) : v(std::max(1, workers), 0) {}
  void note(int w, int it) { v[w] = std::max(v[w], it); }
  int max() const { return *std::max_element(v.begin(), v.end()); }
};

// Position (and for HS velocity) update of the H_p flow, followed by the
// boundary rule and the split line-integral current. Returns the current
// summed over species.
Vector particle_flow(const Discretization& d, SimState& s, double dt, const StepConfig& cfg,
                     bool update_velocity, StepStats& stats) {
  const DeRhamSequence& seq = d.seq();
  const Mapping& map = d.map();
  const Vector bfull = seq.embed(2, s.b);
  Vector j = Vector::Zero(seq.dim(1));
  for (ParticleGroup& g : s.species) {
    const std::size_t n = g.size();
    const std::vector<Vec3> start = g.xi;
    const std::vector<Vec3> v0 = g.v;
    const double qm = g.charge / g.mass;
    WorkerMax iters(cfg.workers);
    parallel_chunks(n, cfg.workers, [&](int w, std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        const Vec3& x0 = start[p];
        const Vec3& u0 = v0[p];
        Vec3 xe = x0 + dt * (map.metric(to_domain(x0)).inv_transpose.transpose() * u0);
        Vec3 ue = u0;
        int it = 1;
        for (;; ++it) {
          if (it > cfg.picard_maxit) {
            picard_failure(p, cfg.picard_maxit);
          }
          const Vec3 xm = 0.5 * (x0 + xe);
          const Vec3 um = update_velocity ? Vec3(0.5 * (u0 + ue)) : u0;
          const Vec3 xm_dom = to_domain(xm);
          const MetricData md = map.metric(xm_dom);
          const Vec3 wl = md.inv_transpose.transpose() * um;
          const Vec3 xn = x0 + dt * wl;
          double diff = (xn - xe).lpNorm<Eigen::Infinity>();
          xe = xn;
          if (update_velocity) {
            const PointBasis pb = seq.point_basis(xm_dom);
            const Vec3 bl(seq.eval_component_full(2, 0, pb, bfull.data()),
                          seq.eval_component_full(2, 1, pb, bfull.data()),
                          seq.eval_component_full(2, 2, pb, bfull.data()));
            const Vec3 un = u0 + dt * qm * (md.inv_transpose * wl.cross(bl));
            diff = std::max(diff, (un - ue).lpNorm<Eigen::Infinity>());
            ue = un;
          }
          if (diff <= cfg.picard_tol) {
            break;
          }
        }
        iters.note(w, it);
        g.xi[p] = xe;
        g.v[p] = ue;
      }
    });
    stats.picard_iterations = std::max(stats.picard_iterations, iters.max());
    const std::vector<Crossing> rec = apply_boundary(g.xi, g.v, start, map, cfg.boundary);
    stats.crossings += rec.size();
    j += deposit_current_line(g, start, rec, cfg.boundary, seq, cfg.workers);
  }
  return j;
}

// H_p of HS (update_velocity) or CEF: positions, velocities, then M1 e -= j.
StepStats flow_p(const Discretization& d, SimState& s, double dt, const StepConfig& cfg,
                 bool update_velocity) {
  StepStats stats;
  if (s.species.empty()) {
    return stats;
  }
  const Vector j = particle_flow(d, s, dt, cfg, update_velocity, stats);
  s.e -= solve_m1(d, j, stats);
  return stats;
}

// System 1 of the discrete gradient splitting: trapezoidal position update
// at frozen velocities, then the boundary rule.
StepStats flow_positions_trapezoidal(const Discretization& d, SimState& s, double dt,
                                     const StepConfig& cfg) {
  StepStats stats;
  const Mapping& map = d.map();
  for (ParticleGroup& g : s.species) {
    const std::vector<Vec3> start = g.xi;
    WorkerMax iters(cfg.workers);
    parallel_chunks(g.size(), cfg.workers, [&](int w, std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        const Vec3& x0 = start[p];
        const Vec3 w0 = map.metric(to_domain(x0)).inv_transpose.transpose() * g.v[p];
        Vec3 xe = x0 + dt * w0;
        int it = 1;
        for (;; ++it) {
          if (it > cfg.picard_maxit) {
            picard_failure(p, cfg.picard_maxit);
          }
          const Vec3 we = map.metric(to_domain(xe)).inv_transpose.transpose() * g.v[p];
          const Vec3 xn = x0 + 0.5 * dt * (w0 + we);
          const double diff = (xn - xe).lpNorm<Eigen::Infinity>();
          xe = xn;
          if (diff <= cfg.picard_tol) {
            break;
          }
        }
        iters.note(w, it);
        g.xi[p] = xe;
      }
    });
    stats.picard_iterations = std::max(stats.picard_iterations, iters.max());
    stats.crossings += apply_boundary(g.xi, g.v, start, map, cfg.boundary).size();
  }
  return stats;
}

// Sums the couplings of all species.
class SpeciesCoupling : public ParticleCoupling {
 public:
  SpeciesCoupling(const Discretization& d, SimState& s, int workers) {
    for (ParticleGroup& g : s.species) {
      parts_.push_back(std::make_unique<ParticleFieldCoupling>(d.seq(), d.map(), g, workers));
    }
  }
  void apply_mass(const Vector& x, Vector& y) const override {
    y = Vector::Zero(x.size());
    Vector t;
    for (const auto& c : parts_) {
      c->apply_mass(x, t);
      y += t;
    }
  }
  Vector current() const override {
    Vector out;
    for (const auto& c : parts_) {
      out = out.size() == 0 ? c->current() : Vector(out + c->current());
    }
    return out;
  }
  void kick(const Vector& e, double scale) override {
    for (auto& c : parts_) {
      c->kick(e, scale);
    }
  }
  bool empty() const { return parts_.empty(); }

 private:
  std::vector<std::unique_ptr<ParticleFieldCoupling>> parts_;
};

StepStats exchange_e_v(const Discretization& d, SimState& s, double dt, const StepConfig& cfg) {
  StepStats stats;
  SpeciesCoupling coupling(d, s, cfg.workers);
  if (coupling.empty()) {
    return stats;
  }
  ParticleExchangeResult r = schur_solve_particle(d.m1(), coupling, d.m1_solver().preconditioner(),
                                                  dt, s.e, cfg.schur_tol, cfg.schur_maxit);
  if (!r.report.converged) {
    throw NumericalError("particle Schur solve did not converge in " +
                         std::to_string(r.report.iterations) + " iterations");
  }
  stats.schur_iterations = r.report.iterations;
  s.e = std::move(r.e);
  return stats;
}

StepStats maxwell_implicit(const Discretization& d, SimState& s, double dt, const StepConfig& cfg) {
  StepStats stats;
  MaxwellResult r = schur_solve_maxwell(d.seq(), d.m1(), d.m2(), d.m1_solver().preconditioner(),
                                        dt, s.e, s.b, cfg.schur_tol, cfg.schur_maxit);
  if (!r.report.converged) {
    throw NumericalError("Maxwell Schur solve did not converge in " +
                         std::to_string(r.report.iterations) + " iterations");
  }
  stats.schur_iterations = r.report.iterations;
  s.e = std::move(r.e);
  s.b = std::move(r.b);
  return stats;
}

void check_state(const Discretization& d, const SimState& s, const StepConfig& cfg) {
  if (static_cast<std::size_t>(s.e.size()) != d.seq().dim(1) ||
      static_cast<std::size_t>(s.b.size()) != d.seq().dim(2)) {
    throw ShapeError("simulation state does not match the discrete spaces");
  }
  if (!(cfg.dt > 0.0) || !(cfg.picard_tol > 0.0) || cfg.picard_maxit < 1 ||
      !(cfg.schur_tol > 0.0) || cfg.schur_maxit < 1) {
    throw ParameterError("step configuration needs positive dt, tolerances and iteration limits");
  }
  if (!s.e.allFinite() || !s.b.allFinite()) {
    throw NumericalError("non-finite field coefficients");
  }
  for (const ParticleGroup& g : s.species) {
    for (std::size_t p = 0; p < g.size(); ++p) {
      if (!g.xi[p].allFinite() || !g.v[p].allFinite()) {
        throw NumericalError("particle " + std::to_string(p) + " has a non-finite state");
      }
    }
  }
}

}  // namespace

StepStats flow_e(const Discretization& d, SimState& s, double dt, const StepConfig& cfg) {
  const DeRhamSequence& seq = d.seq();
  const Vector efull = seq.embed(1, s.e);
  for (ParticleGroup& g : s.species) {
    const double qm = g.charge / g.mass;
    parallel_chunks(g.size(), cfg.workers, [&](int, std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        const ParticleFrame f = particle_frame(seq, d.map(), g.xi[p]);
        g.v[p] += dt * qm * (f.metric.inv_transpose * eval_vector_form(seq, 1, f, efull.data()));
      }
    });
  }
  s.b -= dt * seq.curl(s.e);
  return {};
}

StepStats flow_b_fields(const Discretization& d, SimState& s, double dt) {
  StepStats stats;
  const Vector rhs = dt * d.seq().curl_transpose(d.m2() * s.b);
  s.e += solve_m1(d, rhs, stats);
  return stats;
}

void rotate_velocities(const Discretization& d, SimState& s, double dt, int workers) {
  const DeRhamSequence& seq = d.seq();
  const Vector bfull = seq.embed(2, s.b);
  for (ParticleGroup& g : s.species) {
    const double h = 0.5 * dt * g.charge / g.mass;
    parallel_chunks(g.size(), workers, [&](int, std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        const ParticleFrame f = particle_frame(seq, d.map(), g.xi[p]);
        const Mat3& n = f.metric.inv_transpose;
        const Mat3 a = h * (n * cross_matrix(eval_vector_form(seq, 2, f, bfull.data())) *
                            n.transpose());
        const Vec3 rhs = g.v[p] + a * g.v[p];
        g.v[p] = (Mat3::Identity() - a).partialPivLu().solve(rhs);
      }
    });
  }
}

StepStats hs_step(const Discretization& d, SimState& s, const StepConfig& cfg) {
  check_state(d, s, cfg);
  StepStats stats;
  const double h = cfg.dt;
  if (cfg.composition == Composition::Lie) {
    stats.merge(flow_e(d, s, h, cfg));
    stats.merge(flow_b_fields(d, s, h));
    stats.merge(flow_p(d, s, h, cfg, true));
  } else {
    stats.merge(flow_e(d, s, 0.5 * h, cfg));
    stats.merge(flow_b_fields(d, s, 0.5 * h));
    stats.merge(flow_p(d, s, h, cfg, true));
    stats.merge(flow_b_fields(d, s, 0.5 * h));
    stats.merge(flow_e(d, s, 0.5 * h, cfg));
  }
  s.t += h;
  return stats;
}

StepStats cef_step(const Discretization& d, SimState& s, const StepConfig& cfg) {
  check_state(d, s, cfg);
  StepStats stats;
  const double h = cfg.dt;
  auto flow_b = [&](double dt) {
    rotate_velocities(d, s, dt, cfg.workers);
    stats.merge(flow_b_fields(d, s, dt));
  };
  if (cfg.composition == Composition::Lie) {
    stats.merge(flow_e(d, s, h, cfg));
    flow_b(h);
    stats.merge(flow_p(d, s, h, cfg, false));
  } else {
    stats.merge(flow_e(d, s, 0.5 * h, cfg));
    flow_b(0.5 * h);
    stats.merge(flow_p(d, s, h, cfg, false));
    flow_b(0.5 * h);
    stats.merge(flow_e(d, s, 0.5 * h, cfg));
  }
  s.t += h;
  return stats;
}

StepStats disgrade_step(const Discretization& d, SimState& s, const StepConfig& cfg) {
  check_state(d, s, cfg);
  StepStats stats;
  const double h = cfg.dt;
  if (cfg.composition == Composition::Lie) {
    stats.merge(flow_positions_trapezoidal(d, s, h, cfg));
    rotate_velocities(d, s, h, cfg.workers);
    stats.merge(maxwell_implicit(d, s, h, cfg));
    stats.merge(exchange_e_v(d, s, h, cfg));
  } else {
    stats.merge(flow_positions_trapezoidal(d, s, 0.5 * h, cfg));
    rotate_velocities(d, s, 0.5 * h, cfg.workers);
    stats.merge(maxwell_implicit(d, s, 0.5 * h, cfg));
    stats.merge(exchange_e_v(d, s, h, cfg));
    stats.merge(maxwell_implicit(d, s, 0.5 * h, cfg));
    rotate_velocities(d, s, 0.5 * h, cfg.workers);
    stats.merge(flow_positions_trapezoidal(d, s, 0.5 * h, cfg));
  }
  s.t += h;
  return stats;
}

StepStats step(Integrator method, const Discretization& d, SimState& s, const StepConfig& cfg) {
  switch (method) {
    case Integrator::HS:
      return hs_step(d, s, cfg);
    case Integrator::CEF:
      return cef_step(d, s, cfg);
    case Integrator::DisGradE:
      return disgrade_step(d, s, cfg);
  }
  throw ParameterError("unknown integrator");
}

Vector total_charge(const Discretization& d, const SimState& s, int workers) {
  Vector rho = s.background.size() ? s.background : Vector::Zero(d.seq().dim(0));
  for (const ParticleGroup& g : s.species) {
    rho += deposit_charge(g, d.seq(), workers);
  }
  return rho;
}

}  // namespace gempic
