#pragma once

#include <string_view>
#include <vector>

#include "gempic/assembly.hpp"
#include "gempic/derham.hpp"
#include "gempic/linsolve.hpp"
#include "gempic/mapping.hpp"
#include "gempic/particles.hpp"

namespace gempic {

// Grid, map and solver choices that fix the assembled operators.
struct ModelConfig {
  int degree = 3;
  Index3 cells{8, 8, 8};
  bool pec = true;
  MapFamily family = MapFamily::Cartesian;
  MapParams map_params{};
  PreconditionerMode preconditioner = PreconditionerMode::Lumped;
  double mass_tol = 1e-14;
  int mass_maxit = 2000;
};

// Spaces, map and the operators assembled once per run. Not movable: the
// solvers keep references to the mass matrices.
class Discretization {
 public:
  explicit Discretization(const ModelConfig& cfg);
  Discretization(const Discretization&) = delete;
  Discretization& operator=(const Discretization&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const DeRhamSequence& seq() const { return seq_; }
  const Mapping& map() const { return map_; }
  const MassOperator& m1() const { return m1_; }
  const MassOperator& m2() const { return m2_; }
  const MassSolver& m1_solver() const { return s1_; }
  const MassSolver& m2_solver() const { return s2_; }
  const BoundaryMatrices& boundary() const { return boundary_; }

 private:
  ModelConfig cfg_;
  DeRhamSequence seq_;
  Mapping map_;
  MassOperator m1_;
  MassOperator m2_;
  MassSolver s1_;
  MassSolver s2_;
  BoundaryMatrices boundary_;
};

// Particles, field coefficients (active layouts) and time.
struct SimState {
  std::vector<ParticleGroup> species;
  Vector e;
  Vector b;
  Vector background;  // fixed neutralizing 0-form charge
  double t = 0.0;
};

enum class Integrator { HS, CEF, DisGradE };
enum class Composition { Lie, Strang };
std::string_view to_string(Integrator i);
Integrator integrator_from_string(std::string_view name);
std::string_view to_string(Composition c);
Composition composition_from_string(std::string_view name);

struct StepConfig {
  double dt = 0.1;
  double picard_tol = 1e-12;
  int picard_maxit = 50;
  double schur_tol = 1e-13;
  int schur_maxit = 2000;
  ParticleBoundary boundary = ParticleBoundary::Reflect;
  Composition composition = Composition::Strang;
  int workers = 1;
};

// Largest iteration counts seen during one step.
struct StepStats {
  int mass_iterations = 0;
  int picard_iterations = 0;
  int schur_iterations = 0;
  std::size_t crossings = 0;
  void merge(const StepStats& o);
};

// Shared field flows.
// H_E: V += dt q/m N Lambda1 e at frozen positions, b -= dt C e.
StepStats flow_e(const Discretization& d, SimState& s, double dt, const StepConfig& cfg);
// H_B (semi-explicit schemes): M1 e += dt C^T M2 b.
StepStats flow_b_fields(const Discretization& d, SimState& s, double dt);
// Velocity rotation (I - dt/2 A) V' = (I + dt/2 A) V with A = q/m N B^ N^T.
void rotate_velocities(const Discretization& d, SimState& s, double dt, int workers);

StepStats hs_step(const Discretization& d, SimState& s, const StepConfig& cfg);
StepStats cef_step(const Discretization& d, SimState& s, const StepConfig& cfg);
StepStats disgrade_step(const Discretization& d, SimState& s, const StepConfig& cfg);
StepStats step(Integrator method, const Discretization& d, SimState& s, const StepConfig& cfg);

// Total deposited charge plus background on the active 0-form space.
Vector total_charge(const Discretization& d, const SimState& s, int workers = 1);

}  // namespace gempic
