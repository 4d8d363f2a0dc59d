#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gempic/assembly.hpp"
#include "gempic/derham.hpp"
#include "gempic/linsolve.hpp"
#include "gempic/mapping.hpp"
#include "gempic/types.hpp"

namespace gempic {

// One species: logical positions in [0,1]^3, physical velocities and weights.
struct ParticleGroup {
  double charge = -1.0;
  double mass = 1.0;
  std::vector<Vec3> xi;
  std::vector<Vec3> v;
  std::vector<double> weight;

  std::size_t size() const { return xi.size(); }
  void resize(std::size_t n);
  double kinetic_energy() const;
};

enum class ParticleBoundary { Reflect, Periodic };
std::string_view to_string(ParticleBoundary mode);
ParticleBoundary particle_boundary_from_string(std::string_view name);

// Wave vector direction of the Weibel setup and the seeded field component.
enum class Scenario { Kx, Ky, Kz };
enum class FieldInit { B1, B2, B3 };
std::string_view to_string(Scenario s);
std::string_view to_string(FieldInit f);
Scenario scenario_from_string(std::string_view name);
FieldInit field_init_from_string(std::string_view name);
// Throws ParameterError unless the component can seed the scenario.
void check_field_init(Scenario s, FieldInit f);

// Clamps xi1 into [0,1] and wraps xi2, xi3 into [0,1).
Vec3 to_domain(const Vec3& xi);
double wrap_unit(double x);

// Basis and metric data at one particle position.
struct ParticleFrame {
  PointBasis basis;
  MetricData metric;
};
ParticleFrame particle_frame(const DeRhamSequence& seq, const Mapping& map, const Vec3& xi);
// Logical components of a form with full-layout coefficients at the frame point.
Vec3 eval_vector_form(const DeRhamSequence& seq, int k, const ParticleFrame& f,
                      const double* full);

// Where a particle path left the logical cube through xi1 = side.
struct Crossing {
  std::size_t particle = 0;
  int side = 0;           // 0 inner face, 1 outer face
  double fraction = 0.0;  // position of the crossing along start -> end
  Vec3 point;             // intersection with xi1 = side, unwrapped xi2, xi3
};

// Applies the xi1 boundary rule to xi (in place) and reflects v where
// needed. start holds the positions before the substep; if empty the
// crossing point is taken at the end position projected onto the face.
// xi2 and xi3 are always wrapped. Returns one record per crossing particle.
std::vector<Crossing> apply_boundary(std::span<Vec3> xi, std::span<Vec3> v,
                                     std::span<const Vec3> start, const Mapping& map,
                                     ParticleBoundary mode);
std::vector<Crossing> apply_boundary(ParticleGroup& group, const Mapping& map,
                                     ParticleBoundary mode);

// rho_i = sum_p w_p q Lambda0_i(xi_p) on the active 0-form space.
Vector deposit_charge(const ParticleGroup& group, const DeRhamSequence& seq, int workers = 1);

// Time-integrated current: sum_p q w_p times the line integral of Lambda1
// along the logical path from start to the final position in group.xi,
// split at every cell face and at the recorded boundary crossing. With the
// position update this equals int Lambda1^T dtau W_q N^T V. Active layout.
Vector deposit_current_line(const ParticleGroup& group, std::span<const Vec3> start,
                            std::span<const Crossing> crossings, ParticleBoundary mode,
                            const DeRhamSequence& seq, int workers = 1);

// Gauss-Legendre points per straight segment that make the line integral exact.
int line_quadrature_points(int degree);

// Uniform sampling in physical space with the anisotropic Maxwellian of the
// Weibel setup. Deterministic in (seed, particle index).
struct WeibelParams {
  Scenario scenario = Scenario::Kz;
  FieldInit field_init = FieldInit::B2;
  std::size_t count = 64000;
  std::uint64_t seed = 1;
  double beta = 1e-3;
  double wavenumber = 1.25;
  double thermal_velocity = 0.01414213562373095;  // 0.02 / sqrt(2)
  double anisotropy = 3.4641016151377544;          // sqrt(12)
  double charge = -1.0;
  double mass = 1.0;
  double tolerance = 1e-14;
};

ParticleGroup sample_weibel_particles(const Mapping& map, const WeibelParams& params,
                                      int workers = 1);
// Physical magnetic field of the seeded mode.
Vec3 weibel_field(const WeibelParams& params, const MapParams& map_params, const Vec3& x);

// Initial magnetic coefficients. Solenoidal modes go through an L2-projected
// vector potential so that D b vanishes; the B1 mode is projected directly.
Vector initial_magnetic_field(const DeRhamSequence& seq, const Mapping& map,
                              const MassSolver& m1, const MassSolver& m2,
                              const WeibelParams& params);

// Charge of a uniform background neutralizing `density_charge` per unit volume.
Vector background_charge(const DeRhamSequence& seq, const Mapping& map, double density_charge);

// Solves G^T M1 G phi = rho and returns e = -G phi, so G^T M1 e + rho = 0.
struct PoissonResult {
  Vector e;
  SolveReport report;
};
PoissonResult solve_poisson(const DeRhamSequence& seq, const MassOperator& m1, const Vector& rho,
                            double tol, int maxit = 20000);

struct WeibelInit {
  ParticleGroup group;
  Vector e;
  Vector b;
  Vector background;
  SolveReport poisson;
};
WeibelInit sample_weibel(const DeRhamSequence& seq, const Mapping& map, const MassSolver& m1,
                         const MassSolver& m2, const WeibelParams& params, int workers = 1);

// Coupling of the particles to the electric field at fixed positions.
class ParticleFieldCoupling : public ParticleCoupling {
 public:
  ParticleFieldCoupling(const DeRhamSequence& seq, const Mapping& map, ParticleGroup& group,
                        int workers = 1);
  void apply_mass(const Vector& x, Vector& y) const override;
  Vector current() const override;
  void kick(const Vector& e, double scale) override;

 private:
  const DeRhamSequence& seq_;
  ParticleGroup& group_;
  int workers_;
  std::vector<ParticleFrame> frames_;
};

// Snapshot: text header terminated by a line "end", then per particle the
// seven native doubles xi(3), v(3), weight.
struct SnapshotHeader {
  std::size_t count = 0;
  double charge = 0.0;
  double mass = 0.0;
  std::uint64_t seed = 0;
  double time = 0.0;
};
void write_snapshot(const std::string& path, const ParticleGroup& group, std::uint64_t seed,
                    double time);
ParticleGroup read_snapshot(const std::string& path, SnapshotHeader* header = nullptr);

}  // namespace gempic
