#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "gempic/assembly.hpp"
#include "gempic/derham.hpp"
#include "gempic/types.hpp"

namespace gempic {

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;  // final ||r|| / ||b||
  bool converged = false;
};

// y = A x
using LinearOperator = std::function<void(const Vector& x, Vector& y)>;

LinearOperator as_operator(const MassOperator& m);

// Conjugate gradients; x holds the initial guess on entry. Stops when
// ||r|| <= tol ||b||. On maxit the best iterate is returned unconverged.
SolveReport cg(const LinearOperator& a, const Vector& b, Vector& x, double tol, int maxit);
SolveReport pcg(const LinearOperator& a, const Vector& b, Vector& x, const LinearOperator& p,
                double tol, int maxit);

enum class PreconditionerMode { None, Jacobi, Lumped };

std::string_view to_string(PreconditionerMode mode);
PreconditionerMode preconditioner_mode_from_string(std::string_view name);

// P = D^{-1} P_fft D^{-1}: P_fft inverts a Kronecker product of periodic
// spline-mass circulants (one per component and direction), D is the square
// root of the diagonal or of the floored row sums of M.
class Preconditioner {
 public:
  Preconditioner(const MassOperator& m, const DeRhamSequence& seq, PreconditionerMode mode,
                 double lump_floor = -1.0);
  ~Preconditioner();
  Preconditioner(Preconditioner&&) noexcept;
  Preconditioner& operator=(Preconditioner&&) noexcept;
  Preconditioner(const Preconditioner&) = delete;
  Preconditioner& operator=(const Preconditioner&) = delete;

  PreconditionerMode mode() const { return mode_; }
  void apply(const Vector& r, Vector& z) const;
  LinearOperator as_operator() const;

  // Circulant eigenvalues of component c along direction d.
  const std::vector<double>& spectrum(int c, int d) const { return spectra_[c][d]; }
  const Vector& scaling() const { return inv_sqrt_diag_; }

 private:
  struct Fft;
  PreconditionerMode mode_;
  std::size_t size_ = 0;
  std::vector<std::array<std::vector<double>, 3>> spectra_;
  std::vector<std::unique_ptr<Fft>> ffts_;
  Vector inv_sqrt_diag_;
};

// Eigenvalues of the n x n circulant built from the degree-d periodic spline
// mass stencil on spacing h.
std::vector<double> periodic_mass_spectrum(int degree, int n, double h);

// Mass solve with a fixed preconditioner; x is the initial guess.
class MassSolver {
 public:
  MassSolver(const MassOperator& m, const DeRhamSequence& seq, PreconditionerMode mode,
             double tol, int maxit);
  SolveReport solve(const Vector& b, Vector& x) const;
  const MassOperator& matrix() const { return *m_; }
  const Preconditioner& preconditioner() const { return p_; }
  double tolerance() const { return tol_; }
  int max_iterations() const { return maxit_; }

 private:
  const MassOperator* m_;
  Preconditioner p_;
  double tol_;
  int maxit_;
};

struct MaxwellResult {
  Vector e;
  Vector b;
  SolveReport report;
};

// Energy-conserving implicit midpoint step of the source-free Maxwell system:
// S e' = (M1 - dt^2/4 C^T M2 C) e + dt C^T M2 b,  b' = b - dt/2 C (e' + e)
// with S = M1 + dt^2/4 C^T M2 C.
MaxwellResult schur_solve_maxwell(const DeRhamSequence& seq, const MassOperator& m1,
                                  const MassOperator& m2, const Preconditioner& p1, double dt,
                                  const Vector& e, const Vector& b, double tol, int maxit);

// Particle side of the field-velocity exchange with positions frozen.
class ParticleCoupling {
 public:
  virtual ~ParticleCoupling() = default;
  // y = sum_p w_p q_p^2 / m_p  Lambda_p^T G_p^{-1} Lambda_p x
  virtual void apply_mass(const Vector& x, Vector& y) const = 0;
  // Lambda^T N^T W_q V
  virtual Vector current() const = 0;
  // V_p += scale * q_p/m_p N_p Lambda_p e
  virtual void kick(const Vector& e, double scale) = 0;
};

struct ParticleExchangeResult {
  Vector e;
  SolveReport report;
};

// S e' = (M1 - dt^2/4 Q) e - dt Lambda^T N^T W_q V,  V' = V + dt/2 q/m N Lambda (e' + e)
// with S = M1 + dt^2/4 Q and Q the particle mass operator. Velocities are
// updated through the coupling.
ParticleExchangeResult schur_solve_particle(const MassOperator& m1, ParticleCoupling& coupling,
                                            const Preconditioner& p1, double dt, const Vector& e,
                                            double tol, int maxit);

}  // namespace gempic
