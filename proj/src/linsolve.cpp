#include "gempic/linsolve.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gempic/errors.hpp"

namespace gempic {

LinearOperator as_operator(const MassOperator& m) {
  return [&m](const Vector& x, Vector& y) { m.matrix.multiply(x, y); };
}

namespace {

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string(what) + ": non-finite value encountered");
  }
}

}  // namespace

SolveReport pcg(const LinearOperator& a, const Vector& b, Vector& x, const LinearOperator& p,
                double tol, int maxit) {
  const Eigen::Index n = b.size();
  if (x.size() != n) {
    if (x.size() != 0) {
      throw ShapeError("cg: initial guess has wrong length");
    }
    x = Vector::Zero(n);
  }
  SolveReport rep;
  const double bnorm = b.norm();
  check_finite(bnorm, "cg right-hand side");
  if (bnorm == 0.0) {
    x.setZero();
    rep.converged = true;
    return rep;
  }
  Vector r(n);
  Vector ap(n);
  a(x, ap);
  r = b - ap;
  double rnorm = r.norm();
  check_finite(rnorm, "cg residual");
  Vector best = x;
  double best_norm = rnorm;
  if (rnorm <= tol * bnorm) {
    rep.residual = rnorm / bnorm;
    rep.converged = true;
    return rep;
  }
  Vector z(n);
  if (p) {
    p(r, z);
  } else {
    z = r;
  }
  Vector d = z;
  double rz = r.dot(z);
  for (int it = 1; it <= maxit; ++it) {
    a(d, ap);
    const double dad = d.dot(ap);
    check_finite(dad, "cg curvature");
    if (!(dad > 0.0)) {
      throw NumericalError("cg: operator is not positive definite (d^T A d = " +
                           std::to_string(dad) + ")");
    }
    const double alpha = rz / dad;
    x.noalias() += alpha * d;
    r.noalias() -= alpha * ap;
    rnorm = r.norm();
    check_finite(rnorm, "cg residual");
    rep.iterations = it;
    if (rnorm < best_norm) {
      best_norm = rnorm;
      best = x;
    }
    if (rnorm <= tol * bnorm) {
      rep.residual = rnorm / bnorm;
      rep.converged = true;
      return rep;
    }
    if (p) {
      p(r, z);
    } else {
      z = r;
    }
    const double rz_new = r.dot(z);
    check_finite(rz_new, "cg preconditioned residual");
    const double beta = rz_new / rz;
    rz = rz_new;
    d = z + beta * d;
  }
  x = best;
  rep.residual = best_norm / bnorm;
  rep.converged = false;
  return rep;
}

SolveReport cg(const LinearOperator& a, const Vector& b, Vector& x, double tol, int maxit) {
  return pcg(a, b, x, LinearOperator{}, tol, maxit);
}

std::string_view to_string(PreconditionerMode mode) {
  switch (mode) {
    case PreconditionerMode::None:
      return "none";
    case PreconditionerMode::Jacobi:
      return "jacobi";
    case PreconditionerMode::Lumped:
      return "lumped";
  }
  return "unknown";
}

PreconditionerMode preconditioner_mode_from_string(std::string_view name) {
  for (auto m : {PreconditionerMode::None, PreconditionerMode::Jacobi, PreconditionerMode::Lumped}) {
    if (name == to_string(m)) {
      return m;
    }
  }
  throw ParameterError("unknown preconditioner '" + std::string(name) + "'");
}

std::vector<double> periodic_mass_spectrum(int degree, int n, double h) {
  if (degree < 0 || n < 1) {
    throw ParameterError("periodic spectrum needs degree >= 0 and n >= 1");
  }
  // Gram stencil of cardinal B-splines by exact quadrature on a small periodic grid.
  const int cells = 2 * degree + 4;
  const SplineBasis1D basis(std::max(degree, 1), cells, BoundaryKind::Periodic);
  const QuadratureRule rule = gauss_legendre(degree + 1);
  std::vector<double> stencil(cells, 0.0);  // stencil[k] = (phi_0, phi_k)
  for (int c = 0; c < cells; ++c) {
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double x = (c + rule.nodes[i]) / cells;
      const BasisValues v = basis.eval_degree(x, degree);
      double v0 = 0.0;
      for (int k = 0; k < v.count; ++k) {
        if (basis.index(v.first, k) == 0) {
          v0 = v.values[k];
        }
      }
      if (v0 == 0.0) {
        continue;
      }
      for (int k = 0; k < v.count; ++k) {
        stencil[basis.index(v.first, k)] += rule.weights[i] / cells * v0 * v.values[k];
      }
    }
  }
  std::vector<double> eig(n);
  for (int j = 0; j < n; ++j) {
    double s = stencil[0];
    for (int k = 1; k <= degree; ++k) {
      s += 2.0 * stencil[k] * std::cos(2.0 * std::numbers::pi * j * k / n);
    }
    eig[j] = s * cells * h;
  }
  return eig;
}

struct Preconditioner::Fft {
  int n0;
  int n1;
  int n2;
  int nh;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<double> inv_eig;  // includes the 1/(n0 n1 n2) normalisation

  Fft(int a, int b, int c, const std::array<std::vector<double>, 3>& eig)
      : n0(a), n1(b), n2(c), nh(c / 2 + 1) {
    const std::size_t nr = static_cast<std::size_t>(n0) * n1 * n2;
    const std::size_t nc = static_cast<std::size_t>(n0) * n1 * nh;
    real = fftw_alloc_real(nr);
    spec = fftw_alloc_complex(nc);
    forward = fftw_plan_dft_r2c_3d(n0, n1, n2, real, spec, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_3d(n0, n1, n2, spec, real, FFTW_ESTIMATE);
    if (forward == nullptr || backward == nullptr) {
      throw NumericalError("fft plan creation failed");
    }
    inv_eig.resize(nc);
    for (int i = 0; i < n0; ++i) {
      for (int j = 0; j < n1; ++j) {
        for (int k = 0; k < nh; ++k) {
          inv_eig[(static_cast<std::size_t>(i) * n1 + j) * nh + k] =
              1.0 / (eig[0][i] * eig[1][j] * eig[2][k] * static_cast<double>(nr));
        }
      }
    }
  }
  ~Fft() {
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(spec);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  void solve(const double* in, double* out) {
    const std::size_t nr = static_cast<std::size_t>(n0) * n1 * n2;
    std::copy(in, in + nr, real);
    fftw_execute(forward);
    const std::size_t nc = inv_eig.size();
    for (std::size_t i = 0; i < nc; ++i) {
      spec[i][0] *= inv_eig[i];
      spec[i][1] *= inv_eig[i];
    }
    fftw_execute(backward);
    std::copy(real, real + nr, out);
  }
};

Preconditioner::Preconditioner(const MassOperator& m, const DeRhamSequence& seq,
                               PreconditionerMode mode, double lump_floor)
    : mode_(mode), size_(m.size()) {
  if (m.size() != seq.dim(m.form)) {
    throw ShapeError("preconditioner: mass operator does not match the sequence");
  }
  const int nc = seq.num_components(m.form);
  const int p = seq.degree();
  for (int c = 0; c < nc; ++c) {
    const ComponentSpace& s = seq.component(m.form, c);
    std::array<std::vector<double>, 3> eig;
    for (int d = 0; d < 3; ++d) {
      const int deg = s.lower[d] ? p - 1 : p;
      eig[d] = periodic_mass_spectrum(deg, s.active_shape[d], seq.basis(d).spacing());
    }
    ffts_.push_back(std::make_unique<Fft>(s.active_shape[0], s.active_shape[1],
                                          s.active_shape[2], eig));
    spectra_.push_back(std::move(eig));
  }
  switch (mode) {
    case PreconditionerMode::None:
      inv_sqrt_diag_ = Vector::Ones(size_);
      break;
    case PreconditionerMode::Jacobi: {
      const Vector d = m.matrix.diagonal();
      if (d.minCoeff() <= 0.0) {
        throw NumericalError("jacobi scaling needs a positive diagonal");
      }
      inv_sqrt_diag_ = d.cwiseSqrt().cwiseInverse();
      break;
    }
    case PreconditionerMode::Lumped:
      inv_sqrt_diag_ = lumped_diagonal(m, lump_floor).cwiseSqrt().cwiseInverse();
      break;
  }
}

Preconditioner::~Preconditioner() = default;
Preconditioner::Preconditioner(Preconditioner&&) noexcept = default;
Preconditioner& Preconditioner::operator=(Preconditioner&&) noexcept = default;

void Preconditioner::apply(const Vector& r, Vector& z) const {
  if (static_cast<std::size_t>(r.size()) != size_) {
    throw ShapeError("preconditioner: wrong vector length");
  }
  Vector t = r.cwiseProduct(inv_sqrt_diag_);
  z.resize(r.size());
  std::size_t off = 0;
  for (const auto& f : ffts_) {
    f->solve(t.data() + off, z.data() + off);
    off += static_cast<std::size_t>(f->n0) * f->n1 * f->n2;
  }
  z.array() *= inv_sqrt_diag_.array();
}

LinearOperator Preconditioner::as_operator() const {
  return [this](const Vector& r, Vector& z) { apply(r, z); };
}

MassSolver::MassSolver(const MassOperator& m, const DeRhamSequence& seq, PreconditionerMode mode,
                       double tol, int maxit)
    : m_(&m), p_(m, seq, mode), tol_(tol), maxit_(maxit) {}

SolveReport MassSolver::solve(const Vector& b, Vector& x) const {
  return pcg(as_operator(*m_), b, x, p_.as_operator(), tol_, maxit_);
}

MaxwellResult schur_solve_maxwell(const DeRhamSequence& seq, const MassOperator& m1,
                                  const MassOperator& m2, const Preconditioner& p1, double dt,
                                  const Vector& e, const Vector& b, double tol, int maxit) {
  if (static_cast<std::size_t>(e.size()) != seq.dim(1) ||
      static_cast<std::size_t>(b.size()) != seq.dim(2)) {
    throw ShapeError("maxwell solve: field vectors have wrong length");
  }
  const double c2 = 0.25 * dt * dt;
  // K x = C^T M2 C x
  const auto k = [&](const Vector& x) { return seq.curl_transpose(m2 * seq.curl(x)); };
  const LinearOperator s = [&](const Vector& x, Vector& y) {
    m1.matrix.multiply(x, y);
    if (c2 != 0.0) {
      y.noalias() += c2 * k(x);
    }
  };
  Vector rhs = m1 * e;
  if (dt != 0.0) {
    rhs.noalias() += dt * seq.curl_transpose(m2 * b) - c2 * k(e);
  }
  MaxwellResult out;
  out.e = e;
  out.report = pcg(s, rhs, out.e, p1.as_operator(), tol, maxit);
  out.b = b;
  if (dt != 0.0) {
    out.b.noalias() -= 0.5 * dt * seq.curl(out.e + e);
  }
  return out;
}

ParticleExchangeResult schur_solve_particle(const MassOperator& m1, ParticleCoupling& coupling,
                                            const Preconditioner& p1, double dt, const Vector& e,
                                            double tol, int maxit) {
  if (static_cast<std::size_t>(e.size()) != m1.size()) {
    throw ShapeError("particle solve: field vector has wrong length");
  }
  ParticleExchangeResult out;
  out.e = e;
  if (dt == 0.0) {
    out.report.converged = true;
    return out;
  }
  const double c2 = 0.25 * dt * dt;
  Vector tmp;
  const LinearOperator s = [&](const Vector& x, Vector& y) {
    m1.matrix.multiply(x, y);
    coupling.apply_mass(x, tmp);
    y.noalias() += c2 * tmp;
  };
  Vector q_e;
  coupling.apply_mass(e, q_e);
  const Vector rhs = m1 * e - c2 * q_e - dt * coupling.current();
  out.report = pcg(s, rhs, out.e, p1.as_operator(), tol, maxit);
  coupling.kick(out.e + e, 0.5 * dt);
  return out;
}

}  // namespace gempic
