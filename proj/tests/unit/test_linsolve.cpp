#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>
#include <random>

#include "gempic/errors.hpp"
#include "gempic/linsolve.hpp"
#include "oracles/cases.hpp"

using namespace gempic;

namespace {

Vector random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Dense stand-in for a particle ensemble: A plays the role of N Lambda.
class DenseCoupling : public ParticleCoupling {
 public:
  Eigen::MatrixXd a;   // (3 np) x dim
  Vector wq;           // per row: w q
  Vector qm;           // per row: q / m
  Vector v;            // (3 np)
  void apply_mass(const Vector& x, Vector& y) const override {
    y = a.transpose() * (wq.cwiseProduct(qm).cwiseProduct(a * x));
  }
  Vector current() const override { return a.transpose() * wq.cwiseProduct(v); }
  void kick(const Vector& e, double scale) override { v += scale * qm.cwiseProduct(a * e); }
  double kinetic() const {
    // w m = w q / (q/m)
    return 0.5 * (wq.cwiseQuotient(qm).cwiseProduct(v.cwiseAbs2())).sum();
  }
};

}  // namespace

TEST_SUITE("linsolve") {
  TEST_CASE("cg basics") {
    const int n = 30;
    Vector b = Vector::LinSpaced(n, 1.0, 2.0);
    const LinearOperator id = [](const Vector& x, Vector& y) { y = x; };
    Vector x;
    SolveReport r = cg(id, b, x, 1e-14, 100);
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK((x - b).norm() == 0.0);

    const Vector d = Vector::LinSpaced(n, 1.0, n);
    const LinearOperator diag = [&](const Vector& x, Vector& y) { y = d.cwiseProduct(x); };
    x.resize(0);
    r = cg(diag, b, x, 1e-12, 1000);
    CHECK(r.converged);
    CHECK(r.iterations <= n);
    CHECK((d.cwiseProduct(x) - b).norm() <= 1e-12 * b.norm());

    x.resize(0);
    r = cg(diag, b, x, 1e-14, 3);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 3);
    CHECK(r.residual < 1.0);

    x.resize(0);
    r = cg(diag, Vector::Zero(n), x, 1e-14, 10);
    CHECK(r.converged);
    CHECK(x.norm() == 0.0);

    Vector bad = b;
    bad[3] = std::nan("");
    x.resize(0);
    CHECK_THROWS_AS(cg(diag, bad, x, 1e-14, 10), NumericalError);
    const LinearOperator neg = [](const Vector& x, Vector& y) { y = -x; };
    x.resize(0);
    CHECK_THROWS_AS(cg(neg, b, x, 1e-14, 10), NumericalError);
  }

  TEST_CASE("periodic spectra") {
    for (int n : {5, 8, 11}) {
      const double h = 1.0 / n;
      const auto eig = periodic_mass_spectrum(1, n, h);
      for (int k = 0; k < n; ++k) {
        const double ref = h * (2.0 / 3.0 + std::cos(2 * std::numbers::pi * k / n) / 3.0);
        CHECK(eig[k] == doctest::Approx(ref).epsilon(1e-14));
      }
      for (int p = 0; p <= 5; ++p) {
        const auto e = periodic_mass_spectrum(p, n, h);
        CHECK(e[0] == doctest::Approx(h).epsilon(1e-14));
        for (double v : e) CHECK(v > 0.0);
      }
    }
  }

  TEST_CASE("preconditioner on the constant vector and symmetry") {
    const DeRhamSequence seq(2, {4, 5, 6}, false);
    const Mapping unit(MapFamily::Cartesian, MapParams{1, 1, 1});
    const MassOperator m3 = assemble_mass(seq, unit, 3);
    const Preconditioner p(m3, seq, PreconditionerMode::None);
    Vector z;
    p.apply(Vector::Ones(seq.dim(3)), z);
    CHECK((z.array() - 4.0 * 5.0 * 6.0).abs().maxCoeff() <= 1e-11);

    std::mt19937_64 rng(3);
    const auto mc = cases::all_maps()[2];
    const DeRhamSequence s2(3, {6, 6, 4}, true);
    for (int k = 0; k < 4; ++k) {
      const MassOperator m = assemble_mass(s2, mc.map(), k);
      for (auto mode : {PreconditionerMode::None, PreconditionerMode::Jacobi,
                        PreconditionerMode::Lumped}) {
        const Preconditioner pk(m, s2, mode);
        const Vector x = random_vector(m.size(), rng);
        const Vector y = random_vector(m.size(), rng);
        Vector px, py;
        pk.apply(x, px);
        pk.apply(y, py);
        CHECK(std::abs(x.dot(py) - y.dot(px)) <= 1e-13 * std::abs(x.dot(py)) + 1e-13);
        CHECK(x.dot(px) > 0.0);
      }
    }
  }

  TEST_CASE("pcg agrees with cg and cuts iterations on radial maps") {
    std::mt19937_64 rng(5);
    const DeRhamSequence seq(3, {6, 6, 6}, true);
    for (const auto& mc : cases::all_maps()) {
      const MassOperator m1 = assemble_mass(seq, mc.map(), 1);
      const Vector b = random_vector(m1.size(), rng);
      Vector x1, x2;
      const SolveReport r1 = cg(as_operator(m1), b, x1, 1e-13, 20000);
      const Preconditioner p(m1, seq, PreconditionerMode::Lumped);
      const SolveReport r2 = pcg(as_operator(m1), b, x2, p.as_operator(), 1e-13, 1000);
      INFO(mc.name << " cg=" << r1.iterations << " pcg=" << r2.iterations);
      CHECK(r1.converged);
      CHECK(r2.converged);
      CHECK((x1 - x2).lpNorm<Eigen::Infinity>() <= 1e-10 * x1.lpNorm<Eigen::Infinity>());
      CHECK(r2.iterations * 4 < r1.iterations);
      // warm start from the solution converges immediately
      const SolveReport r3 = pcg(as_operator(m1), b, x2, p.as_operator(), 1e-12, 1000);
      CHECK(r3.iterations <= 1);
    }
  }

  TEST_CASE("maxwell schur step") {
    std::mt19937_64 rng(8);
    const DeRhamSequence seq(2, {4, 4, 4}, true);
    const auto mc = cases::all_maps()[1];
    const MassOperator m1 = assemble_mass(seq, mc.map(), 1);
    const MassOperator m2 = assemble_mass(seq, mc.map(), 2);
    const Preconditioner p1(m1, seq, PreconditionerMode::Lumped);
    const Vector e = random_vector(seq.dim(1), rng);
    const Vector b = seq.curl(random_vector(seq.dim(1), rng));

    MaxwellResult same = schur_solve_maxwell(seq, m1, m2, p1, 0.0, e, b, 1e-14, 500);
    CHECK((same.e - e).norm() <= 1e-13 * e.norm());
    CHECK(same.b == b);
    MaxwellResult zero = schur_solve_maxwell(seq, m1, m2, p1, 0.3, Vector::Zero(e.size()),
                                             Vector::Zero(b.size()), 1e-14, 500);
    CHECK(zero.e.norm() == 0.0);
    CHECK(zero.b.norm() == 0.0);

    const double dt = 0.3;
    MaxwellResult r = schur_solve_maxwell(seq, m1, m2, p1, dt, e, b, 1e-14, 500);
    CHECK(r.report.converged);
    // dense direct solve of the same trapezoidal system
    const Eigen::MatrixXd dm1 = m1.matrix.dense();
    const Eigen::MatrixXd dm2 = m2.matrix.dense();
    Eigen::MatrixXd c(seq.dim(2), seq.dim(1));
    for (std::size_t j = 0; j < seq.dim(1); ++j) {
      Vector ej = Vector::Zero(seq.dim(1));
      ej[j] = 1.0;
      c.col(j) = seq.curl(ej);
    }
    const Eigen::MatrixXd k = c.transpose() * dm2 * c;
    const Eigen::MatrixXd s = dm1 + 0.25 * dt * dt * k;
    const Vector rhs = (dm1 - 0.25 * dt * dt * k) * e + dt * c.transpose() * dm2 * b;
    const Vector eref = s.llt().solve(rhs);
    CHECK((r.e - eref).lpNorm<Eigen::Infinity>() <= 1e-11 * eref.lpNorm<Eigen::Infinity>());
    const auto energy = [&](const Vector& ee, const Vector& bb) {
      return 0.5 * ee.dot(m1 * ee) + 0.5 * bb.dot(m2 * bb);
    };
    CHECK(std::abs(energy(r.e, r.b) - energy(e, b)) <= 1e-12 * energy(e, b));
    CHECK(seq.div(r.b - b).lpNorm<Eigen::Infinity>() <= 1e-13);
  }

  TEST_CASE("particle schur step conserves energy") {
    std::mt19937_64 rng(10);
    const DeRhamSequence seq(2, {4, 4, 4}, true);
    const auto mc = cases::all_maps()[0];
    const MassOperator m1 = assemble_mass(seq, mc.map(), 1);
    const Preconditioner p1(m1, seq, PreconditionerMode::Lumped);
    const int np = 10;
    DenseCoupling dc;
    dc.a = Eigen::MatrixXd::Zero(3 * np, seq.dim(1));
    for (int i = 0; i < 3 * np; ++i)
      for (int t = 0; t < 6; ++t) dc.a(i, rng() % seq.dim(1)) = random_vector(1, rng)[0];
    dc.wq = -0.01 * Vector::Ones(3 * np);
    dc.qm = -Vector::Ones(3 * np);
    dc.v = 0.1 * random_vector(3 * np, rng);
    const Vector e = 0.01 * random_vector(seq.dim(1), rng);
    const double h0 = 0.5 * e.dot(m1 * e) + dc.kinetic();

    const Vector v0 = dc.v;
    ParticleExchangeResult same = schur_solve_particle(m1, dc, p1, 0.0, e, 1e-14, 500);
    CHECK(same.e == e);
    CHECK(dc.v == v0);

    ParticleExchangeResult r = schur_solve_particle(m1, dc, p1, 0.5, e, 1e-14, 500);
    CHECK(r.report.converged);
    const double h1 = 0.5 * r.e.dot(m1 * r.e) + dc.kinetic();
    CHECK(std::abs(h1 - h0) <= 1e-12 * h0);

    DenseCoupling empty;
    empty.a = Eigen::MatrixXd::Zero(0, seq.dim(1));
    empty.wq = empty.qm = empty.v = Vector::Zero(0);
    ParticleExchangeResult r0 = schur_solve_particle(m1, empty, p1, 0.5, e, 1e-14, 500);
    CHECK((r0.e - e).norm() <= 1e-13 * e.norm());
  }
}
