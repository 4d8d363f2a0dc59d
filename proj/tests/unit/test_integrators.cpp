#include <doctest.h>

#include <cmath>
#include <random>

#include "gempic/errors.hpp"
#include "gempic/integrators.hpp"
#include "oracles/cases.hpp"

using namespace gempic;

namespace {

ModelConfig small_model(MapFamily fam, int p = 2, Index3 cells = {4, 4, 4}) {
  ModelConfig m;
  m.degree = p;
  m.cells = cells;
  for (const auto& c : cases::all_maps()) {
    if (c.family == fam) {
      m.map_params = c.params;
    }
  }
  m.family = fam;
  m.mass_tol = 1e-14;
  return m;
}

SimState weibel_state(const Discretization& d, std::size_t n, std::uint64_t seed = 3) {
  WeibelParams w;
  w.count = n;
  w.seed = seed;
  w.scenario = Scenario::Kz;
  w.field_init = FieldInit::B1;
  w.beta = 0.05;
  WeibelInit init = sample_weibel(d.seq(), d.map(), d.m1_solver(), d.m2_solver(), w);
  SimState s;
  s.species.push_back(std::move(init.group));
  s.e = std::move(init.e);
  s.b = std::move(init.b);
  s.background = std::move(init.background);
  return s;
}

double energy(const Discretization& d, const SimState& s) {
  double h = 0.5 * s.e.dot(d.m1() * s.e) + 0.5 * s.b.dot(d.m2() * s.b);
  for (const auto& g : s.species) {
    h += g.kinetic_energy();
  }
  return h;
}

double gauss(const Discretization& d, const SimState& s) {
  return (d.seq().grad_transpose(d.m1() * s.e) + total_charge(d, s)).lpNorm<Eigen::Infinity>();
}

Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

const Integrator kMethods[] = {Integrator::HS, Integrator::CEF, Integrator::DisGradE};

}  // namespace

TEST_SUITE("integrators") {
  TEST_CASE("names round trip") {
    for (Integrator m : kMethods) {
      CHECK(integrator_from_string(to_string(m)) == m);
    }
    CHECK(composition_from_string("lie") == Composition::Lie);
    CHECK(composition_from_string("strang") == Composition::Strang);
    CHECK_THROWS_AS(integrator_from_string("rk4"), ParameterError);
    CHECK_THROWS_AS(composition_from_string("yoshida"), ParameterError);
  }

  TEST_CASE("particles at rest in zero fields stay put") {
    const Discretization d(small_model(MapFamily::Distorted));
    for (Integrator m : kMethods) {
      SimState s = weibel_state(d, 50);
      for (auto& v : s.species[0].v) v.setZero();
      s.e.setZero();
      s.b.setZero();
      const std::vector<Vec3> xi = s.species[0].xi;
      StepConfig cfg;
      step(m, d, s, cfg);
      CAPTURE(to_string(m));
      CHECK(s.e.lpNorm<Eigen::Infinity>() == 0.0);
      CHECK(s.b.lpNorm<Eigen::Infinity>() == 0.0);
      for (std::size_t p = 0; p < xi.size(); ++p) {
        CHECK(s.species[0].xi[p] == xi[p]);
        CHECK(s.species[0].v[p].norm() == 0.0);
      }
      CHECK(s.t == doctest::Approx(0.1));
    }
  }

  TEST_CASE("field-only steps keep div b at round-off and bound the energy") {
    const Discretization d(small_model(MapFamily::Cylindrical, 3));
    std::mt19937_64 rng(5);
    const Vector e0 = random_vector(d.seq().dim(1), rng, 0.1);
    const Vector b0 = d.seq().curl(random_vector(d.seq().dim(1), rng, 0.1));
    for (Integrator m : kMethods) {
      SimState s;
      s.e = e0;
      s.b = b0;
      const double h0 = energy(d, s);
      StepConfig cfg;
      cfg.dt = 0.05;
      double worst = 0.0;
      for (int k = 0; k < 10; ++k) {
        step(m, d, s, cfg);
        const double scale = b0.lpNorm<Eigen::Infinity>() + s.b.lpNorm<Eigen::Infinity>();
        CHECK(d.seq().div(s.b).lpNorm<Eigen::Infinity>() <= 1e-12 * scale);
        worst = std::max(worst, std::abs(energy(d, s) - h0) / h0);
      }
      CAPTURE(to_string(m));
      if (m == Integrator::DisGradE) {
        CHECK(worst <= 1e-11);
      } else {
        CHECK(worst <= 1e-1);
      }
    }
  }

  TEST_CASE("velocity rotation is an isometry and trivial without b") {
    const Discretization d(small_model(MapFamily::Elliptical));
    SimState s = weibel_state(d, 200);
    for (auto& v : s.species[0].v) v *= 50.0;
    std::mt19937_64 rng(2);
    s.b = random_vector(d.seq().dim(2), rng, 5.0);
    const std::vector<Vec3> v0 = s.species[0].v;
    rotate_velocities(d, s, 0.7, 2);
    double worst = 0.0;
    double moved = 0.0;
    for (std::size_t p = 0; p < v0.size(); ++p) {
      worst = std::max(worst, std::abs(s.species[0].v[p].norm() - v0[p].norm()) / v0[p].norm());
      moved = std::max(moved, (s.species[0].v[p] - v0[p]).norm());
    }
    CHECK(worst <= 1e-14);
    CHECK(moved > 1e-3);
    s.b.setZero();
    const std::vector<Vec3> v1 = s.species[0].v;
    rotate_velocities(d, s, 0.7, 1);
    for (std::size_t p = 0; p < v1.size(); ++p) {
      CHECK(s.species[0].v[p] == v1[p]);
    }
  }

  TEST_CASE("HS and CEF keep Gauss's law, DisGradE keeps the energy") {
    for (MapFamily fam : {MapFamily::Distorted, MapFamily::Cylindrical}) {
      const Discretization d(small_model(fam));
      for (ParticleBoundary mode : {ParticleBoundary::Reflect, ParticleBoundary::Periodic}) {
        if (fam == MapFamily::Cylindrical && mode == ParticleBoundary::Periodic) {
          continue;
        }
        for (Integrator m : kMethods) {
          SimState s = weibel_state(d, 400);
          for (auto& v : s.species[0].v) v *= 10.0;
          StepConfig cfg;
          cfg.boundary = mode;
          cfg.dt = 0.1;
          const double g0 = gauss(d, s);
          const double h0 = energy(d, s);
          const double rho = total_charge(d, s).lpNorm<Eigen::Infinity>() +
                             s.background.lpNorm<Eigen::Infinity>();
          std::size_t crossings = 0;
          for (int k = 0; k < 4; ++k) {
            crossings += step(m, d, s, cfg).crossings;
          }
          CAPTURE(to_string(fam));
          CAPTURE(to_string(mode));
          CAPTURE(to_string(m));
          CHECK(crossings > 0);
          if (m == Integrator::DisGradE) {
            CHECK(std::abs(energy(d, s) - h0) / h0 <= 1e-11);
          } else {
            CHECK(std::abs(gauss(d, s) - g0) <= 1e-12 * rho);
          }
        }
      }
    }
  }

  TEST_CASE("Strang composition is second order, Lie first order") {
    const Discretization d(small_model(MapFamily::Cartesian, 3));
    const SimState s0 = weibel_state(d, 30, 11);
    for (Integrator m : kMethods) {
      for (Composition c : {Composition::Lie, Composition::Strang}) {
        auto solve = [&](int n) {
          SimState s = s0;
          StepConfig cfg;
          cfg.dt = 0.4 / n;
          cfg.composition = c;
          cfg.boundary = ParticleBoundary::Periodic;
          for (int k = 0; k < n; ++k) step(m, d, s, cfg);
          Vector out(s.e.size() + 3 * s.species[0].size());
          out.head(s.e.size()) = s.e;
          for (std::size_t p = 0; p < s.species[0].size(); ++p) {
            out.segment(s.e.size() + 3 * p, 3) = s.species[0].v[p];
          }
          return out;
        };
        const Vector a = solve(8);
        const Vector b = solve(16);
        const Vector r = solve(32);
        const double ratio = (a - b).norm() / (b - r).norm();
        CAPTURE(to_string(m));
        CAPTURE(to_string(c));
        CAPTURE(ratio);
        if (c == Composition::Strang) {
          CHECK(ratio > 3.3);
        } else {
          CHECK(ratio > 1.7);
          CHECK(ratio < 2.6);
        }
      }
    }
  }

  TEST_CASE("worker count does not change results beyond round-off") {
    const Discretization d(small_model(MapFamily::Distorted));
    for (Integrator m : kMethods) {
      SimState a = weibel_state(d, 300);
      SimState b = a;
      SimState c = a;
      StepConfig cfg;
      step(m, d, a, cfg);
      step(m, d, c, cfg);
      cfg.workers = 3;
      step(m, d, b, cfg);
      CAPTURE(to_string(m));
      CHECK(a.e == c.e);
      CHECK((a.e - b.e).lpNorm<Eigen::Infinity>() <= 1e-13 * a.e.lpNorm<Eigen::Infinity>());
    }
  }

  TEST_CASE("invalid input is rejected") {
    const Discretization d(small_model(MapFamily::Cartesian));
    SimState s = weibel_state(d, 20);
    StepConfig cfg;
    SimState bad = s;
    bad.e.resize(3);
    CHECK_THROWS_AS(hs_step(d, bad, cfg), ShapeError);
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cef_step(d, s, cfg), ParameterError);
    cfg.dt = 0.1;
    cfg.picard_maxit = 0;
    CHECK_THROWS_AS(disgrade_step(d, s, cfg), ParameterError);
  }

  TEST_CASE("too large a step and non-finite state raise") {
    const Discretization d(small_model(MapFamily::Cartesian));
    SimState s = weibel_state(d, 20);
    for (auto& v : s.species[0].v) v = Vec3(0.0, 0.0, 10.0);
    StepConfig cfg;
    cfg.dt = 1.0;
    cfg.boundary = ParticleBoundary::Periodic;
    CHECK_THROWS_AS(hs_step(d, s, cfg), StepTooLargeError);
    SimState t = weibel_state(d, 20);
    t.species[0].v[3] = Vec3(std::nan(""), 0.0, 0.0);
    CHECK_THROWS_AS(hs_step(d, t, StepConfig{}), NumericalError);
  }

  TEST_CASE("Picard iteration limit is reported") {
    const Discretization d(small_model(MapFamily::Cylindrical));
    SimState s = weibel_state(d, 50);
    StepConfig cfg;
    cfg.picard_maxit = 1;
    CHECK_THROWS_AS(hs_step(d, s, cfg), NumericalError);
  }
}
