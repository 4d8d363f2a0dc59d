#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gempic/errors.hpp"
#include "gempic/mapping.hpp"
#include "oracles/oracles.hpp"

using namespace gempic;

namespace {

struct Case {
  MapFamily family;
  oracle::Family ofam;
  MapParams params;
};

std::vector<Case> cases() {
  const double L = 2 * std::numbers::pi / 1.25;
  std::vector<Case> out;
  MapParams cart{L, L, L};
  out.push_back({MapFamily::Cartesian, oracle::Family::Cartesian, cart});
  MapParams dist{L, L, L, 2 * std::numbers::pi, 0.05};
  out.push_back({MapFamily::Distorted, oracle::Family::Distorted, dist});
  MapParams cyl;
  cyl.Lz = L;
  cyl.r0 = 0.01;
  cyl.Lr = L - 0.01;
  out.push_back({MapFamily::Cylindrical, oracle::Family::Cylindrical, cyl});
  MapParams ell;
  ell.Lz = L;
  ell.r0 = 0.01;
  ell.Lr = L - 0.01;
  out.push_back({MapFamily::Elliptical, oracle::Family::Elliptical, ell});
  return out;
}

oracle::MapConsts consts(const MapParams& p) {
  return {p.Lx, p.Ly, p.Lz, p.Lp, p.epsilon, p.r0, p.Lr};
}

}  // namespace

TEST_SUITE("mapping") {
  TEST_CASE("jacobian matches complex-step differentiation of the closed form") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& c : cases()) {
      const Mapping m(c.family, c.params);
      for (int i = 0; i < 30; ++i) {
        const Vec3 xi(u(rng), u(rng), u(rng));
        const Mat3 ref = oracle::map_jacobian(c.ofam, consts(c.params), xi);
        CHECK((m.jacobian(xi) - ref).norm() <= 1e-12 * ref.norm());
        const Vec3 x = m.eval(xi);
        const Vec3 xr = oracle::map_eval<double>(c.ofam, consts(c.params), xi);
        CHECK((x - xr).norm() <= 1e-13 * (1.0 + xr.norm()));
      }
    }
  }

  TEST_CASE("metric identities") {
    for (const auto& c : cases()) {
      const Mapping m(c.family, c.params);
      const MetricData md = m.metric(Vec3(0.3, 0.7, 0.1));
      CHECK((md.inv_transpose * md.jacobian.transpose() - Mat3::Identity()).norm() < 1e-12);
      CHECK((md.metric * md.metric_inv - Mat3::Identity()).norm() < 1e-10);
      CHECK(md.det == doctest::Approx(md.jacobian.determinant()));
      // Piola transforms preserve the pairing E.B J = E~.B~
      const Vec3 e(0.3, -1.2, 0.5);
      const Vec3 b(2.0, 0.1, -0.7);
      const double lhs = piola_covariant(md, e).dot(piola_contravariant(md, b)) * md.det;
      CHECK(lhs == doctest::Approx(e.dot(b)).epsilon(1e-12));
    }
  }

  TEST_CASE("volumes") {
    const auto cs = cases();
    const double L = 2 * std::numbers::pi / 1.25;
    CHECK(Mapping(cs[0].family, cs[0].params).volume() == doctest::Approx(L * L * L).epsilon(1e-13));
    CHECK(Mapping(cs[1].family, cs[1].params).volume() == doctest::Approx(L * L * L).epsilon(1e-12));
    const double r1 = 0.01 + (L - 0.01);
    CHECK(Mapping(cs[2].family, cs[2].params).volume() ==
          doctest::Approx(std::numbers::pi * (r1 * r1 - 0.01 * 0.01) * L).epsilon(1e-12));
    const double lr = L - 0.01;
    const auto sinh2 = [](double u) { return std::sinh(2 * u) / 4 - u / 2; };
    const double ell = 2 * std::numbers::pi * lr * lr * L * (sinh2(1.01) - sinh2(0.01) + 0.5);
    CHECK(Mapping(cs[3].family, cs[3].params).volume() == doctest::Approx(ell).epsilon(1e-12));
  }

  TEST_CASE("distorted with zero amplitude is bitwise cartesian") {
    MapParams p{1.3, 2.1, 0.7, 2 * std::numbers::pi, 0.0};
    const Mapping a(MapFamily::Cartesian, p);
    const Mapping b(MapFamily::Distorted, p);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const Vec3 xi(u(rng), u(rng), u(rng));
      CHECK((a.eval(xi).array() == b.eval(xi).array()).all());
      const MetricData ma = a.metric(xi);
      const MetricData mb = b.metric(xi);
      CHECK((ma.inv_transpose.array() == mb.inv_transpose.array()).all());
      CHECK(ma.det == mb.det);
    }
    CHECK(a.max_abs_det() == b.max_abs_det());
  }

  TEST_CASE("invalid parameters") {
    MapParams p;
    p.r0 = 0.0;
    CHECK_THROWS_AS(Mapping(MapFamily::Cylindrical, p), ParameterError);
    CHECK_THROWS_AS(Mapping(MapFamily::Elliptical, p), ParameterError);
    MapParams q;
    q.Lx = -1.0;
    CHECK_THROWS_AS(Mapping(MapFamily::Cartesian, q), ParameterError);
    MapParams fold{1, 1, 1, 2 * std::numbers::pi, 0.5};
    CHECK_THROWS_AS(Mapping(MapFamily::Distorted, fold), ParameterError);
    CHECK_THROWS_AS(map_family_from_string("toroidal"), ParameterError);
    CHECK(map_family_from_string("elliptical") == MapFamily::Elliptical);
  }
}
