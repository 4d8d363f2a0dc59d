#include "gempic/mapping.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "gempic/errors.hpp"
#include "gempic/splines.hpp"

namespace gempic {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool radial(MapFamily f) { return f == MapFamily::Cylindrical || f == MapFamily::Elliptical; }

}  // namespace

std::string_view to_string(MapFamily family) {
  switch (family) {
    case MapFamily::Cartesian:
      return "cartesian";
    case MapFamily::Distorted:
      return "distorted";
    case MapFamily::Cylindrical:
      return "cylindrical";
    case MapFamily::Elliptical:
      return "elliptical";
  }
  return "unknown";
}

MapFamily map_family_from_string(std::string_view name) {
  for (MapFamily f : {MapFamily::Cartesian, MapFamily::Distorted, MapFamily::Cylindrical,
                      MapFamily::Elliptical}) {
    if (name == to_string(f)) {
      return f;
    }
  }
  throw ParameterError("unknown map family '" + std::string(name) + "'");
}

Mapping::Mapping(MapFamily family, const MapParams& params) : family_(family), params_(params) {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      std::ostringstream os;
      os << "map parameter " << name << " must be positive, got " << v;
      throw ParameterError(os.str());
    }
  };
  positive(params.Lz, "Lz");
  if (radial(family)) {
    positive(params.r0, "r0");
    positive(params.Lr, "Lr");
  } else {
    positive(params.Lx, "Lx");
    positive(params.Ly, "Ly");
  }
  if (!std::isfinite(params.epsilon) || !std::isfinite(params.Lp)) {
    throw ParameterError("map parameters epsilon and Lp must be finite");
  }

  // Sign-definiteness of J is checked on a lattice including the faces.
  constexpr int kSamples = 9;
  int sign = 0;
  for (int i = 0; i < kSamples; ++i) {
    for (int j = 0; j < kSamples; ++j) {
      for (int k = 0; k < 3; ++k) {
        const Vec3 xi(static_cast<double>(i) / (kSamples - 1),
                      static_cast<double>(j) / (kSamples - 1), 0.5 * k);
        const double d = det(xi);
        if (!std::isfinite(d) || std::abs(d) < 1e-14) {
          std::ostringstream os;
          os << "map is singular at xi=(" << xi[0] << ", " << xi[1] << ", " << xi[2]
             << "), J=" << d;
          throw ParameterError(os.str());
        }
        const int s = d > 0 ? 1 : -1;
        if (sign == 0) {
          sign = s;
        } else if (s != sign) {
          throw ParameterError("Jacobian determinant changes sign over the domain");
        }
      }
    }
  }
  orientation_ = sign;

  // |J| does not depend on xi3 for any family; integrate over (xi1, xi2).
  const QuadratureRule q = gauss_legendre(8);
  constexpr int kCells = 16;
  double vol = 0.0;
  double mx = 0.0;
  for (int c1 = 0; c1 < kCells; ++c1) {
    for (int c2 = 0; c2 < kCells; ++c2) {
      for (std::size_t a = 0; a < q.nodes.size(); ++a) {
        for (std::size_t b = 0; b < q.nodes.size(); ++b) {
          const Vec3 xi((c1 + q.nodes[a]) / kCells, (c2 + q.nodes[b]) / kCells, 0.5);
          const double d = std::abs(det(xi));
          vol += q.weights[a] * q.weights[b] * d;
          mx = std::max(mx, d);
        }
      }
    }
  }
  for (int i = 0; i <= 64; ++i) {
    for (int j = 0; j <= 64; ++j) {
      mx = std::max(mx, std::abs(det(Vec3(i / 64.0, j / 64.0, 0.0))));
    }
  }
  volume_ = vol / (kCells * kCells);
  max_abs_det_ = mx;
}

Vec3 Mapping::eval(const Vec3& xi) const {
  const MapParams& p = params_;
  switch (family_) {
    case MapFamily::Cartesian:
      return {p.Lx * xi[0], p.Ly * xi[1], p.Lz * xi[2]};
    case MapFamily::Distorted: {
      const double s = p.epsilon * std::sin(p.Lp * xi[0]) * std::sin(kTwoPi * xi[1]);
      return {p.Lx * (xi[0] + s), p.Ly * (xi[1] + s), p.Lz * xi[2]};
    }
    case MapFamily::Cylindrical: {
      const double r = p.r0 + p.Lr * xi[0];
      return {r * std::cos(kTwoPi * xi[1]), r * std::sin(kTwoPi * xi[1]), p.Lz * xi[2]};
    }
    case MapFamily::Elliptical: {
      const double u = xi[0] + p.r0;
      return {p.Lr * std::cosh(u) * std::cos(kTwoPi * xi[1]),
              p.Lr * std::sinh(u) * std::sin(kTwoPi * xi[1]), p.Lz * xi[2]};
    }
  }
  return Vec3::Zero();
}

Mat3 Mapping::jacobian(const Vec3& xi) const {
  const MapParams& p = params_;
  Mat3 m = Mat3::Zero();
  switch (family_) {
    case MapFamily::Cartesian:
      // Written through the distorted formula with zero amplitude so both
      // families share one arithmetic path.
    case MapFamily::Distorted: {
      const double eps = family_ == MapFamily::Cartesian ? 0.0 : p.epsilon;
      const double s1 = std::sin(p.Lp * xi[0]);
      const double c1 = std::cos(p.Lp * xi[0]);
      const double s2 = std::sin(kTwoPi * xi[1]);
      const double c2 = std::cos(kTwoPi * xi[1]);
      const double d1 = eps * p.Lp * c1 * s2;
      const double d2 = eps * s1 * kTwoPi * c2;
      m(0, 0) = p.Lx * (1.0 + d1);
      m(0, 1) = p.Lx * d2;
      m(1, 0) = p.Ly * d1;
      m(1, 1) = p.Ly * (1.0 + d2);
      m(2, 2) = p.Lz;
      break;
    }
    case MapFamily::Cylindrical: {
      const double r = p.r0 + p.Lr * xi[0];
      const double c = std::cos(kTwoPi * xi[1]);
      const double s = std::sin(kTwoPi * xi[1]);
      m(0, 0) = p.Lr * c;
      m(0, 1) = -kTwoPi * r * s;
      m(1, 0) = p.Lr * s;
      m(1, 1) = kTwoPi * r * c;
      m(2, 2) = p.Lz;
      break;
    }
    case MapFamily::Elliptical: {
      const double u = xi[0] + p.r0;
      const double c = std::cos(kTwoPi * xi[1]);
      const double s = std::sin(kTwoPi * xi[1]);
      m(0, 0) = p.Lr * std::sinh(u) * c;
      m(0, 1) = -kTwoPi * p.Lr * std::cosh(u) * s;
      m(1, 0) = p.Lr * std::cosh(u) * s;
      m(1, 1) = kTwoPi * p.Lr * std::sinh(u) * c;
      m(2, 2) = p.Lz;
      break;
    }
  }
  return m;
}

MetricData metric_from_jacobian(const Mat3& jacobian) {
  MetricData m;
  m.jacobian = jacobian;
  m.det = jacobian.determinant();
  if (!(std::abs(m.det) > 0.0) || !std::isfinite(m.det)) {
    throw SingularityError("Jacobian determinant vanishes");
  }
  const Mat3 inv = jacobian.inverse();
  m.inv_transpose = inv.transpose();
  m.metric = jacobian.transpose() * jacobian;
  m.metric_inv = inv * inv.transpose();
  return m;
}

MetricData Mapping::metric(const Vec3& xi) const { return metric_from_jacobian(jacobian(xi)); }

Mapping builtin_map(MapFamily family, const MapParams& params) { return Mapping(family, params); }

Vec3 piola_covariant(const MetricData& m, const Vec3& v) { return m.inv_transpose * v; }

Vec3 piola_contravariant(const MetricData& m, const Vec3& v) {
  return m.jacobian * v / m.det;
}

}  // namespace gempic
