#pragma once

#include <string>
#include <string_view>

#include "gempic/types.hpp"

namespace gempic {

enum class MapFamily { Cartesian, Distorted, Cylindrical, Elliptical };

std::string_view to_string(MapFamily family);
MapFamily map_family_from_string(std::string_view name);

struct MapParams {
  double Lx = 1.0;
  double Ly = 1.0;
  double Lz = 1.0;
  double Lp = 2.0 * 3.14159265358979323846;
  double epsilon = 0.0;
  double r0 = 0.5;
  double Lr = 1.0;
};

// Pointwise metric data of the map at one logical point.
struct MetricData {
  Mat3 jacobian;       // DF
  Mat3 inv_transpose;  // N = DF^{-T}
  Mat3 metric;         // G = DF^T DF
  Mat3 metric_inv;     // G^{-1}
  double det = 0.0;    // J
};

// Smooth map from the logical cube [0,1]^3 to physical space.
class Mapping {
 public:
  Mapping(MapFamily family, const MapParams& params);

  MapFamily family() const { return family_; }
  const MapParams& params() const { return params_; }

  Vec3 eval(const Vec3& xi) const;
  Mat3 jacobian(const Vec3& xi) const;
  MetricData metric(const Vec3& xi) const;
  double det(const Vec3& xi) const { return jacobian(xi).determinant(); }

  // Sign of J over the domain (+1 or -1).
  int orientation() const { return orientation_; }
  // Largest |J| over a sample lattice; used by rejection sampling.
  double max_abs_det() const { return max_abs_det_; }
  // Integral of |J| over the logical cube.
  double volume() const { return volume_; }

 private:
  MapFamily family_;
  MapParams params_;
  int orientation_ = 1;
  double max_abs_det_ = 0.0;
  double volume_ = 0.0;
};

Mapping builtin_map(MapFamily family, const MapParams& params);

MetricData metric_from_jacobian(const Mat3& jacobian);

// E = N E~ for 1-forms, B = DF B~ / J for 2-forms.
Vec3 piola_covariant(const MetricData& m, const Vec3& v);
Vec3 piola_contravariant(const MetricData& m, const Vec3& v);

}  // namespace gempic
