#pragma once

#include <array>
#include <span>
#include <vector>

#include "gempic/splines.hpp"
#include "gempic/types.hpp"

namespace gempic {

// One vector component of a discrete k-form space. lower[d] selects the
// degree p-1 companion basis along direction d. Coefficients are stored on
// the full tensor grid full_shape; the active subset differs from it only
// along direction 0, where it is the contiguous range [lo, hi).
struct ComponentSpace {
  std::array<bool, 3> lower{};
  int lo = 0;
  int hi = 0;
  Index3 active_shape{};
  std::size_t offset = 0;  // position in the active vector
  std::size_t active_size() const {
    return static_cast<std::size_t>(active_shape[0]) * active_shape[1] * active_shape[2];
  }
};

// Basis values of the degree p and p-1 bases in all three directions at one point.
struct PointBasis {
  std::array<BasisValues, 3> upper;
  std::array<BasisValues, 3> lower;
  const BasisValues& get(int dir, bool low) const { return low ? lower[dir] : upper[dir]; }
};

// Discrete 3D de Rham complex on the logical cube with direction 0 clamped
// and directions 1 and 2 periodic. With pec the tangential 1-form and
// normal 2-form traces (and the 0-form trace) vanish on the xi1 faces.
class DeRhamSequence {
 public:
  DeRhamSequence(int degree, Index3 cells, bool pec);

  int degree() const { return degree_; }
  const Index3& cells() const { return cells_; }
  bool pec() const { return pec_; }
  const SplineBasis1D& basis(int dir) const { return bases_[dir]; }

  const Index3& full_shape() const { return full_shape_; }
  std::size_t full_component_size() const {
    return static_cast<std::size_t>(full_shape_[0]) * full_shape_[1] * full_shape_[2];
  }

  int num_components(int k) const { return (k == 1 || k == 2) ? 3 : 1; }
  const ComponentSpace& component(int k, int c) const { return spaces_[k][c]; }
  std::size_t dim(int k) const { return dims_[k]; }
  std::size_t full_dim(int k) const { return num_components(k) * full_component_size(); }

  // Active <-> full coefficient layouts. embed fills removed slots with zero.
  Vector embed(int k, const Vector& active) const;
  Vector restrict_to_active(int k, const Vector& full) const;
  void embed_into(int k, const Vector& active, std::span<double> full) const;

  // Exterior derivative matrices acting on active coefficient vectors.
  Vector grad(const Vector& x) const;
  Vector curl(const Vector& x) const;
  Vector div(const Vector& x) const;
  Vector grad_transpose(const Vector& y) const;
  Vector curl_transpose(const Vector& y) const;
  Vector div_transpose(const Vector& y) const;

  // Same operators on full layouts.
  void grad_full(std::span<const double> x, std::span<double> y) const;
  void curl_full(std::span<const double> x, std::span<double> y) const;
  void div_full(std::span<const double> x, std::span<double> y) const;
  void grad_transpose_full(std::span<const double> y, std::span<double> x) const;
  void curl_transpose_full(std::span<const double> y, std::span<double> x) const;

  PointBasis point_basis(const Vec3& xi) const;

  // Value of component c of a k-form with full-layout coefficients.
  double eval_component_full(int k, int c, const PointBasis& pb, const double* full) const;
  // full[c] += weight * basis functions of component c at the point.
  void scatter_component_full(int k, int c, const PointBasis& pb, double weight,
                              double* full) const;

  // Logical-space values of a k-form with active coefficients. Scalars use [0].
  Vec3 eval_form(int k, const Vector& coeffs, const Vec3& xi) const;

  // Full-layout index of (i0, i1, i2) within one component.
  std::size_t flat(int i0, int i1, int i2) const {
    return (static_cast<std::size_t>(i0) * full_shape_[1] + i1) * full_shape_[2] + i2;
  }

 private:
  void check_size(const Vector& v, std::size_t n, const char* what) const;
  void apply_axis(int axis, bool transpose, const double* x, double* y, double alpha) const;

  int degree_;
  Index3 cells_;
  bool pec_;
  std::vector<SplineBasis1D> bases_;
  Index3 full_shape_{};
  std::array<std::array<ComponentSpace, 3>, 4> spaces_{};
  std::array<std::size_t, 4> dims_{};
};

DeRhamSequence build_derham(int degree, Index3 cells, bool pec);

}  // namespace gempic
