#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace gempic {

enum class BoundaryKind { Clamped, Periodic };

inline constexpr int kMaxDegree = 7;

// Nonzero basis values at one point. values[k] belongs to full index
// SplineBasis1D::index(first, k).
struct BasisValues {
  int first = 0;
  int count = 0;
  std::array<double, kMaxDegree + 1> values{};
};

// Sparse 1D derivative operator mapping degree p coefficients to the
// coefficients of the degree p-1 companion basis.
class DerivativeMatrix1D {
 public:
  struct Entry {
    int row;
    int col;
    double value;
  };

  DerivativeMatrix1D() = default;
  DerivativeMatrix1D(int rows, int cols, std::vector<Entry> entries);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::span<const Entry> entries() const { return entries_; }

  void apply(std::span<const double> x, std::span<double> y) const;
  void apply_transpose(std::span<const double> y, std::span<double> x) const;
  Eigen::MatrixXd dense() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Entry> entries_;
};

// Uniform B-spline basis of degree p on [0,1] with N cells.
// Clamped: N+p functions. Periodic: N functions.
// The companion basis of degree p-1 shares the index range: clamped has N+p
// slots with slot 0 identically zero, periodic has N.
class SplineBasis1D {
 public:
  SplineBasis1D(int degree, int cells, BoundaryKind boundary);

  int degree() const { return degree_; }
  int cells() const { return cells_; }
  BoundaryKind boundary() const { return boundary_; }
  bool periodic() const { return boundary_ == BoundaryKind::Periodic; }
  int size() const { return periodic() ? cells_ : cells_ + degree_; }
  double spacing() const { return 1.0 / cells_; }

  // Knot sequence t_{1-p} .. t_{N+p}; only meaningful for clamped bases.
  std::span<const double> knots() const { return knots_; }

  int cell_of(double xi) const;
  int index(int first, int k) const {
    int a = first + k;
    if (periodic()) {
      a %= cells_;
    }
    return a;
  }

  BasisValues eval(double xi) const { return eval_degree(xi, degree_); }
  BasisValues eval_lower(double xi) const { return eval_degree(xi, degree_ - 1); }
  // deg must be degree() or degree()-1.
  BasisValues eval_degree(double xi, int deg) const;

  // Dense vector of all basis values (test and debugging helper).
  Eigen::VectorXd dense_values(double xi, bool lower) const;

  const DerivativeMatrix1D& derivative() const { return derivative_; }

 private:
  int degree_;
  int cells_;
  BoundaryKind boundary_;
  std::vector<double> knots_;
  std::vector<double> ext_;  // knot array indexed like the NURBS-book U
  DerivativeMatrix1D derivative_;
};

SplineBasis1D build_basis(int degree, int cells, BoundaryKind boundary);

struct QuadratureRule {
  std::vector<double> nodes;    // on [0,1]
  std::vector<double> weights;  // sum to 1
};

QuadratureRule gauss_legendre(int points);

}  // namespace gempic
