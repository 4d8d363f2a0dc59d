#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "gempic/derham.hpp"
#include "gempic/mapping.hpp"
#include "gempic/types.hpp"

namespace gempic {

struct CsrBlock {
  int rows = 0;
  int cols = 0;
  std::vector<int> rowptr;
  std::vector<int> colind;
  std::vector<double> values;
};

// Square matrix split into component blocks; absent blocks are zero.
class BlockMatrix {
 public:
  BlockMatrix() = default;
  explicit BlockMatrix(std::vector<std::size_t> block_sizes);

  int num_blocks() const { return static_cast<int>(sizes_.size()); }
  std::size_t size() const { return offsets_.back(); }
  std::size_t block_size(int a) const { return sizes_[a]; }
  std::size_t block_offset(int a) const { return offsets_[a]; }

  bool has_block(int a, int b) const { return present_[a * num_blocks() + b]; }
  const CsrBlock& block(int a, int b) const { return blocks_[a * num_blocks() + b]; }
  void set_block(int a, int b, CsrBlock blk);

  void multiply(const Vector& x, Vector& y) const;
  Vector operator*(const Vector& x) const;
  Vector diagonal() const;
  Vector row_sums() const;
  std::size_t nnz() const;
  Eigen::MatrixXd dense() const;

  // One "row col value" line per stored entry, 0-based, preceded by a size line.
  void write_coordinate(std::ostream& os) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_{0};
  std::vector<CsrBlock> blocks_;
  std::vector<bool> present_;
};

struct MassOperator {
  int form = 0;
  int quad_points = 0;
  BlockMatrix matrix;
  std::size_t size() const { return matrix.size(); }
  Vector operator*(const Vector& x) const { return matrix * x; }
};

// Gauss-Legendre tensor quadrature of the metric-weighted Gram matrices.
// quad_points <= 0 selects p+1.
MassOperator assemble_mass(const DeRhamSequence& seq, const Mapping& map, int form,
                           int quad_points = 0);

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

struct BoundaryMatrix {
  enum class Kind { ZeroForm, OneForm };
  Kind kind = Kind::OneForm;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Triplet> entries;

  double max_abs() const;
  Vector multiply(const Vector& x) const;
  double bilinear(const Vector& left, const Vector& right) const { return left.dot(multiply(right)); }
};

struct BoundaryMatrices {
  BoundaryMatrix zero_form;  // rows: 0-form dofs, cols: 1-form dofs
  BoundaryMatrix one_form;   // rows: 1-form dofs, cols: 2-form dofs
};

BoundaryMatrices assemble_boundary_matrices(const DeRhamSequence& seq, const Mapping& map,
                                            int quad_points = 0);

// Row sums of M clamped below by floor; floor < 0 selects 1e-10 * max row sum.
Vector lumped_diagonal(const MassOperator& m, double floor = -1.0);

using ScalarField = std::function<double(const Vec3& x)>;
using VectorField = std::function<Vec3(const Vec3& x)>;

// Right-hand sides of L2 projections of physical fields (functions of the
// physical position) into the discrete spaces.
//   k=0: int Lambda0_i f |J|            k=3: int Lambda3_i f sign(J)
//   k=1: int Lambda1_i . N^T A |J|      k=2: int Lambda2_i . DF^T B sign(J)
Vector assemble_load_scalar(const DeRhamSequence& seq, const Mapping& map, int form,
                            const ScalarField& f, int quad_points = 0);
Vector assemble_load_vector(const DeRhamSequence& seq, const Mapping& map, int form,
                            const VectorField& f, int quad_points = 0);

}  // namespace gempic
