#include "gempic/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "gempic/errors.hpp"

namespace gempic {

BlockMatrix::BlockMatrix(std::vector<std::size_t> block_sizes) : sizes_(std::move(block_sizes)) {
  for (std::size_t s : sizes_) {
    offsets_.push_back(offsets_.back() + s);
  }
  blocks_.resize(sizes_.size() * sizes_.size());
  present_.assign(sizes_.size() * sizes_.size(), false);
}

void BlockMatrix::set_block(int a, int b, CsrBlock blk) {
  if (static_cast<std::size_t>(blk.rows) != sizes_[a] ||
      static_cast<std::size_t>(blk.cols) != sizes_[b]) {
    throw ShapeError("block has wrong dimensions");
  }
  blocks_[a * num_blocks() + b] = std::move(blk);
  present_[a * num_blocks() + b] = true;
}

void BlockMatrix::multiply(const Vector& x, Vector& y) const {
  if (static_cast<std::size_t>(x.size()) != size()) {
    throw ShapeError("matrix-vector product: expected length " + std::to_string(size()) +
                     ", got " + std::to_string(x.size()));
  }
  y.setZero(size());
  const int nb = num_blocks();
  for (int a = 0; a < nb; ++a) {
    double* ya = y.data() + offsets_[a];
    for (int b = 0; b < nb; ++b) {
      if (!has_block(a, b)) {
        continue;
      }
      const CsrBlock& blk = block(a, b);
      const double* xb = x.data() + offsets_[b];
      for (int r = 0; r < blk.rows; ++r) {
        double s = 0.0;
        for (int e = blk.rowptr[r]; e < blk.rowptr[r + 1]; ++e) {
          s += blk.values[e] * xb[blk.colind[e]];
        }
        ya[r] += s;
      }
    }
  }
}

Vector BlockMatrix::operator*(const Vector& x) const {
  Vector y;
  multiply(x, y);
  return y;
}

Vector BlockMatrix::diagonal() const {
  Vector d = Vector::Zero(size());
  for (int a = 0; a < num_blocks(); ++a) {
    if (!has_block(a, a)) {
      continue;
    }
    const CsrBlock& blk = block(a, a);
    for (int r = 0; r < blk.rows; ++r) {
      for (int e = blk.rowptr[r]; e < blk.rowptr[r + 1]; ++e) {
        if (blk.colind[e] == r) {
          d[offsets_[a] + r] = blk.values[e];
        }
      }
    }
  }
  return d;
}

Vector BlockMatrix::row_sums() const {
  Vector s = Vector::Zero(size());
  for (int a = 0; a < num_blocks(); ++a) {
    for (int b = 0; b < num_blocks(); ++b) {
      if (!has_block(a, b)) {
        continue;
      }
      const CsrBlock& blk = block(a, b);
      for (int r = 0; r < blk.rows; ++r) {
        for (int e = blk.rowptr[r]; e < blk.rowptr[r + 1]; ++e) {
          s[offsets_[a] + r] += blk.values[e];
        }
      }
    }
  }
  return s;
}

std::size_t BlockMatrix::nnz() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (present_[i]) {
      n += blocks_[i].values.size();
    }
  }
  return n;
}

Eigen::MatrixXd BlockMatrix::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size(), size());
  for (int a = 0; a < num_blocks(); ++a) {
    for (int b = 0; b < num_blocks(); ++b) {
      if (!has_block(a, b)) {
        continue;
      }
      const CsrBlock& blk = block(a, b);
      for (int r = 0; r < blk.rows; ++r) {
        for (int e = blk.rowptr[r]; e < blk.rowptr[r + 1]; ++e) {
          m(offsets_[a] + r, offsets_[b] + blk.colind[e]) = blk.values[e];
        }
      }
    }
  }
  return m;
}

void BlockMatrix::write_coordinate(std::ostream& os) const {
  const auto old = os.precision(17);
  os << size() << ' ' << size() << ' ' << nnz() << '\n';
  for (int a = 0; a < num_blocks(); ++a) {
    for (int b = 0; b < num_blocks(); ++b) {
      if (!has_block(a, b)) {
        continue;
      }
      const CsrBlock& blk = block(a, b);
      for (int r = 0; r < blk.rows; ++r) {
        for (int e = blk.rowptr[r]; e < blk.rowptr[r + 1]; ++e) {
          os << offsets_[a] + r << ' ' << offsets_[b] + blk.colind[e] << ' ' << blk.values[e]
             << '\n';
        }
      }
    }
  }
  os.precision(old);
}

namespace {

int default_points(const DeRhamSequence& seq, int q) {
  if (q <= 0) {
    return seq.degree() + 1;
  }
  if (q < seq.degree() + 1) {
    throw ParameterError("quadrature needs at least p+1 points, got " + std::to_string(q));
  }
  return q;
}

int active_index(const ComponentSpace& s, int dir, int f) {
  if (dir == 0) {
    return (f >= s.lo && f < s.hi) ? f - s.lo : -1;
  }
  return f;
}

// Which active functions of two 1D factors share a cell.
struct Coupling1D {
  int nrows = 0;
  int ncols = 0;
  std::vector<std::vector<int>> cols;
  std::vector<int> pos;  // nrows x ncols, -1 if not coupled
};

Coupling1D build_coupling(const DeRhamSequence& seq, int dir, const ComponentSpace& a,
                          const ComponentSpace& b) {
  const SplineBasis1D& basis = seq.basis(dir);
  Coupling1D c;
  c.nrows = a.active_shape[dir];
  c.ncols = b.active_shape[dir];
  c.cols.resize(c.nrows);
  for (int cell = 0; cell < basis.cells(); ++cell) {
    const double mid = (cell + 0.5) / basis.cells();
    const BasisValues va = a.lower[dir] ? basis.eval_lower(mid) : basis.eval(mid);
    const BasisValues vb = b.lower[dir] ? basis.eval_lower(mid) : basis.eval(mid);
    for (int i = 0; i < va.count; ++i) {
      const int r = active_index(a, dir, basis.index(va.first, i));
      if (r < 0) {
        continue;
      }
      for (int j = 0; j < vb.count; ++j) {
        const int s = active_index(b, dir, basis.index(vb.first, j));
        if (s >= 0) {
          c.cols[r].push_back(s);
        }
      }
    }
  }
  c.pos.assign(static_cast<std::size_t>(c.nrows) * c.ncols, -1);
  for (int r = 0; r < c.nrows; ++r) {
    auto& v = c.cols[r];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (std::size_t k = 0; k < v.size(); ++k) {
      c.pos[static_cast<std::size_t>(r) * c.ncols + v[k]] = static_cast<int>(k);
    }
  }
  return c;
}

struct BlockPattern {
  std::array<Coupling1D, 3> dirs;
  CsrBlock csr;
};

BlockPattern build_pattern(const DeRhamSequence& seq, const ComponentSpace& a,
                           const ComponentSpace& b) {
  BlockPattern p;
  for (int d = 0; d < 3; ++d) {
    p.dirs[d] = build_coupling(seq, d, a, b);
  }
  CsrBlock& m = p.csr;
  m.rows = static_cast<int>(a.active_size());
  m.cols = static_cast<int>(b.active_size());
  m.rowptr.assign(m.rows + 1, 0);
  const Index3& sa = a.active_shape;
  const Index3& sb = b.active_shape;
  int row = 0;
  for (int r0 = 0; r0 < sa[0]; ++r0) {
    for (int r1 = 0; r1 < sa[1]; ++r1) {
      for (int r2 = 0; r2 < sa[2]; ++r2) {
        const auto& c0 = p.dirs[0].cols[r0];
        const auto& c1 = p.dirs[1].cols[r1];
        const auto& c2 = p.dirs[2].cols[r2];
        for (int s0 : c0) {
          for (int s1 : c1) {
            for (int s2 : c2) {
              m.colind.push_back((s0 * sb[1] + s1) * sb[2] + s2);
            }
          }
        }
        m.rowptr[row + 1] = static_cast<int>(m.colind.size());
        ++row;
      }
    }
  }
  m.values.assign(m.colind.size(), 0.0);
  return p;
}

CsrBlock transpose(const CsrBlock& a) {
  CsrBlock t;
  t.rows = a.cols;
  t.cols = a.rows;
  t.rowptr.assign(t.rows + 1, 0);
  for (int c : a.colind) {
    ++t.rowptr[c + 1];
  }
  for (int r = 0; r < t.rows; ++r) {
    t.rowptr[r + 1] += t.rowptr[r];
  }
  t.colind.resize(a.colind.size());
  t.values.resize(a.values.size());
  std::vector<int> next(t.rowptr.begin(), t.rowptr.end() - 1);
  for (int r = 0; r < a.rows; ++r) {
    for (int e = a.rowptr[r]; e < a.rowptr[r + 1]; ++e) {
      const int dst = next[a.colind[e]]++;
      t.colind[dst] = r;
      t.values[dst] = a.values[e];
    }
  }
  return t;
}

// Local tensor-product basis of one component in one cell at all quadrature points.
struct LocalBasis {
  std::array<std::vector<int>, 3> active;  // active index per local 1D function, -1 if removed
  Eigen::MatrixXd phi;                     // (q^3) x (n0*n1*n2)
};

std::string point_string(const Vec3& xi) {
  std::ostringstream os;
  os << "(" << xi[0] << ", " << xi[1] << ", " << xi[2] << ")";
  return os.str();
}

// Symmetric 3x3 weight stored as xx, yy, zz, xy, xz, yz.
constexpr std::array<std::array<int, 3>, 3> kSym = {{{0, 3, 4}, {3, 1, 5}, {4, 5, 2}}};

}  // namespace

MassOperator assemble_mass(const DeRhamSequence& seq, const Mapping& map, int form,
                           int quad_points) {
  if (form < 0 || form > 3) {
    throw ParameterError("form degree must be 0..3");
  }
  const int q = default_points(seq, quad_points);
  const QuadratureRule rule = gauss_legendre(q);
  const Index3& n = seq.cells();
  const int nc = seq.num_components(form);
  const int nq = q * q * q;
  const double cell_volume = 1.0 / (static_cast<double>(n[0]) * n[1] * n[2]);
  const std::size_t ncells = static_cast<std::size_t>(n[0]) * n[1] * n[2];
  const int nw = nc == 1 ? 1 : 6;

  // Metric weights at every quadrature point (times quadrature weight and cell volume).
  std::vector<double> weights(ncells * nq * nw);
  std::array<bool, 6> nonzero{};
  for (int c0 = 0; c0 < n[0]; ++c0) {
    for (int c1 = 0; c1 < n[1]; ++c1) {
      for (int c2 = 0; c2 < n[2]; ++c2) {
        const std::size_t cell = (static_cast<std::size_t>(c0) * n[1] + c1) * n[2] + c2;
        int iq = 0;
        for (int a = 0; a < q; ++a) {
          for (int b = 0; b < q; ++b) {
            for (int c = 0; c < q; ++c, ++iq) {
              const Vec3 xi((c0 + rule.nodes[a]) / n[0], (c1 + rule.nodes[b]) / n[1],
                            (c2 + rule.nodes[c]) / n[2]);
              const Mat3 jac = map.jacobian(xi);
              const double det = jac.determinant();
              if (!(std::abs(det) >= 1e-12)) {
                throw SingularityError("near-singular Jacobian (|J| = " +
                                       std::to_string(std::abs(det)) + ") at xi = " +
                                       point_string(xi));
              }
              const double qw = rule.weights[a] * rule.weights[b] * rule.weights[c] * cell_volume;
              double* w = &weights[(cell * nq + iq) * nw];
              if (form == 0) {
                w[0] = std::abs(det) * qw;
              } else if (form == 3) {
                w[0] = qw / std::abs(det);
              } else {
                const MetricData md = metric_from_jacobian(jac);
                const Mat3 m = form == 1 ? Mat3(md.metric_inv * std::abs(det))
                                         : Mat3(md.metric / std::abs(det));
                w[0] = m(0, 0) * qw;
                w[1] = m(1, 1) * qw;
                w[2] = m(2, 2) * qw;
                w[3] = m(0, 1) * qw;
                w[4] = m(0, 2) * qw;
                w[5] = m(1, 2) * qw;
              }
              for (int k = 0; k < nw; ++k) {
                if (w[k] != 0.0) {
                  nonzero[k] = true;
                }
              }
            }
          }
        }
      }
    }
  }

  std::vector<std::size_t> sizes;
  for (int c = 0; c < nc; ++c) {
    sizes.push_back(seq.component(form, c).active_size());
  }
  MassOperator op;
  op.form = form;
  op.quad_points = q;
  op.matrix = BlockMatrix(sizes);

  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < nc; ++a) {
    for (int b = a; b < nc; ++b) {
      const int slot = nc == 1 ? 0 : kSym[a][b];
      if (nonzero[slot]) {
        pairs.emplace_back(a, b);
      }
    }
  }
  std::vector<BlockPattern> patterns;
  for (auto [a, b] : pairs) {
    patterns.push_back(build_pattern(seq, seq.component(form, a), seq.component(form, b)));
  }

  // 1D basis values at the quadrature nodes of every cell, both degrees.
  std::array<std::array<std::vector<BasisValues>, 2>, 3> tab;
  for (int d = 0; d < 3; ++d) {
    const SplineBasis1D& basis = seq.basis(d);
    for (int low = 0; low < 2; ++low) {
      auto& t = tab[d][low];
      t.resize(static_cast<std::size_t>(n[d]) * q);
      for (int c = 0; c < n[d]; ++c) {
        for (int k = 0; k < q; ++k) {
          const double x = (c + rule.nodes[k]) / n[d];
          t[c * q + k] = low ? basis.eval_lower(x) : basis.eval(x);
        }
      }
    }
  }

  std::vector<LocalBasis> local(nc);
  Eigen::MatrixXd scaled;
  Eigen::MatrixXd block;
  for (int c0 = 0; c0 < n[0]; ++c0) {
    for (int c1 = 0; c1 < n[1]; ++c1) {
      for (int c2 = 0; c2 < n[2]; ++c2) {
        const std::size_t cell = (static_cast<std::size_t>(c0) * n[1] + c1) * n[2] + c2;
        const std::array<int, 3> cc = {c0, c1, c2};
        for (int comp = 0; comp < nc; ++comp) {
          const ComponentSpace& s = seq.component(form, comp);
          LocalBasis& lb = local[comp];
          std::array<int, 3> cnt{};
          for (int d = 0; d < 3; ++d) {
            const BasisValues& v0 = tab[d][s.lower[d]][cc[d] * q];
            cnt[d] = v0.count;
            lb.active[d].resize(v0.count);
            for (int i = 0; i < v0.count; ++i) {
              lb.active[d][i] = active_index(s, d, seq.basis(d).index(v0.first, i));
            }
          }
          lb.phi.resize(nq, cnt[0] * cnt[1] * cnt[2]);
          int iq = 0;
          for (int a = 0; a < q; ++a) {
            const BasisValues& va = tab[0][s.lower[0]][cc[0] * q + a];
            for (int b = 0; b < q; ++b) {
              const BasisValues& vb = tab[1][s.lower[1]][cc[1] * q + b];
              for (int c = 0; c < q; ++c, ++iq) {
                const BasisValues& vc = tab[2][s.lower[2]][cc[2] * q + c];
                int col = 0;
                for (int i = 0; i < cnt[0]; ++i) {
                  for (int j = 0; j < cnt[1]; ++j) {
                    const double vij = va.values[i] * vb.values[j];
                    for (int k = 0; k < cnt[2]; ++k) {
                      lb.phi(iq, col++) = vij * vc.values[k];
                    }
                  }
                }
              }
            }
          }
        }

        for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
          const auto [a, b] = pairs[pi];
          const int slot = nc == 1 ? 0 : kSym[a][b];
          const LocalBasis& la = local[a];
          const LocalBasis& lb = local[b];
          scaled = lb.phi;
          for (int iq = 0; iq < nq; ++iq) {
            scaled.row(iq) *= weights[(cell * nq + iq) * nw + slot];
          }
          block.noalias() = la.phi.transpose() * scaled;
          if (a == b) {
            block = 0.5 * (block + block.transpose()).eval();
          }
          BlockPattern& pat = patterns[pi];
          CsrBlock& csr = pat.csr;
          const ComponentSpace& sa = seq.component(form, a);
          const int na1 = static_cast<int>(la.active[1].size());
          const int na2 = static_cast<int>(la.active[2].size());
          const int nb1 = static_cast<int>(lb.active[1].size());
          const int nb2 = static_cast<int>(lb.active[2].size());
          for (int i = 0; i < block.rows(); ++i) {
            const int i0 = i / (na1 * na2);
            const int i1 = (i / na2) % na1;
            const int i2 = i % na2;
            const int r0 = la.active[0][i0];
            if (r0 < 0) {
              continue;
            }
            const int r1 = la.active[1][i1];
            const int r2 = la.active[2][i2];
            const int row = (r0 * sa.active_shape[1] + r1) * sa.active_shape[2] + r2;
            const int len1 = static_cast<int>(pat.dirs[1].cols[r1].size());
            const int len2 = static_cast<int>(pat.dirs[2].cols[r2].size());
            for (int j = 0; j < block.cols(); ++j) {
              const int j0 = j / (nb1 * nb2);
              const int j1 = (j / nb2) % nb1;
              const int j2 = j % nb2;
              const int s0 = lb.active[0][j0];
              if (s0 < 0) {
                continue;
              }
              const int s1 = lb.active[1][j1];
              const int s2 = lb.active[2][j2];
              const int k0 = pat.dirs[0].pos[static_cast<std::size_t>(r0) * pat.dirs[0].ncols + s0];
              const int k1 = pat.dirs[1].pos[static_cast<std::size_t>(r1) * pat.dirs[1].ncols + s1];
              const int k2 = pat.dirs[2].pos[static_cast<std::size_t>(r2) * pat.dirs[2].ncols + s2];
              csr.values[csr.rowptr[row] + (k0 * len1 + k1) * len2 + k2] += block(i, j);
            }
          }
        }
      }
    }
  }

  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto [a, b] = pairs[pi];
    if (a != b) {
      op.matrix.set_block(b, a, transpose(patterns[pi].csr));
    }
    op.matrix.set_block(a, b, std::move(patterns[pi].csr));
  }
  return op;
}

double BoundaryMatrix::max_abs() const {
  double m = 0.0;
  for (const auto& t : entries) {
    m = std::max(m, std::abs(t.value));
  }
  return m;
}

Vector BoundaryMatrix::multiply(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != cols) {
    throw ShapeError("boundary matrix product: wrong length");
  }
  Vector y = Vector::Zero(rows);
  for (const auto& t : entries) {
    y[t.row] += t.value * x[t.col];
  }
  return y;
}

namespace {

// Active global index of the basis function (k, c) with local offsets into the point basis.
long active_global(const DeRhamSequence& seq, int k, int c, int f0, int f1, int f2) {
  const ComponentSpace& s = seq.component(k, c);
  if (f0 < s.lo || f0 >= s.hi) {
    return -1;
  }
  return static_cast<long>(s.offset) +
         (static_cast<long>(f0 - s.lo) * s.active_shape[1] + f1) * s.active_shape[2] + f2;
}

template <class Fn>
void for_each_function(const DeRhamSequence& seq, int k, int c, const PointBasis& pb, Fn&& fn) {
  const ComponentSpace& s = seq.component(k, c);
  const BasisValues& b0 = pb.get(0, s.lower[0]);
  const BasisValues& b1 = pb.get(1, s.lower[1]);
  const BasisValues& b2 = pb.get(2, s.lower[2]);
  for (int i = 0; i < b0.count; ++i) {
    for (int j = 0; j < b1.count; ++j) {
      for (int l = 0; l < b2.count; ++l) {
        const long g = active_global(seq, k, c, b0.first + i, seq.basis(1).index(b1.first, j),
                                     seq.basis(2).index(b2.first, l));
        if (g >= 0) {
          fn(g, b0.values[i] * b1.values[j] * b2.values[l]);
        }
      }
    }
  }
}

}  // namespace

BoundaryMatrices assemble_boundary_matrices(const DeRhamSequence& seq, const Mapping& map,
                                            int quad_points) {
  const int q = default_points(seq, quad_points);
  const QuadratureRule rule = gauss_legendre(q);
  const Index3& n = seq.cells();
  const double face_area = 1.0 / (static_cast<double>(n[1]) * n[2]);
  std::map<std::pair<long, long>, double> m1;
  std::map<std::pair<long, long>, double> m0;
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? -1.0 : 1.0;
    for (int c1 = 0; c1 < n[1]; ++c1) {
      for (int c2 = 0; c2 < n[2]; ++c2) {
        for (int a = 0; a < q; ++a) {
          for (int b = 0; b < q; ++b) {
            const Vec3 xi(side, (c1 + rule.nodes[a]) / n[1], (c2 + rule.nodes[b]) / n[2]);
            const MetricData md = map.metric(xi);
            const double w = sign * rule.weights[a] * rule.weights[b] * face_area;
            const PointBasis pb = seq.point_basis(xi);
            const Mat3& t = md.jacobian;
            const Mat3& nn = md.inv_transpose;
            // 1-form matrix: rows from components 2 and 3 of the 1-form.
            for (int rc = 1; rc < 3; ++rc) {
              const int other = rc == 1 ? 2 : 1;
              const double rs = rc == 1 ? -1.0 : 1.0;
              for (int cc = 0; cc < 3; ++cc) {
                const double coef = w * rs * t.col(other).dot(t.col(cc)) / md.det;
                if (coef == 0.0) {
                  continue;
                }
                for_each_function(seq, 1, rc, pb, [&](long gi, double vi) {
                  if (vi == 0.0) {
                    return;
                  }
                  for_each_function(seq, 2, cc, pb, [&](long gj, double vj) {
                    if (vj != 0.0) {
                      m1[{gi, gj}] += coef * vi * vj;
                    }
                  });
                });
              }
            }
            // 0-form matrix.
            for (int cc = 0; cc < 3; ++cc) {
              const double coef = w * nn.col(0).dot(nn.col(cc)) * std::abs(md.det);
              if (coef == 0.0) {
                continue;
              }
              for_each_function(seq, 0, 0, pb, [&](long gi, double vi) {
                if (vi == 0.0) {
                  return;
                }
                for_each_function(seq, 1, cc, pb, [&](long gj, double vj) {
                  if (vj != 0.0) {
                    m0[{gi, gj}] += coef * vi * vj;
                  }
                });
              });
            }
          }
        }
      }
    }
  }
  BoundaryMatrices out;
  out.one_form.kind = BoundaryMatrix::Kind::OneForm;
  out.one_form.rows = seq.dim(1);
  out.one_form.cols = seq.dim(2);
  for (const auto& [key, v] : m1) {
    out.one_form.entries.push_back({static_cast<std::size_t>(key.first),
                                    static_cast<std::size_t>(key.second), v});
  }
  out.zero_form.kind = BoundaryMatrix::Kind::ZeroForm;
  out.zero_form.rows = seq.dim(0);
  out.zero_form.cols = seq.dim(1);
  for (const auto& [key, v] : m0) {
    out.zero_form.entries.push_back({static_cast<std::size_t>(key.first),
                                     static_cast<std::size_t>(key.second), v});
  }
  return out;
}

Vector lumped_diagonal(const MassOperator& m, double floor) {
  Vector s = m.matrix.row_sums();
  if (floor < 0.0) {
    floor = 1e-10 * s.maxCoeff();
  }
  for (auto& v : s) {
    v = std::max(v, floor);
  }
  return s;
}

namespace {

template <class Body>
void quadrature_loop(const DeRhamSequence& seq, int q, Body&& body) {
  const QuadratureRule rule = gauss_legendre(q);
  const Index3& n = seq.cells();
  const double cell_volume = 1.0 / (static_cast<double>(n[0]) * n[1] * n[2]);
  for (int c0 = 0; c0 < n[0]; ++c0) {
    for (int c1 = 0; c1 < n[1]; ++c1) {
      for (int c2 = 0; c2 < n[2]; ++c2) {
        for (int a = 0; a < q; ++a) {
          for (int b = 0; b < q; ++b) {
            for (int c = 0; c < q; ++c) {
              const Vec3 xi((c0 + rule.nodes[a]) / n[0], (c1 + rule.nodes[b]) / n[1],
                            (c2 + rule.nodes[c]) / n[2]);
              body(xi, rule.weights[a] * rule.weights[b] * rule.weights[c] * cell_volume);
            }
          }
        }
      }
    }
  }
}

}  // namespace

Vector assemble_load_scalar(const DeRhamSequence& seq, const Mapping& map, int form,
                            const ScalarField& f, int quad_points) {
  if (form != 0 && form != 3) {
    throw ParameterError("scalar load vectors exist for forms 0 and 3");
  }
  const int q = default_points(seq, quad_points);
  Vector full = Vector::Zero(seq.full_dim(form));
  quadrature_loop(seq, q, [&](const Vec3& xi, double w) {
    const double det = map.det(xi);
    const double val = f(map.eval(xi)) * (form == 0 ? std::abs(det) : (det > 0 ? 1.0 : -1.0));
    seq.scatter_component_full(form, 0, seq.point_basis(xi), w * val, full.data());
  });
  return seq.restrict_to_active(form, full);
}

Vector assemble_load_vector(const DeRhamSequence& seq, const Mapping& map, int form,
                            const VectorField& f, int quad_points) {
  if (form != 1 && form != 2) {
    throw ParameterError("vector load vectors exist for forms 1 and 2");
  }
  const int q = default_points(seq, quad_points);
  Vector full = Vector::Zero(seq.full_dim(form));
  quadrature_loop(seq, q, [&](const Vec3& xi, double w) {
    const MetricData md = map.metric(xi);
    const Vec3 v = f(map.eval(xi));
    const Vec3 pulled = form == 1
                            ? Vec3(md.inv_transpose.transpose() * v * std::abs(md.det))
                            : Vec3(md.jacobian.transpose() * v * (md.det > 0 ? 1.0 : -1.0));
    const PointBasis pb = seq.point_basis(xi);
    for (int c = 0; c < 3; ++c) {
      seq.scatter_component_full(form, c, pb, w * pulled[c], full.data());
    }
  });
  return seq.restrict_to_active(form, full);
}

}  // namespace gempic
