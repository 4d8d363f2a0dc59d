#include "gempic/derham.hpp"

#include <string>

#include "gempic/errors.hpp"

namespace gempic {

namespace {

constexpr std::array<std::array<std::array<bool, 3>, 3>, 4> kLowerPattern = {{
    {{{false, false, false}}},
    {{{true, false, false}, {false, true, false}, {false, false, true}}},
    {{{false, true, true}, {true, false, true}, {true, true, false}}},
    {{{true, true, true}}},
}};

}  // namespace

DeRhamSequence::DeRhamSequence(int degree, Index3 cells, bool pec)
    : degree_(degree), cells_(cells), pec_(pec) {
  bases_.emplace_back(degree, cells[0], BoundaryKind::Clamped);
  bases_.emplace_back(degree, cells[1], BoundaryKind::Periodic);
  bases_.emplace_back(degree, cells[2], BoundaryKind::Periodic);
  for (int d = 0; d < 3; ++d) {
    full_shape_[d] = bases_[d].size();
  }
  for (int k = 0; k < 4; ++k) {
    std::size_t offset = 0;
    for (int c = 0; c < num_components(k); ++c) {
      ComponentSpace& s = spaces_[k][c];
      s.lower = kLowerPattern[k][c];
      const int n0 = full_shape_[0];
      if (s.lower[0]) {
        s.lo = 1;
        s.hi = n0;
      } else if (pec) {
        s.lo = 1;
        s.hi = n0 - 1;
      } else {
        s.lo = 0;
        s.hi = n0;
      }
      s.active_shape = {s.hi - s.lo, full_shape_[1], full_shape_[2]};
      s.offset = offset;
      offset += s.active_size();
    }
    dims_[k] = offset;
  }
}

DeRhamSequence build_derham(int degree, Index3 cells, bool pec) {
  return DeRhamSequence(degree, cells, pec);
}

void DeRhamSequence::check_size(const Vector& v, std::size_t n, const char* what) const {
  if (static_cast<std::size_t>(v.size()) != n) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                     std::to_string(v.size()));
  }
}

void DeRhamSequence::embed_into(int k, const Vector& active, std::span<double> full) const {
  check_size(active, dim(k), "embed");
  if (full.size() != full_dim(k)) {
    throw ShapeError("embed: full buffer has wrong length");
  }
  std::fill(full.begin(), full.end(), 0.0);
  const std::size_t plane = static_cast<std::size_t>(full_shape_[1]) * full_shape_[2];
  for (int c = 0; c < num_components(k); ++c) {
    const ComponentSpace& s = spaces_[k][c];
    const double* src = active.data() + s.offset;
    double* dst = full.data() + c * full_component_size() + s.lo * plane;
    std::copy(src, src + s.active_size(), dst);
  }
}

Vector DeRhamSequence::embed(int k, const Vector& active) const {
  Vector full(full_dim(k));
  embed_into(k, active, {full.data(), static_cast<std::size_t>(full.size())});
  return full;
}

Vector DeRhamSequence::restrict_to_active(int k, const Vector& full) const {
  check_size(full, full_dim(k), "restrict");
  Vector active(dim(k));
  const std::size_t plane = static_cast<std::size_t>(full_shape_[1]) * full_shape_[2];
  for (int c = 0; c < num_components(k); ++c) {
    const ComponentSpace& s = spaces_[k][c];
    const double* src = full.data() + c * full_component_size() + s.lo * plane;
    std::copy(src, src + s.active_size(), active.data() + s.offset);
  }
  return active;
}

void DeRhamSequence::apply_axis(int axis, bool transpose, const double* x, double* y,
                                double alpha) const {
  const int n0 = full_shape_[0];
  const int n1 = full_shape_[1];
  const int n2 = full_shape_[2];
  // Entries come in (row, prev, -w), (row, row, +w) pairs. The forward action
  // is applied as w * (x[row] - x[prev]) to keep a single rounding per term.
  const auto entries = bases_[axis].derivative().entries();
  const std::size_t npairs = entries.size() / 2;
  std::size_t stride = 1;
  if (axis == 0) {
    stride = static_cast<std::size_t>(n1) * n2;
  } else if (axis == 1) {
    stride = n2;
  }
  const int outer = axis == 0 ? 1 : (axis == 1 ? n0 : n0 * n1);
  const std::size_t inner = axis == 0 ? stride : (axis == 1 ? static_cast<std::size_t>(n2) : 1);
  const std::size_t outer_stride = axis == 1 ? static_cast<std::size_t>(n1) * n2 : static_cast<std::size_t>(n2);
  for (int o = 0; o < outer; ++o) {
    const std::size_t base = axis == 0 ? 0 : o * outer_stride;
    for (std::size_t q = 0; q < npairs; ++q) {
      const auto& em = entries[2 * q];
      const auto& ep = entries[2 * q + 1];
      const int row = ep.row;
      const int prev = em.col;
      const double w = alpha * ep.value;
      const std::size_t ir = base + row * stride;
      const std::size_t ip = base + prev * stride;
      if (!transpose) {
        for (std::size_t i = 0; i < inner; ++i) {
          y[ir + i] += w * (x[ir + i] - x[ip + i]);
        }
      } else {
        for (std::size_t i = 0; i < inner; ++i) {
          const double v = w * x[ir + i];
          y[ir + i] += v;
          y[ip + i] -= v;
        }
      }
    }
  }
}

void DeRhamSequence::grad_full(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = full_component_size();
  if (x.size() != n || y.size() != 3 * n) {
    throw ShapeError("grad: wrong full-layout sizes");
  }
  std::fill(y.begin(), y.end(), 0.0);
  for (int c = 0; c < 3; ++c) {
    apply_axis(c, false, x.data(), y.data() + c * n, 1.0);
  }
}

void DeRhamSequence::curl_full(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = full_component_size();
  if (x.size() != 3 * n || y.size() != 3 * n) {
    throw ShapeError("curl: wrong full-layout sizes");
  }
  std::fill(y.begin(), y.end(), 0.0);
  const double* x0 = x.data();
  const double* x1 = x0 + n;
  const double* x2 = x1 + n;
  double* y0 = y.data();
  double* y1 = y0 + n;
  double* y2 = y1 + n;
  apply_axis(2, false, x1, y0, -1.0);
  apply_axis(1, false, x2, y0, 1.0);
  apply_axis(2, false, x0, y1, 1.0);
  apply_axis(0, false, x2, y1, -1.0);
  apply_axis(1, false, x0, y2, -1.0);
  apply_axis(0, false, x1, y2, 1.0);
}

void DeRhamSequence::div_full(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = full_component_size();
  if (x.size() != 3 * n || y.size() != n) {
    throw ShapeError("div: wrong full-layout sizes");
  }
  std::fill(y.begin(), y.end(), 0.0);
  for (int c = 0; c < 3; ++c) {
    apply_axis(c, false, x.data() + c * n, y.data(), 1.0);
  }
}

void DeRhamSequence::grad_transpose_full(std::span<const double> y, std::span<double> x) const {
  const std::size_t n = full_component_size();
  if (x.size() != n || y.size() != 3 * n) {
    throw ShapeError("grad transpose: wrong full-layout sizes");
  }
  std::fill(x.begin(), x.end(), 0.0);
  for (int c = 0; c < 3; ++c) {
    apply_axis(c, true, y.data() + c * n, x.data(), 1.0);
  }
}

void DeRhamSequence::curl_transpose_full(std::span<const double> y, std::span<double> x) const {
  const std::size_t n = full_component_size();
  if (x.size() != 3 * n || y.size() != 3 * n) {
    throw ShapeError("curl transpose: wrong full-layout sizes");
  }
  std::fill(x.begin(), x.end(), 0.0);
  const double* y0 = y.data();
  const double* y1 = y0 + n;
  const double* y2 = y1 + n;
  double* x0 = x.data();
  double* x1 = x0 + n;
  double* x2 = x1 + n;
  apply_axis(2, true, y1, x0, 1.0);
  apply_axis(1, true, y2, x0, -1.0);
  apply_axis(2, true, y0, x1, -1.0);
  apply_axis(0, true, y2, x1, 1.0);
  apply_axis(1, true, y0, x2, 1.0);
  apply_axis(0, true, y1, x2, -1.0);
}

namespace {

std::span<double> as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

Vector DeRhamSequence::grad(const Vector& x) const {
  Vector xf = embed(0, x);
  Vector yf(full_dim(1));
  grad_full(as_span(xf), as_span(yf));
  return restrict_to_active(1, yf);
}

Vector DeRhamSequence::curl(const Vector& x) const {
  Vector xf = embed(1, x);
  Vector yf(full_dim(2));
  curl_full(as_span(xf), as_span(yf));
  return restrict_to_active(2, yf);
}

Vector DeRhamSequence::div(const Vector& x) const {
  Vector xf = embed(2, x);
  Vector yf(full_dim(3));
  div_full(as_span(xf), as_span(yf));
  return restrict_to_active(3, yf);
}

Vector DeRhamSequence::grad_transpose(const Vector& y) const {
  Vector yf = embed(1, y);
  Vector xf(full_dim(0));
  grad_transpose_full(as_span(yf), as_span(xf));
  return restrict_to_active(0, xf);
}

Vector DeRhamSequence::curl_transpose(const Vector& y) const {
  Vector yf = embed(2, y);
  Vector xf(full_dim(1));
  curl_transpose_full(as_span(yf), as_span(xf));
  return restrict_to_active(1, xf);
}

Vector DeRhamSequence::div_transpose(const Vector& y) const {
  Vector yf = embed(3, y);
  Vector xf = Vector::Zero(full_dim(2));
  const std::size_t n = full_component_size();
  for (int c = 0; c < 3; ++c) {
    apply_axis(c, true, yf.data(), xf.data() + c * n, 1.0);
  }
  return restrict_to_active(2, xf);
}

PointBasis DeRhamSequence::point_basis(const Vec3& xi) const {
  PointBasis pb;
  for (int d = 0; d < 3; ++d) {
    pb.upper[d] = bases_[d].eval(xi[d]);
    pb.lower[d] = bases_[d].eval_lower(xi[d]);
  }
  return pb;
}

double DeRhamSequence::eval_component_full(int k, int c, const PointBasis& pb,
                                           const double* full) const {
  const ComponentSpace& s = spaces_[k][c];
  const BasisValues& b0 = pb.get(0, s.lower[0]);
  const BasisValues& b1 = pb.get(1, s.lower[1]);
  const BasisValues& b2 = pb.get(2, s.lower[2]);
  const double* comp = full + c * full_component_size();
  const int n1 = full_shape_[1];
  const int n2 = full_shape_[2];
  std::array<int, kMaxDegree + 1> j1{};
  std::array<int, kMaxDegree + 1> j2{};
  for (int b = 0; b < b1.count; ++b) {
    j1[b] = (b1.first + b) % n1;
  }
  for (int b = 0; b < b2.count; ++b) {
    j2[b] = (b2.first + b) % n2;
  }
  double sum = 0.0;
  for (int a = 0; a < b0.count; ++a) {
    const int i0 = b0.first + a;
    double s1 = 0.0;
    for (int b = 0; b < b1.count; ++b) {
      const double* row = comp + flat(i0, j1[b], 0);
      double s2 = 0.0;
      for (int e = 0; e < b2.count; ++e) {
        s2 += b2.values[e] * row[j2[e]];
      }
      s1 += b1.values[b] * s2;
    }
    sum += b0.values[a] * s1;
  }
  return sum;
}

void DeRhamSequence::scatter_component_full(int k, int c, const PointBasis& pb, double weight,
                                            double* full) const {
  const ComponentSpace& s = spaces_[k][c];
  const BasisValues& b0 = pb.get(0, s.lower[0]);
  const BasisValues& b1 = pb.get(1, s.lower[1]);
  const BasisValues& b2 = pb.get(2, s.lower[2]);
  double* comp = full + c * full_component_size();
  const int n1 = full_shape_[1];
  const int n2 = full_shape_[2];
  std::array<int, kMaxDegree + 1> j2{};
  for (int e = 0; e < b2.count; ++e) {
    j2[e] = (b2.first + e) % n2;
  }
  for (int a = 0; a < b0.count; ++a) {
    const double wa = weight * b0.values[a];
    const int i0 = b0.first + a;
    for (int b = 0; b < b1.count; ++b) {
      const double wb = wa * b1.values[b];
      double* row = comp + flat(i0, (b1.first + b) % n1, 0);
      for (int e = 0; e < b2.count; ++e) {
        row[j2[e]] += wb * b2.values[e];
      }
    }
  }
}

Vec3 DeRhamSequence::eval_form(int k, const Vector& coeffs, const Vec3& xi) const {
  if (k < 0 || k > 3) {
    throw ParameterError("form degree must be 0..3");
  }
  const Vector full = embed(k, coeffs);
  const PointBasis pb = point_basis(xi);
  Vec3 out = Vec3::Zero();
  for (int c = 0; c < num_components(k); ++c) {
    out[c] = eval_component_full(k, c, pb, full.data());
  }
  return out;
}

}  // namespace gempic
