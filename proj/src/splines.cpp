#include "gempic/splines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gempic/errors.hpp"

namespace gempic {

DerivativeMatrix1D::DerivativeMatrix1D(int rows, int cols, std::vector<Entry> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {}

void DerivativeMatrix1D::apply(std::span<const double> x, std::span<double> y) const {
  if (static_cast<int>(x.size()) != cols_ || static_cast<int>(y.size()) != rows_) {
    throw ShapeError("derivative matrix: size mismatch");
  }
  std::fill(y.begin(), y.end(), 0.0);
  for (const auto& e : entries_) {
    y[e.row] += e.value * x[e.col];
  }
}

void DerivativeMatrix1D::apply_transpose(std::span<const double> y, std::span<double> x) const {
  if (static_cast<int>(x.size()) != cols_ || static_cast<int>(y.size()) != rows_) {
    throw ShapeError("derivative matrix transpose: size mismatch");
  }
  std::fill(x.begin(), x.end(), 0.0);
  for (const auto& e : entries_) {
    x[e.col] += e.value * y[e.row];
  }
}

Eigen::MatrixXd DerivativeMatrix1D::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows_, cols_);
  for (const auto& e : entries_) {
    m(e.row, e.col) += e.value;
  }
  return m;
}

SplineBasis1D::SplineBasis1D(int degree, int cells, BoundaryKind boundary)
    : degree_(degree), cells_(cells), boundary_(boundary) {
  if (degree < 1 || degree > kMaxDegree) {
    throw ParameterError("spline degree must be in [1, " + std::to_string(kMaxDegree) +
                         "], got " + std::to_string(degree));
  }
  if (cells < degree + 1) {
    throw ParameterError("need at least degree+1 cells, got " + std::to_string(cells) +
                         " for degree " + std::to_string(degree));
  }
  const int p = degree;
  const int n = cells;
  ext_.resize(n + 2 * p + 1);
  for (int r = 0; r <= n + 2 * p; ++r) {
    double t = static_cast<double>(r - p) / n;
    if (!periodic()) {
      t = std::clamp(t, 0.0, 1.0);
    }
    ext_[r] = t;
  }
  if (!periodic()) {
    knots_ = ext_;
  }

  std::vector<DerivativeMatrix1D::Entry> entries;
  const int nb = size();
  if (periodic()) {
    const double w = static_cast<double>(n);
    for (int a = 0; a < nb; ++a) {
      entries.push_back({a, (a + nb - 1) % nb, -w});
      entries.push_back({a, a, w});
    }
  } else {
    for (int a = 1; a < nb; ++a) {
      const double w = p / (ext_[a + p] - ext_[a]);
      entries.push_back({a, a - 1, -w});
      entries.push_back({a, a, w});
    }
  }
  derivative_ = DerivativeMatrix1D(nb, nb, std::move(entries));
}

int SplineBasis1D::cell_of(double xi) const {
  if (!(xi >= 0.0 && xi <= 1.0)) {
    throw DomainError("logical coordinate " + std::to_string(xi) + " outside [0,1]");
  }
  const int c = static_cast<int>(std::floor(xi * cells_));
  return std::min(c, cells_ - 1);
}

BasisValues SplineBasis1D::eval_degree(double xi, int deg) const {
  if (deg != degree_ && deg != degree_ - 1) {
    throw ParameterError("evaluation degree must be p or p-1");
  }
  if (periodic()) {
    xi -= std::floor(xi);
    if (xi >= 1.0) {
      xi = 0.0;
    }
  }
  const int c = cell_of(xi);
  const int span = c + degree_;
  const double* u = ext_.data();

  BasisValues out;
  out.count = deg + 1;
  double* nv = out.values.data();
  std::array<double, kMaxDegree + 1> left{};
  std::array<double, kMaxDegree + 1> right{};
  nv[0] = 1.0;
  for (int j = 1; j <= deg; ++j) {
    left[j] = xi - u[span + 1 - j];
    right[j] = u[span + j] - xi;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = nv[r] / (right[r + 1] + left[j - r]);
      nv[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    nv[j] = saved;
  }
  const int first_unwrapped = span - deg;  // NURBS-book index of values[0]
  if (periodic()) {
    out.first = ((first_unwrapped - degree_) % cells_ + cells_) % cells_;
  } else {
    out.first = first_unwrapped;
  }
  return out;
}

Eigen::VectorXd SplineBasis1D::dense_values(double xi, bool lower) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(size());
  const BasisValues b = lower ? eval_lower(xi) : eval(xi);
  for (int k = 0; k < b.count; ++k) {
    v[index(b.first, k)] += b.values[k];
  }
  return v;
}

SplineBasis1D build_basis(int degree, int cells, BoundaryKind boundary) {
  return SplineBasis1D(degree, cells, boundary);
}

QuadratureRule gauss_legendre(int points) {
  if (points < 1) {
    throw ParameterError("quadrature needs at least one point");
  }
  QuadratureRule rule;
  rule.nodes.resize(points);
  rule.weights.resize(points);
  const int n = points;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) {
        break;
      }
    }
    {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = 0.5 * (1.0 - x);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

}  // namespace gempic
