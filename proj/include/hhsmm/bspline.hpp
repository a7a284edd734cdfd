#ifndef HHSMM_BSPLINE_HPP
#define HHSMM_BSPLINE_HPP

#include <algorithm>
#include <cmath>

#include "hhsmm/common.hpp"

namespace hhsmm {

/** Cubic B-spline basis on equally spaced knots. The core interval
    [lo, hi] carries the partition of unity; evaluation is permitted on
    the padded range [lo - 3h, hi + 3h] (h = knot spacing), where the
    edge functions decay to zero. Knots are uniform and computed on the
    fly: knot(i) = lo + (i - 3) h, basis i supported on
    [knot(i), knot(i+4)], valid basis indices 0..size()-1. */
class BsplineBasis {
 public:
  static constexpr int degree = 3;

  BsplineBasis(int n_basis, double lo, double hi) : n_(n_basis), lo_(lo), hi_(hi) {
    if (n_basis < degree + 1)
      throw ValidationError("BsplineBasis: need at least " + std::to_string(degree + 1) +
                            " basis functions");
    if (!(hi > lo)) throw ValidationError("BsplineBasis: empty range");
    h_ = (hi - lo) / (n_basis - degree);
  }

  int size() const { return n_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double spacing() const { return h_; }
  double knot(int i) const { return lo_ + (i - degree) * h_; }

  double padded_lo() const { return knot(0); }
  double padded_hi() const { return knot(n_ + degree); }

  bool in_padded_range(double x) const {
    const double eps = 1e-12 * (1.0 + std::fabs(lo_) + std::fabs(hi_));
    return x >= padded_lo() - eps && x <= padded_hi() + eps;
  }

  /// Basis values at x (dense row of length size()).
  Vector row(double x) const {
    if (!in_padded_range(x))
      throw ValidationError("BsplineBasis: point " + std::to_string(x) +
                            " outside padded range [" + std::to_string(padded_lo()) + ", " +
                            std::to_string(padded_hi()) + "]");
    Vector out = Vector::Zero(n_);
    // knot interval [knot(idx), knot(idx+1)) containing x
    int idx = static_cast<int>(std::floor((x - padded_lo()) / h_));
    idx = std::clamp(idx, 0, n_ + degree - 1);
    // Cox-de Boor triangle; slot r holds basis index idx - degree + r
    double B[degree + 1] = {0.0, 0.0, 0.0, 1.0};
    for (int d = 1; d <= degree; ++d) {
      for (int r = degree - d; r <= degree; ++r) {
        int i = idx - degree + r;
        double left = (x - knot(i)) / (knot(i + d) - knot(i)) * B[r];
        double right = r < degree
                           ? (knot(i + d + 1) - x) / (knot(i + d + 1) - knot(i + 1)) * B[r + 1]
                           : 0.0;
        B[r] = left + right;
      }
    }
    for (int r = 0; r <= degree; ++r) {
      int i = idx - degree + r;
      if (i >= 0 && i < n_) out[i] = B[r];
    }
    return out;
  }

  /** Integral of each basis function over the core [lo, hi], computed by
      2-point Gauss-Legendre per knot interval (exact for cubics). */
  Vector core_integrals() const {
    Vector ints = Vector::Zero(n_);
    const double g = 1.0 / std::sqrt(3.0);
    for (int seg = degree; seg < n_; ++seg) {
      double a = knot(seg), b = knot(seg + 1);
      double mid = 0.5 * (a + b), halfw = 0.5 * (b - a);
      ints += halfw * row(mid - g * halfw);
      ints += halfw * row(mid + g * halfw);
    }
    return ints;
  }

 private:
  int n_;
  double lo_, hi_, h_;
};

/// Second-difference matrix: (n-2) x n rows [1, -2, 1].
inline Matrix second_difference_matrix(int n) {
  Matrix D = Matrix::Zero(std::max(0, n - 2), n);
  for (int r = 0; r + 2 < n; ++r) {
    D(r, r) = 1.0;
    D(r, r + 1) = -2.0;
    D(r, r + 2) = 1.0;
  }
  return D;
}

/** Spec'd basis-matrix helper: cubic B-spline basis with 2K+1 columns on
    [lo, hi], every column scaled to integrate to one over [lo, hi], so
    simplex-weighted combinations are densities. */
inline Matrix bspline_basis(const Vector& points, int K, double lo, double hi) {
  if (K < 2) throw ValidationError("bspline_basis: K must be >= 2");
  BsplineBasis basis(2 * K + 1, lo, hi);
  Vector ints = basis.core_integrals();
  Matrix out(points.size(), basis.size());
  for (int t = 0; t < points.size(); ++t) {
    Vector r = basis.row(points[t]);
    for (int c = 0; c < basis.size(); ++c) out(t, c) = r[c] / ints[c];
  }
  return out;
}

}  // namespace hhsmm

#endif  // HHSMM_BSPLINE_HPP
