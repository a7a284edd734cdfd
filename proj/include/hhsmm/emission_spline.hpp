#ifndef HHSMM_EMISSION_SPLINE_HPP
#define HHSMM_EMISSION_SPLINE_HPP

#include <cmath>
#include <memory>
#include <vector>

#include "hhsmm/bspline.hpp"
#include "hhsmm/emission.hpp"

namespace hhsmm {

/** Nonparametric emission: per state and data dimension, a density
    expressed as a simplex-weighted combination of density-normalized
    cubic B-spline basis functions (dimensions independent, multiplied
    within a state). */
struct SplineEmissionParams {
  int K = 15;                           // 2K+1 basis functions per dimension
  Matrix range;                         // p x 2 matrix of (lo, hi) per dimension
  std::vector<std::vector<Vector>> a;   // state -> dim -> simplex coefficients
  Vector lambda;                        // per-state smoothing parameter

  int n_states() const { return static_cast<int>(a.size()); }
  int dim() const { return static_cast<int>(range.rows()); }
  int n_basis() const { return 2 * K + 1; }
};

struct SplineControl {
  int K = 15;
  double lambda0 = 1.0;
  int max_inner = 50;
  double tol = 1e-8;
};

namespace detail {

struct DimBasis {
  BsplineBasis basis;
  Vector norms;  // core integrals; column c of the density basis is B_c / norms[c]
  DimBasis(int n, double lo, double hi) : basis(n, lo, hi), norms(basis.core_integrals()) {}
  Vector density_row(double x) const {
    Vector r = basis.row(x);
    for (int c = 0; c < r.size(); ++c) r[c] /= norms[c];
    return r;
  }
};

/// Penalized weighted log-likelihood of simplex coefficients a against
/// precomputed density-basis rows phi (n x m) and weights w.
inline double spline_objective(const Matrix& phi, const Vector& w, const Matrix& P, double lambda,
                               const Vector& a) {
  Vector den = phi * a;
  double obj = 0.0;
  for (int t = 0; t < den.size(); ++t) {
    if (w[t] == 0.0) continue;
    if (!(den[t] > 0.0)) return -std::numeric_limits<double>::infinity();
    obj += w[t] * std::log(den[t]);
  }
  return obj - 0.5 * lambda * a.dot(P * a);
}

/** Maximizes the penalized objective over the simplex by multiplicative
    gradient updates with a backtracking line search toward the
    candidate; the objective never decreases across iterations. */
inline Vector spline_inner_solve(const Matrix& phi, const Vector& w, const Matrix& P,
                                 double lambda, Vector a, int max_inner, double tol) {
  double obj = spline_objective(phi, w, P, lambda, a);
  for (int it = 0; it < max_inner; ++it) {
    Vector den = phi * a;
    Vector score = Vector::Zero(a.size());
    for (int t = 0; t < den.size(); ++t) {
      if (w[t] == 0.0 || !(den[t] > 0.0)) continue;
      score += (w[t] / den[t]) * phi.row(t).transpose();
    }
    Vector grad = score - lambda * (P * a);
    Vector cand(a.size());
    for (int k = 0; k < a.size(); ++k) cand[k] = a[k] * std::max(grad[k], 0.0);
    double total = cand.sum();
    if (!(total > 0.0)) {
      // penalty dominates everywhere; fall back to the unpenalized EM move
      for (int k = 0; k < a.size(); ++k) cand[k] = a[k] * std::max(score[k], 0.0);
      total = cand.sum();
      if (!(total > 0.0)) break;
    }
    cand /= total;
    double s = 1.0, new_obj = -std::numeric_limits<double>::infinity();
    Vector trial;
    for (int half = 0; half < 25; ++half) {
      trial = (1.0 - s) * a + s * cand;
      new_obj = spline_objective(phi, w, P, lambda, trial);
      if (new_obj >= obj) break;
      s *= 0.5;
    }
    if (!(new_obj >= obj)) break;
    double rel = std::fabs(new_obj - obj) / (1.0 + std::fabs(obj));
    a = trial;
    obj = new_obj;
    if (rel < tol) break;
  }
  return a;
}

/// df(lambda) = tr((A + lambda P)^-1 A) with A the unpenalized curvature.
inline double spline_df(const Matrix& phi, const Vector& w, const Matrix& P, double lambda,
                        const Vector& a) {
  const int m = static_cast<int>(a.size());
  Vector den = phi * a;
  Matrix A = Matrix::Zero(m, m);
  for (int t = 0; t < den.size(); ++t) {
    if (w[t] == 0.0 || !(den[t] > 0.0)) continue;
    Vector r = phi.row(t).transpose();
    A.noalias() += (w[t] / (den[t] * den[t])) * (r * r.transpose());
  }
  Matrix H = A + lambda * P + 1e-10 * Matrix::Identity(m, m);
  return H.ldlt().solve(A).trace();
}

}  // namespace detail

/// Product over dimensions of the per-dimension spline densities;
/// floors at 1e-300 outside the padded support.
inline double dnonpar(const Eigen::Ref<const Vector>& x, int j, const SplineEmissionParams& par) {
  double f = 1.0;
  for (int c = 0; c < par.dim(); ++c) {
    detail::DimBasis db(par.n_basis(), par.range(c, 0), par.range(c, 1));
    if (!db.basis.in_padded_range(x[c])) return 1e-300;
    double v = db.density_row(x[c]).dot(par.a[j][c]);
    f *= std::max(v, 0.0);
  }
  return std::max(f, 1e-300);
}

/** Penalized-spline M-step. Per state and dimension maximizes
    sum_t w_t log(phi(x_t)' a) - (lambda/2) ||D2 a||^2 over the simplex,
    then updates the state's smoothing parameter once via
    lambda = (df(lambda) - p) / sum (D2 a)^2. Ranges and warm starts come
    from `prev` when given; otherwise ranges span the data. */
inline SplineEmissionParams nonpar_mstep(const Matrix& x, const Matrix& w,
                                         const SplineControl& control,
                                         const SplineEmissionParams* prev = nullptr) {
  const int T = static_cast<int>(x.rows()), p = static_cast<int>(x.cols());
  const int J = static_cast<int>(w.cols());
  if (w.rows() != T) throw ValidationError("nonpar_mstep: weight shape");
  SplineEmissionParams out;
  out.K = prev ? prev->K : control.K;
  const int m = out.n_basis();
  if (prev) {
    out.range = prev->range;
  } else {
    out.range.resize(p, 2);
    for (int c = 0; c < p; ++c) {
      out.range(c, 0) = x.col(c).minCoeff();
      out.range(c, 1) = x.col(c).maxCoeff();
      if (!(out.range(c, 1) > out.range(c, 0)))
        throw ValidationError("nonpar_mstep: degenerate data range in dimension " +
                              std::to_string(c + 1));
    }
  }
  out.lambda = prev ? prev->lambda : Vector::Constant(J, control.lambda0);
  out.a.assign(J, std::vector<Vector>(p));

  const Matrix D = second_difference_matrix(m);
  const Matrix P = D.transpose() * D;

  // per-dimension density-basis rows, shared across states
  std::vector<Matrix> phi(p);
  for (int c = 0; c < p; ++c) {
    detail::DimBasis db(m, out.range(c, 0), out.range(c, 1));
    phi[c].resize(T, m);
    for (int t = 0; t < T; ++t) phi[c].row(t) = db.density_row(x(t, c)).transpose();
  }

  for (int j = 0; j < J; ++j) {
    if (!(w.col(j).sum() > 0.0))
      throw NumericError("nonpar_mstep: zero total weight in state " + std::to_string(j + 1));
    double df_sum = 0.0, pen_sum = 0.0;
    for (int c = 0; c < p; ++c) {
      Vector a0 = (prev && prev->a[j][c].size() == m) ? prev->a[j][c]
                                                      : Vector::Constant(m, 1.0 / m);
      Vector a = detail::spline_inner_solve(phi[c], w.col(j), P, out.lambda[j], a0,
                                            control.max_inner, control.tol);
      if (!a.allFinite()) throw NumericError("nonpar_mstep: non-finite objective");
      out.a[j][c] = a;
      df_sum += detail::spline_df(phi[c], w.col(j), P, out.lambda[j], a);
      pen_sum += a.dot(P * a);
    }
    if (pen_sum > 1e-12) {
      double lam = (df_sum - p) / pen_sum;
      out.lambda[j] = std::clamp(lam, 0.0, 1e12);
    }
  }
  return out;
}

class NonparEmission final : public Emission {
 public:
  NonparEmission(SplineEmissionParams params, SplineControl control = {})
      : params_(std::move(params)), control_(control) {
    for (int c = 0; c < params_.dim(); ++c)
      bases_.emplace_back(params_.n_basis(), params_.range(c, 0), params_.range(c, 1));
  }

  std::string family() const override { return "nonpar"; }
  int n_states() const override { return params_.n_states(); }
  int dim() const override { return params_.dim(); }
  const SplineEmissionParams& params() const { return params_; }

  double density(const Eigen::Ref<const Vector>& x, int j) const override {
    double f = 1.0;
    for (int c = 0; c < params_.dim(); ++c) {
      if (!bases_[c].basis.in_padded_range(x[c])) return 1e-300;
      f *= std::max(bases_[c].density_row(x[c]).dot(params_.a[j][c]), 0.0);
    }
    return std::max(f, 1e-300);
  }

  std::unique_ptr<Emission> mstep(const Matrix& x, const Matrix& w) const override {
    return std::make_unique<NonparEmission>(nonpar_mstep(x, w, control_, &params_), control_);
  }

  int free_params() const override { return n_states() * dim() * (params_.n_basis() - 1); }

  json to_json() const override {
    json e;
    e["family"] = family();
    e["K"] = params_.K;
    e["range"] = detail::matrix_to_json(params_.range);
    json a = json::array();
    for (int j = 0; j < n_states(); ++j) {
      json aj = json::array();
      for (int c = 0; c < dim(); ++c) aj.push_back(detail::vector_to_json(params_.a[j][c]));
      a.push_back(aj);
    }
    e["a"] = a;
    e["lambda"] = detail::vector_to_json(params_.lambda);
    return e;
  }

  static std::unique_ptr<NonparEmission> from_json(const json& e) {
    SplineEmissionParams p;
    p.K = e.at("K").get<int>();
    p.range = detail::json_to_matrix(e.at("range"));
    for (const auto& aj : e.at("a")) {
      std::vector<Vector> state;
      for (const auto& ac : aj) state.push_back(detail::json_to_vector(ac));
      p.a.push_back(state);
    }
    p.lambda = detail::json_to_vector(e.at("lambda"));
    return std::make_unique<NonparEmission>(std::move(p));
  }

  std::unique_ptr<Emission> clone() const override {
    return std::make_unique<NonparEmission>(params_, control_);
  }

 private:
  SplineEmissionParams params_;
  SplineControl control_;
  std::vector<detail::DimBasis> bases_;
};

}  // namespace hhsmm

#endif  // HHSMM_EMISSION_SPLINE_HPP
