#ifndef HHSMM_EMISSION_MIXMVN_HPP
#define HHSMM_EMISSION_MIXMVN_HPP

#include <cmath>
#include <memory>
#include <vector>

#include "hhsmm/data.hpp"
#include "hhsmm/emission.hpp"

namespace hhsmm {

/// Mixture-of-multivariate-normals emission parameters, per state.
struct MixMvnParams {
  std::vector<Vector> lambda;              // state -> component weights
  std::vector<std::vector<Vector>> mu;     // state -> component -> mean
  std::vector<std::vector<Matrix>> sigma;  // state -> component -> covariance

  int n_states() const { return static_cast<int>(lambda.size()); }
  int n_comp(int j) const { return static_cast<int>(lambda[j].size()); }
  int dim() const { return mu.empty() || mu[0].empty() ? 0 : static_cast<int>(mu[0][0].size()); }
};

namespace detail {

/** Cholesky with the jitter escalation used throughout: on failure add
    1e-8 * trace/p to the diagonal, escalating tenfold up to 3 times. */
inline Eigen::LLT<Matrix> chol_with_jitter(const Matrix& sigma) {
  if (!sigma.allFinite()) throw NumericError("covariance matrix has non-finite entries");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() == Eigen::Success && sigma.diagonal().minCoeff() > 0.0) return llt;
  const int p = static_cast<int>(sigma.rows());
  double jitter = 1e-8 * (sigma.trace() > 0.0 ? sigma.trace() / p : 1.0);
  for (int k = 0; k < 3; ++k) {
    Matrix s = sigma + jitter * Matrix::Identity(p, p);
    llt.compute(s);
    if (llt.info() == Eigen::Success) return llt;
    jitter *= 10.0;
  }
  throw NumericError("non-SPD covariance matrix");
}

inline double log_mvn_density(const Eigen::Ref<const Vector>& x, const Vector& mu,
                              const Eigen::LLT<Matrix>& llt) {
  const int p = static_cast<int>(mu.size());
  Vector z = llt.matrixL().solve(x - mu);
  double logdet = 0.0;
  for (int i = 0; i < p; ++i) logdet += std::log(llt.matrixL()(i, i));
  return -0.5 * p * std::log(2.0 * M_PI) - logdet - 0.5 * z.squaredNorm();
}

inline double log_sum_exp(const Vector& v) {
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace detail

/// Mixture density f_j(x) = sum_k lambda_kj N(x; mu_kj, Sigma_kj),
/// evaluated through Cholesky factors and log-sum-exp.
inline double dmixmvnorm(const Eigen::Ref<const Vector>& x, int j, const MixMvnParams& par) {
  const int K = par.n_comp(j);
  Vector logs(K);
  for (int k = 0; k < K; ++k) {
    auto llt = detail::chol_with_jitter(par.sigma[j][k]);
    logs[k] = std::log(std::max(par.lambda[j][k], 0.0)) +
              detail::log_mvn_density(x, par.mu[j][k], llt);
  }
  return std::exp(detail::log_sum_exp(logs));
}

/// Draws one observation from state j's mixture.
inline Vector rmixmvnorm(int j, const MixMvnParams& par, Rng& rng) {
  int k = rng.categorical(par.lambda[j]);
  auto llt = detail::chol_with_jitter(par.sigma[j][k]);
  Vector z(par.mu[j][k].size());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return par.mu[j][k] + llt.matrixL() * z;
}

/** Complete-data weighted M-step. Component responsibilities come from
    `prev` (E-step mixture probabilities), then weights, means and
    covariances are updated with weight-normalized moments. */
inline MixMvnParams mixmvnorm_mstep(const Matrix& x, const Matrix& w, const MixMvnParams& prev) {
  const int T = static_cast<int>(x.rows()), p = static_cast<int>(x.cols());
  const int J = prev.n_states();
  if (w.rows() != T || w.cols() != J) throw ValidationError("mixmvnorm_mstep: weight shape");
  MixMvnParams out = prev;
  for (int j = 0; j < J; ++j) {
    const int K = prev.n_comp(j);
    std::vector<Eigen::LLT<Matrix>> llt;
    llt.reserve(K);
    for (int k = 0; k < K; ++k) llt.push_back(detail::chol_with_jitter(prev.sigma[j][k]));
    // responsibilities gamma_{kj}(t), scaled by the state weight
    Matrix g(T, K);
    for (int t = 0; t < T; ++t) {
      Vector logs(K);
      for (int k = 0; k < K; ++k)
        logs[k] = std::log(std::max(prev.lambda[j][k], 1e-300)) +
                  detail::log_mvn_density(x.row(t).transpose(), prev.mu[j][k], llt[k]);
      double lse = detail::log_sum_exp(logs);
      for (int k = 0; k < K; ++k) g(t, k) = std::exp(logs[k] - lse) * w(t, j);
    }
    double wj = w.col(j).sum();
    if (!(wj > 0.0))
      throw NumericError("mixmvnorm_mstep: zero total weight in state " + std::to_string(j + 1));
    for (int k = 0; k < K; ++k) {
      double gk = g.col(k).sum();
      out.lambda[j][k] = gk / wj;
      if (!(gk > 0.0)) continue;  // dead component keeps its previous mu/sigma
      Vector m = (x.transpose() * g.col(k)) / gk;
      Matrix S = Matrix::Zero(p, p);
      for (int t = 0; t < T; ++t) {
        if (g(t, k) == 0.0) continue;
        Vector c = x.row(t).transpose() - m;
        S.noalias() += g(t, k) * (c * c.transpose());
      }
      out.mu[j][k] = m;
      out.sigma[j][k] = S / gk;
    }
  }
  return out;
}

/** Initial imputation for missing cells: a fully missing row becomes the
    average of the nearest observed rows before and after it within its
    sequence (a single neighbor at the boundaries); partially missing
    cells become the column mean of the observed cells of that sequence. */
inline SequenceSet impute_initial(const SequenceSet& set) {
  SequenceSet out = set;
  int offset = 0;
  for (int i = 0; i < set.n_seq(); ++i) {
    const int n = set.N[i], p = set.dim();
    auto row_fully_missing = [&](int t) {
      for (int c = 0; c < p; ++c)
        if (!is_missing(out.x(offset + t, c))) return false;
      return true;
    };
    // fully missing rows first: neighbor average
    for (int t = 0; t < n; ++t) {
      if (!row_fully_missing(t)) continue;
      int prev = t - 1, next = t + 1;
      while (prev >= 0 && row_fully_missing(prev)) --prev;
      while (next < n && row_fully_missing(next)) ++next;
      for (int c = 0; c < p; ++c) {
        double a = prev >= 0 ? set.x(offset + prev, c) : missing_value();
        double b = next < n ? set.x(offset + next, c) : missing_value();
        double v;
        if (!is_missing(a) && !is_missing(b))
          v = 0.5 * (a + b);
        else if (!is_missing(a))
          v = a;
        else if (!is_missing(b))
          v = b;
        else
          v = missing_value();  // falls through to column-mean pass
        out.x(offset + t, c) = v;
      }
    }
    // partially missing cells: per-sequence column means of observed cells
    for (int c = 0; c < p; ++c) {
      double sum = 0.0;
      int cnt = 0;
      for (int t = 0; t < n; ++t)
        if (!is_missing(set.x(offset + t, c))) {
          sum += set.x(offset + t, c);
          ++cnt;
        }
      for (int t = 0; t < n; ++t) {
        if (!is_missing(out.x(offset + t, c))) continue;
        if (cnt == 0)
          throw ValidationError("impute_initial: column " + std::to_string(c + 1) +
                                " has no observed values in sequence " + std::to_string(i + 1));
        out.x(offset + t, c) = sum / cnt;
      }
    }
    offset += n;
  }
  return out;
}

namespace detail {

/// Conditional mean and conditional covariance of the missing block given
/// the observed block under one normal component.
struct ConditionalMoments {
  Vector xhat;   // full row with missing entries replaced
  Matrix cvar;   // p x p, conditional covariance in the missing block, 0 elsewhere
};

inline ConditionalMoments conditional_moments(const Eigen::Ref<const Vector>& x, const Vector& mu,
                                              const Matrix& sigma) {
  const int p = static_cast<int>(x.size());
  std::vector<int> obs, mis;
  for (int c = 0; c < p; ++c) (is_missing(x[c]) ? mis : obs).push_back(c);
  ConditionalMoments out;
  out.xhat = x;
  out.cvar = Matrix::Zero(p, p);
  if (mis.empty()) return out;
  if (obs.empty()) {
    for (int c : mis) out.xhat[c] = mu[c];
    out.cvar = sigma;
    return out;
  }
  const int no = static_cast<int>(obs.size()), nm = static_cast<int>(mis.size());
  Matrix Soo(no, no), Smo(nm, no), Smm(nm, nm);
  Vector xo(no), muo(no), mum(nm);
  for (int a = 0; a < no; ++a) {
    xo[a] = x[obs[a]];
    muo[a] = mu[obs[a]];
    for (int b = 0; b < no; ++b) Soo(a, b) = sigma(obs[a], obs[b]);
  }
  for (int a = 0; a < nm; ++a) {
    mum[a] = mu[mis[a]];
    for (int b = 0; b < no; ++b) Smo(a, b) = sigma(mis[a], obs[b]);
    for (int b = 0; b < nm; ++b) Smm(a, b) = sigma(mis[a], mis[b]);
  }
  Eigen::LLT<Matrix> llt = chol_with_jitter(Soo);
  Matrix gain = llt.solve(Smo.transpose()).transpose();  // Smo * Soo^-1
  Vector cm = mum + gain * (xo - muo);
  Matrix cv = Smm - gain * Smo.transpose();
  for (int a = 0; a < nm; ++a) {
    out.xhat[mis[a]] = cm[a];
    for (int b = 0; b < nm; ++b) out.cvar(mis[a], mis[b]) = cv(a, b);
  }
  return out;
}

}  // namespace detail

/// Mixture density with missing cells replaced by their per-component
/// conditional means given the observed cells.
inline double dmixmvnorm_miss(const Eigen::Ref<const Vector>& x, int j, const MixMvnParams& par) {
  const int K = par.n_comp(j);
  Vector logs(K);
  for (int k = 0; k < K; ++k) {
    auto cm = detail::conditional_moments(x, par.mu[j][k], par.sigma[j][k]);
    auto llt = detail::chol_with_jitter(par.sigma[j][k]);
    logs[k] = std::log(std::max(par.lambda[j][k], 0.0)) +
              detail::log_mvn_density(cm.xhat, par.mu[j][k], llt);
  }
  return std::exp(detail::log_sum_exp(logs));
}

/** Missing-data weighted M-step: per row and component, missing blocks
    contribute their conditional means and conditional second moments to
    the weighted updates. Reduces to mixmvnorm_mstep when nothing is
    missing. */
inline MixMvnParams miss_mixmvnorm_mstep(const Matrix& x, const Matrix& w,
                                         const MixMvnParams& prev) {
  const int T = static_cast<int>(x.rows()), p = static_cast<int>(x.cols());
  const int J = prev.n_states();
  if (w.rows() != T || w.cols() != J) throw ValidationError("miss_mixmvnorm_mstep: weight shape");
  MixMvnParams out = prev;
  for (int j = 0; j < J; ++j) {
    const int K = prev.n_comp(j);
    std::vector<Eigen::LLT<Matrix>> llt;
    llt.reserve(K);
    for (int k = 0; k < K; ++k) llt.push_back(detail::chol_with_jitter(prev.sigma[j][k]));
    Matrix g(T, K);
    std::vector<std::vector<detail::ConditionalMoments>> cm(T);
    for (int t = 0; t < T; ++t) {
      cm[t].reserve(K);
      Vector logs(K);
      for (int k = 0; k < K; ++k) {
        cm[t].push_back(
            detail::conditional_moments(x.row(t).transpose(), prev.mu[j][k], prev.sigma[j][k]));
        logs[k] = std::log(std::max(prev.lambda[j][k], 1e-300)) +
                  detail::log_mvn_density(cm[t][k].xhat, prev.mu[j][k], llt[k]);
      }
      double lse = detail::log_sum_exp(logs);
      for (int k = 0; k < K; ++k) g(t, k) = std::exp(logs[k] - lse) * w(t, j);
    }
    double wj = w.col(j).sum();
    if (!(wj > 0.0))
      throw NumericError("miss_mixmvnorm_mstep: zero total weight in state " + std::to_string(j + 1));
    for (int k = 0; k < K; ++k) {
      double gk = g.col(k).sum();
      out.lambda[j][k] = gk / wj;
      if (!(gk > 0.0)) continue;
      Vector m = Vector::Zero(p);
      for (int t = 0; t < T; ++t) m += g(t, k) * cm[t][k].xhat;
      m /= gk;
      Matrix S = Matrix::Zero(p, p);
      for (int t = 0; t < T; ++t) {
        if (g(t, k) == 0.0) continue;
        Vector c = cm[t][k].xhat - m;
        S.noalias() += g(t, k) * (c * c.transpose() + cm[t][k].cvar);
      }
      out.mu[j][k] = m;
      out.sigma[j][k] = S / gk;
    }
  }
  return out;
}

/// Polymorphic wrapper around MixMvnParams; dispatches to the
/// missing-data M-step and density when NaN cells are present.
class MixMvnEmission final : public Emission {
 public:
  explicit MixMvnEmission(MixMvnParams params) : params_(std::move(params)) {
    for (int j = 0; j < params_.n_states(); ++j)
      for (int k = 0; k < params_.n_comp(j); ++k)
        chol_.push_back(detail::chol_with_jitter(params_.sigma[j][k]));
  }

  std::string family() const override { return "mixmvnorm"; }
  int n_states() const override { return params_.n_states(); }
  int dim() const override { return params_.dim(); }
  const MixMvnParams& params() const { return params_; }

  double density(const Eigen::Ref<const Vector>& x, int j) const override {
    bool miss = false;
    for (int c = 0; c < x.size(); ++c)
      if (is_missing(x[c])) {
        miss = true;
        break;
      }
    if (miss) return dmixmvnorm_miss(x, j, params_);
    const int K = params_.n_comp(j);
    Vector logs(K);
    int base = chol_offset(j);
    for (int k = 0; k < K; ++k)
      logs[k] = std::log(std::max(params_.lambda[j][k], 0.0)) +
                detail::log_mvn_density(x, params_.mu[j][k], chol_[base + k]);
    return std::exp(detail::log_sum_exp(logs));
  }

  std::unique_ptr<Emission> mstep(const Matrix& x, const Matrix& w) const override {
    bool miss = false;
    for (int r = 0; r < x.rows() && !miss; ++r)
      for (int c = 0; c < x.cols(); ++c)
        if (is_missing(x(r, c))) {
          miss = true;
          break;
        }
    return std::make_unique<MixMvnEmission>(miss ? miss_mixmvnorm_mstep(x, w, params_)
                                                 : mixmvnorm_mstep(x, w, params_));
  }

  bool has_sampler() const override { return true; }
  Vector sample(int j, Rng& rng, const EmissionSampleContext&) const override {
    return rmixmvnorm(j, params_, rng);
  }

  int free_params() const override {
    const int p = dim();
    int n = 0;
    for (int j = 0; j < n_states(); ++j) {
      int K = params_.n_comp(j);
      n += (K - 1) + K * p + K * p * (p + 1) / 2;
    }
    return n;
  }

  json to_json() const override {
    json e;
    e["family"] = family();
    json K = json::array(), lambda = json::array(), mu = json::array(), sigma = json::array();
    for (int j = 0; j < n_states(); ++j) {
      K.push_back(params_.n_comp(j));
      lambda.push_back(detail::vector_to_json(params_.lambda[j]));
      json mj = json::array(), sj = json::array();
      for (int k = 0; k < params_.n_comp(j); ++k) {
        mj.push_back(detail::vector_to_json(params_.mu[j][k]));
        sj.push_back(detail::matrix_to_json(params_.sigma[j][k]));
      }
      mu.push_back(mj);
      sigma.push_back(sj);
    }
    e["K"] = K;
    e["lambda"] = lambda;
    e["mu"] = mu;
    e["sigma"] = sigma;
    return e;
  }

  static std::unique_ptr<MixMvnEmission> from_json(const json& e) {
    MixMvnParams p;
    for (const auto& l : e.at("lambda")) p.lambda.push_back(detail::json_to_vector(l));
    for (const auto& mj : e.at("mu")) {
      std::vector<Vector> state;
      for (const auto& m : mj) state.push_back(detail::json_to_vector(m));
      p.mu.push_back(state);
    }
    for (const auto& sj : e.at("sigma")) {
      std::vector<Matrix> state;
      for (const auto& s : sj) state.push_back(detail::json_to_matrix(s));
      p.sigma.push_back(state);
    }
    return std::make_unique<MixMvnEmission>(std::move(p));
  }

  std::unique_ptr<Emission> clone() const override {
    return std::make_unique<MixMvnEmission>(params_);
  }

 private:
  int chol_offset(int j) const {
    int o = 0;
    for (int i = 0; i < j; ++i) o += params_.n_comp(i);
    return o;
  }
  MixMvnParams params_;
  std::vector<Eigen::LLT<Matrix>> chol_;
};

}  // namespace hhsmm

#endif  // HHSMM_EMISSION_MIXMVN_HPP
