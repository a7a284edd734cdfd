#ifndef HHSMM_EMISSION_REGRESS_HPP
#define HHSMM_EMISSION_REGRESS_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "hhsmm/bspline.hpp"
#include "hhsmm/emission.hpp"
#include "hhsmm/emission_mixmvn.hpp"

namespace hhsmm {

namespace detail {

/// Splits the 1-based response indices out of a row layout of width p.
struct RowLayout {
  IntVector resp;  // 0-based response columns, ascending
  IntVector covar; // 0-based covariate columns, ascending
  RowLayout(int p, const IntVector& resp_ind_1based) {
    std::vector<bool> is_resp(p, false);
    for (int r : resp_ind_1based) {
      if (r < 1 || r > p)
        throw ValidationError("resp_ind out of range: " + std::to_string(r));
      is_resp[r - 1] = true;
    }
    for (int c = 0; c < p; ++c) (is_resp[c] ? resp : covar).push_back(c);
    if (resp.empty()) throw ValidationError("resp_ind selects no response column");
  }
  Vector response(const Eigen::Ref<const Vector>& row) const {
    Vector y(resp.size());
    for (std::size_t i = 0; i < resp.size(); ++i) y[i] = row[resp[i]];
    return y;
  }
  Vector covariates(const Eigen::Ref<const Vector>& row) const {
    Vector x(covar.size());
    for (std::size_t i = 0; i < covar.size(); ++i) x[i] = row[covar[i]];
    return x;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Mixture of linear models (regime-switching regression)
// ---------------------------------------------------------------------------

/// Per state: a mixture of Gaussian linear models of the response
/// columns (resp_ind, 1-based) on the remaining columns.
struct MixLMParams {
  IntVector resp_ind = {1};
  std::vector<Vector> mix_p;                    // state -> component weights
  std::vector<std::vector<Vector>> intercept;   // state -> comp -> (respdim)
  std::vector<std::vector<Matrix>> coef;        // state -> comp -> (covdim x respdim)
  std::vector<std::vector<Matrix>> csigma;      // state -> comp -> (respdim x respdim)
  CovarModel covar;                             // covariate source for the sampler

  int n_states() const { return static_cast<int>(mix_p.size()); }
  int n_comp(int j) const { return static_cast<int>(mix_p[j].size()); }
  int resp_dim() const { return intercept.empty() ? 0 : static_cast<int>(intercept[0][0].size()); }
  int cov_dim() const { return coef.empty() ? 0 : static_cast<int>(coef[0][0].rows()); }
  int dim() const { return resp_dim() + cov_dim(); }
};

/// Conditional density of the response given covariates and state j:
/// sum_k mix_p N(y; intercept_k + x'coef_k, csigma_k).
inline double dmixlm(const Eigen::Ref<const Vector>& row, int j, const MixLMParams& par) {
  detail::RowLayout layout(static_cast<int>(row.size()), par.resp_ind);
  if (static_cast<int>(layout.covar.size()) != par.cov_dim() ||
      static_cast<int>(layout.resp.size()) != par.resp_dim())
    throw ValidationError("dmixlm: row width does not match parameters");
  Vector y = layout.response(row), xc = layout.covariates(row);
  const int K = par.n_comp(j);
  Vector logs(K);
  for (int k = 0; k < K; ++k) {
    Vector mean = par.intercept[j][k] + par.coef[j][k].transpose() * xc;
    auto llt = detail::chol_with_jitter(par.csigma[j][k]);
    logs[k] = std::log(std::max(par.mix_p[j][k], 0.0)) + detail::log_mvn_density(y, mean, llt);
  }
  return std::exp(detail::log_sum_exp(logs));
}

/** Weighted EM M-step for the mixture linear model: component
    responsibilities from the previous conditional densities, then
    weighted least squares per state and component plus weight-normalized
    residual covariances. */
inline MixLMParams mixlm_mstep(const Matrix& x, const Matrix& w, const MixLMParams& prev) {
  const int T = static_cast<int>(x.rows());
  const int J = prev.n_states();
  if (w.rows() != T || w.cols() != J) throw ValidationError("mixlm_mstep: weight shape");
  detail::RowLayout layout(static_cast<int>(x.cols()), prev.resp_ind);
  const int q = static_cast<int>(layout.covar.size());
  const int r = static_cast<int>(layout.resp.size());
  Matrix Y(T, r), Xc(T, q + 1);  // design with leading intercept column
  for (int t = 0; t < T; ++t) {
    Xc(t, 0) = 1.0;
    for (int c = 0; c < q; ++c) Xc(t, c + 1) = x(t, layout.covar[c]);
    for (int c = 0; c < r; ++c) Y(t, c) = x(t, layout.resp[c]);
  }

  MixLMParams out = prev;
  for (int j = 0; j < J; ++j) {
    const int K = prev.n_comp(j);
    Matrix g(T, K);
    for (int t = 0; t < T; ++t) {
      Vector logs(K);
      for (int k = 0; k < K; ++k) {
        Vector mean = prev.intercept[j][k] +
                      prev.coef[j][k].transpose() * layout.covariates(x.row(t).transpose());
        auto llt = detail::chol_with_jitter(prev.csigma[j][k]);
        logs[k] = std::log(std::max(prev.mix_p[j][k], 1e-300)) +
                  detail::log_mvn_density(Y.row(t).transpose(), mean, llt);
      }
      double lse = detail::log_sum_exp(logs);
      for (int k = 0; k < K; ++k) g(t, k) = std::exp(logs[k] - lse) * w(t, j);
    }
    double wj = w.col(j).sum();
    if (!(wj > 0.0))
      throw NumericError("mixlm_mstep: zero total weight in state " + std::to_string(j + 1));
    for (int k = 0; k < K; ++k) {
      double gk = g.col(k).sum();
      out.mix_p[j][k] = gk / wj;
      if (!(gk > 0.0)) continue;
      Matrix XtWX = Matrix::Zero(q + 1, q + 1);
      Matrix XtWY = Matrix::Zero(q + 1, r);
      for (int t = 0; t < T; ++t) {
        if (g(t, k) == 0.0) continue;
        XtWX.noalias() += g(t, k) * (Xc.row(t).transpose() * Xc.row(t));
        XtWY.noalias() += g(t, k) * (Xc.row(t).transpose() * Y.row(t));
      }
      Eigen::FullPivLU<Matrix> lu(XtWX);
      lu.setThreshold(1e-10);
      if (lu.rank() < q + 1)
        throw NumericError("mixlm_mstep: rank-deficient design in state " + std::to_string(j + 1));
      Matrix beta = lu.solve(XtWY);  // (q+1) x r
      out.intercept[j][k] = beta.row(0).transpose();
      out.coef[j][k] = beta.bottomRows(q);
      Matrix S = Matrix::Zero(r, r);
      for (int t = 0; t < T; ++t) {
        if (g(t, k) == 0.0) continue;
        Vector res = Y.row(t).transpose() - beta.transpose() * Xc.row(t).transpose();
        S.noalias() += g(t, k) * (res * res.transpose());
      }
      out.csigma[j][k] = S / gk;
    }
  }
  return out;
}

/** Draws one row from state j's mixture linear model. In autoregressive
    mode the covariates are the previously emitted response (zero on the
    first step) and the emitted row is the response alone; otherwise
    covariates come from the covariate model and the full row is emitted
    in the layout given by resp_ind. */
inline Vector rmixlm(int j, const MixLMParams& par, Rng& rng, const EmissionSampleContext& ctx) {
  const int q = par.cov_dim(), r = par.resp_dim();
  Vector xc;
  if (ctx.autoregress) {
    if (q != r)
      throw ValidationError("rmixlm: autoregressive sampling needs cov_dim == resp_dim");
    xc = ctx.prev ? *ctx.prev : Vector::Zero(q);
  } else {
    const CovarModel* cm = ctx.covar && !ctx.covar->empty() ? ctx.covar : &par.covar;
    if (cm->generator) {
      xc = cm->generator(rng);
    } else if (cm->mean.size() == q) {
      Vector z(q);
      for (int i = 0; i < q; ++i) z[i] = rng.normal();
      xc = cm->mean + detail::chol_with_jitter(cm->cov).matrixL() * z;
    } else if (q == 0) {
      xc = Vector();
    } else {
      throw ValidationError("rmixlm: no covariate model for sampling");
    }
  }
  int k = rng.categorical(par.mix_p[j]);
  Vector z(r);
  for (int i = 0; i < r; ++i) z[i] = rng.normal();
  Vector y = par.intercept[j][k] + par.coef[j][k].transpose() * xc +
             detail::chol_with_jitter(par.csigma[j][k]).matrixL() * z;
  if (ctx.autoregress) return y;
  detail::RowLayout layout(q + r, par.resp_ind);
  Vector row(q + r);
  for (int i = 0; i < r; ++i) row[layout.resp[i]] = y[i];
  for (int i = 0; i < q; ++i) row[layout.covar[i]] = xc[i];
  return row;
}

class MixlmEmission final : public Emission {
 public:
  explicit MixlmEmission(MixLMParams params) : params_(std::move(params)) {}

  std::string family() const override { return "mixlm"; }
  int n_states() const override { return params_.n_states(); }
  int dim() const override { return params_.dim(); }
  const MixLMParams& params() const { return params_; }

  double density(const Eigen::Ref<const Vector>& x, int j) const override {
    return dmixlm(x, j, params_);
  }
  std::unique_ptr<Emission> mstep(const Matrix& x, const Matrix& w) const override {
    return std::make_unique<MixlmEmission>(mixlm_mstep(x, w, params_));
  }
  bool has_sampler() const override { return true; }
  int sample_dim(const EmissionSampleContext& ctx) const override {
    return ctx.autoregress ? params_.resp_dim() : params_.dim();
  }
  Vector sample(int j, Rng& rng, const EmissionSampleContext& ctx) const override {
    return rmixlm(j, params_, rng, ctx);
  }

  int free_params() const override {
    const int q = params_.cov_dim(), r = params_.resp_dim();
    int n = 0;
    for (int j = 0; j < n_states(); ++j) {
      int K = params_.n_comp(j);
      n += (K - 1) + K * (r + q * r + r * (r + 1) / 2);
    }
    return n;
  }

  json to_json() const override {
    json e;
    e["family"] = family();
    e["resp_ind"] = params_.resp_ind;
    json mp = json::array(), it = json::array(), cf = json::array(), cs = json::array();
    for (int j = 0; j < n_states(); ++j) {
      mp.push_back(detail::vector_to_json(params_.mix_p[j]));
      json ij = json::array(), cj = json::array(), sj = json::array();
      for (int k = 0; k < params_.n_comp(j); ++k) {
        ij.push_back(detail::vector_to_json(params_.intercept[j][k]));
        cj.push_back(detail::matrix_to_json(params_.coef[j][k]));
        sj.push_back(detail::matrix_to_json(params_.csigma[j][k]));
      }
      it.push_back(ij);
      cf.push_back(cj);
      cs.push_back(sj);
    }
    e["mix_p"] = mp;
    e["intercept"] = it;
    e["coef"] = cf;
    e["csigma"] = cs;
    if (params_.covar.mean.size() > 0) {
      e["covar"] = {{"mean", detail::vector_to_json(params_.covar.mean)},
                    {"cov", detail::matrix_to_json(params_.covar.cov)}};
    }
    return e;
  }

  static std::unique_ptr<MixlmEmission> from_json(const json& e) {
    MixLMParams p;
    p.resp_ind = e.at("resp_ind").get<IntVector>();
    for (const auto& v : e.at("mix_p")) p.mix_p.push_back(detail::json_to_vector(v));
    for (const auto& js : e.at("intercept")) {
      std::vector<Vector> state;
      for (const auto& v : js) state.push_back(detail::json_to_vector(v));
      p.intercept.push_back(state);
    }
    for (const auto& js : e.at("coef")) {
      std::vector<Matrix> state;
      for (const auto& v : js) state.push_back(detail::json_to_matrix(v));
      p.coef.push_back(state);
    }
    for (const auto& js : e.at("csigma")) {
      std::vector<Matrix> state;
      for (const auto& v : js) state.push_back(detail::json_to_matrix(v));
      p.csigma.push_back(state);
    }
    if (e.contains("covar")) {
      p.covar.mean = detail::json_to_vector(e["covar"].at("mean"));
      p.covar.cov = detail::json_to_matrix(e["covar"].at("cov"));
    }
    return std::make_unique<MixlmEmission>(std::move(p));
  }

  std::unique_ptr<Emission> clone() const override {
    return std::make_unique<MixlmEmission>(params_);
  }

 private:
  MixLMParams params_;
};

// ---------------------------------------------------------------------------
// Additive (penalized B-spline) regression
// ---------------------------------------------------------------------------

/** Per state: y = mu + sum_l f_l(x_l) + e with each f_l a penalized
    cubic-spline fit, weighted-centered to mean zero over the training
    covariates (offset absorbed into mu). */
struct AdditiveRegParams {
  int K = 10;  // basis functions per covariate
  IntVector resp_ind = {1};
  Matrix ranges;                                // covdim x 2
  std::vector<Vector> mu;                       // state -> (respdim)
  std::vector<std::vector<Matrix>> coef;        // state -> covariate -> (K x respdim)
  std::vector<std::vector<Vector>> center;      // state -> covariate -> (K)
  std::vector<Matrix> sigma;                    // state -> respdim x respdim
  Vector lambda;                                // per state

  int n_states() const { return static_cast<int>(mu.size()); }
  int cov_dim() const { return static_cast<int>(ranges.rows()); }
  int resp_dim() const { return mu.empty() ? 0 : static_cast<int>(mu[0].size()); }
  int dim() const { return cov_dim() + resp_dim(); }
};

struct AdditiveRegControl {
  int K = 10;
  IntVector resp_ind = {1};
  double lambda0 = 1.0;
};

namespace detail {
inline Vector addreg_mean(const AdditiveRegParams& par, int j,
                          const Eigen::Ref<const Vector>& xc) {
  Vector mean = par.mu[j];
  for (int l = 0; l < par.cov_dim(); ++l) {
    BsplineBasis basis(par.K, par.ranges(l, 0), par.ranges(l, 1));
    Vector b = basis.row(xc[l]) - par.center[j][l];
    mean += par.coef[j][l].transpose() * b;
  }
  return mean;
}
}  // namespace detail

/// N(y; mu_j + sum_l f_{j,l}(x_l), sigma_j) on a full data row.
inline double dnorm_additive_reg(const Eigen::Ref<const Vector>& row, int j,
                                 const AdditiveRegParams& par) {
  detail::RowLayout layout(static_cast<int>(row.size()), par.resp_ind);
  Vector y = layout.response(row), xc = layout.covariates(row);
  Vector mean = detail::addreg_mean(par, j, xc);
  auto llt = detail::chol_with_jitter(par.sigma[j]);
  return std::exp(detail::log_mvn_density(y, mean, llt));
}

/** Penalized weighted M-step for the additive model: per state, ridge
    normal equations on the stacked centered spline design with a
    second-difference penalty per covariate block, residual covariance
    from weighted residuals, and one lambda update per call. */
inline AdditiveRegParams additive_reg_mstep(const Matrix& x, const Matrix& w,
                                            const AdditiveRegControl& control,
                                            const AdditiveRegParams* prev = nullptr) {
  const int T = static_cast<int>(x.rows());
  const int J = static_cast<int>(w.cols());
  if (w.rows() != T) throw ValidationError("additive_reg_mstep: weight shape");
  const IntVector& resp_ind = prev ? prev->resp_ind : control.resp_ind;
  detail::RowLayout layout(static_cast<int>(x.cols()), resp_ind);
  const int q = static_cast<int>(layout.covar.size());
  const int r = static_cast<int>(layout.resp.size());
  if (q < 1) throw ValidationError("additive_reg_mstep: no covariate columns");

  AdditiveRegParams out;
  out.K = prev ? prev->K : control.K;
  out.resp_ind = resp_ind;
  const int K = out.K;
  if (prev) {
    out.ranges = prev->ranges;
  } else {
    out.ranges.resize(q, 2);
    for (int l = 0; l < q; ++l) {
      out.ranges(l, 0) = x.col(layout.covar[l]).minCoeff();
      out.ranges(l, 1) = x.col(layout.covar[l]).maxCoeff();
      if (!(out.ranges(l, 1) > out.ranges(l, 0)))
        throw ValidationError("additive_reg_mstep: degenerate covariate range");
    }
  }
  for (int l = 0; l < q; ++l) {
    std::vector<double> vals(T);
    for (int t = 0; t < T; ++t) vals[t] = x(t, layout.covar[l]);
    std::sort(vals.begin(), vals.end());
    int distinct = static_cast<int>(std::unique(vals.begin(), vals.end()) - vals.begin());
    if (distinct < K + 4)
      throw ValidationError("additive_reg_mstep: need at least K+4 distinct covariate values");
  }
  out.lambda = prev ? prev->lambda : Vector::Constant(J, control.lambda0);
  out.mu.resize(J);
  out.coef.assign(J, std::vector<Matrix>(q));
  out.center.assign(J, std::vector<Vector>(q));
  out.sigma.resize(J);

  Matrix Y(T, r);
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < r; ++c) Y(t, c) = x(t, layout.resp[c]);
  // raw basis design, shared across states
  Matrix Z(T, q * K);
  for (int l = 0; l < q; ++l) {
    BsplineBasis basis(K, out.ranges(l, 0), out.ranges(l, 1));
    for (int t = 0; t < T; ++t)
      Z.block(t, l * K, 1, K) = basis.row(x(t, layout.covar[l])).transpose();
  }
  Matrix D = second_difference_matrix(K);
  Matrix Pblk = D.transpose() * D;
  Matrix P = Matrix::Zero(q * K, q * K);
  for (int l = 0; l < q; ++l) P.block(l * K, l * K, K, K) = Pblk;

  for (int j = 0; j < J; ++j) {
    double wj = w.col(j).sum();
    if (!(wj > 0.0))
      throw NumericError("additive_reg_mstep: zero total weight in state " + std::to_string(j + 1));
    Vector zbar = (Z.transpose() * w.col(j)) / wj;
    Vector ybar = (Y.transpose() * w.col(j)) / wj;
    Matrix A = Matrix::Zero(q * K, q * K);
    Matrix B = Matrix::Zero(q * K, r);
    for (int t = 0; t < T; ++t) {
      if (w(t, j) == 0.0) continue;
      Vector zc = Z.row(t).transpose() - zbar;
      A.noalias() += w(t, j) * (zc * zc.transpose());
      B.noalias() += w(t, j) * (zc * (Y.row(t).transpose() - ybar).transpose());
    }
    Matrix H = A + out.lambda[j] * P;
    Eigen::LDLT<Matrix> ldlt(H + 1e-10 * Matrix::Identity(q * K, q * K));
    if (ldlt.info() != Eigen::Success)
      throw NumericError("additive_reg_mstep: singular penalized system in state " +
                         std::to_string(j + 1));
    Matrix C = ldlt.solve(B);  // (qK) x r
    out.mu[j] = ybar;
    for (int l = 0; l < q; ++l) {
      out.coef[j][l] = C.middleRows(l * K, K);
      out.center[j][l] = zbar.segment(l * K, K);
    }
    Matrix S = Matrix::Zero(r, r);
    for (int t = 0; t < T; ++t) {
      if (w(t, j) == 0.0) continue;
      Vector res = (Y.row(t).transpose() - ybar) - C.transpose() * (Z.row(t).transpose() - zbar);
      S.noalias() += w(t, j) * (res * res.transpose());
    }
    out.sigma[j] = S / wj;
    double pen = 0.0;
    for (int l = 0; l < q; ++l) pen += (D * out.coef[j][l]).squaredNorm();
    if (pen > 1e-12) {
      double df = ldlt.solve(A).trace();
      out.lambda[j] = std::clamp((df - x.cols()) / pen, 0.0, 1e12);
    }
  }
  return out;
}

/// Per-state predicted responses for covariate rows xnew (n x covdim;
/// a vector is treated as a single covariate column).
inline std::vector<Matrix> addreg_hhsmm_predict(const AdditiveRegParams& par, const Matrix& xnew) {
  if (xnew.cols() != par.cov_dim())
    throw ValidationError("addreg_hhsmm_predict: covariate width mismatch");
  std::vector<Matrix> preds;
  for (int j = 0; j < par.n_states(); ++j) {
    Matrix out(xnew.rows(), par.resp_dim());
    for (int t = 0; t < xnew.rows(); ++t)
      out.row(t) = detail::addreg_mean(par, j, xnew.row(t).transpose()).transpose();
    preds.push_back(out);
  }
  return preds;
}

class AddregEmission final : public Emission {
 public:
  AddregEmission(AdditiveRegParams params, AdditiveRegControl control = {})
      : params_(std::move(params)), control_(control) {
    control_.K = params_.K;
    control_.resp_ind = params_.resp_ind;
  }

  std::string family() const override { return "addreg"; }
  int n_states() const override { return params_.n_states(); }
  int dim() const override { return params_.dim(); }
  const AdditiveRegParams& params() const { return params_; }

  double density(const Eigen::Ref<const Vector>& x, int j) const override {
    return dnorm_additive_reg(x, j, params_);
  }
  std::unique_ptr<Emission> mstep(const Matrix& x, const Matrix& w) const override {
    return std::make_unique<AddregEmission>(additive_reg_mstep(x, w, control_, &params_),
                                            control_);
  }

  int free_params() const override {
    const int q = params_.cov_dim(), r = params_.resp_dim(), K = params_.K;
    return n_states() * (r + q * (K - 1) * r + r * (r + 1) / 2);
  }

  json to_json() const override {
    json e;
    e["family"] = family();
    e["K"] = params_.K;
    e["resp_ind"] = params_.resp_ind;
    e["ranges"] = detail::matrix_to_json(params_.ranges);
    json mu = json::array(), coef = json::array(), center = json::array(), sigma = json::array();
    for (int j = 0; j < n_states(); ++j) {
      mu.push_back(detail::vector_to_json(params_.mu[j]));
      json cj = json::array(), zj = json::array();
      for (int l = 0; l < params_.cov_dim(); ++l) {
        cj.push_back(detail::matrix_to_json(params_.coef[j][l]));
        zj.push_back(detail::vector_to_json(params_.center[j][l]));
      }
      coef.push_back(cj);
      center.push_back(zj);
      sigma.push_back(detail::matrix_to_json(params_.sigma[j]));
    }
    e["mu"] = mu;
    e["coef"] = coef;
    e["center"] = center;
    e["sigma"] = sigma;
    e["lambda"] = detail::vector_to_json(params_.lambda);
    return e;
  }

  static std::unique_ptr<AddregEmission> from_json(const json& e) {
    AdditiveRegParams p;
    p.K = e.at("K").get<int>();
    p.resp_ind = e.at("resp_ind").get<IntVector>();
    p.ranges = detail::json_to_matrix(e.at("ranges"));
    for (const auto& v : e.at("mu")) p.mu.push_back(detail::json_to_vector(v));
    for (const auto& js : e.at("coef")) {
      std::vector<Matrix> state;
      for (const auto& v : js) state.push_back(detail::json_to_matrix(v));
      p.coef.push_back(state);
    }
    for (const auto& js : e.at("center")) {
      std::vector<Vector> state;
      for (const auto& v : js) state.push_back(detail::json_to_vector(v));
      p.center.push_back(state);
    }
    for (const auto& v : e.at("sigma")) p.sigma.push_back(detail::json_to_matrix(v));
    p.lambda = detail::json_to_vector(e.at("lambda"));
    return std::make_unique<AddregEmission>(std::move(p));
  }

  std::unique_ptr<Emission> clone() const override {
    return std::make_unique<AddregEmission>(params_, control_);
  }

 private:
  AdditiveRegParams params_;
  AdditiveRegControl control_;
};

}  // namespace hhsmm

#endif  // HHSMM_EMISSION_REGRESS_HPP
