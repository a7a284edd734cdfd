#ifndef HHSMM_FIT_HPP
#define HHSMM_FIT_HPP

#include <cmath>
#include <vector>

#include "hhsmm/inference.hpp"

namespace hhsmm {

struct MStepOptions {
  bool lock_init = false;
  bool lock_transition = false;
  bool refine_sojourn = false;
};

namespace detail {

/// sum_u eta_u log d_u for a candidate parametric sojourn row.
inline double sojourn_quasi_loglik(const Vector& eta, const SojournSpec& spec, int M) {
  Vector d = sojourn_pmf(spec, 0, M);
  double q = 0.0;
  for (int u = 0; u < M; ++u) {
    if (eta[u] == 0.0) continue;
    q += eta[u] * std::log(std::max(d[u], 1e-300));
  }
  return q;
}

/** Optional golden-section refinement of the shape (sigma for lognormal)
    around the moment fit, holding the fitted mean fixed. */
inline SojournMoments refine_sojourn_shape(const Vector& eta, int M, SojournType type,
                                           const SojournMoments& mom) {
  double mean;
  switch (type) {
    case SojournType::gamma: mean = mom.a * mom.b; break;
    case SojournType::weibull: mean = mom.b * std::exp(std::lgamma(1.0 + 1.0 / mom.a)); break;
    case SojournType::lognormal: mean = mom.a + mom.b * mom.b / 2.0; break;  // log scale
    default: return mom;
  }
  auto make = [&](double shape) {
    SojournSpec s;
    s.type = type;
    switch (type) {
      case SojournType::gamma:
        s.shape = Vector::Constant(1, shape);
        s.scale = Vector::Constant(1, mean / shape);
        break;
      case SojournType::weibull:
        s.shape = Vector::Constant(1, shape);
        s.scale = Vector::Constant(1, mean / std::exp(std::lgamma(1.0 + 1.0 / shape)));
        break;
      case SojournType::lognormal:
        s.sigma = Vector::Constant(1, shape);
        s.mu = Vector::Constant(1, mean - shape * shape / 2.0);
        break;
      default: break;
    }
    return s;
  };
  auto q = [&](double shape) { return sojourn_quasi_loglik(eta, make(shape), M); };
  double lo = mom.a / 5.0, hi = mom.a * 5.0;
  if (type == SojournType::lognormal) {
    lo = mom.b / 5.0;
    hi = mom.b * 5.0;
  }
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - gr * (hi - lo), e = lo + gr * (hi - lo);
  double qc = q(c), qe = q(e);
  for (int it = 0; it < 60; ++it) {
    if (qc > qe) {
      hi = e;
      e = c;
      qe = qc;
      c = hi - gr * (hi - lo);
      qc = q(c);
    } else {
      lo = c;
      c = e;
      qc = qe;
      e = lo + gr * (hi - lo);
      qe = q(e);
    }
    if (hi - lo < 1e-6 * (1.0 + hi)) break;
  }
  double best = 0.5 * (lo + hi);
  SojournSpec s = make(best);
  SojournMoments out;
  if (type == SojournType::lognormal) {
    out.a = s.mu[0];
    out.b = s.sigma[0];
  } else {
    out.a = s.shape[0];
    out.b = s.scale[0];
  }
  return out;
}

}  // namespace detail

/** Core M-step: initial probabilities from the state posteriors at t=0,
    transition rows from expected transition counts (semi rows keep a
    zero diagonal), sojourn parameters from the eta pseudo-counts
    (normalized for the nonparametric family, weighted moments otherwise).
    The emission update is delegated to the family. */
inline ModelSpec mstep_core(const EStepCache& cache, const ModelSpec& spec,
                            const MStepOptions& opts = {}) {
  ModelSpec out = spec;
  const int J = spec.J;
  if (!opts.lock_init) {
    Vector init = cache.init_acc / cache.n_seq;
    double s = init.sum();
    if (!(s > 0.0)) throw NumericError("mstep_core: empty initial-state posterior");
    out.init = init / s;
  }
  if (!opts.lock_transition) {
    Matrix trans = cache.trans_num;
    for (int i = 0; i < J; ++i) {
      if (spec.semi[i]) trans(i, i) = 0.0;
      double s = trans.row(i).sum();
      if (!(s > 0.0))
        throw NumericError("mstep_core: zero expected exit mass from state " +
                           std::to_string(i + 1));
      trans.row(i) /= s;
    }
    out.transition = trans;
  }
  if (spec.sojourn.type != SojournType::none) {
    for (int j = 0; j < J; ++j) {
      if (!spec.semi[j]) continue;
      const int Mj = spec.M[j];
      Vector eta = cache.eta.row(j).head(Mj).transpose();
      double total = eta.sum();
      if (!(total > 0.0))
        throw NumericError("mstep_core: empty sojourn pseudo-counts for state " +
                           std::to_string(j + 1));
      if (spec.sojourn.type == SojournType::nonparametric) {
        if (static_cast<int>(out.sojourn.d.size()) <= j) out.sojourn.d.resize(J);
        out.sojourn.d[j] = eta / total;
      } else {
        Vector u(Mj);
        for (int v = 0; v < Mj; ++v) u[v] = v + 1;
        SojournMoments mom = fit_sojourn_moments(u, eta, spec.sojourn.type);
        if (opts.refine_sojourn)
          mom = detail::refine_sojourn_shape(eta, Mj, spec.sojourn.type, mom);
        if (spec.sojourn.type == SojournType::lognormal) {
          out.sojourn.mu[j] = mom.a;
          out.sojourn.sigma[j] = mom.b;
        } else {
          out.sojourn.shape[j] = mom.a;
          out.sojourn.scale[j] = mom.b;
        }
      }
    }
  }
  return out;
}

/** Free-parameter count for AIC/BIC: J-1 initial probabilities (0 when
    locked), J-1 free entries per Markov transition row and J-2 per semi
    row, 2 parameters per parametric semi state (M_j - 1 nonparametric),
    plus the emission family's own count. */
inline int free_param_count(const ModelSpec& spec, bool lock_init) {
  int k = lock_init ? 0 : spec.J - 1;
  for (int j = 0; j < spec.J; ++j)
    k += std::max(0, spec.semi[j] ? spec.J - 2 : spec.J - 1);
  for (int j = 0; j < spec.J; ++j) {
    if (!spec.semi[j]) continue;
    k += spec.sojourn.type == SojournType::nonparametric ? spec.M[j] - 1 : 2;
  }
  return k + spec.emission->free_params();
}

struct FitControl {
  int maxit = 100;
  double tol = 1e-4;  // relative log-likelihood change
  bool lock_init = false;
  bool lock_transition = false;
  bool refine_sojourn = false;
  bool verbose = false;
};

struct FitResult {
  ModelSpec model;
  std::vector<double> loglik_trace;
  double loglik = 0.0;
  double AIC = 0.0;
  double BIC = 0.0;
  int iterations = 0;
  bool converged = false;
  IntVector yhat;  // smoothing-decoded training states
};

/** EM driver: alternates the aggregated E-step with the core and
    emission M-steps until the relative log-likelihood change falls
    below tol or maxit is reached. The trace holds the log-likelihood of
    the model at the start of each iteration; the reported loglik, AIC
    and BIC belong to the returned model. */
inline FitResult hhsmmfit(const SequenceSet& set, const ModelSpec& init_model,
                          const FitControl& control = {}) {
  auto rep = validate_model(init_model);
  if (!rep.ok()) throw ValidationError("hhsmmfit: invalid initial model\n" + rep.to_string());
  MStepOptions mopts;
  mopts.lock_init = control.lock_init;
  mopts.lock_transition = control.lock_transition;
  mopts.refine_sojourn = control.refine_sojourn;

  FitResult res;
  res.model = init_model;
  EStepCache cache;
  bool have_cache = false;
  for (int it = 1; it <= control.maxit; ++it) {
    cache = estep(set, res.model);
    have_cache = true;
    if (!std::isfinite(cache.loglik))
      throw NumericError("hhsmmfit: log-likelihood diverged at iteration " + std::to_string(it));
    res.loglik_trace.push_back(cache.loglik);
    res.iterations = it;
    if (control.verbose)
      std::fprintf(stderr, "iteration: %d   log-likelihood = %.6f\n", it, cache.loglik);
    if (it >= 2) {
      double prev = res.loglik_trace[it - 2];
      double rel = std::fabs(cache.loglik - prev) / (std::fabs(prev) + 1e-12);
      if (rel < control.tol) {
        res.converged = true;
        break;
      }
    }
    ModelSpec next = mstep_core(cache, res.model, mopts);
    next.emission = std::shared_ptr<const Emission>(
        res.model.emission->mstep(set.x, cache.weights).release());
    res.model = next;
    have_cache = false;
  }
  if (!have_cache) {
    cache = estep(set, res.model);
    res.loglik_trace.push_back(cache.loglik);
  }
  res.loglik = res.loglik_trace.back();
  int k = free_param_count(res.model, control.lock_init);
  res.AIC = -2.0 * res.loglik + 2.0 * k;
  res.BIC = -2.0 * res.loglik + k * std::log(static_cast<double>(set.total_rows()));
  res.yhat.resize(set.total_rows());
  for (int t = 0; t < set.total_rows(); ++t) {
    int best = 0;
    for (int j = 1; j < res.model.J; ++j)
      if (cache.weights(t, j) > cache.weights(t, best)) best = j;
    res.yhat[t] = best + 1;
  }
  return res;
}

/// Forward-pass log-likelihood of each sequence in newdata under the model.
inline std::vector<double> score(const SequenceSet& newdata, const ModelSpec& spec) {
  auto rep = validate_model(spec);
  if (!rep.ok()) throw ValidationError("score: invalid model\n" + rep.to_string());
  std::vector<double> out;
  for (int i = 0; i < newdata.n_seq(); ++i) out.push_back(forward_loglik(newdata.sequence(i), spec));
  return out;
}

}  // namespace hhsmm

#endif  // HHSMM_FIT_HPP
