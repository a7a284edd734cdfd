#ifndef HHSMM_INFERENCE_HPP
#define HHSMM_INFERENCE_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "hhsmm/data.hpp"
#include "hhsmm/model.hpp"

namespace hhsmm {

/** Forward/backward quantities of one sequence. In F, a semi-Markovian
    state's row holds the end-of-sojourn probabilities
    P(S_{t+1} != j, S_t = j | x_{0:t}) for t < tau-1 and the filtered
    value at tau-1; a Markovian state's row holds the filtered
    probabilities throughout. Fcov holds the filtered state-occupancy
    probabilities for every state (columns sum to one), L the smoothed
    probabilities, G the entering-backward factors, N the per-step
    normalizers and eta the sojourn pseudo-counts. */
struct SequenceEStep {
  Matrix F;
  Matrix Fcov;
  Matrix IN;    // IN(j,t) = sum_i transition(i,j) F(i,t): mass entering j at t+1
  Matrix L;
  Matrix L1;
  Matrix G;
  Vector N;
  Matrix eta;
  double loglik = 0.0;
};

namespace detail {

/// Emission densities dens(j,t) with the underflow guard: an all-zero
/// column is an error, tiny positives are floored at 1e-300.
inline Matrix emission_matrix(const Matrix& x, const ModelSpec& spec) {
  const int tau = static_cast<int>(x.rows());
  Matrix dens(spec.J, tau);
  for (int t = 0; t < tau; ++t) {
    double colmax = 0.0;
    for (int j = 0; j < spec.J; ++j) {
      double v = spec.emission->density(x.row(t).transpose(), j);
      if (!std::isfinite(v) || v < 0.0)
        throw NumericError("emission density not finite at t=" + std::to_string(t) + ", state " +
                           std::to_string(j + 1));
      dens(j, t) = v;
      colmax = std::max(colmax, v);
    }
    if (colmax <= 0.0)
      throw NumericError("forward: zero likelihood in every state at t=" + std::to_string(t));
    for (int j = 0; j < spec.J; ++j) dens(j, t) = std::max(dens(j, t), 1e-300);
  }
  return dens;
}

}  // namespace detail

/** Forward recursion over one sequence. Semi states accumulate sojourn
    terms d_j(u) (and survival D_j(u) for the occupancy version) against
    the mass that entered u steps ago; Markov states follow the classical
    filter. Fills F, Fcov, IN, N and the log-likelihood sum(log N_t). */
inline void forward_pass(const Matrix& dens, const ModelSpec& spec,
                         const std::vector<Vector>& d, const std::vector<Vector>& D,
                         SequenceEStep& out) {
  const int J = spec.J, tau = static_cast<int>(dens.cols());
  out.F.setZero(J, tau);
  out.Fcov.setZero(J, tau);
  out.IN.setZero(J, tau);
  out.N.setZero(tau);
  out.loglik = 0.0;
  Vector uF(J), uFcov(J);
  for (int t = 0; t < tau; ++t) {
    if (t > 0) out.IN.col(t - 1) = spec.transition.transpose() * out.F.col(t - 1);
    for (int j = 0; j < J; ++j) {
      if (!spec.semi[j]) {
        double base = t == 0 ? spec.init[j] : out.IN(j, t - 1);
        uF[j] = dens(j, t) * base;
        uFcov[j] = uF[j];
        continue;
      }
      const int Mj = spec.M[j];
      double send = 0.0, scov = 0.0, rp = 1.0;
      const int umax = std::min(t, Mj);
      for (int u = 1; u <= umax; ++u) {
        double inm = out.IN(j, t - u);
        send += rp * d[j][u - 1] * inm;
        scov += rp * D[j][u - 1] * inm;
        rp *= dens(j, t - u) / out.N[t - u];
      }
      if (t + 1 <= Mj) {
        // initial sojourn covering 0..t (rp now spans nu = 1..t)
        send += rp * d[j][t] * spec.init[j];
        scov += rp * D[j][t] * spec.init[j];
      }
      uF[j] = dens(j, t) * send;
      uFcov[j] = dens(j, t) * scov;
    }
    double Nt = uFcov.sum();
    if (!(Nt > 0.0) || !std::isfinite(Nt))
      throw NumericError("forward: normalizer underflow at t=" + std::to_string(t));
    out.N[t] = Nt;
    out.loglik += std::log(Nt);
    out.F.col(t) = uF / Nt;
    out.Fcov.col(t) = uFcov / Nt;
  }
  // final column of F carries the filtered value for semi states
  for (int j = 0; j < J; ++j)
    if (spec.semi[j]) out.F(j, tau - 1) = out.Fcov(j, tau - 1);
  out.IN.col(tau - 1) = spec.transition.transpose() * out.F.col(tau - 1);
}

/** Backward recursion: entering-backward factors G, smoothed L and L1,
    and the sojourn pseudo-counts eta (expected completed sojourn counts
    plus right-censored mass). Call after forward_pass. */
inline void backward_pass(const Matrix& dens, const ModelSpec& spec,
                          const std::vector<Vector>& d, const std::vector<Vector>& D,
                          SequenceEStep& out) {
  const int J = spec.J, tau = static_cast<int>(dens.cols());
  const int Mmax = *std::max_element(spec.M.begin(), spec.M.end());
  out.L.setZero(J, tau);
  out.L1.setZero(J, tau);
  out.G.setZero(J, tau);
  out.eta.setZero(J, Mmax);
  Matrix exitback = Matrix::Zero(J, tau);  // sum_k transition(j,k) G(k,t+1)

  out.L.col(tau - 1) = out.Fcov.col(tau - 1);
  for (int j = 0; j < J; ++j) out.G(j, tau - 1) = dens(j, tau - 1) / out.N[tau - 1];

  for (int s = tau - 2; s >= 0; --s) {
    exitback.col(s) = spec.transition * out.G.col(s + 1);
    for (int j = 0; j < J; ++j) {
      if (!spec.semi[j]) {
        out.L(j, s) = out.F(j, s) * exitback(j, s);
        out.G(j, s) = dens(j, s) / out.N[s] * exitback(j, s);
      } else {
        out.L1(j, s) = out.F(j, s) * exitback(j, s);
        const int Mj = spec.M[j];
        double acc = 0.0, rp = 1.0;
        const int umax = std::min(tau - 1 - s, Mj);
        for (int u = 1; u <= umax; ++u) {
          rp *= dens(j, s + u - 1) / out.N[s + u - 1];
          acc += d[j][u - 1] * rp * exitback(j, s + u - 1);
        }
        if (tau - s <= Mj) {
          // right-censored sojourn covering s..tau-1
          double rp_full = rp * dens(j, tau - 1) / out.N[tau - 1];
          acc += D[j][tau - s - 1] * rp_full;
        }
        out.G(j, s) = acc;
      }
    }
  }
  // smoothed probabilities for semi states via the in/out flow identity
  for (int s = tau - 2; s >= 0; --s) {
    for (int j = 0; j < J; ++j) {
      if (!spec.semi[j]) continue;
      double entry = out.G(j, s + 1) * out.IN(j, s);
      double v = out.L1(j, s) + out.L(j, s + 1) - entry;
      if (v < -1e-10)
        throw NumericError("backward: smoothed probability " + std::to_string(v) + " at t=" +
                           std::to_string(s) + ", state " + std::to_string(j + 1));
      out.L(j, s) = std::max(v, 0.0);
    }
  }
  // sojourn pseudo-counts
  for (int j = 0; j < J; ++j) {
    if (!spec.semi[j]) continue;
    const int Mj = spec.M[j];
    // entries at time s >= 1 with entering mass IN(j, s-1)
    for (int s = 1; s <= tau - 1; ++s) {
      double inm = out.IN(j, s - 1);
      if (inm == 0.0) continue;
      double rp = 1.0;
      const int umax = std::min(tau - 1 - s, Mj);
      for (int u = 1; u <= umax; ++u) {
        rp *= dens(j, s + u - 1) / out.N[s + u - 1];
        out.eta(j, u - 1) += d[j][u - 1] * rp * exitback(j, s + u - 1) * inm;
      }
      if (tau - s <= Mj) {
        double rp_full = rp * dens(j, tau - 1) / out.N[tau - 1];
        out.eta(j, tau - s - 1) += D[j][tau - s - 1] * rp_full * inm;
      }
    }
    // initial sojourn starting at time 0
    if (spec.init[j] > 0.0) {
      double rp = 1.0;
      const int umax = std::min(tau - 1, Mj);
      for (int u = 1; u <= umax; ++u) {
        rp *= dens(j, u - 1) / out.N[u - 1];
        out.eta(j, u - 1) += spec.init[j] * d[j][u - 1] * rp * exitback(j, u - 1);
      }
      if (tau <= Mj) {
        double rp_full = rp * dens(j, tau - 1) / out.N[tau - 1];
        for (int u = tau; u <= Mj; ++u)
          out.eta(j, u - 1) += spec.init[j] * d[j][u - 1] * rp_full;
      }
    }
  }
}

/// Forward+backward on one observation block.
inline SequenceEStep forward_backward(const Matrix& x, const ModelSpec& spec) {
  SequenceEStep st;
  Matrix dens = detail::emission_matrix(x, spec);
  std::vector<Vector> d = sojourn_rows(spec), D(spec.J);
  for (int j = 0; j < spec.J; ++j)
    if (spec.semi[j]) D[j] = sojourn_survival(d[j]);
  forward_pass(dens, spec, d, D, st);
  backward_pass(dens, spec, d, D, st);
  return st;
}

/// Forward-only log-likelihood of one observation block.
inline double forward_loglik(const Matrix& x, const ModelSpec& spec) {
  SequenceEStep st;
  Matrix dens = detail::emission_matrix(x, spec);
  std::vector<Vector> d = sojourn_rows(spec), D(spec.J);
  for (int j = 0; j < spec.J; ++j)
    if (spec.semi[j]) D[j] = sojourn_survival(d[j]);
  forward_pass(dens, spec, d, D, st);
  return st.loglik;
}

/** Aggregated E-step over all sequences: stacked smoothed weights
    (T_total x J), summed sojourn pseudo-counts and expected transition
    numerators, initial-state posteriors, and the total log-likelihood. */
struct EStepCache {
  Matrix weights;
  Matrix eta;          // J x Mmax
  Matrix trans_num;    // expected transition counts (smoothed)
  Vector init_acc;     // sum over sequences of L(.,0)
  int n_seq = 0;
  double loglik = 0.0;
  std::vector<double> seq_loglik;
};

inline EStepCache estep(const SequenceSet& set, const ModelSpec& spec) {
  auto rep = validate_model(spec);
  if (!rep.ok()) throw ValidationError("estep: invalid model\n" + rep.to_string());
  const int J = spec.J;
  const int Mmax = *std::max_element(spec.M.begin(), spec.M.end());
  EStepCache cache;
  cache.weights.setZero(set.total_rows(), J);
  cache.eta.setZero(J, Mmax);
  cache.trans_num.setZero(J, J);
  cache.init_acc.setZero(J);
  cache.n_seq = set.n_seq();

  std::vector<Vector> d = sojourn_rows(spec), D(spec.J);
  for (int j = 0; j < spec.J; ++j)
    if (spec.semi[j]) D[j] = sojourn_survival(d[j]);

  int row = 0;
  for (int i = 0; i < set.n_seq(); ++i) {
    Matrix x = set.sequence(i);
    SequenceEStep st;
    Matrix dens = detail::emission_matrix(x, spec);
    forward_pass(dens, spec, d, D, st);
    backward_pass(dens, spec, d, D, st);
    const int tau = set.N[i];
    cache.weights.middleRows(row, tau) = st.L.transpose();
    cache.eta += st.eta;
    cache.init_acc += st.L.col(0);
    for (int t = 0; t + 1 < tau; ++t)
      for (int ifrom = 0; ifrom < J; ++ifrom)
        for (int jto = 0; jto < J; ++jto)
          cache.trans_num(ifrom, jto) +=
              st.F(ifrom, t) * spec.transition(ifrom, jto) * st.G(jto, t + 1);
    cache.loglik += st.loglik;
    cache.seq_loglik.push_back(st.loglik);
    row += tau;
  }
  return cache;
}

}  // namespace hhsmm

#endif  // HHSMM_INFERENCE_HPP
