#ifndef HHSMM_DECODE_HPP
#define HHSMM_DECODE_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "hhsmm/inference.hpp"

namespace hhsmm {

enum class DecodeMethod { viterbi, smoothing };

inline DecodeMethod parse_decode_method(const std::string& s) {
  if (s == "viterbi") return DecodeMethod::viterbi;
  if (s == "smoothing") return DecodeMethod::smoothing;
  throw ValidationError("unknown decode method '" + s + "'");
}

namespace detail {

/** One log-domain Viterbi sweep. V holds the dynamic-programming values:
    for a semi state, the best log-probability of paths in which the
    sojourn in j ends exactly at t (pmf form); Vin holds the in-state
    scores where the sojourn covers t (survival form), which at the final
    time is the quantity the path maximization uses. Markov rows coincide.
    Ties break to the lowest predecessor index and shortest sojourn. */
struct ViterbiSweep {
  Matrix V;
  Matrix Vin;
  Eigen::MatrixXi bp_state, bp_u;    // pmf-form backpointers (-1 = initial)
  Eigen::MatrixXi bpin_state, bpin_u;  // survival-form backpointers
};

inline ViterbiSweep viterbi_sweep(const Matrix& x, const ModelSpec& spec) {
  const int J = spec.J, tau = static_cast<int>(x.rows());
  Matrix dens = emission_matrix(x, spec);
  Matrix logdens = dens.array().log();
  Matrix logtrans = spec.transition.array().max(0.0).log();
  Vector loginit = spec.init.array().max(0.0).log();
  std::vector<Vector> logd(J), logD(J);
  for (int j = 0; j < J; ++j) {
    if (!spec.semi[j]) continue;
    Vector d = sojourn_pmf(spec.sojourn, j, spec.M[j]);
    logd[j] = d.array().max(0.0).log();
    logD[j] = sojourn_survival(d).array().max(0.0).log();
  }
  const double ninf = -std::numeric_limits<double>::infinity();
  ViterbiSweep sw;
  sw.V = Matrix::Constant(J, tau, ninf);
  sw.Vin = Matrix::Constant(J, tau, ninf);
  sw.bp_state = Eigen::MatrixXi::Constant(J, tau, -1);
  sw.bp_u = Eigen::MatrixXi::Constant(J, tau, 1);
  sw.bpin_state = Eigen::MatrixXi::Constant(J, tau, -1);
  sw.bpin_u = Eigen::MatrixXi::Constant(J, tau, 1);

  for (int t = 0; t < tau; ++t) {
    for (int j = 0; j < J; ++j) {
      if (!spec.semi[j]) {
        double best = ninf;
        int besti = -1;
        if (t == 0) {
          best = loginit[j];
        } else {
          for (int i = 0; i < J; ++i) {
            double v = logtrans(i, j) + sw.V(i, t - 1);
            if (v > best) {
              best = v;
              besti = i;
            }
          }
        }
        sw.V(j, t) = logdens(j, t) + best;
        sw.Vin(j, t) = sw.V(j, t);
        sw.bp_state(j, t) = besti;
        sw.bpin_state(j, t) = besti;
        continue;
      }
      const int Mj = spec.M[j];
      double bestd = ninf, bestD = ninf, cum = 0.0;
      int besti_d = -1, bestu_d = 1, besti_D = -1, bestu_D = 1;
      const int umax = std::min(t, Mj);
      for (int u = 1; u <= umax; ++u) {
        double inbest = ninf;
        int ini = -1;
        for (int i = 0; i < J; ++i) {
          double v = logtrans(i, j) + sw.V(i, t - u);
          if (v > inbest) {
            inbest = v;
            ini = i;
          }
        }
        double cd = cum + logd[j][u - 1] + inbest;
        if (cd > bestd) {
          bestd = cd;
          besti_d = ini;
          bestu_d = u;
        }
        double cD = cum + logD[j][u - 1] + inbest;
        if (cD > bestD) {
          bestD = cD;
          besti_D = ini;
          bestu_D = u;
        }
        cum += logdens(j, t - u);
      }
      if (t + 1 <= Mj) {
        double cd = cum + logd[j][t] + loginit[j];
        if (cd > bestd) {
          bestd = cd;
          besti_d = -1;
          bestu_d = t + 1;
        }
        double cD = cum + logD[j][t] + loginit[j];
        if (cD > bestD) {
          bestD = cD;
          besti_D = -1;
          bestu_D = t + 1;
        }
      }
      sw.V(j, t) = logdens(j, t) + bestd;
      sw.Vin(j, t) = logdens(j, t) + bestD;
      sw.bp_state(j, t) = besti_d;
      sw.bp_u(j, t) = bestu_d;
      sw.bpin_state(j, t) = besti_D;
      sw.bpin_u(j, t) = bestu_D;
    }
  }
  return sw;
}

}  // namespace detail

struct ViterbiResult {
  IntVector states;     // 1-based most probable path
  Vector final_scores;  // log alpha_j(tau-1) per state (survival form)
  double log_score = 0.0;
};

namespace detail {
inline ViterbiResult extract_path(const ViterbiSweep& sw, const ModelSpec& spec, int tau);
}

/** Most probable state path. The final step maximizes the in-state
    (survival) scores; interior segments follow the pmf-form
    backpointers. */
inline ViterbiResult viterbi(const Matrix& x, const ModelSpec& spec) {
  auto rep = validate_model(spec);
  if (!rep.ok()) throw ValidationError("viterbi: invalid model\n" + rep.to_string());
  const int tau = static_cast<int>(x.rows());
  detail::ViterbiSweep sw = detail::viterbi_sweep(x, spec);
  return detail::extract_path(sw, spec, tau);
}

namespace detail {
inline ViterbiResult extract_path(const ViterbiSweep& sw, const ModelSpec& spec, int tau) {
  const int J = spec.J;
  ViterbiResult res;
  res.final_scores = sw.Vin.col(tau - 1);
  int jbest = 0;
  for (int j = 1; j < J; ++j)
    if (sw.Vin(j, tau - 1) > sw.Vin(jbest, tau - 1)) jbest = j;
  res.log_score = sw.Vin(jbest, tau - 1);
  if (!std::isfinite(res.log_score))
    throw NumericError("viterbi: all state paths have zero probability");
  res.states.assign(tau, 0);
  int t = tau - 1, j = jbest;
  bool final_step = true;
  while (t >= 0) {
    int pred;
    if (spec.semi[j]) {
      int u = final_step ? sw.bpin_u(j, t) : sw.bp_u(j, t);
      pred = final_step ? sw.bpin_state(j, t) : sw.bp_state(j, t);
      for (int v = 0; v < u; ++v) res.states[t - v] = j + 1;
      t -= u;
    } else {
      pred = final_step ? sw.bpin_state(j, t) : sw.bp_state(j, t);
      res.states[t] = j + 1;
      --t;
    }
    final_step = false;
    if (pred < 0) break;
    j = pred;
  }
  return res;
}
}  // namespace detail

/// Smoothed-probability decoding: argmax_j L_j(t), ties to the lowest index.
inline IntVector smoothing_decode(const Matrix& x, const ModelSpec& spec) {
  SequenceEStep st = forward_backward(x, spec);
  const int tau = static_cast<int>(x.rows());
  IntVector out(tau);
  for (int t = 0; t < tau; ++t) {
    int best = 0;
    for (int j = 1; j < spec.J; ++j)
      if (st.L(j, t) > st.L(best, t)) best = j;
    out[t] = best + 1;
  }
  return out;
}

/// Decoded states plus per-time state probabilities delta(j,t):
/// normalized exp of the in-state Viterbi scores, or the smoothed L.
struct DecodeResult {
  IntVector states;
  Matrix delta;  // J x tau
};

inline DecodeResult decode_probabilities(const Matrix& x, const ModelSpec& spec,
                                         DecodeMethod method) {
  DecodeResult out;
  const int J = spec.J, tau = static_cast<int>(x.rows());
  out.delta.resize(J, tau);
  if (method == DecodeMethod::smoothing) {
    SequenceEStep st = forward_backward(x, spec);
    out.delta = st.L;
    out.states.resize(tau);
    for (int t = 0; t < tau; ++t) {
      int best = 0;
      for (int j = 1; j < J; ++j)
        if (st.L(j, t) > st.L(best, t)) best = j;
      out.states[t] = best + 1;
    }
    return out;
  }
  detail::ViterbiSweep sw = detail::viterbi_sweep(x, spec);
  out.states = detail::extract_path(sw, spec, tau).states;
  for (int t = 0; t < tau; ++t) {
    double m = sw.Vin.col(t).maxCoeff();
    Vector e = (sw.Vin.col(t).array() - m).exp();
    out.delta.col(t) = e / e.sum();
  }
  return out;
}

/** Decodes the observed span, then predicts `future` states by
    propagating the normalized final-state probabilities through the
    transition matrix, taking the argmax at each step. */
inline std::vector<IntVector> predict_states(const ModelSpec& spec, const SequenceSet& newdata,
                                             DecodeMethod method, int future = 0) {
  if (future < 0) throw ValidationError("predict_states: future must be >= 0");
  std::vector<IntVector> out;
  for (int i = 0; i < newdata.n_seq(); ++i) {
    Matrix x = newdata.sequence(i);
    DecodeResult dec = decode_probabilities(x, spec, method);
    IntVector states = dec.states;
    Vector delta = dec.delta.col(x.rows() - 1);
    for (int hstep = 0; hstep < future; ++hstep) {
      delta = spec.transition.transpose() * delta;
      double s = delta.sum();
      if (s > 0.0) delta /= s;
      int best = 0;
      for (int j = 1; j < spec.J; ++j)
        if (delta[j] > delta[best]) best = j;
      states.push_back(best + 1);
    }
    out.push_back(states);
  }
  return out;
}

}  // namespace hhsmm

#endif  // HHSMM_DECODE_HPP
