#ifndef HHSMM_RUL_HPP
#define HHSMM_RUL_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "hhsmm/decode.hpp"
#include "hhsmm/special_functions.hpp"

namespace hhsmm {

enum class RulConfidence { mean, max };

inline RulConfidence parse_rul_confidence(const std::string& s) {
  if (s == "mean") return RulConfidence::mean;
  if (s == "max") return RulConfidence::max;
  throw ValidationError("unknown RUL confidence method '" + s + "'");
}

struct RulEstimate {
  double rul = 0.0;
  double rul_low = 0.0;
  double rul_up = 0.0;
  int last_state = 0;  // decoded state at the last observed time, 1-based
};

namespace detail {

struct StateSojournSummary {
  double mean = 0.0, sd = 0.0;
  double mode = 0.0, lower = 0.0, upper = 0.0;
};

/// Sojourn summaries per state: semi states from their discretized pmf,
/// Markov states from the (renormalized) geometric pmf with p_jj, and
/// zeros for the absorbing failure state.
inline std::vector<StateSojournSummary> rul_state_summaries(const ModelSpec& spec,
                                                            double gamma_level) {
  std::vector<StateSojournSummary> out(spec.J);
  for (int j = 0; j < spec.J; ++j) {
    if (j == spec.J - 1) continue;  // failure state contributes no remaining time
    Vector d;
    if (spec.semi[j]) {
      d = sojourn_pmf(spec.sojourn, j, spec.M[j]);
    } else {
      d = geometric_pmf(spec.transition(j, j), spec.M[j]);
      double s = d.sum();
      if (!(s > 0.0)) throw NumericError("estimate_rul: empty geometric sojourn");
      d /= s;
    }
    SojournSummary s = sojourn_summary(d, gamma_level);
    out[j] = {s.mean, s.sd, static_cast<double>(s.mode), static_cast<double>(s.lower),
              static_cast<double>(s.upper)};
  }
  return out;
}

}  // namespace detail

/** Residual-useful-lifetime estimation for left-to-right models with an
    absorbing final state. Decodes each sequence, tracks the in-state
    duration estimate d^_t(j) = d^_{t-1}(j) delta_t(j), adds the
    current-state remaining time, then iterates the next-state
    probabilities through the transition matrix, accumulating one sojourn
    contribution per predicted visit until the failure state appears.
    "mean" uses mean +- z sd per state, "max" the mode and the gamma/2
    pmf tail cuts. Negative contributions floor at zero. */
inline std::vector<RulEstimate> estimate_rul(const ModelSpec& spec, const SequenceSet& newdata,
                                             DecodeMethod method = DecodeMethod::smoothing,
                                             RulConfidence confidence = RulConfidence::mean,
                                             double level = 0.95) {
  auto rep = validate_model(spec);
  if (!rep.ok()) throw ValidationError("estimate_rul: invalid model\n" + rep.to_string());
  const int J = spec.J;
  if (std::fabs(spec.transition(J - 1, J - 1) - 1.0) > 1e-12 || spec.semi[J - 1])
    throw ValidationError("estimate_rul: model not left-to-right (no absorbing final state)");
  if (!(level > 0.0 && level < 1.0))
    throw ValidationError("estimate_rul: level must be in (0,1)");
  const double gamma_level = 1.0 - level;
  const double z = normal_quantile(1.0 - gamma_level / 2.0);
  auto summ = detail::rul_state_summaries(spec, gamma_level);

  int max_steps = 0;
  for (int j = 0; j < J; ++j) max_steps += spec.M[j];

  std::vector<RulEstimate> out;
  for (int i = 0; i < newdata.n_seq(); ++i) {
    Matrix x = newdata.sequence(i);
    const int tau = static_cast<int>(x.rows());
    DecodeResult dec = decode_probabilities(x, spec, method);
    Vector delta = dec.delta.col(tau - 1);

    // in-state duration tracker, updated while t <= M_j then held
    Vector dhat = Vector::Ones(J);
    for (int t = 2; t <= tau; ++t)
      for (int j = 0; j < J; ++j)
        if (t <= spec.M[j]) dhat[j] *= dec.delta(j, t - 1);

    RulEstimate est;
    est.last_state = dec.states[tau - 1];
    if (est.last_state == J) {
      out.push_back(est);
      continue;
    }
    double point, low, up;
    if (confidence == RulConfidence::mean) {
      point = low = up = 0.0;
      for (int j = 0; j < J; ++j) {
        point += (summ[j].mean - dhat[j]) * delta[j];
        low += (summ[j].mean - dhat[j] - z * summ[j].sd) * delta[j];
        up += (summ[j].mean - dhat[j] + z * summ[j].sd) * delta[j];
      }
    } else {
      point = low = up = 0.0;
      for (int j = 0; j < J; ++j) {
        point += (summ[j].mode - dhat[j]) * delta[j];
        low += (summ[j].lower - dhat[j]) * delta[j];
        up += (summ[j].upper - dhat[j]) * delta[j];
      }
    }
    est.rul = std::max(0.0, point);
    est.rul_low = std::max(0.0, low);
    est.rul_up = std::max(0.0, up);

    for (int step = 0; step < max_steps; ++step) {
      delta = spec.transition.transpose() * delta;
      double s = delta.sum();
      if (s > 0.0) delta /= s;
      int next = 0;
      for (int j = 1; j < J; ++j)
        if (delta[j] > delta[next]) next = j;
      if (next == J - 1) break;  // failure follows the accumulated visits
      double vp = 0.0, vl = 0.0, vu = 0.0;
      for (int j = 0; j < J; ++j) {
        if (confidence == RulConfidence::mean) {
          vp += summ[j].mean * delta[j];
          vl += (summ[j].mean - z * summ[j].sd) * delta[j];
          vu += (summ[j].mean + z * summ[j].sd) * delta[j];
        } else {
          vp += summ[j].mode * delta[j];
          vl += summ[j].lower * delta[j];
          vu += summ[j].upper * delta[j];
        }
      }
      est.rul += std::max(0.0, vp);
      est.rul_low += std::max(0.0, vl);
      est.rul_up += std::max(0.0, vu);
    }
    out.push_back(est);
  }
  return out;
}

}  // namespace hhsmm

#endif  // HHSMM_RUL_HPP
