#ifndef HHSMM_SOJOURN_HPP
#define HHSMM_SOJOURN_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hhsmm/common.hpp"
#include "hhsmm/special_functions.hpp"

namespace hhsmm {

enum class SojournType { none, gamma, weibull, lognormal, nonparametric };

inline std::string sojourn_type_name(SojournType t) {
  switch (t) {
    case SojournType::none: return "none";
    case SojournType::gamma: return "gamma";
    case SojournType::weibull: return "weibull";
    case SojournType::lognormal: return "lognormal";
    case SojournType::nonparametric: return "nonparametric";
  }
  return "none";
}

inline SojournType parse_sojourn_type(const std::string& s) {
  if (s == "none") return SojournType::none;
  if (s == "gamma") return SojournType::gamma;
  if (s == "weibull") return SojournType::weibull;
  if (s == "lognormal") return SojournType::lognormal;
  if (s == "nonparametric") return SojournType::nonparametric;
  throw ValidationError("unknown sojourn type '" + s + "'");
}

/** Per-state sojourn specification. Entries for Markovian states are
    placeholders (zeros / empty rows). gamma and weibull use shape/scale,
    lognormal uses mu/sigma, nonparametric stores explicit pmf rows. */
struct SojournSpec {
  SojournType type = SojournType::none;
  Vector shape;             // gamma, weibull
  Vector scale;
  Vector mu;                // lognormal
  Vector sigma;
  std::vector<Vector> d;    // nonparametric rows d_j(1..M_j)
};

/** Discretized sojourn pmf for state j over u = 1..M:
    d(u) = [G(u) - G(u-1)] / G(M) with G the family CDF; the stored row
    (renormalized) for the nonparametric family. */
inline Vector sojourn_pmf(const SojournSpec& spec, int j, int M) {
  if (M < 1) throw ValidationError("sojourn_pmf: M must be >= 1");
  if (spec.type == SojournType::nonparametric) {
    if (j >= static_cast<int>(spec.d.size()) || spec.d[j].size() == 0)
      throw ValidationError("sojourn_pmf: no nonparametric row for state " + std::to_string(j + 1));
    Vector row = Vector::Zero(M);
    int m = std::min<int>(M, static_cast<int>(spec.d[j].size()));
    row.head(m) = spec.d[j].head(m);
    if (row.minCoeff() < 0.0)
      throw ValidationError("sojourn_pmf: negative nonparametric mass in state " +
                            std::to_string(j + 1));
    double total = row.sum();
    if (!(total > 0.0)) throw NumericError("sojourn_pmf: zero total mass");
    return row / total;
  }
  double a = 0.0, b = 0.0;
  auto cdf = [&](double x) -> double {
    switch (spec.type) {
      case SojournType::gamma: return gamma_cdf(x, a, b);
      case SojournType::weibull: return weibull_cdf(x, a, b);
      case SojournType::lognormal: return lognormal_cdf(x, a, b);
      default: throw ValidationError("sojourn_pmf: state has no sojourn distribution");
    }
  };
  if (spec.type == SojournType::lognormal) {
    a = spec.mu[j];
    b = spec.sigma[j];
    if (!(b > 0.0)) throw ValidationError("sojourn_pmf: sigma must be positive");
  } else {
    a = spec.shape[j];
    b = spec.scale[j];
    if (!(a > 0.0) || !(b > 0.0))
      throw ValidationError("sojourn_pmf: shape/scale must be positive");
  }
  Vector d(M);
  double prev = 0.0;
  for (int u = 1; u <= M; ++u) {
    double cur = cdf(static_cast<double>(u));
    d[u - 1] = cur - prev;
    prev = cur;
  }
  if (!(prev > 0.0)) throw NumericError("sojourn_pmf: zero mass on (0, M]");
  return d / prev;
}

/// Geometric sojourn pmf d(u) = (1-p) p^(u-1), u = 1..M (untruncated form).
inline Vector geometric_pmf(double p, int M) {
  if (!(p >= 0.0 && p < 1.0)) throw ValidationError("geometric_pmf: p must be in [0,1)");
  Vector d(M);
  double term = 1.0 - p;
  for (int u = 0; u < M; ++u) {
    d[u] = term;
    term *= p;
  }
  return d;
}

/// Survival values D(u) = sum_{v >= u} d(v).
inline Vector sojourn_survival(const Vector& d) {
  Vector D(d.size());
  double acc = 0.0;
  for (int u = static_cast<int>(d.size()) - 1; u >= 0; --u) {
    if (d[u] < 0.0) throw ValidationError("sojourn_survival: negative mass");
    acc += d[u];
    D[u] = acc;
  }
  return D;
}

/// Fitted parameters of a single continuous sojourn family; `a`/`b` are
/// shape/scale for gamma and weibull, mu/sigma for lognormal.
struct SojournMoments {
  double a = 0.0;
  double b = 0.0;
};

namespace detail {
// Gamma(1+2/a) / Gamma(1+1/a)^2 - 1: squared coefficient of variation of
// a Weibull with shape a; strictly decreasing in a.
inline double weibull_cv2(double a) {
  return std::exp(std::lgamma(1.0 + 2.0 / a) - 2.0 * std::lgamma(1.0 + 1.0 / a)) - 1.0;
}
}  // namespace detail

/** Weighted method-of-moments fit of a continuous sojourn family to
    duration observations. Weibull shape is solved by bisection of the
    coefficient-of-variation equation on [0.05, 100]. */
inline SojournMoments fit_sojourn_moments(const Vector& durations, const Vector& weights,
                                          SojournType type) {
  if (durations.size() != weights.size() || durations.size() == 0)
    throw ValidationError("fit_sojourn_moments: durations/weights mismatch");
  double W = 0.0, m = 0.0;
  for (int i = 0; i < durations.size(); ++i) {
    if (weights[i] < 0.0) throw ValidationError("fit_sojourn_moments: negative weight");
    W += weights[i];
    m += weights[i] * durations[i];
  }
  if (!(W > 0.0)) throw ValidationError("fit_sojourn_moments: zero total weight");
  m /= W;
  double v = 0.0;
  for (int i = 0; i < durations.size(); ++i)
    v += weights[i] * (durations[i] - m) * (durations[i] - m);
  v /= W;
  if (!(v > 0.0)) throw NumericError("fit_sojourn_moments: zero variance");

  SojournMoments out;
  switch (type) {
    case SojournType::gamma:
      out.a = m * m / v;
      out.b = v / m;
      break;
    case SojournType::weibull: {
      const double target = v / (m * m);
      double lo = 0.05, hi = 100.0;
      if (detail::weibull_cv2(lo) <= target) {
        out.a = lo;
      } else if (detail::weibull_cv2(hi) >= target) {
        out.a = hi;
      } else {
        for (int it = 0; it < 200; ++it) {
          double mid = 0.5 * (lo + hi);
          if (detail::weibull_cv2(mid) > target)
            lo = mid;
          else
            hi = mid;
          if (hi - lo < 1e-10) break;
        }
        out.a = 0.5 * (lo + hi);
      }
      out.b = m / std::exp(std::lgamma(1.0 + 1.0 / out.a));
      break;
    }
    case SojournType::lognormal: {
      double lm = 0.0;
      for (int i = 0; i < durations.size(); ++i) {
        if (!(durations[i] > 0.0))
          throw ValidationError("fit_sojourn_moments: nonpositive duration");
        lm += weights[i] * std::log(durations[i]);
      }
      lm /= W;
      double lv = 0.0;
      for (int i = 0; i < durations.size(); ++i) {
        double dlt = std::log(durations[i]) - lm;
        lv += weights[i] * dlt * dlt;
      }
      lv /= W;
      if (!(lv > 0.0)) throw NumericError("fit_sojourn_moments: zero variance");
      out.a = lm;
      out.b = std::sqrt(lv);
      break;
    }
    default:
      throw ValidationError("fit_sojourn_moments: type has no parameters");
  }
  return out;
}

/** Picks the continuous family with the smallest chi-square
    goodness-of-fit statistic over all states. Durations are binned per
    family with expected bin counts >= 5. */
inline SojournType select_sojourn_auto(const std::vector<Vector>& durations,
                                       const std::vector<Vector>& weights) {
  if (durations.empty() || durations.size() != weights.size())
    throw ValidationError("select_sojourn_auto: inconsistent inputs");
  const SojournType candidates[] = {SojournType::gamma, SojournType::weibull,
                                    SojournType::lognormal};
  double best_stat = std::numeric_limits<double>::infinity();
  SojournType best = SojournType::gamma;
  for (SojournType cand : candidates) {
    double stat = 0.0;
    bool ok = true;
    for (std::size_t jstate = 0; jstate < durations.size() && ok; ++jstate) {
      const Vector& dur = durations[jstate];
      const Vector& wt = weights[jstate];
      if (dur.size() == 0) throw ValidationError("select_sojourn_auto: empty duration pool");
      SojournMoments fit;
      try {
        fit = fit_sojourn_moments(dur, wt, cand);
      } catch (const NumericError&) {
        ok = false;
        break;
      }
      int M = std::max(2, static_cast<int>(std::ceil(1.2 * dur.maxCoeff())));
      SojournSpec spec;
      spec.type = cand;
      if (cand == SojournType::lognormal) {
        spec.mu = Vector::Constant(1, fit.a);
        spec.sigma = Vector::Constant(1, fit.b);
      } else {
        spec.shape = Vector::Constant(1, fit.a);
        spec.scale = Vector::Constant(1, fit.b);
      }
      Vector pmf = sojourn_pmf(spec, 0, M);
      double n = wt.sum();
      Vector obs = Vector::Zero(M);
      for (int i = 0; i < dur.size(); ++i) {
        int u = std::min(M, std::max(1, static_cast<int>(std::lround(dur[i]))));
        obs[u - 1] += wt[i];
      }
      // pool consecutive cells until the expected count reaches 5
      double ob = 0.0, eb = 0.0;
      std::vector<std::pair<double, double>> bins;
      for (int u = 0; u < M; ++u) {
        ob += obs[u];
        eb += n * pmf[u];
        if (eb >= 5.0) {
          bins.emplace_back(ob, eb);
          ob = eb = 0.0;
        }
      }
      if (ob > 0.0 || eb > 0.0) {
        if (bins.empty())
          bins.emplace_back(ob, eb);
        else {
          bins.back().first += ob;
          bins.back().second += eb;
        }
      }
      if (bins.size() < 2) throw ValidationError("select_sojourn_auto: fewer than 2 usable bins");
      for (auto& bin : bins)
        if (bin.second > 0.0) stat += (bin.first - bin.second) * (bin.first - bin.second) / bin.second;
    }
    if (ok && stat < best_stat) {
      best_stat = stat;
      best = cand;
    }
  }
  if (!std::isfinite(best_stat)) throw NumericError("select_sojourn_auto: no family fit");
  return best;
}

/** Location/spread summary of a discrete sojourn pmf, used by the RUL
    estimator. `lower`/`upper` implement the gamma/2 tail cuts: lower is
    the largest u with cumulative mass <= gamma/2 (0 when none), upper is
    the smallest u whose right tail from u has mass <= gamma/2 (clamped
    to M). Mode ties break to the smallest index. */
struct SojournSummary {
  double mean = 0.0;
  double sd = 0.0;
  int mode = 1;
  int lower = 0;
  int upper = 1;
};

inline SojournSummary sojourn_summary(const Vector& d, double gamma_level = 0.05) {
  const int M = static_cast<int>(d.size());
  if (M == 0) throw ValidationError("sojourn_summary: empty pmf");
  double total = d.sum();
  if (std::fabs(total - 1.0) > 1e-8)
    throw ValidationError("sojourn_summary: pmf sums to " + std::to_string(total));
  SojournSummary s;
  for (int u = 0; u < M; ++u) s.mean += (u + 1) * d[u];
  double m2 = 0.0;
  for (int u = 0; u < M; ++u) m2 += (u + 1 - s.mean) * (u + 1 - s.mean) * d[u];
  s.sd = std::sqrt(std::max(0.0, m2));
  int mode = 0;
  for (int u = 1; u < M; ++u)
    if (d[u] > d[mode]) mode = u;
  s.mode = mode + 1;
  const double half = gamma_level / 2.0;
  double acc = 0.0;
  s.lower = 0;
  for (int u = 0; u < M; ++u) {
    acc += d[u];
    if (acc <= half + 1e-15)
      s.lower = u + 1;
    else
      break;
  }
  s.upper = M;
  double tail = 0.0;
  for (int u = M - 1; u >= 0; --u) {
    tail += d[u];
    if (tail <= half + 1e-15)
      s.upper = u + 1;
    else
      break;
  }
  return s;
}

}  // namespace hhsmm

#endif  // HHSMM_SOJOURN_HPP
