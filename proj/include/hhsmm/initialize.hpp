#ifndef HHSMM_INITIALIZE_HPP
#define HHSMM_INITIALIZE_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hhsmm/data.hpp"
#include "hhsmm/model.hpp"
#include "hhsmm/special_functions.hpp"

namespace hhsmm {

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

struct KmeansResult {
  IntVector labels;  // 0-based
  Matrix centers;
  double wss = 0.0;
};

namespace detail {

inline KmeansResult kmeans_once(const Matrix& x, int k, Rng& rng, int maxit) {
  const int n = static_cast<int>(x.rows());
  KmeansResult res;
  res.centers.resize(k, x.cols());
  // draw k distinct starting rows
  IntVector order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  for (int c = 0; c < k; ++c) res.centers.row(c) = x.row(order[c]);
  res.labels.assign(n, 0);
  for (int it = 0; it < maxit; ++it) {
    bool changed = false;
    for (int t = 0; t < n; ++t) {
      int best = 0;
      double bestd = (x.row(t) - res.centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        double dd = (x.row(t) - res.centers.row(c)).squaredNorm();
        if (dd < bestd) {
          bestd = dd;
          best = c;
        }
      }
      if (res.labels[t] != best) {
        res.labels[t] = best;
        changed = true;
      }
    }
    for (int c = 0; c < k; ++c) {
      Vector mean = Vector::Zero(x.cols());
      int cnt = 0;
      for (int t = 0; t < n; ++t)
        if (res.labels[t] == c) {
          mean += x.row(t).transpose();
          ++cnt;
        }
      if (cnt == 0) {
        // reseed an empty cluster from the farthest point
        int far = 0;
        double fard = -1.0;
        for (int t = 0; t < n; ++t) {
          double dd = (x.row(t) - res.centers.row(res.labels[t])).squaredNorm();
          if (dd > fard) {
            fard = dd;
            far = t;
          }
        }
        res.centers.row(c) = x.row(far);
        changed = true;
      } else {
        res.centers.row(c) = (mean / cnt).transpose();
      }
    }
    if (!changed && it > 0) break;
  }
  res.wss = 0.0;
  for (int t = 0; t < n; ++t) res.wss += (x.row(t) - res.centers.row(res.labels[t])).squaredNorm();
  return res;
}

}  // namespace detail

/// Lloyd k-means with seeded restarts; keeps the lowest within-SS run
/// (lowest restart index on ties). Cluster labels are ordered by the
/// first coordinate of the centers, so label assignment is stable
/// across runs and data orderings.
inline KmeansResult kmeans(const Matrix& x, int k, std::uint64_t seed = 0, int restarts = 10,
                           int maxit = 100) {
  if (k < 1) throw ValidationError("kmeans: k must be >= 1");
  if (x.rows() < k) throw ValidationError("kmeans: fewer rows than clusters");
  KmeansResult best;
  best.wss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng = Rng::stream(seed, r);
    KmeansResult cur = detail::kmeans_once(x, k, rng, maxit);
    if (cur.wss < best.wss) best = cur;
  }
  IntVector order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return best.centers(a, 0) < best.centers(b, 0); });
  IntVector rank(k);
  for (int i = 0; i < k; ++i) rank[order[i]] = i;
  Matrix centers = best.centers;
  for (int c = 0; c < k; ++c) best.centers.row(rank[c]) = centers.row(c);
  for (auto& label : best.labels) label = rank[label];
  return best;
}

/// Elbow choice of the component count: the c in 2..9 with the largest
/// second difference of within-SS over 1..10 (1 when the data cannot
/// support more).
inline int auto_nmix(const Matrix& x, std::uint64_t seed = 0) {
  const int n = static_cast<int>(x.rows());
  int cmax = std::min(10, n);
  if (cmax < 3) return 1;
  std::vector<double> wss(cmax + 1, 0.0);
  for (int c = 1; c <= cmax; ++c) wss[c] = kmeans(x, c, seed).wss;
  int best = 1;
  double bestgap = -std::numeric_limits<double>::infinity();
  for (int c = 2; c <= cmax - 1; ++c) {
    double gap = wss[c - 1] - 2.0 * wss[c] + wss[c + 1];
    if (gap > bestgap) {
      bestgap = gap;
      best = c;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// k-regressions (regression clustering)
// ---------------------------------------------------------------------------

struct KRegressionsResult {
  IntVector labels;  // 0-based
  double ssr = 0.0;
};

namespace detail {

struct OlsFit {
  Matrix beta;  // (q+1) x r, leading intercept row
  bool ok = false;
};

inline OlsFit ols(const Matrix& A, const Matrix& Y) {
  OlsFit fit;
  Matrix AtA = A.transpose() * A;
  AtA.diagonal().array() += 1e-10 * (1.0 + AtA.trace() / AtA.rows());
  Eigen::LDLT<Matrix> ldlt(AtA);
  if (ldlt.info() != Eigen::Success) return fit;
  fit.beta = ldlt.solve(A.transpose() * Y);
  fit.ok = true;
  return fit;
}

inline KRegressionsResult kregressions_once(const Matrix& A, const Matrix& Y, int k, Rng& rng,
                                            int maxit) {
  const int n = static_cast<int>(A.rows());
  KRegressionsResult res;
  res.labels.resize(n);
  for (int t = 0; t < n; ++t) res.labels[t] = rng.index(k);
  std::vector<Matrix> beta(k);
  for (int it = 0; it < maxit; ++it) {
    for (int c = 0; c < k; ++c) {
      std::vector<int> rows;
      for (int t = 0; t < n; ++t)
        if (res.labels[t] == c) rows.push_back(t);
      if (static_cast<int>(rows.size()) < A.cols()) {
        // under-determined cluster: reseed from random rows
        for (int add = static_cast<int>(rows.size()); add < A.cols(); ++add)
          rows.push_back(rng.index(n));
      }
      Matrix Ac(rows.size(), A.cols()), Yc(rows.size(), Y.cols());
      for (std::size_t rix = 0; rix < rows.size(); ++rix) {
        Ac.row(rix) = A.row(rows[rix]);
        Yc.row(rix) = Y.row(rows[rix]);
      }
      OlsFit fit = ols(Ac, Yc);
      if (!fit.ok) throw NumericError("kregressions: singular design");
      beta[c] = fit.beta;
    }
    bool changed = false;
    for (int t = 0; t < n; ++t) {
      int best = 0;
      double bestd = (Y.row(t) - A.row(t) * beta[0]).squaredNorm();
      for (int c = 1; c < k; ++c) {
        double dd = (Y.row(t) - A.row(t) * beta[c]).squaredNorm();
        if (dd < bestd) {
          bestd = dd;
          best = c;
        }
      }
      if (res.labels[t] != best) {
        res.labels[t] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  res.ssr = 0.0;
  for (int c = 0; c < k; ++c) {
    std::vector<int> rows;
    for (int t = 0; t < n; ++t)
      if (res.labels[t] == c) rows.push_back(t);
    for (int t : rows) res.ssr += (Y.row(t) - A.row(t) * beta[c]).squaredNorm();
  }
  return res;
}

}  // namespace detail

/** Clusters rows by which of k linear regressions (response on the
    remaining columns) explains them best, Lloyd-style with seeded
    restarts. Labels are ordered by the clusters' mean fitted response,
    mirroring the stable ordering of kmeans. */
inline KRegressionsResult kregressions(const Matrix& x, int k, const IntVector& resp_ind,
                                       std::uint64_t seed = 0, int restarts = 10, int maxit = 50) {
  detail::RowLayout layout(static_cast<int>(x.cols()), resp_ind);
  const int n = static_cast<int>(x.rows());
  const int q = static_cast<int>(layout.covar.size());
  Matrix A(n, q + 1), Y(n, layout.resp.size());
  for (int t = 0; t < n; ++t) {
    A(t, 0) = 1.0;
    for (int c = 0; c < q; ++c) A(t, c + 1) = x(t, layout.covar[c]);
    for (std::size_t c = 0; c < layout.resp.size(); ++c) Y(t, c) = x(t, layout.resp[c]);
  }
  KRegressionsResult best;
  best.ssr = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng = Rng::stream(seed, 1000 + r);
    KRegressionsResult cur = detail::kregressions_once(A, Y, k, rng, maxit);
    if (cur.ssr < best.ssr) best = cur;
  }
  std::vector<double> level(k, 0.0);
  std::vector<int> count(k, 0);
  for (int t = 0; t < n; ++t) {
    level[best.labels[t]] += Y(t, 0);
    ++count[best.labels[t]];
  }
  for (int c = 0; c < k; ++c) level[c] = count[c] > 0 ? level[c] / count[c] : 0.0;
  IntVector order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return level[a] < level[b]; });
  IntVector rank(k);
  for (int i = 0; i < k; ++i) rank[order[i]] = i;
  for (auto& label : best.labels) label = rank[label];
  return best;
}

// ---------------------------------------------------------------------------
// Left-to-right segmentation (Hotelling T^2 splitting)
// ---------------------------------------------------------------------------

struct LtrSplit {
  bool split = false;
  int s = 0;        // rows 0..s-1 vs s..k-1 (s is the first row of the right part)
  double stat = 0.0;
  double threshold = 0.0;
};

/** Best two-way split of an ordered block by the scaled Hotelling
    T-squared statistic; splits when the best statistic exceeds the
    F(0.05; p, k-1-p) critical value. */
inline LtrSplit ltr_clus(const Matrix& block) {
  const int k = static_cast<int>(block.rows()), p = static_cast<int>(block.cols());
  if (k < 6) throw ValidationError("ltr_clus: need at least 6 rows");
  if (k - 1 - p < 1) throw ValidationError("ltr_clus: k-1-p must be >= 1");
  LtrSplit out;
  out.threshold = f_quantile(0.95, p, k - 1 - p);
  for (int s = 2; s <= k - 2; ++s) {
    Vector m1 = Vector::Zero(p), m2 = Vector::Zero(p);
    for (int i = 0; i < s; ++i) m1 += block.row(i).transpose();
    for (int i = s; i < k; ++i) m2 += block.row(i).transpose();
    m1 /= s;
    m2 /= (k - s);
    Matrix S = Matrix::Zero(p, p);
    for (int i = 0; i < s; ++i) {
      Vector c = block.row(i).transpose() - m1;
      S.noalias() += c * c.transpose();
    }
    for (int i = s; i < k; ++i) {
      Vector c = block.row(i).transpose() - m2;
      S.noalias() += c * c.transpose();
    }
    S /= (k - 2);
    Eigen::FullPivLU<Matrix> lu(S);
    lu.setThreshold(1e-12);
    if (lu.rank() < p) {
      S.diagonal().array() += 1e-8 * std::max(S.trace() / p, 1e-30);
      lu.compute(S);
      if (lu.rank() < p) throw NumericError("ltr_clus: singular pooled covariance");
    }
    Vector diff = m1 - m2;
    double maha = diff.dot(lu.solve(diff));
    double scale = (static_cast<double>(s) * (k - s) / k) * (k - p - 1.0) / ((k - 2.0) * p);
    double d = scale * maha;
    if (d > out.stat) {
      out.stat = d;
      out.s = s;
    }
  }
  out.split = out.s >= 2 && out.stat > out.threshold;
  return out;
}

/** Regression variant: compares the per-side regression coefficient
    vectors with a Chow-style F statistic on the squared residuals. */
inline LtrSplit ltr_clus_regress(const Matrix& block, const IntVector& resp_ind) {
  detail::RowLayout layout(static_cast<int>(block.cols()), resp_ind);
  const int k = static_cast<int>(block.rows());
  const int q = static_cast<int>(layout.covar.size()) + 1;  // coefficients incl. intercept
  if (k < 2 * q + 2) throw ValidationError("ltr_clus_regress: block too short");
  Matrix A(k, q), Y(k, layout.resp.size());
  for (int t = 0; t < k; ++t) {
    A(t, 0) = 1.0;
    for (std::size_t c = 1; c < static_cast<std::size_t>(q); ++c)
      A(t, c) = block(t, layout.covar[c - 1]);
    for (std::size_t c = 0; c < layout.resp.size(); ++c) Y(t, c) = block(t, layout.resp[c]);
  }
  auto ssr = [](const Matrix& Ablk, const Matrix& Yblk) {
    detail::OlsFit fit = detail::ols(Ablk, Yblk);
    if (!fit.ok) throw NumericError("ltr_clus_regress: singular design");
    return (Yblk - Ablk * fit.beta).squaredNorm();
  };
  double ssr_pool = ssr(A, Y);
  LtrSplit out;
  out.threshold = f_quantile(0.95, q, k - 2 * q);
  for (int s = std::max(2, q + 1); s <= std::min(k - 2, k - q - 1); ++s) {
    double s1 = ssr(A.topRows(s), Y.topRows(s));
    double s2 = ssr(A.bottomRows(k - s), Y.bottomRows(k - s));
    double denom = (s1 + s2) / (k - 2 * q);
    double d = denom > 0.0 ? ((ssr_pool - s1 - s2) / q) / denom : 0.0;
    if (d > out.stat) {
      out.stat = d;
      out.s = s;
    }
  }
  out.split = out.s >= 2 && out.stat > out.threshold;
  return out;
}

/// One ordered segment of a sequence with its last split statistic.
struct Segment {
  int start = 0, len = 0;
  double stat = 0.0;
};

namespace detail {

inline LtrSplit try_split(const Matrix& block, bool regress, const IntVector& resp_ind) {
  try {
    return regress ? ltr_clus_regress(block, resp_ind) : ltr_clus(block);
  } catch (const Error&) {
    return LtrSplit{};  // too short or singular: unsplittable, stat 0
  }
}

/// Dissimilarity of two adjacent segments (split statistic of their
/// concatenation at the boundary; 0 when too short to evaluate).
inline double segment_distance(const Matrix& x, const Segment& a, const Segment& b, bool regress,
                               const IntVector& resp_ind) {
  Matrix join(a.len + b.len, x.cols());
  join.topRows(a.len) = x.middleRows(a.start, a.len);
  join.bottomRows(b.len) = x.middleRows(b.start, b.len);
  LtrSplit spl = try_split(join, regress, resp_ind);
  return spl.stat;
}

}  // namespace detail

/** Recursive left-to-right segmentation into at most K ordered segments:
    split every segment while fewer than K exist and splits are accepted;
    merge lowest-statistic segments into their closer neighbor when the
    count overshoots; force even splits of the longest segment when the
    statistics refuse to produce K segments. */
inline std::vector<Segment> ltr_cluster_K(const Matrix& x, int K, bool regress = false,
                                          const IntVector& resp_ind = {1}) {
  const int n = static_cast<int>(x.rows());
  if (K < 1) throw ValidationError("ltr_cluster_K: K must be >= 1");
  if (n < 3 * K) throw ValidationError("ltr_cluster_K: sequence shorter than 3K rows");
  std::vector<Segment> segs{{0, n, 0.0}};
  segs[0].stat = detail::try_split(x, regress, resp_ind).stat;
  bool changed = true;
  while (static_cast<int>(segs.size()) < K && changed) {
    changed = false;
    std::vector<Segment> next;
    for (const Segment& seg : segs) {
      LtrSplit spl = detail::try_split(x.middleRows(seg.start, seg.len), regress, resp_ind);
      if (spl.split) {
        Segment left{seg.start, spl.s, 0.0};
        Segment right{seg.start + spl.s, seg.len - spl.s, 0.0};
        left.stat = detail::try_split(x.middleRows(left.start, left.len), regress, resp_ind).stat;
        right.stat =
            detail::try_split(x.middleRows(right.start, right.len), regress, resp_ind).stat;
        next.push_back(left);
        next.push_back(right);
        changed = true;
      } else {
        Segment keep = seg;
        keep.stat = spl.stat;
        next.push_back(keep);
      }
    }
    segs = next;
  }
  // merge overshoot: lowest own-statistic segment joins its closer neighbor
  while (static_cast<int>(segs.size()) > K) {
    int low = 0;
    for (int i = 1; i < static_cast<int>(segs.size()); ++i)
      if (segs[i].stat < segs[low].stat) low = i;
    int nbr;
    if (low == 0) {
      nbr = 1;
    } else if (low == static_cast<int>(segs.size()) - 1) {
      nbr = low - 1;
    } else {
      double dl = detail::segment_distance(x, segs[low - 1], segs[low], regress, resp_ind);
      double dr = detail::segment_distance(x, segs[low], segs[low + 1], regress, resp_ind);
      nbr = dl <= dr ? low - 1 : low + 1;
    }
    int a = std::min(low, nbr), b = std::max(low, nbr);
    Segment merged{segs[a].start, segs[a].len + segs[b].len, 0.0};
    merged.stat = detail::try_split(x.middleRows(merged.start, merged.len), regress, resp_ind).stat;
    segs[a] = merged;
    segs.erase(segs.begin() + b);
  }
  // not enough signal: force even time-splits of the longest segment
  while (static_cast<int>(segs.size()) < K) {
    int longest = 0;
    for (int i = 1; i < static_cast<int>(segs.size()); ++i)
      if (segs[i].len > segs[longest].len) longest = i;
    if (segs[longest].len < 2)
      throw ValidationError("ltr_cluster_K: cannot reach K segments");
    Segment seg = segs[longest];
    int half = seg.len / 2;
    Segment left{seg.start, half, 0.0}, right{seg.start + half, seg.len - half, 0.0};
    segs[longest] = left;
    segs.insert(segs.begin() + longest + 1, right);
  }
  return segs;
}

// ---------------------------------------------------------------------------
// initial_cluster / initialize_model
// ---------------------------------------------------------------------------

struct ClusterResult {
  int nstate = 0;
  IntVector state_labels;  // per row, 1-based
  IntVector mix_labels;    // per row, 1-based within state (0 when nmix absent)
  IntVector nmix;          // per state (empty when nmix absent)
  bool ltr = false;
  bool final_absorb = false;
  bool regress = false;
  bool miss = false;
  IntVector resp_ind = {1};
  SequenceSet data;                 // imputed when the input had missing cells
  std::vector<Vector> durations;   // pooled per-state run lengths
};

/// Component-count request: explicit per-state counts, automatic
/// selection, or none (families without mixture structure).
struct NmixSpec {
  enum class Mode { counts, automatic, none } mode = Mode::automatic;
  IntVector counts;
  static NmixSpec none() { return {Mode::none, {}}; }
  static NmixSpec automatic() { return {Mode::automatic, {}}; }
  static NmixSpec of(IntVector c) { return {Mode::counts, std::move(c)}; }
};

/** Initial clustering: per-sequence left-to-right segmentation or pooled
    k-means / k-regressions, then within-state sub-clustering for mixture
    components, plus pooled per-state duration observations. Missing
    values are imputed first (flagged in the result). */
inline ClusterResult initial_cluster(const SequenceSet& train, int nstate,
                                     const NmixSpec& nmix = NmixSpec::automatic(),
                                     bool ltr = false, bool final_absorb = false,
                                     bool regress = false, const IntVector& resp_ind = {1},
                                     std::uint64_t seed = 0) {
  if (nstate < 1) throw ValidationError("initial_cluster: nstate must be >= 1");
  if (final_absorb && !ltr)
    throw ValidationError("initial_cluster: final_absorb requires ltr");
  ClusterResult res;
  res.nstate = nstate;
  res.ltr = ltr;
  res.final_absorb = final_absorb;
  res.regress = regress;
  res.resp_ind = resp_ind;
  res.miss = train.has_missing();
  res.data = res.miss ? impute_initial(train) : train;
  const SequenceSet& data = res.data;
  const int total = data.total_rows();
  res.state_labels.assign(total, 0);

  if (ltr) {
    int K = nstate - (final_absorb ? 1 : 0);
    if (K < 1) throw ValidationError("initial_cluster: nstate too small for final_absorb");
    int offset = 0;
    for (int i = 0; i < data.n_seq(); ++i) {
      int n = data.N[i] - (final_absorb ? 1 : 0);
      if (n < 1) throw ValidationError("initial_cluster: sequence too short");
      auto segs = ltr_cluster_K(data.x.middleRows(offset, n), K, regress, resp_ind);
      for (int sidx = 0; sidx < static_cast<int>(segs.size()); ++sidx)
        for (int t = 0; t < segs[sidx].len; ++t)
          res.state_labels[offset + segs[sidx].start + t] = sidx + 1;
      if (final_absorb) res.state_labels[offset + data.N[i] - 1] = nstate;
      offset += data.N[i];
    }
  } else if (regress) {
    auto kr = kregressions(data.x, nstate, resp_ind, seed);
    for (int t = 0; t < total; ++t) res.state_labels[t] = kr.labels[t] + 1;
  } else {
    auto km = kmeans(data.x, nstate, seed);
    for (int t = 0; t < total; ++t) res.state_labels[t] = km.labels[t] + 1;
  }

  // within-state mixture sub-clusters
  if (nmix.mode != NmixSpec::Mode::none) {
    res.mix_labels.assign(total, 0);
    res.nmix.assign(nstate, 1);
    for (int j = 1; j <= nstate; ++j) {
      std::vector<int> rows;
      for (int t = 0; t < total; ++t)
        if (res.state_labels[t] == j) rows.push_back(t);
      if (rows.empty())
        throw ValidationError("initial_cluster: state " + std::to_string(j) + " received no rows");
      Matrix xj(rows.size(), data.dim());
      for (std::size_t r = 0; r < rows.size(); ++r) xj.row(r) = data.x.row(rows[r]);
      int c;
      if (nmix.mode == NmixSpec::Mode::automatic) {
        c = auto_nmix(xj, seed + j);
      } else {
        if (static_cast<int>(nmix.counts.size()) != nstate)
          throw ValidationError("initial_cluster: nmix needs one count per state");
        c = nmix.counts[j - 1];
      }
      if (c < 1) throw ValidationError("initial_cluster: component count must be >= 1");
      if (static_cast<int>(rows.size()) < c)
        throw ValidationError("initial_cluster: state " + std::to_string(j) + " has " +
                              std::to_string(rows.size()) + " rows for " + std::to_string(c) +
                              " components");
      res.nmix[j - 1] = c;
      IntVector sub;
      if (c == 1) {
        sub.assign(rows.size(), 0);
      } else if (regress) {
        sub = kregressions(xj, c, resp_ind, seed + 7919 * j).labels;
      } else {
        sub = kmeans(xj, c, seed + 7919 * j).labels;
      }
      for (std::size_t r = 0; r < rows.size(); ++r) res.mix_labels[rows[r]] = sub[r] + 1;
    }
  }

  // pooled per-state run lengths
  std::vector<std::vector<double>> dur(nstate);
  int offset = 0;
  for (int i = 0; i < data.n_seq(); ++i) {
    int t = 0;
    while (t < data.N[i]) {
      int j = res.state_labels[offset + t], run = 1;
      while (t + run < data.N[i] && res.state_labels[offset + t + run] == j) ++run;
      dur[j - 1].push_back(static_cast<double>(run));
      t += run;
    }
    offset += data.N[i];
  }
  res.durations.resize(nstate);
  for (int j = 0; j < nstate; ++j) {
    res.durations[j].resize(dur[j].size());
    for (std::size_t r = 0; r < dur[j].size(); ++r) res.durations[j][r] = dur[j][r];
  }
  return res;
}

struct InitializeOptions {
  std::string emission_family = "mixmvnorm";  // mixmvnorm | nonpar | mixlm | addreg
  SojournType sojourn = SojournType::none;
  bool sojourn_auto = false;
  int M = 0;  // 0: 1.2 x longest training sequence
  std::vector<bool> semi;
  SplineControl spline;
  AdditiveRegControl addreg;
};

namespace detail {

inline Matrix one_hot_weights(const ClusterResult& clus) {
  Matrix w = Matrix::Zero(clus.data.total_rows(), clus.nstate);
  for (int t = 0; t < clus.data.total_rows(); ++t) w(t, clus.state_labels[t] - 1) = 1.0;
  return w;
}

inline std::shared_ptr<const Emission> init_emission(const ClusterResult& clus,
                                                     const InitializeOptions& opts) {
  const Matrix& x = clus.data.x;
  const int J = clus.nstate, p = clus.data.dim();
  const std::string& fam = opts.emission_family;
  if (fam == "mixmvnorm") {
    if (clus.nmix.empty())
      throw ValidationError("initialize_model: mixmvnorm needs mixture sub-clusters");
    MixMvnParams par;
    par.lambda.resize(J);
    par.mu.resize(J);
    par.sigma.resize(J);
    for (int j = 0; j < J; ++j) {
      const int K = clus.nmix[j];
      par.lambda[j] = Vector::Zero(K);
      par.mu[j].assign(K, Vector::Zero(p));
      par.sigma[j].assign(K, Matrix::Zero(p, p));
      std::vector<int> count(K, 0);
      for (int t = 0; t < x.rows(); ++t) {
        if (clus.state_labels[t] != j + 1) continue;
        int k = clus.mix_labels[t] - 1;
        par.mu[j][k] += x.row(t).transpose();
        ++count[k];
      }
      int total = 0;
      for (int k = 0; k < K; ++k) total += count[k];
      for (int k = 0; k < K; ++k) {
        if (count[k] == 0)
          throw ValidationError("initialize_model: empty mixture component in state " +
                                std::to_string(j + 1));
        par.mu[j][k] /= count[k];
        par.lambda[j][k] = static_cast<double>(count[k]) / total;
      }
      for (int t = 0; t < x.rows(); ++t) {
        if (clus.state_labels[t] != j + 1) continue;
        int k = clus.mix_labels[t] - 1;
        Vector c = x.row(t).transpose() - par.mu[j][k];
        par.sigma[j][k].noalias() += c * c.transpose();
      }
      for (int k = 0; k < K; ++k) {
        par.sigma[j][k] /= count[k];
        // degenerate clusters get a small spherical floor
        if (!(par.sigma[j][k].trace() > 0.0))
          par.sigma[j][k] = 1e-6 * Matrix::Identity(p, p);
      }
    }
    return std::make_shared<MixMvnEmission>(std::move(par));
  }
  if (fam == "nonpar") {
    return std::make_shared<NonparEmission>(nonpar_mstep(x, one_hot_weights(clus), opts.spline),
                                            opts.spline);
  }
  if (fam == "mixlm") {
    if (clus.nmix.empty())
      throw ValidationError("initialize_model: mixlm needs mixture sub-clusters");
    detail::RowLayout layout(p, clus.resp_ind);
    const int q = static_cast<int>(layout.covar.size());
    const int r = static_cast<int>(layout.resp.size());
    MixLMParams par;
    par.resp_ind = clus.resp_ind;
    par.mix_p.resize(J);
    par.intercept.resize(J);
    par.coef.resize(J);
    par.csigma.resize(J);
    for (int j = 0; j < J; ++j) {
      const int K = clus.nmix[j];
      par.mix_p[j] = Vector::Zero(K);
      par.intercept[j].assign(K, Vector::Zero(r));
      par.coef[j].assign(K, Matrix::Zero(q, r));
      par.csigma[j].assign(K, Matrix::Zero(r, r));
      int total = 0;
      for (int k = 0; k < K; ++k) {
        std::vector<int> rows;
        for (int t = 0; t < x.rows(); ++t)
          if (clus.state_labels[t] == j + 1 && clus.mix_labels[t] == k + 1) rows.push_back(t);
        if (rows.empty())
          throw ValidationError("initialize_model: empty mixture component in state " +
                                std::to_string(j + 1));
        Matrix A(rows.size(), q + 1), Y(rows.size(), r);
        for (std::size_t rix = 0; rix < rows.size(); ++rix) {
          A(rix, 0) = 1.0;
          for (int c = 0; c < q; ++c) A(rix, c + 1) = x(rows[rix], layout.covar[c]);
          for (int c = 0; c < r; ++c) Y(rix, c) = x(rows[rix], layout.resp[c]);
        }
        OlsFit fit = ols(A, Y);
        if (!fit.ok) throw NumericError("initialize_model: singular regression design");
        par.intercept[j][k] = fit.beta.row(0).transpose();
        par.coef[j][k] = fit.beta.bottomRows(q);
        Matrix res = Y - A * fit.beta;
        par.csigma[j][k] = (res.transpose() * res) / rows.size();
        if (!(par.csigma[j][k].trace() > 0.0)) par.csigma[j][k] = 1e-6 * Matrix::Identity(r, r);
        par.mix_p[j][static_cast<int>(k)] = static_cast<double>(rows.size());
        total += static_cast<int>(rows.size());
      }
      par.mix_p[j] /= total;
    }
    return std::make_shared<MixlmEmission>(std::move(par));
  }
  if (fam == "addreg") {
    AdditiveRegControl ctrl = opts.addreg;
    ctrl.resp_ind = clus.resp_ind;
    return std::make_shared<AddregEmission>(additive_reg_mstep(x, one_hot_weights(clus), ctrl),
                                            ctrl);
  }
  throw ValidationError("initialize_model: unknown emission family '" + fam + "'");
}

}  // namespace detail

/** Builds a full starting ModelSpec from an initial clustering: emission
    parameters from per-cluster fits, sojourn parameters by weighted
    moments on the pooled segment durations (or chi-square automatic
    selection), initial probabilities (point mass on state 1 for
    left-to-right models, empirical first-state frequencies otherwise)
    and the left-to-right 0.85/uniform or smoothed empirical transition
    pattern. */
inline ModelSpec initialize_model(const ClusterResult& clus, const InitializeOptions& opts) {
  const int J = clus.nstate;
  ModelSpec spec;
  spec.J = J;
  spec.semi = opts.semi.empty() ? std::vector<bool>(J, false) : opts.semi;
  if (static_cast<int>(spec.semi.size()) != J)
    throw ValidationError("initialize_model: semi has wrong length");
  int maxlen = 0;
  for (int n : clus.data.N) maxlen = std::max(maxlen, n);
  int M = opts.M > 0 ? opts.M : static_cast<int>(std::ceil(1.2 * maxlen));
  spec.M.assign(J, M);

  // initial probabilities
  if (clus.ltr) {
    spec.init = Vector::Zero(J);
    spec.init[0] = 1.0;
  } else {
    spec.init = Vector::Zero(J);
    int offset = 0;
    for (int i = 0; i < clus.data.n_seq(); ++i) {
      spec.init[clus.state_labels[offset] - 1] += 1.0;
      offset += clus.data.N[i];
    }
    spec.init /= spec.init.sum();
  }

  // transition matrix
  spec.transition = Matrix::Zero(J, J);
  if (clus.ltr) {
    for (int i = 0; i < J - 1; ++i) {
      Vector row = Vector::Zero(J);
      row[i + 1] = 0.85;
      for (int j2 = i + 2; j2 < J; ++j2) row[j2] = 0.05;
      spec.transition.row(i) = (row / row.sum()).transpose();
    }
    spec.transition(J - 1, J - 1) = 1.0;
  } else {
    Matrix pair_counts = Matrix::Zero(J, J), run_counts = Matrix::Zero(J, J);
    int offset = 0;
    for (int i = 0; i < clus.data.n_seq(); ++i) {
      for (int t = 0; t + 1 < clus.data.N[i]; ++t) {
        int a = clus.state_labels[offset + t] - 1, b = clus.state_labels[offset + t + 1] - 1;
        pair_counts(a, b) += 1.0;
        if (a != b) run_counts(a, b) += 1.0;
      }
      offset += clus.data.N[i];
    }
    for (int i = 0; i < J; ++i) {
      Vector row = spec.semi[i] ? run_counts.row(i).transpose() : pair_counts.row(i).transpose();
      row.array() += 0.01;
      if (spec.semi[i]) row[i] = 0.0;
      spec.transition.row(i) = (row / row.sum()).transpose();
    }
  }

  // sojourn distribution for the semi states
  bool any_semi = false;
  for (bool b : spec.semi) any_semi = b || any_semi;
  if (any_semi) {
    SojournType type = opts.sojourn;
    if (opts.sojourn_auto) {
      std::vector<Vector> pools, wts;
      for (int j = 0; j < J; ++j) {
        if (!spec.semi[j]) continue;
        if (clus.durations[j].size() == 0)
          throw ValidationError("initialize_model: empty duration pool for state " +
                                std::to_string(j + 1));
        pools.push_back(clus.durations[j]);
        wts.push_back(Vector::Ones(clus.durations[j].size()));
      }
      type = select_sojourn_auto(pools, wts);
    }
    if (type == SojournType::none)
      throw ValidationError("initialize_model: semi states need a sojourn type");
    spec.sojourn.type = type;
    if (type == SojournType::lognormal) {
      spec.sojourn.mu = Vector::Zero(J);
      spec.sojourn.sigma = Vector::Zero(J);
    } else if (type != SojournType::nonparametric) {
      spec.sojourn.shape = Vector::Zero(J);
      spec.sojourn.scale = Vector::Zero(J);
    } else {
      spec.sojourn.d.resize(J);
    }
    for (int j = 0; j < J; ++j) {
      if (!spec.semi[j]) continue;
      const Vector& dur = clus.durations[j];
      if (dur.size() == 0)
        throw ValidationError("initialize_model: empty duration pool for state " +
                              std::to_string(j + 1));
      if (type == SojournType::nonparametric) {
        Vector d = Vector::Constant(M, 1e-6 / M);
        for (int r = 0; r < dur.size(); ++r) {
          int u = std::min(M, std::max(1, static_cast<int>(std::lround(dur[r]))));
          d[u - 1] += 1.0;
        }
        spec.sojourn.d[j] = d / d.sum();
      } else {
        SojournMoments mom = fit_sojourn_moments(dur, Vector::Ones(dur.size()), type);
        if (type == SojournType::lognormal) {
          spec.sojourn.mu[j] = mom.a;
          spec.sojourn.sigma[j] = mom.b;
        } else {
          spec.sojourn.shape[j] = mom.a;
          spec.sojourn.scale[j] = mom.b;
        }
      }
    }
  }

  spec.emission = detail::init_emission(clus, opts);
  auto rep = validate_model(spec);
  if (!rep.ok())
    throw ValidationError("initialize_model: produced invalid model\n" + rep.to_string());
  return spec;
}

}  // namespace hhsmm

#endif  // HHSMM_INITIALIZE_HPP
