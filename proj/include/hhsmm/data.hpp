#ifndef HHSMM_DATA_HPP
#define HHSMM_DATA_HPP

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hhsmm/common.hpp"

namespace hhsmm {

/** Multi-sequence observation container. Rows of `x` are observations of
    all sequences stacked in order; `N` holds the per-sequence lengths.
    `s` (per-row true states, 1-based) and `rul` (per-sequence true
    remaining lifetimes) are optional and empty when absent. */
struct SequenceSet {
  Matrix x;
  IntVector N;
  IntVector s;    // empty or size x.rows()
  IntVector rul;  // empty or size N.size()

  int n_seq() const { return static_cast<int>(N.size()); }
  int total_rows() const { return static_cast<int>(x.rows()); }
  int dim() const { return static_cast<int>(x.cols()); }

  /// Row offset of sequence i.
  int offset(int i) const {
    int o = 0;
    for (int k = 0; k < i; ++k) o += N[k];
    return o;
  }
  /// Observation block of sequence i (N_i rows).
  Matrix sequence(int i) const { return x.middleRows(offset(i), N[i]); }

  bool has_missing() const {
    for (int r = 0; r < x.rows(); ++r)
      for (int c = 0; c < x.cols(); ++c)
        if (is_missing(x(r, c))) return true;
    return false;
  }
};

/// Builds a SequenceSet from a stacked matrix and optional lengths
/// (absent lengths mean a single sequence).
inline SequenceSet hhsmmdata(const Matrix& x, const IntVector& N = {}) {
  SequenceSet set;
  set.x = x;
  set.N = N.empty() ? IntVector{static_cast<int>(x.rows())} : N;
  long total = 0;
  for (int n : set.N) {
    if (n < 1) throw ValidationError("hhsmmdata: sequence lengths must be >= 1");
    total += n;
  }
  if (total != x.rows())
    throw ValidationError("hhsmmdata: sum(N) = " + std::to_string(total) +
                          " does not match rows(x) = " + std::to_string(x.rows()));
  if (x.cols() < 1) throw ValidationError("hhsmmdata: need at least one variable");
  return set;
}

/** Appends `lags` lagged copies of every variable. Output columns are
    ordered oldest to newest, [x_{t-lags}, ..., x_{t-1}, x_t], so with
    p = 1 and lags = 1 the current value sits in column 2. Each sequence
    loses its first `lags` rows. */
inline SequenceSet lagdata(const SequenceSet& set, int lags = 1) {
  if (lags < 1) throw ValidationError("lagdata: lags must be >= 1");
  const int p = set.dim();
  for (int n : set.N)
    if (n <= lags)
      throw ValidationError("lagdata: sequence of length " + std::to_string(n) +
                            " too short for lags = " + std::to_string(lags));
  int total_out = 0;
  for (int n : set.N) total_out += n - lags;
  SequenceSet out;
  out.x.resize(total_out, p * (lags + 1));
  out.N.reserve(set.n_seq());
  if (!set.s.empty()) out.s.reserve(total_out);
  int row_in = 0, row_out = 0;
  for (int i = 0; i < set.n_seq(); ++i) {
    for (int t = lags; t < set.N[i]; ++t) {
      for (int l = lags; l >= 0; --l)
        out.x.block(row_out, (lags - l) * p, 1, p) = set.x.row(row_in + t - l);
      if (!set.s.empty()) out.s.push_back(set.s[row_in + t]);
      ++row_out;
    }
    out.N.push_back(set.N[i] - lags);
    row_in += set.N[i];
  }
  out.rul = set.rul;
  return out;
}

/// Result of train_test_split.
struct SplitResult {
  SequenceSet train;
  SequenceSet test;
  SequenceSet trimmed;        // test sequences right-trimmed
  IntVector trimmed_count;    // rows removed per trimmed sequence
};

namespace detail {
inline SequenceSet subset_sequences(const SequenceSet& set, const IntVector& idx) {
  SequenceSet out;
  int total = 0;
  for (int i : idx) total += set.N[i];
  out.x.resize(total, set.dim());
  int row = 0;
  for (int i : idx) {
    out.x.middleRows(row, set.N[i]) = set.sequence(i);
    if (!set.s.empty()) {
      int o = set.offset(i);
      for (int t = 0; t < set.N[i]; ++t) out.s.push_back(set.s[o + t]);
    }
    if (!set.rul.empty()) out.rul.push_back(set.rul[i]);
    out.N.push_back(set.N[i]);
    row += set.N[i];
  }
  return out;
}
}  // namespace detail

/** Splits sequences into train/test by a seeded draw and optionally
    right-trims each test sequence to floor(trim_ratio * N_i) initial
    rows. train_ratio = 1 skips the split (train = test = input). */
inline SplitResult train_test_split(const SequenceSet& set, double train_ratio,
                                    bool trim = false, double trim_ratio = 1.0,
                                    std::uint64_t seed = 0) {
  if (!(train_ratio > 0.0 && train_ratio <= 1.0))
    throw ValidationError("train_test_split: train_ratio must be in (0,1]");
  if (!(trim_ratio > 0.0 && trim_ratio <= 1.0))
    throw ValidationError("train_test_split: trim_ratio must be in (0,1]");
  SplitResult res;
  const int n = set.n_seq();
  if (train_ratio >= 1.0) {
    res.train = set;
    res.test = set;
  } else {
    IntVector order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
    int n_train = static_cast<int>(std::floor(train_ratio * n + 0.5));
    n_train = std::max(1, std::min(n - 1, n_train));
    IntVector train_idx(order.begin(), order.begin() + n_train);
    IntVector test_idx(order.begin() + n_train, order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    if (train_idx.empty() || test_idx.empty())
      throw ValidationError("train_test_split: empty partition");
    res.train = detail::subset_sequences(set, train_idx);
    res.test = detail::subset_sequences(set, test_idx);
  }
  if (!trim) {
    res.trimmed = res.test;
    res.trimmed_count.assign(res.test.n_seq(), 0);
    return res;
  }
  SequenceSet tr;
  int total = 0;
  IntVector keep(res.test.n_seq());
  for (int i = 0; i < res.test.n_seq(); ++i) {
    keep[i] = static_cast<int>(std::floor(trim_ratio * res.test.N[i]));
    if (keep[i] < 1) throw ValidationError("train_test_split: trim removes a whole sequence");
    total += keep[i];
  }
  tr.x.resize(total, res.test.dim());
  int row = 0;
  for (int i = 0; i < res.test.n_seq(); ++i) {
    int o = res.test.offset(i);
    tr.x.middleRows(row, keep[i]) = res.test.x.middleRows(o, keep[i]);
    if (!res.test.s.empty())
      for (int t = 0; t < keep[i]; ++t) tr.s.push_back(res.test.s[o + t]);
    tr.N.push_back(keep[i]);
    res.trimmed_count.push_back(res.test.N[i] - keep[i]);
    row += keep[i];
  }
  tr.rul = res.test.rul;
  res.trimmed = tr;
  return res;
}

/** Per-state agreement of two state sequences, maximized over label
    permutations applied to s1. Under the best permutation the state-j
    score is |{t: s1_t = j and s2_t = j}| / |{t: s1_t = j or s2_t = j}|
    (0 when the denominator is empty). */
inline Vector homogeneity(const IntVector& s1, const IntVector& s2) {
  if (s1.size() != s2.size())
    throw ValidationError("homogeneity: sequences have different lengths");
  if (s1.empty()) throw ValidationError("homogeneity: empty sequences");
  int J = 0;
  for (int v : s1) J = std::max(J, v);
  for (int v : s2) J = std::max(J, v);
  for (int v : s1)
    if (v < 1) throw ValidationError("homogeneity: labels must be >= 1");
  for (int v : s2)
    if (v < 1) throw ValidationError("homogeneity: labels must be >= 1");
  if (J > 9) throw ValidationError("homogeneity: more than 9 states unsupported");
  IntVector perm(J), best(J);
  std::iota(perm.begin(), perm.end(), 1);
  best = perm;
  long best_agree = -1;
  do {
    long agree = 0;
    for (std::size_t t = 0; t < s1.size(); ++t)
      if (perm[s1[t] - 1] == s2[t]) ++agree;
    if (agree > best_agree) {
      best_agree = agree;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  Vector h = Vector::Zero(J);
  for (int j = 1; j <= J; ++j) {
    long both = 0, either = 0;
    for (std::size_t t = 0; t < s1.size(); ++t) {
      bool a = best[s1[t] - 1] == j, b = s2[t] == j;
      if (a && b) ++both;
      if (a || b) ++either;
    }
    h[j - 1] = either == 0 ? 0.0 : static_cast<double>(both) / either;
  }
  return h;
}

// ---------------------------------------------------------------------------
// CSV sequence files: header "seq_id,<var1>,...,<varp>[,state][,rul]", rows
// grouped by seq_id in increasing contiguous blocks, missing cells as "NA".
// ---------------------------------------------------------------------------

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}
inline std::string format_real(double v) {
  if (is_missing(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline void store_sequences(const SequenceSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("store_sequences: cannot open " + path);
  out << "seq_id";
  for (int c = 0; c < set.dim(); ++c) out << ",var" << (c + 1);
  if (!set.s.empty()) out << ",state";
  if (!set.rul.empty()) out << ",rul";
  out << "\n";
  int row = 0;
  for (int i = 0; i < set.n_seq(); ++i) {
    for (int t = 0; t < set.N[i]; ++t, ++row) {
      out << (i + 1);
      for (int c = 0; c < set.dim(); ++c) out << ',' << detail::format_real(set.x(row, c));
      if (!set.s.empty()) out << ',' << set.s[row];
      if (!set.rul.empty()) out << ',' << set.rul[i];
      out << "\n";
    }
  }
}

inline SequenceSet load_sequences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_sequences: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("load_sequences: empty file");
  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "seq_id")
    throw ValidationError("load_sequences: header must start with seq_id");
  bool has_rul = header.back() == "rul";
  bool has_state = header[header.size() - 1 - (has_rul ? 1 : 0)] == "state";
  int p = static_cast<int>(header.size()) - 1 - (has_rul ? 1 : 0) - (has_state ? 1 : 0);
  if (p < 1) throw ValidationError("load_sequences: no data columns");

  std::vector<std::vector<double>> rows;
  std::vector<int> states;
  std::vector<int> seq_of_row;
  std::vector<long> ids;  // distinct seq ids in order of appearance
  std::vector<int> ruls;
  long current_id = std::numeric_limits<long>::min();
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != static_cast<int>(header.size()))
      throw ValidationError("load_sequences: wrong cell count at line " + std::to_string(lineno));
    char* end = nullptr;
    long id = std::strtol(cells[0].c_str(), &end, 10);
    if (end == cells[0].c_str() || *end != '\0')
      throw ValidationError("load_sequences: bad seq_id at line " + std::to_string(lineno));
    if (id != current_id) {
      if (id < current_id)
        throw ValidationError("load_sequences: seq_id not increasing at line " +
                              std::to_string(lineno));
      current_id = id;
      ids.push_back(id);
      if (has_rul) {
        const std::string& cell = cells[1 + p + (has_state ? 1 : 0)];
        ruls.push_back(static_cast<int>(std::strtol(cell.c_str(), nullptr, 10)));
      }
    }
    std::vector<double> vals(p);
    for (int c = 0; c < p; ++c) {
      const std::string& cell = cells[1 + c];
      if (cell == "NA") {
        vals[c] = missing_value();
      } else {
        end = nullptr;
        vals[c] = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str() || *end != '\0')
          throw ValidationError("load_sequences: non-numeric cell '" + cell + "' at line " +
                                std::to_string(lineno));
      }
    }
    rows.push_back(std::move(vals));
    if (has_state) {
      const std::string& cell = cells[1 + p];
      end = nullptr;
      long st = std::strtol(cell.c_str(), &end, 10);
      if (end == cell.c_str() || *end != '\0' || st < 1)
        throw ValidationError("load_sequences: bad state label at line " + std::to_string(lineno));
      states.push_back(static_cast<int>(st));
    }
    seq_of_row.push_back(static_cast<int>(ids.size()) - 1);
  }
  if (rows.empty()) throw ValidationError("load_sequences: no data rows");

  SequenceSet set;
  set.x.resize(static_cast<int>(rows.size()), p);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < p; ++c) set.x(static_cast<int>(r), c) = rows[r][c];
  set.N.assign(ids.size(), 0);
  for (int sequence : seq_of_row) ++set.N[sequence];
  set.s = states;
  set.rul = ruls;
  return set;
}

}  // namespace hhsmm

#endif  // HHSMM_DATA_HPP
