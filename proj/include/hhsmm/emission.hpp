#ifndef HHSMM_EMISSION_HPP
#define HHSMM_EMISSION_HPP

#include <functional>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "hhsmm/common.hpp"

namespace hhsmm {

using json = nlohmann::json;

/// Covariate source for regression-family samplers: either an explicit
/// generator or a multivariate normal with the given mean/cov.
struct CovarModel {
  Vector mean;
  Matrix cov;
  std::function<Vector(Rng&)> generator;
  bool empty() const { return !generator && mean.size() == 0; }
};

/// Context handed to emission samplers during simulation.
struct EmissionSampleContext {
  bool autoregress = false;
  const Vector* prev = nullptr;      // previously emitted row, null on first step
  const CovarModel* covar = nullptr; // covariate source override
};

/** Emission-family contract: a state-conditional density over data rows,
    a weighted M-step producing an updated family, and (optionally) a
    sampler. Implementations are immutable; mstep returns a new object. */
class Emission {
 public:
  virtual ~Emission() = default;

  virtual std::string family() const = 0;
  virtual int n_states() const = 0;
  /// Width of the data rows this family scores.
  virtual int dim() const = 0;

  virtual double density(const Eigen::Ref<const Vector>& x, int j) const = 0;

  /// Weighted M-step: w is rows(x) x J with nonnegative state weights.
  virtual std::unique_ptr<Emission> mstep(const Matrix& x, const Matrix& w) const = 0;

  virtual bool has_sampler() const { return false; }
  /// Width of rows emitted by the sampler (differs from dim() for
  /// autoregressive regression families).
  virtual int sample_dim(const EmissionSampleContext&) const { return dim(); }
  virtual Vector sample(int, Rng&, const EmissionSampleContext&) const {
    throw ValidationError("emission family '" + family() + "' has no sampler");
  }

  /// Free-parameter count, used for AIC/BIC.
  virtual int free_params() const = 0;

  virtual json to_json() const = 0;
  virtual std::unique_ptr<Emission> clone() const = 0;
};

namespace detail {
inline Vector json_to_vector(const json& a) {
  Vector v(a.size());
  int i = 0;
  for (const auto& e : a) v[i++] = e.is_string() ? std::stod(e.get<std::string>()) : e.get<double>();
  return v;
}
inline Matrix json_to_matrix(const json& a) {
  if (a.empty()) return Matrix();
  Matrix m(a.size(), a[0].size());
  int r = 0;
  for (const auto& row : a) {
    if (static_cast<int>(row.size()) != m.cols())
      throw ValidationError("ragged matrix in JSON");
    int c = 0;
    for (const auto& e : row)
      m(r, c++) = e.is_string() ? std::stod(e.get<std::string>()) : e.get<double>();
    ++r;
  }
  return m;
}
inline json vector_to_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
inline json matrix_to_json(const Matrix& m) {
  json a = json::array();
  for (int r = 0; r < m.rows(); ++r) a.push_back(vector_to_json(m.row(r).transpose()));
  return a;
}
}  // namespace detail

}  // namespace hhsmm

#endif  // HHSMM_EMISSION_HPP
