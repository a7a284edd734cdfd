#ifndef HHSMM_MODEL_HPP
#define HHSMM_MODEL_HPP

#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "hhsmm/emission.hpp"
#include "hhsmm/emission_mixmvn.hpp"
#include "hhsmm/emission_regress.hpp"
#include "hhsmm/emission_spline.hpp"
#include "hhsmm/sojourn.hpp"

namespace hhsmm {

/** Full HHSMM parameterization: initial probabilities, transition matrix
    (rows of semi-Markovian states condition on leaving and have zero
    diagonal), per-state Markov/semi flags, sojourn specification for the
    semi states, per-state sojourn truncation bounds M_j, and the
    emission family. */
struct ModelSpec {
  int J = 0;
  Vector init;
  Matrix transition;
  std::vector<bool> semi;
  IntVector M;
  SojournSpec sojourn;
  std::shared_ptr<const Emission> emission;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const {
    std::string s;
    for (const auto& v : violations) s += v + "\n";
    return s;
  }
};

namespace detail {
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}
}  // namespace detail

/// Checks every ModelSpec invariant and reports all violations with
/// index locations; never throws on invalid content.
inline ValidationReport validate_model(const ModelSpec& spec) {
  ValidationReport rep;
  auto add = [&](const std::string& v) { rep.violations.push_back(v); };
  if (spec.J < 1) {
    add("J must be >= 1");
    return rep;
  }
  const int J = spec.J;
  if (spec.init.size() != J) {
    add("init has length " + std::to_string(spec.init.size()) + ", expected " + std::to_string(J));
  } else {
    double s = spec.init.sum();
    if (std::fabs(s - 1.0) > 1e-12) add("init sums to " + detail::num(s));
    for (int j = 0; j < J; ++j)
      if (spec.init[j] < 0.0 || spec.init[j] > 1.0)
        add("init[" + std::to_string(j + 1) + "] outside [0,1]");
  }
  if (spec.transition.rows() != J || spec.transition.cols() != J) {
    add("transition is not " + std::to_string(J) + "x" + std::to_string(J));
  } else {
    for (int i = 0; i < J; ++i) {
      double s = spec.transition.row(i).sum();
      if (std::fabs(s - 1.0) > 1e-12)
        add("transition row " + std::to_string(i + 1) + " sums to " + detail::num(s));
      for (int j = 0; j < J; ++j)
        if (spec.transition(i, j) < 0.0 || spec.transition(i, j) > 1.0)
          add("transition[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) +
              "] outside [0,1]");
    }
  }
  if (static_cast<int>(spec.semi.size()) != J) {
    add("semi has length " + std::to_string(spec.semi.size()) + ", expected " + std::to_string(J));
    return rep;
  }
  bool any_semi = false;
  for (int j = 0; j < J; ++j) {
    if (!spec.semi[j]) continue;
    any_semi = true;
    if (spec.transition.rows() == J && spec.transition(j, j) > 0.0)
      add("semi-state self-transition nonzero at state " + std::to_string(j + 1));
  }
  if (static_cast<int>(spec.M.size()) != J) {
    add("M has length " + std::to_string(spec.M.size()) + ", expected " + std::to_string(J));
  } else {
    for (int j = 0; j < J; ++j)
      if (spec.M[j] < 1) add("M[" + std::to_string(j + 1) + "] must be >= 1");
  }
  if (any_semi) {
    switch (spec.sojourn.type) {
      case SojournType::none:
        add("model has semi states but no sojourn distribution");
        break;
      case SojournType::gamma:
      case SojournType::weibull:
        for (int j = 0; j < J; ++j)
          if (spec.semi[j] &&
              (spec.sojourn.shape.size() <= j || spec.sojourn.scale.size() <= j ||
               !(spec.sojourn.shape[j] > 0.0) || !(spec.sojourn.scale[j] > 0.0)))
            add("sojourn shape/scale not positive for semi state " + std::to_string(j + 1));
        break;
      case SojournType::lognormal:
        for (int j = 0; j < J; ++j)
          if (spec.semi[j] &&
              (spec.sojourn.mu.size() <= j || spec.sojourn.sigma.size() <= j ||
               !(spec.sojourn.sigma[j] > 0.0)))
            add("sojourn sigma not positive for semi state " + std::to_string(j + 1));
        break;
      case SojournType::nonparametric:
        for (int j = 0; j < J; ++j) {
          if (!spec.semi[j]) continue;
          if (static_cast<int>(spec.sojourn.d.size()) <= j || spec.sojourn.d[j].size() == 0) {
            add("nonparametric sojourn row missing for semi state " + std::to_string(j + 1));
            continue;
          }
          const Vector& d = spec.sojourn.d[j];
          if (d.minCoeff() < 0.0)
            add("nonparametric sojourn row " + std::to_string(j + 1) + " has negative mass");
          if (std::fabs(d.sum() - 1.0) > 1e-10)
            add("nonparametric sojourn row " + std::to_string(j + 1) + " sums to " +
                detail::num(d.sum()));
        }
        break;
    }
  }
  if (!spec.emission) {
    add("emission family missing");
  } else if (spec.emission->n_states() != J) {
    add("emission has " + std::to_string(spec.emission->n_states()) + " states, expected " +
        std::to_string(J));
  }
  return rep;
}

/// Sojourn pmf rows for every semi state (empty vectors for Markov
/// states), truncated at the per-state bounds.
inline std::vector<Vector> sojourn_rows(const ModelSpec& spec) {
  std::vector<Vector> d(spec.J);
  for (int j = 0; j < spec.J; ++j)
    if (spec.semi[j]) d[j] = sojourn_pmf(spec.sojourn, j, spec.M[j]);
  return d;
}

inline std::unique_ptr<Emission> emission_from_json(const json& e) {
  std::string family = e.at("family").get<std::string>();
  if (family == "mixmvnorm") return MixMvnEmission::from_json(e);
  if (family == "nonpar") return NonparEmission::from_json(e);
  if (family == "mixlm") return MixlmEmission::from_json(e);
  if (family == "addreg") return AddregEmission::from_json(e);
  throw ValidationError("unknown emission family '" + family + "'");
}

inline json model_to_json(const ModelSpec& spec) {
  json m;
  m["J"] = spec.J;
  m["init"] = detail::vector_to_json(spec.init);
  m["transition"] = detail::matrix_to_json(spec.transition);
  json semi = json::array();
  for (bool b : spec.semi) semi.push_back(b);
  m["semi"] = semi;
  m["M"] = spec.M;
  json so;
  so["type"] = sojourn_type_name(spec.sojourn.type);
  switch (spec.sojourn.type) {
    case SojournType::gamma:
    case SojournType::weibull:
      so["shape"] = detail::vector_to_json(spec.sojourn.shape);
      so["scale"] = detail::vector_to_json(spec.sojourn.scale);
      break;
    case SojournType::lognormal:
      so["mu"] = detail::vector_to_json(spec.sojourn.mu);
      so["sigma"] = detail::vector_to_json(spec.sojourn.sigma);
      break;
    case SojournType::nonparametric: {
      json rows = json::array();
      for (const auto& d : spec.sojourn.d) rows.push_back(detail::vector_to_json(d));
      so["d"] = rows;
      break;
    }
    case SojournType::none:
      break;
  }
  m["sojourn"] = so;
  m["emission"] = spec.emission ? spec.emission->to_json() : json(nullptr);
  return m;
}

inline ModelSpec model_from_json(const json& m) {
  ModelSpec spec;
  spec.J = m.at("J").get<int>();
  spec.init = detail::json_to_vector(m.at("init"));
  spec.transition = detail::json_to_matrix(m.at("transition"));
  for (const auto& b : m.at("semi")) spec.semi.push_back(b.get<bool>());
  spec.M = m.at("M").get<IntVector>();
  const json& so = m.at("sojourn");
  spec.sojourn.type = parse_sojourn_type(so.at("type").get<std::string>());
  switch (spec.sojourn.type) {
    case SojournType::gamma:
    case SojournType::weibull:
      spec.sojourn.shape = detail::json_to_vector(so.at("shape"));
      spec.sojourn.scale = detail::json_to_vector(so.at("scale"));
      break;
    case SojournType::lognormal:
      spec.sojourn.mu = detail::json_to_vector(so.at("mu"));
      spec.sojourn.sigma = detail::json_to_vector(so.at("sigma"));
      break;
    case SojournType::nonparametric:
      for (const auto& d : so.at("d")) spec.sojourn.d.push_back(detail::json_to_vector(d));
      break;
    case SojournType::none:
      break;
  }
  if (!m.at("emission").is_null()) spec.emission = emission_from_json(m.at("emission"));
  return spec;
}

inline void store_model(const ModelSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("store_model: cannot open " + path);
  out << model_to_json(spec).dump(1) << "\n";
}

inline ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_model: cannot open " + path);
  json m;
  try {
    in >> m;
  } catch (const std::exception& e) {
    throw ValidationError("load_model: " + std::string(e.what()));
  }
  return model_from_json(m);
}

}  // namespace hhsmm

#endif  // HHSMM_MODEL_HPP
