// Shared model builders for the test and acceptance suites.
#ifndef HHSMM_TESTS_MODELS_HPP
#define HHSMM_TESTS_MODELS_HPP

#include "hhsmm/hhsmm.hpp"

namespace testmodels {

using namespace hhsmm;

/// Three-state hybrid example: two Markovian states, one semi-Markovian
/// with a gamma(3, 10) sojourn, univariate mixture-normal emissions.
inline ModelSpec three_state_example(int M = 100) {
  ModelSpec spec;
  spec.J = 3;
  spec.init = (Vector(3) << 1.0, 0.0, 0.0).finished();
  spec.transition.resize(3, 3);
  spec.transition << 0.8, 0.1, 0.1, 0.5, 0.0, 0.5, 0.1, 0.2, 0.7;
  spec.semi = {false, true, false};
  spec.M = {M, M, M};
  spec.sojourn.type = SojournType::gamma;
  spec.sojourn.shape = (Vector(3) << 0.0, 3.0, 0.0).finished();
  spec.sojourn.scale = (Vector(3) << 0.0, 10.0, 0.0).finished();
  MixMvnParams par;
  par.lambda = {(Vector(2) << 0.3, 0.7).finished(), (Vector(3) << 0.2, 0.3, 0.5).finished(),
                (Vector(2) << 0.5, 0.5).finished()};
  par.mu = {{Vector::Constant(1, 7.0), Vector::Constant(1, 8.0)},
            {Vector::Constant(1, 10.0), Vector::Constant(1, 9.0), Vector::Constant(1, 11.0)},
            {Vector::Constant(1, 12.0), Vector::Constant(1, 14.0)}};
  par.sigma = {{Matrix::Constant(1, 1, 3.8), Matrix::Constant(1, 1, 4.9)},
               {Matrix::Constant(1, 1, 4.3), Matrix::Constant(1, 1, 4.2),
                Matrix::Constant(1, 1, 5.4)},
               {Matrix::Constant(1, 1, 4.5), Matrix::Constant(1, 1, 6.1)}};
  spec.emission = std::make_shared<MixMvnEmission>(std::move(par));
  return spec;
}

/// Two-variable version of the example model (diagonal covariances).
inline ModelSpec three_state_example_2d(int M = 100) {
  ModelSpec spec = three_state_example(M);
  MixMvnParams par;
  par.lambda = {(Vector(2) << 0.3, 0.7).finished(), (Vector(3) << 0.2, 0.3, 0.5).finished(),
                (Vector(2) << 0.5, 0.5).finished()};
  auto mu2 = [](double a, double b) { return (Vector(2) << a, b).finished(); };
  auto dg = [](double a, double b) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
  };
  par.mu = {{mu2(7, 17), mu2(8, 18)},
            {mu2(15, 25), mu2(14, 24), mu2(16, 16)},
            {mu2(0, 10), mu2(2, 12)}};
  par.sigma = {{dg(2.8, 4.8), dg(3.9, 5.9)},
               {dg(3.3, 5.3), dg(3.2, 5.2), dg(4.4, 6.4)},
               {dg(3.5, 5.5), dg(5.1, 7.1)}};
  spec.emission = std::make_shared<MixMvnEmission>(std::move(par));
  return spec;
}

/// Well-separated variant (means 0/8/16, unit variances): decoding is
/// near-perfect, suitable for pipeline wiring tests.
inline ModelSpec three_state_separated(int M = 100) {
  ModelSpec spec = three_state_example(M);
  MixMvnParams par;
  par.lambda = {Vector::Ones(1), Vector::Ones(1), Vector::Ones(1)};
  par.mu = {{Vector::Constant(1, 0.0)}, {Vector::Constant(1, 8.0)}, {Vector::Constant(1, 16.0)}};
  par.sigma = {{Matrix::Constant(1, 1, 1.0)},
               {Matrix::Constant(1, 1, 1.0)},
               {Matrix::Constant(1, 1, 1.0)}};
  spec.emission = std::make_shared<MixMvnEmission>(std::move(par));
  return spec;
}

/// Single-component Gaussian emissions with the given 1-d means.
inline std::shared_ptr<MixMvnEmission> gaussian_emission(const std::vector<double>& means,
                                                         double var = 1.0) {
  MixMvnParams par;
  for (double m : means) {
    par.lambda.push_back(Vector::Ones(1));
    par.mu.push_back({Vector::Constant(1, m)});
    par.sigma.push_back({Matrix::Constant(1, 1, var)});
  }
  return std::make_shared<MixMvnEmission>(std::move(par));
}

/// Random hybrid model with nonparametric sojourns for oracle testing:
/// J states, p variables, mixed semi flags, well-conditioned parameters.
inline ModelSpec random_hybrid(int J, int p, int M, Rng& rng, bool force_hybrid = true) {
  ModelSpec spec;
  spec.J = J;
  spec.init.resize(J);
  for (int j = 0; j < J; ++j) spec.init[j] = 0.2 + rng.uniform();
  spec.init /= spec.init.sum();
  spec.semi.resize(J);
  int nsemi = 0;
  for (int j = 0; j < J; ++j) {
    spec.semi[j] = rng.uniform() < 0.5;
    if (spec.semi[j]) ++nsemi;
  }
  if (force_hybrid && nsemi == 0 && J > 1) spec.semi[rng.index(J)] = true;
  spec.transition.resize(J, J);
  for (int i = 0; i < J; ++i) {
    for (int j = 0; j < J; ++j) spec.transition(i, j) = 0.2 + rng.uniform();
    if (spec.semi[i]) spec.transition(i, i) = 0.0;
    spec.transition.row(i) /= spec.transition.row(i).sum();
  }
  spec.M.assign(J, M);
  spec.sojourn.type = SojournType::nonparametric;
  spec.sojourn.d.resize(J);
  for (int j = 0; j < J; ++j) {
    if (!spec.semi[j]) continue;
    Vector d(M);
    for (int u = 0; u < M; ++u) d[u] = 0.2 + rng.uniform();
    spec.sojourn.d[j] = d / d.sum();
  }
  MixMvnParams par;
  for (int j = 0; j < J; ++j) {
    par.lambda.push_back(Vector::Ones(1));
    Vector mu(p);
    for (int c = 0; c < p; ++c) mu[c] = 3.0 * rng.normal();
    par.mu.push_back({mu});
    Matrix sig = Matrix::Identity(p, p) * (0.5 + rng.uniform());
    par.sigma.push_back({sig});
  }
  spec.emission = std::make_shared<MixMvnEmission>(std::move(par));
  return spec;
}

/// Random observation block loosely matched to the model's emissions.
inline Matrix random_observations(const ModelSpec& spec, int tau, Rng& rng) {
  SequenceSet sim = simulate(spec, {tau}, rng.engine()());
  return sim.x;
}

/// Five-state left-to-right degradation model: four semi states with
/// gamma sojourns and drifting Gaussian emissions, absorbing failure.
inline ModelSpec ltr_degradation_model(int M = 120) {
  ModelSpec spec;
  spec.J = 5;
  spec.init = Vector::Zero(5);
  spec.init[0] = 1.0;
  spec.transition = Matrix::Zero(5, 5);
  spec.transition << 0.0, 0.90, 0.06, 0.04, 0.0,
                     0.0, 0.0, 0.90, 0.07, 0.03,
                     0.0, 0.0, 0.0, 0.92, 0.08,
                     0.0, 0.0, 0.0, 0.0, 1.0,
                     0.0, 0.0, 0.0, 0.0, 1.0;
  spec.semi = {true, true, true, true, false};
  spec.M.assign(5, M);
  spec.sojourn.type = SojournType::gamma;
  spec.sojourn.shape = (Vector(5) << 8.0, 6.0, 5.0, 4.0, 0.0).finished();
  spec.sojourn.scale = (Vector(5) << 2.5, 2.5, 2.0, 2.0, 0.0).finished();
  spec.emission = gaussian_emission({0.0, 2.0, 4.0, 6.0, 9.0}, 0.8);
  return spec;
}

}  // namespace testmodels

#endif  // HHSMM_TESTS_MODELS_HPP
