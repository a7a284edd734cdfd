// End-to-end example: simulate a three-state hybrid model, recover it with
// initial clustering + EM, and compare decoded states against the truth.
#include <cstdio>

#include "hhsmm/hhsmm.hpp"

using namespace hhsmm;

int main() {
  ModelSpec truth;
  truth.J = 3;
  truth.init = (Vector(3) << 1.0, 0.0, 0.0).finished();
  truth.transition.resize(3, 3);
  truth.transition << 0.8, 0.1, 0.1, 0.5, 0.0, 0.5, 0.1, 0.2, 0.7;
  truth.semi = {false, true, false};
  truth.M = {84, 84, 84};
  truth.sojourn.type = SojournType::gamma;
  truth.sojourn.shape = (Vector(3) << 0.0, 3.0, 0.0).finished();
  truth.sojourn.scale = (Vector(3) << 0.0, 10.0, 0.0).finished();
  MixMvnParams par;
  par.lambda = {(Vector(2) << 0.3, 0.7).finished(), (Vector(3) << 0.2, 0.3, 0.5).finished(),
                (Vector(2) << 0.5, 0.5).finished()};
  par.mu = {{Vector::Constant(1, 3.0), Vector::Constant(1, 4.0)},
            {Vector::Constant(1, 10.0), Vector::Constant(1, 9.0), Vector::Constant(1, 11.0)},
            {Vector::Constant(1, 16.0), Vector::Constant(1, 18.0)}};
  par.sigma = {{Matrix::Constant(1, 1, 1.8), Matrix::Constant(1, 1, 1.9)},
               {Matrix::Constant(1, 1, 2.3), Matrix::Constant(1, 1, 2.2),
                Matrix::Constant(1, 1, 2.4)},
               {Matrix::Constant(1, 1, 1.5), Matrix::Constant(1, 1, 2.1)}};
  truth.emission = std::make_shared<MixMvnEmission>(par);

  SequenceSet train = simulate(truth, {50, 40, 30, 70}, 1234);
  SequenceSet test = simulate(truth, {80, 45, 20, 35}, 5678);

  auto clus = initial_cluster(train, 3, NmixSpec::of({2, 2, 2}), false, false);
  InitializeOptions opts;
  opts.sojourn = SojournType::gamma;
  opts.semi = {false, true, false};
  ModelSpec init = initialize_model(clus, opts);

  FitControl ctrl;
  ctrl.maxit = 100;
  FitResult fit = hhsmmfit(train, init, ctrl);
  std::printf("fitted in %d iterations, loglik %.2f, AIC %.1f, BIC %.1f\n", fit.iterations,
              fit.loglik, fit.AIC, fit.BIC);

  auto pred = predict_states(fit.model, test, DecodeMethod::viterbi);
  IntVector yhat;
  for (const auto& seq : pred) yhat.insert(yhat.end(), seq.begin(), seq.end());
  Vector h = homogeneity(yhat, test.s);
  std::printf("per-state homogeneity vs truth:");
  for (int j = 0; j < h.size(); ++j) std::printf(" %.3f", h[j]);
  std::printf("\n");
  return 0;
}
