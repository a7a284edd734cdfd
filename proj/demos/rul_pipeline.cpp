// Remaining-useful-lifetime example on a five-state left-to-right model:
// units degrade through four semi-Markovian states into an absorbing
// failure state; partial observations yield RUL point and interval
// estimates.
#include <cstdio>

#include "hhsmm/hhsmm.hpp"

using namespace hhsmm;

int main() {
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
  spec.M.assign(5, 120);
  spec.sojourn.type = SojournType::gamma;
  spec.sojourn.shape = (Vector(5) << 8.0, 6.0, 5.0, 4.0, 0.0).finished();
  spec.sojourn.scale = (Vector(5) << 2.5, 2.5, 2.0, 2.0, 0.0).finished();
  MixMvnParams par;
  for (double m : {0.0, 2.0, 4.0, 6.0, 9.0}) {
    par.lambda.push_back(Vector::Ones(1));
    par.mu.push_back({Vector::Constant(1, m)});
    par.sigma.push_back({Matrix::Constant(1, 1, 0.8)});
  }
  spec.emission = std::make_shared<MixMvnEmission>(par);

  const int n_units = 20;
  Rng cutrng(7);
  for (int unit = 0; unit < n_units; ++unit) {
    SequenceSet life = simulate(spec, {200}, 100 + unit);
    int failure = life.total_rows();
    for (int t = 0; t < life.total_rows(); ++t)
      if (life.s[t] == 5) {
        failure = t;
        break;
      }
    if (failure < 10) continue;
    int cut = 5 + cutrng.index(failure - 6);
    SequenceSet observed;
    observed.x = life.x.topRows(cut);
    observed.N = {cut};
    auto est = estimate_rul(spec, observed, DecodeMethod::smoothing, RulConfidence::mean, 0.9)[0];
    std::printf("unit %2d: observed %3d cycles, true RUL %3d, estimate %6.1f [%6.1f, %6.1f]\n",
                unit, cut, failure - cut, est.rul, est.rul_low, est.rul_up);
  }
  return 0;
}
