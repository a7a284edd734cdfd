#ifndef HHSMM_SIMULATE_HPP
#define HHSMM_SIMULATE_HPP

#include <vector>

#include "hhsmm/data.hpp"
#include "hhsmm/model.hpp"

namespace hhsmm {

struct SimulateOptions {
  bool autoregress = false;
  CovarModel covar;  // optional override for regression-family samplers
};

/** Simulates sequences of the given lengths. Semi states draw a sojourn
    from the discretized pmf truncated at the remaining horizon and emit
    that many observations before transitioning; Markovian states emit one
    observation per step. Sequence i uses the substream Rng::stream(seed, i),
    so outputs are reproducible and per-sequence independent. */
inline SequenceSet simulate(const ModelSpec& spec, const IntVector& nsim, std::uint64_t seed = 0,
                            const SimulateOptions& opts = {}) {
  auto rep = validate_model(spec);
  if (!rep.ok()) throw ValidationError("simulate: invalid model\n" + rep.to_string());
  if (!spec.emission->has_sampler())
    throw ValidationError("simulate: emission family '" + spec.emission->family() +
                          "' has no sampler");
  if (nsim.empty()) throw ValidationError("simulate: no sequence lengths");
  for (int n : nsim)
    if (n < 1) throw ValidationError("simulate: sequence lengths must be >= 1");

  std::vector<Vector> d = sojourn_rows(spec);
  EmissionSampleContext probe;
  probe.autoregress = opts.autoregress;
  probe.covar = &opts.covar;
  const int pdim = spec.emission->sample_dim(probe);

  int total = 0;
  for (int n : nsim) total += n;
  SequenceSet out;
  out.x.resize(total, pdim);
  out.N = nsim;
  out.s.resize(total);

  int row = 0;
  for (std::size_t i = 0; i < nsim.size(); ++i) {
    Rng rng = Rng::stream(seed, i);
    int remaining = nsim[i];
    Vector prev;
    bool have_prev = false;
    int state = rng.categorical(spec.init);
    while (remaining > 0) {
      int emit = 1;
      if (spec.semi[state]) {
        int cap = std::min<int>(remaining, static_cast<int>(d[state].size()));
        Vector trunc = d[state].head(cap);
        // mass may sit entirely beyond the horizon; censor to the remainder
        emit = trunc.sum() > 0.0 ? rng.categorical(trunc) + 1 : remaining;
      }
      for (int e = 0; e < emit; ++e) {
        EmissionSampleContext ctx;
        ctx.autoregress = opts.autoregress;
        ctx.prev = have_prev ? &prev : nullptr;
        ctx.covar = &opts.covar;
        Vector obs = spec.emission->sample(state, rng, ctx);
        out.x.row(row) = obs.transpose();
        out.s[row] = state + 1;
        prev = obs;
        have_prev = true;
        ++row;
      }
      remaining -= emit;
      if (remaining > 0) state = rng.categorical(spec.transition.row(state).transpose());
    }
  }
  return out;
}

}  // namespace hhsmm

#endif  // HHSMM_SIMULATE_HPP
