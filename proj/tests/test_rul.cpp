#include <catch2/catch_amalgamated.hpp>

#include "models.hpp"

using namespace hhsmm;

namespace {

// Independent re-implementation of the RUL equations on decoded
// probabilities: current-state remaining time with the d^ tracker, then
// next-state propagation adding one sojourn per visit until failure.
struct OracleSummaries {
  std::vector<double> mean, sd, mode, lower, upper;
};

OracleSummaries oracle_summaries(const ModelSpec& spec, double gamma_level) {
  OracleSummaries s;
  const int J = spec.J;
  s.mean.assign(J, 0.0);
  s.sd.assign(J, 0.0);
  s.mode.assign(J, 0.0);
  s.lower.assign(J, 0.0);
  s.upper.assign(J, 0.0);
  for (int j = 0; j < J - 1; ++j) {
    Vector d;
    if (spec.semi[j]) {
      d = sojourn_pmf(spec.sojourn, j, spec.M[j]);
    } else {
      d = geometric_pmf(spec.transition(j, j), spec.M[j]);
      d /= d.sum();
    }
    double m = 0.0;
    for (int u = 0; u < d.size(); ++u) m += (u + 1) * d[u];
    double v = 0.0;
    for (int u = 0; u < d.size(); ++u) v += (u + 1 - m) * (u + 1 - m) * d[u];
    s.mean[j] = m;
    s.sd[j] = std::sqrt(v);
    int mode = 0;
    for (int u = 1; u < d.size(); ++u)
      if (d[u] > d[mode]) mode = u;
    s.mode[j] = mode + 1;
    double acc = 0.0;
    int lo = 0;
    for (int u = 0; u < d.size(); ++u) {
      acc += d[u];
      if (acc <= gamma_level / 2.0 + 1e-15)
        lo = u + 1;
      else
        break;
    }
    s.lower[j] = lo;
    double tail = 0.0;
    int up = static_cast<int>(d.size());
    for (int u = static_cast<int>(d.size()) - 1; u >= 0; --u) {
      tail += d[u];
      if (tail <= gamma_level / 2.0 + 1e-15)
        up = u + 1;
      else
        break;
    }
    s.upper[j] = up;
  }
  return s;
}

RulEstimate rul_oracle(const ModelSpec& spec, const Matrix& delta_all, const IntVector& states,
                       RulConfidence conf, double level) {
  const int J = spec.J;
  const int tau = static_cast<int>(delta_all.cols());
  const double gamma_level = 1.0 - level;
  const double z = normal_quantile(1.0 - gamma_level / 2.0);
  OracleSummaries s = oracle_summaries(spec, gamma_level);
  RulEstimate est;
  est.last_state = states[tau - 1];
  if (est.last_state == J) return est;
  std::vector<double> dhat(J, 1.0);
  for (int t = 2; t <= tau; ++t)
    for (int j = 0; j < J; ++j)
      if (t <= spec.M[j]) dhat[j] *= delta_all(j, t - 1);
  Vector delta = delta_all.col(tau - 1);
  auto visit = [&](bool current) {
    double p = 0.0, l = 0.0, u = 0.0;
    for (int j = 0; j < J; ++j) {
      double sub = current ? dhat[j] : 0.0;
      if (conf == RulConfidence::mean) {
        p += (s.mean[j] - sub) * delta[j];
        l += (s.mean[j] - sub - z * s.sd[j]) * delta[j];
        u += (s.mean[j] - sub + z * s.sd[j]) * delta[j];
      } else {
        p += (s.mode[j] - sub) * delta[j];
        l += (s.lower[j] - sub) * delta[j];
        u += (s.upper[j] - sub) * delta[j];
      }
    }
    est.rul += std::max(0.0, p);
    est.rul_low += std::max(0.0, l);
    est.rul_up += std::max(0.0, u);
  };
  visit(true);
  int cap = 0;
  for (int j = 0; j < J; ++j) cap += spec.M[j];
  for (int step = 0; step < cap; ++step) {
    delta = spec.transition.transpose() * delta;
    delta /= delta.sum();
    int next = 0;
    for (int j = 1; j < J; ++j)
      if (delta[j] > delta[next]) next = j;
    if (next == J - 1) break;
    visit(false);
  }
  return est;
}

ModelSpec two_state_ltr() {
  ModelSpec spec;
  spec.J = 2;
  spec.init = (Vector(2) << 1.0, 0.0).finished();
  spec.transition.resize(2, 2);
  spec.transition << 0.0, 1.0, 0.0, 1.0;
  spec.semi = {true, false};
  spec.M = {80, 80};
  spec.sojourn.type = SojournType::gamma;
  spec.sojourn.shape = (Vector(2) << 4.0, 0.0).finished();
  spec.sojourn.scale = (Vector(2) << 5.0, 0.0).finished();
  spec.emission = testmodels::gaussian_emission({0.0, 10.0}, 0.25);
  return spec;
}

}  // namespace

TEST_CASE("estimate_rul requires an absorbing final state") {
  auto spec = testmodels::three_state_example();
  SequenceSet set;
  set.x = Matrix::Constant(5, 1, 8.0);
  set.N = {5};
  CHECK_THROWS_AS(estimate_rul(spec, set), ValidationError);
}

TEST_CASE("sequence decoded in the failure state reports zero RUL") {
  auto spec = two_state_ltr();
  SequenceSet set;
  set.x = Matrix::Constant(6, 1, 10.0);  // firmly state 2
  set.N = {6};
  auto est = estimate_rul(spec, set, DecodeMethod::smoothing, RulConfidence::mean, 0.95);
  REQUIRE(est.size() == 1);
  CHECK(est[0].last_state == 2);
  CHECK(est[0].rul == 0.0);
  CHECK(est[0].rul_low == 0.0);
  CHECK(est[0].rul_up == 0.0);
}

TEST_CASE("fresh unit matches the equation-level oracle") {
  auto spec = two_state_ltr();
  SequenceSet set;
  set.x = Matrix::Constant(1, 1, 0.0);  // one observation, firmly state 1
  set.N = {1};
  for (auto method : {DecodeMethod::smoothing, DecodeMethod::viterbi}) {
    for (auto conf : {RulConfidence::mean, RulConfidence::max}) {
      auto est = estimate_rul(spec, set, method, conf, 0.95)[0];
      auto dec = decode_probabilities(set.sequence(0), spec, method);
      auto exp = rul_oracle(spec, dec.delta, dec.states, conf, 0.95);
      CHECK(est.rul == Catch::Approx(exp.rul).margin(1e-8));
      CHECK(est.rul_low == Catch::Approx(exp.rul_low).margin(1e-8));
      CHECK(est.rul_up == Catch::Approx(exp.rul_up).margin(1e-8));
    }
    // mean method: value approximately mu_d - dhat with delta ~ (1, 0)
    auto est = estimate_rul(spec, set, method, RulConfidence::mean, 0.95)[0];
    Vector d = sojourn_pmf(spec.sojourn, 0, spec.M[0]);
    double mu = 0.0;
    for (int u = 0; u < d.size(); ++u) mu += (u + 1) * d[u];
    CHECK(est.rul == Catch::Approx(mu - 1.0).margin(1e-4));
  }
}

TEST_CASE("estimate_rul matches the oracle along a degradation trajectory") {
  auto spec = testmodels::ltr_degradation_model(60);
  auto sim = simulate(spec, {70}, 5);
  for (int cut : {10, 25, 40}) {
    SequenceSet set;
    set.x = sim.x.topRows(cut);
    set.N = {cut};
    for (auto conf : {RulConfidence::mean, RulConfidence::max}) {
      auto est = estimate_rul(spec, set, DecodeMethod::smoothing, conf, 0.90)[0];
      auto dec = decode_probabilities(set.sequence(0), spec, DecodeMethod::smoothing);
      auto exp = rul_oracle(spec, dec.delta, dec.states, conf, 0.90);
      CHECK(est.rul == Catch::Approx(exp.rul).margin(1e-8));
      CHECK(est.rul_low == Catch::Approx(exp.rul_low).margin(1e-8));
      CHECK(est.rul_up == Catch::Approx(exp.rul_up).margin(1e-8));
      CHECK(est.rul_low <= est.rul + 1e-12);
      CHECK(est.rul <= est.rul_up + 1e-12);
    }
  }
}

TEST_CASE("mean RUL never increases along a noiseless degradation path") {
  ModelSpec spec = testmodels::ltr_degradation_model(60);
  spec.emission = testmodels::gaussian_emission({0.0, 2.0, 4.0, 6.0, 9.0}, 1e-4);
  auto sim = simulate(spec, {80}, 9);
  double prev = std::numeric_limits<double>::infinity();
  for (int cut = 5; cut <= 80; cut += 5) {
    SequenceSet set;
    set.x = sim.x.topRows(cut);
    set.N = {cut};
    auto est = estimate_rul(spec, set, DecodeMethod::smoothing, RulConfidence::mean, 0.90)[0];
    CHECK(est.rul <= prev + 1e-6);
    prev = est.rul;
    if (est.last_state == 5) break;
  }
}
