#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hhsmm/sojourn.hpp"
#include "oracles.hpp"

using namespace hhsmm;

namespace {
SojournSpec gamma_spec(double shape, double scale) {
  SojournSpec s;
  s.type = SojournType::gamma;
  s.shape = Vector::Constant(1, shape);
  s.scale = Vector::Constant(1, scale);
  return s;
}
}  // namespace

TEST_CASE("sojourn_pmf gamma exponential special case") {
  // shape 1, scale 1: d(1) = (1-e^-1)/(1-e^-50)
  Vector d = sojourn_pmf(gamma_spec(1.0, 1.0), 0, 50);
  CHECK(d[0] == Catch::Approx(0.6321205588285577).epsilon(1e-12));
  CHECK(d.sum() == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sojourn_pmf matches adaptive quadrature") {
  struct Case {
    SojournType type;
    double a, b;
    int M;
  };
  for (const Case& c : {Case{SojournType::gamma, 3.0, 10.0, 600},
                        Case{SojournType::weibull, 2.0, 5.0, 100},
                        Case{SojournType::lognormal, 1.0, 0.5, 100}}) {
    SojournSpec s;
    s.type = c.type;
    if (c.type == SojournType::lognormal) {
      s.mu = Vector::Constant(1, c.a);
      s.sigma = Vector::Constant(1, c.b);
    } else {
      s.shape = Vector::Constant(1, c.a);
      s.scale = Vector::Constant(1, c.b);
    }
    auto density = [&](double y) -> double {
      if (y <= 0.0) return 0.0;
      switch (c.type) {
        case SojournType::gamma:
          return std::exp((c.a - 1.0) * std::log(y) - y / c.b - std::lgamma(c.a) -
                          c.a * std::log(c.b));
        case SojournType::weibull:
          return c.a / c.b * std::pow(y / c.b, c.a - 1.0) * std::exp(-std::pow(y / c.b, c.a));
        default:
          return std::exp(-0.5 * std::pow((std::log(y) - c.a) / c.b, 2.0)) /
                 (y * c.b * std::sqrt(2.0 * M_PI));
      }
    };
    Vector d = sojourn_pmf(s, 0, c.M);
    CHECK(d.sum() == Catch::Approx(1.0).epsilon(1e-12));
    double total = oracle::integrate(density, 0.0, c.M, 1e-14);
    for (int u = 1; u <= c.M; ++u) {
      double expect = oracle::integrate(density, u - 1.0, u, 1e-14) / total;
      CHECK(std::fabs(d[u - 1] - expect) < 1e-10);
    }
  }
}

TEST_CASE("sojourn_pmf nonparametric returns the stored row") {
  SojournSpec s;
  s.type = SojournType::nonparametric;
  s.d.push_back((Vector(3) << 0.2, 0.3, 0.5).finished());
  Vector d = sojourn_pmf(s, 0, 3);
  CHECK((d - s.d[0]).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("geometric_pmf") {
  Vector d = geometric_pmf(0.7, 3);
  CHECK(d[0] == Catch::Approx(0.3));
  CHECK(d[1] == Catch::Approx(0.21));
  CHECK(d[2] == Catch::Approx(0.147));
  Vector d0 = geometric_pmf(0.0, 5);
  CHECK(d0[0] == 1.0);
  CHECK(d0.tail(4).cwiseAbs().maxCoeff() == 0.0);
  CHECK(geometric_pmf(0.5, 20).sum() == Catch::Approx(1.0 - std::pow(2.0, -20.0)).epsilon(1e-12));
  CHECK_THROWS_AS(geometric_pmf(1.0, 5), ValidationError);
}

TEST_CASE("geometric partial sums are 1 - p^M") {
  for (double p : {0.1, 0.5, 0.9})
    for (int M : {1, 5, 30})
      CHECK(geometric_pmf(p, M).sum() == Catch::Approx(1.0 - std::pow(p, M)).epsilon(1e-12));
}

TEST_CASE("sojourn_survival") {
  Vector d(3);
  d << 0.5, 0.3, 0.2;
  Vector D = sojourn_survival(d);
  CHECK(D[0] == Catch::Approx(1.0));
  CHECK(D[1] == Catch::Approx(0.5));
  CHECK(D[2] == Catch::Approx(0.2));
  CHECK(sojourn_survival(Vector::Zero(4)).cwiseAbs().maxCoeff() == 0.0);
  // reverse-cumsum oracle on a random vector
  Rng rng(3);
  Vector r(10);
  for (int i = 0; i < 10; ++i) r[i] = rng.uniform();
  Vector Dr = sojourn_survival(r);
  for (int u = 0; u < 10; ++u) {
    double s = 0.0;
    for (int v = u; v < 10; ++v) s += r[v];
    CHECK(Dr[u] == Catch::Approx(s).epsilon(1e-12));
  }
  for (int u = 0; u + 1 < 10; ++u) CHECK(Dr[u] - Dr[u + 1] == Catch::Approx(r[u]).epsilon(1e-12));
}

TEST_CASE("fit_sojourn_moments recovers simulated parameters") {
  std::mt19937_64 eng(991);
  const int n = 5000;
  Vector w = Vector::Ones(n);
  {
    std::gamma_distribution<double> g(3.0, 10.0);
    Vector dur(n);
    for (int i = 0; i < n; ++i) dur[i] = g(eng);
    auto fit = fit_sojourn_moments(dur, w, SojournType::gamma);
    CHECK(std::fabs(fit.a - 3.0) / 3.0 < 0.10);
    CHECK(std::fabs(fit.b - 10.0) / 10.0 < 0.10);
  }
  {
    std::lognormal_distribution<double> g(1.0, 0.5);
    Vector dur(n);
    for (int i = 0; i < n; ++i) dur[i] = g(eng);
    auto fit = fit_sojourn_moments(dur, w, SojournType::lognormal);
    CHECK(std::fabs(fit.a - 1.0) < 0.05);
    CHECK(std::fabs(fit.b - 0.5) / 0.5 < 0.05);
  }
  {
    std::weibull_distribution<double> g(2.0, 5.0);
    Vector dur(n);
    for (int i = 0; i < n; ++i) dur[i] = g(eng);
    auto fit = fit_sojourn_moments(dur, w, SojournType::weibull);
    CHECK(std::fabs(fit.a - 2.0) / 2.0 < 0.10);
    CHECK(std::fabs(fit.b - 5.0) / 5.0 < 0.10);
  }
  Vector constant = Vector::Constant(10, 4.0);
  CHECK_THROWS_AS(fit_sojourn_moments(constant, Vector::Ones(10), SojournType::gamma),
                  NumericError);
}

TEST_CASE("fit_sojourn_moments is consistent as n grows") {
  for (int n : {500, 5000}) {
    std::mt19937_64 eng(17);
    std::gamma_distribution<double> g(4.0, 2.0);
    Vector dur(n);
    for (int i = 0; i < n; ++i) dur[i] = g(eng);
    auto fit = fit_sojourn_moments(dur, Vector::Ones(n), SojournType::gamma);
    double err = std::fabs(fit.a - 4.0) / 4.0;
    if (n == 500) CHECK(err < 0.35);
    if (n == 5000) CHECK(err < 0.10);
  }
}

TEST_CASE("select_sojourn_auto picks the generating family") {
  int gamma_hits = 0, logn_hits = 0;
  for (int rep = 0; rep < 20; ++rep) {
    std::mt19937_64 eng(1000 + rep);
    std::gamma_distribution<double> g(3.0, 10.0);
    Vector dur(2000);
    for (int i = 0; i < 2000; ++i) dur[i] = std::max(1.0, std::round(g(eng)));
    if (select_sojourn_auto({dur}, {Vector::Ones(2000)}) == SojournType::gamma) ++gamma_hits;

    std::lognormal_distribution<double> ln(2.2, 0.8);
    Vector dur2(2000);
    for (int i = 0; i < 2000; ++i) dur2[i] = std::max(1.0, std::round(ln(eng)));
    if (select_sojourn_auto({dur2}, {Vector::Ones(2000)}) == SojournType::lognormal) ++logn_hits;
  }
  CHECK(gamma_hits >= 18);
  CHECK(logn_hits >= 18);
}

TEST_CASE("sojourn_summary") {
  SojournSummary s1 = sojourn_summary((Vector(1) << 1.0).finished());
  CHECK(s1.mean == 1.0);
  CHECK(s1.sd == 0.0);
  CHECK(s1.mode == 1);

  SojournSummary s2 = sojourn_summary((Vector(2) << 0.5, 0.5).finished());
  CHECK(s2.mean == Catch::Approx(1.5));
  CHECK(s2.sd == Catch::Approx(0.5));
  CHECK(s2.mode == 1);  // tie breaks low

  Vector d = sojourn_pmf(gamma_spec(3.0, 10.0), 0, 600);
  SojournSummary s3 = sojourn_summary(d);
  CHECK(std::fabs(s3.mean - 30.0) < 0.5);  // continuous mean alpha*beta = 30
  CHECK(s3.lower < s3.mode);
  CHECK(s3.mode < s3.upper);

  Vector bad(2);
  bad << 0.5, 0.4;
  CHECK_THROWS_AS(sojourn_summary(bad), ValidationError);
}
