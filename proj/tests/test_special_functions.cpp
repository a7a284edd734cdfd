#include <catch2/catch_amalgamated.hpp>

#include "hhsmm/special_functions.hpp"

using namespace hhsmm;

// Reference values computed independently with scipy.special / scipy.stats.
TEST_CASE("regularized incomplete gamma") {
  CHECK(gamma_p(3.0, 2.5) == Catch::Approx(0.45618688411667035).epsilon(1e-13));
  CHECK(gamma_p(0.5, 2.0) == Catch::Approx(0.9544997361036415).epsilon(1e-13));
  CHECK(gamma_p(10.0, 12.0) == Catch::Approx(0.7576078383294875).epsilon(1e-13));
  CHECK(gamma_p(1.0, 1.0) == Catch::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  CHECK(gamma_p(2.0, 0.0) == 0.0);
  CHECK_THROWS_AS(gamma_p(-1.0, 1.0), NumericError);
}

TEST_CASE("incomplete beta") {
  CHECK(beta_inc(2.0, 3.0, 0.4) == Catch::Approx(0.5248).epsilon(1e-13));
  CHECK(beta_inc(0.5, 0.5, 0.3) == Catch::Approx(0.36901011956554536).epsilon(1e-13));
  CHECK(beta_inc(1.5, 2.5, 0.0) == 0.0);
  CHECK(beta_inc(1.5, 2.5, 1.0) == 1.0);
}

TEST_CASE("normal quantile and cdf") {
  CHECK(normal_quantile(0.975) == Catch::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.95) == Catch::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK(normal_quantile(0.005) == Catch::Approx(-2.575829303548901).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == Catch::Approx(0.0).margin(1e-14));
  for (double p : {0.01, 0.2, 0.5, 0.77, 0.999})
    CHECK(normal_cdf(normal_quantile(p)) == Catch::Approx(p).epsilon(1e-12));
  CHECK_THROWS_AS(normal_quantile(0.0), NumericError);
}

TEST_CASE("F quantile inverts the F cdf") {
  CHECK(f_quantile(0.95, 2, 10) == Catch::Approx(4.1028210151304005).epsilon(1e-9));
  CHECK(f_quantile(0.95, 1, 27) == Catch::Approx(4.210008468359754).epsilon(1e-9));
  CHECK(f_quantile(0.99, 5, 3) == Catch::Approx(28.237080837755045).epsilon(1e-9));
  CHECK(f_cdf(f_quantile(0.9, 4, 17), 4, 17) == Catch::Approx(0.9).epsilon(1e-10));
}

TEST_CASE("sojourn family cdfs") {
  CHECK(gamma_cdf(7.0, 3.0, 10.0) == Catch::Approx(0.0341415841257085).epsilon(1e-13));
  CHECK(weibull_cdf(4.0, 2.0, 5.0) == Catch::Approx(0.47270757595695145).epsilon(1e-13));
  CHECK(lognormal_cdf(3.0, 1.0, 0.5) == Catch::Approx(0.5781741008028732).epsilon(1e-13));
  CHECK(gamma_cdf(-1.0, 2.0, 1.0) == 0.0);
}
