#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "models.hpp"

using namespace hhsmm;

TEST_CASE("validate_model accepts the example model") {
  auto spec = testmodels::three_state_example();
  auto rep = validate_model(spec);
  CHECK(rep.ok());
}

TEST_CASE("validate_model flags semi-state self transitions") {
  auto spec = testmodels::three_state_example();
  spec.transition(1, 1) = 0.2;
  spec.transition(1, 2) = 0.3;
  auto rep = validate_model(spec);
  REQUIRE_FALSE(rep.ok());
  bool found = false;
  for (const auto& v : rep.violations)
    if (v.find("semi-state self-transition nonzero") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("validate_model reports the init sum") {
  auto spec = testmodels::three_state_example();
  spec.init = (Vector(3) << 0.5, 0.4, 0.2).finished();
  auto rep = validate_model(spec);
  REQUIRE_FALSE(rep.ok());
  bool found = false;
  for (const auto& v : rep.violations)
    if (v.find("init sums to 1.1") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("validate_model reports multiple violations at once") {
  auto spec = testmodels::three_state_example();
  spec.init[0] = 1.4;
  spec.transition(0, 0) = 0.9;  // row sums to 1.1 as well
  auto rep = validate_model(spec);
  CHECK(rep.violations.size() >= 2);
}

TEST_CASE("model json round trip preserves densities and structure") {
  auto tmp = std::filesystem::temp_directory_path() / "hhsmm_model.json";
  for (int variant = 0; variant < 2; ++variant) {
    ModelSpec spec =
        variant == 0 ? testmodels::three_state_example() : testmodels::three_state_example_2d();
    store_model(spec, tmp.string());
    ModelSpec back = load_model(tmp.string());
    CHECK(back.J == spec.J);
    CHECK((back.init - spec.init).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.transition - spec.transition).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.semi == spec.semi);
    CHECK(back.M == spec.M);
    CHECK((back.sojourn.shape - spec.sojourn.shape).cwiseAbs().maxCoeff() == 0.0);
    Vector probe = Vector::Constant(spec.emission->dim(), 9.5);
    for (int j = 0; j < spec.J; ++j)
      CHECK(back.emission->density(probe, j) == spec.emission->density(probe, j));
    CHECK(validate_model(back).ok());
  }
  std::filesystem::remove(tmp);
}

TEST_CASE("nonparametric sojourn round trips") {
  Rng rng(5);
  ModelSpec spec = testmodels::random_hybrid(3, 2, 4, rng);
  auto tmp = std::filesystem::temp_directory_path() / "hhsmm_model_np.json";
  store_model(spec, tmp.string());
  ModelSpec back = load_model(tmp.string());
  for (int j = 0; j < spec.J; ++j) {
    if (!spec.semi[j]) continue;
    CHECK((back.sojourn.d[j] - spec.sojourn.d[j]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(validate_model(back).ok());
  std::filesystem::remove(tmp);
}

TEST_CASE("mixlm and addreg emissions round trip") {
  MixLMParams lm;
  lm.resp_ind = {2};
  lm.mix_p = {(Vector(2) << 0.4, 0.6).finished()};
  lm.intercept = {{Vector::Constant(1, 0.5), Vector::Constant(1, -0.8)}};
  lm.coef = {{Matrix::Constant(1, 1, -0.8), Matrix::Constant(1, 1, 0.7)}};
  lm.csigma = {{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.2)}};
  lm.covar.mean = Vector::Zero(1);
  lm.covar.cov = Matrix::Identity(1, 1);
  MixlmEmission em(lm);
  auto back = emission_from_json(em.to_json());
  Vector row(2);
  row << 0.3, 0.9;
  CHECK(back->density(row, 0) == em.density(row, 0));
  CHECK(back->family() == "mixlm");
}
