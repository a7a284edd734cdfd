#include <catch2/catch_amalgamated.hpp>

#include "hhsmm/emission_mixmvn.hpp"

using namespace hhsmm;

namespace {
MixMvnParams single_state_1d(std::vector<double> lambda, std::vector<double> mu,
                             std::vector<double> var) {
  MixMvnParams p;
  p.lambda.push_back(Eigen::Map<Vector>(lambda.data(), lambda.size()));
  std::vector<Vector> mus;
  std::vector<Matrix> sigmas;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    mus.push_back(Vector::Constant(1, mu[k]));
    sigmas.push_back(Matrix::Constant(1, 1, var[k]));
  }
  p.mu.push_back(mus);
  p.sigma.push_back(sigmas);
  return p;
}
}  // namespace

TEST_CASE("dmixmvnorm standard normal peak") {
  auto p = single_state_1d({1.0}, {0.0}, {1.0});
  CHECK(dmixmvnorm(Vector::Zero(1), 0, p) == Catch::Approx(0.3989422804014327).epsilon(1e-14));
}

TEST_CASE("dmixmvnorm mixture of identical components collapses") {
  auto p = single_state_1d({0.5, 0.5}, {0.0, 0.0}, {1.0, 1.0});
  auto q = single_state_1d({1.0}, {0.0}, {1.0});
  for (double x : {-2.0, -0.3, 0.0, 1.7}) {
    Vector v = Vector::Constant(1, x);
    CHECK(dmixmvnorm(v, 0, p) == Catch::Approx(dmixmvnorm(v, 0, q)).epsilon(1e-14));
  }
}

TEST_CASE("dmixmvnorm matches direct two-term summation") {
  // state-1 parameters of the three-state example model
  auto p = single_state_1d({0.3, 0.7}, {7.0, 8.0}, {3.8, 4.9});
  double x = 7.5;
  auto phi = [](double v, double m, double var) {
    return std::exp(-0.5 * (v - m) * (v - m) / var) / std::sqrt(2.0 * M_PI * var);
  };
  double direct = 0.3 * phi(x, 7.0, 3.8) + 0.7 * phi(x, 8.0, 4.9);
  CHECK(dmixmvnorm(Vector::Constant(1, x), 0, p) == Catch::Approx(direct).epsilon(1e-14));
}

TEST_CASE("dmixmvnorm integrates to one (importance sampling, p=2)") {
  MixMvnParams p;
  p.lambda.push_back((Vector(2) << 0.4, 0.6).finished());
  p.mu.push_back({(Vector(2) << 1.0, -1.0).finished(), (Vector(2) << -2.0, 0.5).finished()});
  Matrix s1(2, 2), s2(2, 2);
  s1 << 1.0, 0.3, 0.3, 0.8;
  s2 << 0.5, -0.1, -0.1, 1.2;
  p.sigma.push_back({s1, s2});
  // proposal: N(0, 9 I)
  Rng rng(55);
  const int n = 100000;
  double acc = 0.0;
  const double qnorm = 1.0 / (2.0 * M_PI * 9.0);
  for (int i = 0; i < n; ++i) {
    Vector z(2);
    z << 3.0 * rng.normal(), 3.0 * rng.normal();
    double q = qnorm * std::exp(-z.squaredNorm() / (2.0 * 9.0));
    acc += dmixmvnorm(z, 0, p) / q;
  }
  CHECK(acc / n == Catch::Approx(1.0).epsilon(0.01));
}

TEST_CASE("rmixmvnorm degenerate covariance returns the mean") {
  auto p = single_state_1d({1.0}, {3.5}, {1e-12});
  Rng rng(1);
  for (int i = 0; i < 10; ++i) CHECK(std::fabs(rmixmvnorm(0, p, rng)[0] - 3.5) < 1e-4);
}

TEST_CASE("rmixmvnorm sample mean within CLT bound") {
  auto p = single_state_1d({1.0}, {0.0}, {1.0});
  Rng rng(2);
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += rmixmvnorm(0, p, rng)[0];
  CHECK(std::fabs(acc / n) < 0.02);  // 3 sigma / sqrt(n) < 0.01, allow slack
}

TEST_CASE("rmixmvnorm respects zero-weight components") {
  auto p = single_state_1d({1.0, 0.0}, {0.0, 100.0}, {1.0, 1.0});
  Rng rng(3);
  for (int i = 0; i < 200; ++i) CHECK(std::fabs(rmixmvnorm(0, p, rng)[0]) < 10.0);
}

TEST_CASE("mixmvnorm_mstep with one-hot weights equals weighted moments") {
  Rng rng(4);
  const int T = 300, p = 2, J = 2;
  Matrix x(T, p);
  Matrix w = Matrix::Zero(T, J);
  for (int t = 0; t < T; ++t) {
    int j = t % 2;
    x(t, 0) = rng.normal() + (j == 0 ? 0.0 : 5.0);
    x(t, 1) = rng.normal() * 2.0;
    w(t, j) = 1.0;
  }
  MixMvnParams prev;
  for (int j = 0; j < J; ++j) {
    prev.lambda.push_back(Vector::Ones(1));
    prev.mu.push_back({Vector::Zero(p)});
    prev.sigma.push_back({Matrix::Identity(p, p)});
  }
  auto out = mixmvnorm_mstep(x, w, prev);
  for (int j = 0; j < J; ++j) {
    Vector mean = Vector::Zero(p);
    double wj = w.col(j).sum();
    for (int t = 0; t < T; ++t) mean += w(t, j) * x.row(t).transpose();
    mean /= wj;
    Matrix cov = Matrix::Zero(p, p);
    for (int t = 0; t < T; ++t) {
      Vector c = x.row(t).transpose() - mean;
      cov += w(t, j) * c * c.transpose();
    }
    cov /= wj;  // weight-normalized, not (n-1)
    CHECK((out.mu[j][0] - mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((out.sigma[j][0] - cov).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mixmvnorm_mstep single support point degenerates gracefully") {
  Matrix x(3, 2);
  x << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  Matrix w = Matrix::Zero(3, 1);
  w(1, 0) = 1.0;
  MixMvnParams prev;
  prev.lambda.push_back(Vector::Ones(1));
  prev.mu.push_back({Vector::Zero(2)});
  prev.sigma.push_back({Matrix::Identity(2, 2)});
  auto out = mixmvnorm_mstep(x, w, prev);
  CHECK((out.mu[0][0] - x.row(1).transpose()).cwiseAbs().maxCoeff() < 1e-12);
  // degenerate covariance still usable through the jitter floor
  MixMvnEmission em(out);
  CHECK(std::isfinite(em.density(x.row(1).transpose(), 0)));
}

namespace {
double complete_loglik(const Matrix& x, const Matrix& w, const MixMvnParams& p) {
  double ll = 0.0;
  for (int t = 0; t < x.rows(); ++t)
    for (int j = 0; j < static_cast<int>(p.lambda.size()); ++j) {
      if (w(t, j) == 0.0) continue;
      ll += w(t, j) * std::log(std::max(dmixmvnorm(x.row(t).transpose(), j, p), 1e-300));
    }
  return ll;
}
}  // namespace

TEST_CASE("mixmvnorm_mstep increases the weighted log-likelihood") {
  Rng rng(5);
  const int T = 400;
  Matrix x(T, 1);
  for (int t = 0; t < T; ++t) x(t, 0) = rng.normal() + (rng.uniform() < 0.4 ? -3.0 : 3.0);
  Matrix w = Matrix::Ones(T, 1);
  MixMvnParams p = single_state_1d({0.5, 0.5}, {-1.0, 1.0}, {4.0, 4.0});
  double prev_ll = complete_loglik(x, w, p);
  for (int it = 0; it < 2; ++it) {
    p = mixmvnorm_mstep(x, w, p);
    double ll = complete_loglik(x, w, p);
    CHECK(ll >= prev_ll - 1e-9 * std::fabs(prev_ll));
    prev_ll = ll;
  }
}

TEST_CASE("mixmvnorm_mstep is permutation-equivariant in components") {
  Rng rng(6);
  const int T = 200;
  Matrix x(T, 1);
  for (int t = 0; t < T; ++t) x(t, 0) = rng.normal() * 2.0;
  Matrix w = Matrix::Ones(T, 1);
  MixMvnParams a = single_state_1d({0.3, 0.7}, {-1.0, 2.0}, {1.0, 2.0});
  MixMvnParams b = single_state_1d({0.7, 0.3}, {2.0, -1.0}, {2.0, 1.0});
  auto oa = mixmvnorm_mstep(x, w, a);
  auto ob = mixmvnorm_mstep(x, w, b);
  CHECK(oa.lambda[0][0] == Catch::Approx(ob.lambda[0][1]).epsilon(1e-12));
  CHECK(oa.mu[0][0][0] == Catch::Approx(ob.mu[0][1][0]).epsilon(1e-12));
  CHECK(oa.sigma[0][0](0, 0) == Catch::Approx(ob.sigma[0][1](0, 0)).epsilon(1e-12));
}

TEST_CASE("impute_initial") {
  SequenceSet set;
  set.x.resize(5, 2);
  set.x << 1.0, 1.0, missing_value(), missing_value(), 3.0, 3.0, 2.0, missing_value(), 4.0, 6.0;
  set.N = {5};
  auto out = impute_initial(set);
  // fully missing row: average of neighbors (1,1) and (3,3)
  CHECK(out.x(1, 0) == Catch::Approx(2.0));
  CHECK(out.x(1, 1) == Catch::Approx(2.0));
  // partially missing cell: column mean of observed cells (1,3,6->no; col2: 1,3,6)
  CHECK(out.x(3, 1) == Catch::Approx((1.0 + 3.0 + 6.0) / 3.0));

  // identity on complete data
  SequenceSet clean;
  clean.x = Matrix::Random(6, 2);
  clean.N = {3, 3};
  auto same = impute_initial(clean);
  CHECK((same.x - clean.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("impute_initial column mean example") {
  SequenceSet set;
  set.x.resize(3, 1);
  set.x << 2.0, missing_value(), 4.0;
  set.N = {3};
  auto out = impute_initial(set);
  CHECK(out.x(1, 0) == Catch::Approx(3.0));
}

TEST_CASE("miss_mixmvnorm_mstep reduces to the complete-data mstep") {
  Rng rng(7);
  const int T = 150;
  Matrix x(T, 2);
  for (int t = 0; t < T; ++t) {
    x(t, 0) = rng.normal();
    x(t, 1) = rng.normal() + 1.0;
  }
  Matrix w = Matrix::Ones(T, 1);
  MixMvnParams prev;
  prev.lambda.push_back((Vector(2) << 0.5, 0.5).finished());
  prev.mu.push_back({(Vector(2) << -1.0, 0.0).finished(), (Vector(2) << 1.0, 2.0).finished()});
  prev.sigma.push_back({Matrix::Identity(2, 2), Matrix::Identity(2, 2)});
  auto a = mixmvnorm_mstep(x, w, prev);
  auto b = miss_mixmvnorm_mstep(x, w, prev);
  for (int k = 0; k < 2; ++k) {
    CHECK(std::fabs(a.lambda[0][k] - b.lambda[0][k]) < 1e-12);
    CHECK((a.mu[0][k] - b.mu[0][k]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.sigma[0][k] - b.sigma[0][k]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("conditional mean equals marginal mean under diagonal covariance") {
  MixMvnParams p;
  p.lambda.push_back(Vector::Ones(1));
  p.mu.push_back({(Vector(2) << 3.0, -2.0).finished()});
  Matrix s = Matrix::Zero(2, 2);
  s(0, 0) = 2.0;
  s(1, 1) = 5.0;
  p.sigma.push_back({s});
  Vector row(2);
  row << 1.0, missing_value();
  auto cm = detail::conditional_moments(row, p.mu[0][0], p.sigma[0][0]);
  CHECK(cm.xhat[1] == Catch::Approx(-2.0));
  CHECK(cm.cvar(1, 1) == Catch::Approx(5.0));
  CHECK(cm.cvar(0, 0) == 0.0);
}

TEST_CASE("miss_mixmvnorm_mstep recovers the mean under MCAR missingness") {
  Rng rng(8);
  const int T = 5000;
  Vector mu_true(2);
  mu_true << 2.0, -1.0;
  Matrix sig_true(2, 2);
  sig_true << 1.0, 0.6, 0.6, 1.5;
  Eigen::LLT<Matrix> llt(sig_true);
  Matrix x(T, 2);
  for (int t = 0; t < T; ++t) {
    Vector z(2);
    z << rng.normal(), rng.normal();
    x.row(t) = (mu_true + llt.matrixL() * z).transpose();
  }
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < 2; ++c)
      if (rng.uniform() < 0.2) x(t, c) = missing_value();
  Matrix w = Matrix::Ones(T, 1);
  MixMvnParams p;
  p.lambda.push_back(Vector::Ones(1));
  p.mu.push_back({Vector::Zero(2)});
  p.sigma.push_back({Matrix::Identity(2, 2)});
  for (int it = 0; it < 10; ++it) p = miss_mixmvnorm_mstep(x, w, p);
  CHECK((p.mu[0][0] - mu_true).cwiseAbs().maxCoeff() < 0.1);
}
