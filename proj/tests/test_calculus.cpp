#include <doctest.h>

#include <random>

#include "paic/builtin_models.hpp"
#include "paic/calculus.hpp"
#include "paic/error.hpp"

using namespace paic;

namespace {

struct LogitFixture {
  HierLogitModel model;
  ObservationSet data;
  ModelDefinition def;

  explicit LogitFixture(std::size_t N = 8) {
    model.groups = N;
    std::mt19937_64 g(42);
    std::uniform_int_distribution<int> yd(0, 50);
    std::vector<double> y(N);
    for (auto& v : y) v = yd(g);
    data = ObservationSet(y, std::vector<int>(N, 50));
    def = model.definition();
  }

  ParameterVector random_point(std::mt19937_64& g) const {
    std::normal_distribution<double> z(0.0, 1.5);
    std::uniform_real_distribution<double> u(0.2, 5.0);
    ParameterVector th(static_cast<Eigen::Index>(model.dim()));
    for (Eigen::Index k = 0; k < th.size() - 1; ++k) th[k] = z(g);
    th[th.size() - 1] = u(g);
    return th;
  }
};

}  // namespace

TEST_SUITE("calculus") {

TEST_CASE("gradient of a quadratic") {
  Vector th(1);
  th[0] = 3.0;
  const Vector g = grad_fd([](const Vector& x) { return x[0] * x[0]; }, th);
  CHECK(std::abs(g[0] - 6.0) <= 1e-6);
}

TEST_CASE("gradient of a linear function is exact") {
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    Vector a(4), th(4);
    for (Eigen::Index k = 0; k < 4; ++k) {
      a[k] = u(g);
      th[k] = u(g);
    }
    const Vector grad = grad_fd([&](const Vector& x) { return a.dot(x); }, th);
    for (Eigen::Index k = 0; k < 4; ++k) CHECK(scaled_error(grad[k], a[k]) <= 1e-10);
  }
}

TEST_CASE("normal score from finite differences") {
  const auto def = ConjugateNormalModel{1.0, 0.0, std::nullopt}.definition();
  const ObservationSet data({1.0});
  Vector th(1);
  th[0] = 0.3;
  const Vector g = grad_fd([&](const Vector& t) { return def.loglik_i(t, data, 0); }, th);
  CHECK(g[0] == doctest::Approx(0.7).epsilon(1e-8));
}

TEST_CASE("hier-logit score matches finite differences") {
  LogitFixture f;
  std::mt19937_64 g(1);
  for (int k = 0; k < 10; ++k) {
    const auto th = f.random_point(g);
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      const Vector fd = grad_fd(
          [&](const Vector& t) { return observation_term(f.def, f.data, t, i); }, th);
      const Vector an = observation_term_grad(f.def, f.data, th, i);
      for (Eigen::Index j = 0; j < fd.size(); ++j) CHECK(scaled_error(an[j], fd[j]) <= 1e-5);
    }
  }
}

TEST_CASE("Hessian of a quadratic form") {
  Matrix A(2, 2);
  A << 2, 1, 1, 3;
  Vector th(2);
  th << 0.4, -1.1;
  const Matrix H = hess_fd([&](const Vector& x) { return 0.5 * x.dot(A * x); }, th);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) CHECK(std::abs(H(r, c) - A(r, c)) <= 1e-4);
  }
  CHECK(H(0, 1) == H(1, 0));
}

TEST_CASE("normal per-observation curvature") {
  const double s2 = 1.7, t2 = 3.0;
  const auto def = ConjugateNormalModel{s2, 0.2, t2}.definition();
  const ObservationSet data({0.1, 0.5, -0.4, 2.0, 1.0});
  Vector th(1);
  th[0] = 0.6;
  const double expected = -1.0 / s2 - 1.0 / (5.0 * t2);
  const Matrix H = hess_fd([&](const Vector& t) { return observation_term(def, data, t, 1); }, th);
  CHECK(H(0, 0) == doctest::Approx(expected).epsilon(1e-6));
  CHECK(observation_term_hess(def, data, th, 1)(0, 0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("hier-logit beta diagonal at zero is binomial information plus prior curvature") {
  LogitFixture f(5);
  ParameterVector th = ParameterVector::Zero(7);
  th[6] = 2.0;
  const double n = 5.0;
  const Matrix H = observation_term_hess(f.def, f.data, th, 0);
  CHECK(H(0, 0) == doctest::Approx(-50.0 * 0.25 - 1.0 / (n * 2.0)).epsilon(1e-13));
  const Matrix Hfd = hess_fd([&](const Vector& t) { return observation_term(f.def, f.data, t, 0); }, th);
  CHECK(Hfd(0, 0) == doctest::Approx(H(0, 0)).epsilon(1e-5));
  // Another group's beta only sees the prior share.
  CHECK(H(1, 1) == doctest::Approx(-1.0 / (n * 2.0)).epsilon(1e-13));
}

TEST_CASE("finite-difference Hessians are exactly symmetric") {
  LogitFixture f(4);
  std::mt19937_64 g(3);
  const auto th = f.random_point(g);
  const Matrix H = hess_fd([&](const Vector& t) { return logpost_unnorm(f.def, f.data, t); }, th);
  CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic derivative checks pass for the built-in models") {
  SUBCASE("conjugate normal") {
    const auto def = ConjugateNormalModel{0.8, 1.0, 2.0}.definition();
    const ObservationSet data({0.2, 1.4, -0.3});
    Vector th(1);
    th[0] = 0.9;
    CHECK(check_gradient(def, data, th).passed);
    CHECK(check_hessian(def, data, th).passed);
  }
  SUBCASE("hier-logit at 20 random points") {
    LogitFixture f;
    std::mt19937_64 g(7);
    for (int k = 0; k < 20; ++k) {
      const auto th = f.random_point(g);
      const auto cg = check_gradient(f.def, f.data, th);
      const auto ch = check_hessian(f.def, f.data, th);
      CHECK(cg.passed);
      CHECK(ch.passed);
      CHECK(cg.max_rel_err <= 1e-5);
    }
  }
}

TEST_CASE("a corrupted gradient is caught and located") {
  LogitFixture f(6);
  ModelDefinition bad = f.def;
  const auto good = f.def.loglik_grad;
  bad.loglik_grad = [good](const ParameterVector& th, const ObservationSet& d, std::size_t i) {
    Vector g = good(th, d, i);
    g[7] += 0.01;  // tau2 coordinate
    return g;
  };
  std::mt19937_64 g(9);
  const auto report = check_gradient(bad, f.data, f.random_point(g));
  CHECK_FALSE(report.passed);
  CHECK(report.worst_coordinate == 7);
  CHECK(report.max_rel_err > 1e-3);
}

TEST_CASE("checks require analytic derivatives") {
  ModelDefinition def = ConjugateNormalModel{1.0, 0.0, 1.0}.definition();
  def.loglik_grad = nullptr;
  Vector th(1);
  th[0] = 0.0;
  CHECK_THROWS_AS(check_gradient(def, ObservationSet({1.0, 2.0}), th), Error);
}

TEST_CASE("non-finite evaluations name the coordinate") {
  Vector th(2);
  th << 1.0, 0.0;
  try {
    grad_fd([](const Vector& x) { return x[1] > 0 ? std::log(-1.0) : 0.0; }, th);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
    CHECK(std::string(e.what()).find("coordinate 1") != std::string::npos);
  }
}

TEST_CASE("finite-difference fallback is used without analytic derivatives") {
  LogitFixture f(4);
  ModelDefinition def = f.def;
  def.loglik_grad = nullptr;
  def.loglik_hess = nullptr;
  std::mt19937_64 g(11);
  const auto th = f.random_point(g);
  const Vector fd = observation_term_grad(def, f.data, th, 2);
  const Vector an = observation_term_grad(f.def, f.data, th, 2);
  for (Eigen::Index j = 0; j < fd.size(); ++j) CHECK(scaled_error(fd[j], an[j]) <= 1e-6);
  const Matrix Hfd = observation_term_hess(def, f.data, th, 2);
  const Matrix Han = observation_term_hess(f.def, f.data, th, 2);
  CHECK((Hfd - Han).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, Han.cwiseAbs().maxCoeff()));
}

}  // TEST_SUITE
