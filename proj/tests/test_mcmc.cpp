#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "paic/builtin_models.hpp"
#include "paic/error.hpp"
#include "paic/mcmc.hpp"

using namespace paic;

namespace {

ObservationSet simulate_logit(std::size_t N, int trials, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> beta(0.0, 1.0);
  std::vector<double> y(N);
  for (auto& v : y) {
    std::binomial_distribution<int> b(trials, 1.0 / (1.0 + std::exp(-beta(g))));
    v = b(g);
  }
  return ObservationSet(y, std::vector<int>(N, trials));
}

std::vector<double> ar1(std::size_t S, double rho, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(S);
  x[0] = z(g) / std::sqrt(1 - rho * rho);
  for (std::size_t s = 1; s < S; ++s) x[s] = rho * x[s - 1] + z(g);
  return x;
}

// Plain random-walk Metropolis on the conjugate normal target, kept in the
// test so the exact sampler has an independent comparison.
std::vector<double> rwm_normal(const ConjugateNormalModel& m, const std::vector<double>& y,
                               std::size_t S, unsigned seed) {
  auto logpost = [&](double mu) {
    double lp = m.flat() ? 0.0 : oracle::normal_logpdf(mu, m.mu0, *m.tau02);
    for (double v : y) lp += oracle::normal_logpdf(v, mu, m.sigma_A2);
    return lp;
  };
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double step = 2.4 * std::sqrt(m.sigma_A2 / static_cast<double>(y.size()));
  double cur = oracle::mean(y), lc = logpost(cur);
  std::vector<double> out;
  for (std::size_t t = 0; t < S + 2000; ++t) {
    const double prop = cur + step * z(g);
    const double lp = logpost(prop);
    if (std::log(u(g)) < lp - lc) {
      cur = prop;
      lc = lp;
    }
    if (t >= 2000) out.push_back(cur);
  }
  return out;
}

}  // namespace

TEST_SUITE("mcmc") {

TEST_CASE("exact normal sampler: mean and variance within 3 standard errors") {
  const ConjugateNormalModel m{1.0, 0.0, std::nullopt};
  const ObservationSet data({1.0, 2.0, 3.0});
  const std::size_t S = 100000;
  const auto d = sample_conjugate_normal(m, data, S, 12);
  REQUIRE(d.size() == S);
  std::vector<double> x(d.draws.data(), d.draws.data() + S);
  const double var = 1.0 / 3.0;
  CHECK(std::abs(oracle::mean(x) - 2.0) <= 3.0 * std::sqrt(var / S));
  // Var of the sample variance of normals is 2 sigma^4 / (S - 1).
  CHECK(std::abs(oracle::variance(x) - var) <= 3.0 * std::sqrt(2.0 * var * var / (S - 1.0)));
}

TEST_CASE("normal sampler is bit-identical for a fixed seed") {
  const ConjugateNormalModel m{1.0, 0.0, 4.0};
  const ObservationSet data({0.1, 0.2});
  const auto a = sample_conjugate_normal(m, data, 1000, 5);
  const auto b = sample_conjugate_normal(m, data, 1000, 5);
  const auto c = sample_conjugate_normal(m, data, 1000, 6);
  CHECK(a.draws == b.draws);
  CHECK(a.draws != c.draws);
}

TEST_CASE("random-walk Metropolis and the exact sampler agree") {
  const ConjugateNormalModel m{1.5, 0.0, 2.0};
  const auto y = oracle::normal_sample(30, 0.5, 1.2, 17);
  const std::size_t S = 60000;
  const auto exact = sample_conjugate_normal(m, ObservationSet(y), S, 3);
  std::vector<double> xe(exact.draws.data(), exact.draws.data() + S);
  const auto xr = rwm_normal(m, y, S, 4);
  const double ess_r = ess(xr);
  const double se_mean = std::sqrt(oracle::variance(xe) / S + oracle::variance(xr) / ess_r);
  CHECK(std::abs(oracle::mean(xe) - oracle::mean(xr)) <= 3.0 * se_mean);
  const double v = oracle::variance(xe);
  const double se_var = std::sqrt(2 * v * v / S + 2 * v * v / ess_r);
  CHECK(std::abs(oracle::variance(xe) - oracle::variance(xr)) <= 3.0 * se_var);
}

TEST_CASE("ESS of iid draws") {
  const auto x = oracle::normal_sample(10000, 0.0, 1.0, 1);
  const double e = ess(x);
  CHECK(e >= 8000.0);
  CHECK(e <= 10000.0);
}

TEST_CASE("ESS of an AR(1) series") {
  const double rho = 0.9;
  const auto x = ar1(10000, rho, 2);
  const double expected = 10000.0 * (1 - rho) / (1 + rho);
  const double e = ess(x);
  CHECK(e >= expected / 1.5);
  CHECK(e <= expected * 1.5);
}

TEST_CASE("ESS of a constant series is zero and never exceeds S") {
  std::vector<double> c(500, 3.0);
  CHECK(ess(c) == 0.0);
  // Anti-correlated series would give ESS > S without the cap.
  std::vector<double> alt(1000);
  for (std::size_t s = 0; s < alt.size(); ++s) alt[s] = (s % 2 ? 1.0 : -1.0) + 1e-3 * s;
  CHECK(ess(alt) <= 1000.0);
  PosteriorDraws d;
  d.draws = Matrix::Constant(400, 1, 2.0);
  d.chain_ids.assign(400, 0);
  const auto diag = diagnose(d);
  CHECK_FALSE(diag.converged);
  CHECK(diag.summary.find("constant") != std::string::npos);
}

TEST_CASE("rhat for matching, separated and split chains") {
  SUBCASE("identical distributions") {
    std::vector<double> all;
    std::vector<int> ids;
    for (int c = 0; c < 4; ++c) {
      const auto x = oracle::normal_sample(2000, 0.0, 1.0, 30 + c);
      all.insert(all.end(), x.begin(), x.end());
      ids.insert(ids.end(), x.size(), c);
    }
    CHECK(std::abs(rhat(all, ids) - 1.0) <= 0.02);
  }
  SUBCASE("chains centered at 0 and 5") {
    auto a = oracle::normal_sample(1000, 0.0, 1.0, 40);
    const auto b = oracle::normal_sample(1000, 5.0, 1.0, 41);
    std::vector<int> ids(1000, 0);
    ids.insert(ids.end(), 1000, 1);
    a.insert(a.end(), b.begin(), b.end());
    CHECK(rhat(a, ids) > 1.1);
  }
  SUBCASE("one stationary chain split in halves") {
    const auto x = ar1(10000, 0.5, 42);
    std::vector<int> ids(x.size(), 0);
    CHECK(rhat(x, ids) <= 1.02);
  }
  SUBCASE("unequal chain lengths are rejected") {
    std::vector<double> x(30, 0.0);
    std::vector<int> ids(20, 0);
    ids.insert(ids.end(), 10, 1);
    CHECK_THROWS_AS(rhat(x, ids), Error);
  }
}

TEST_CASE("hier-logit sampler converges on simulated data") {
  const HierLogitModel m;
  const auto data = simulate_logit(15, 50, 101);
  HierLogitSamplerOptions opts;  // 3 chains x 5000, warmup 2000
  const auto run = sample_hier_logit(m, data, opts, 9);
  CHECK(run.draws.size() == 15000);
  CHECK(run.draws.chain_count() == 3);
  CHECK(run.diagnostics.rhat.maxCoeff() <= kMaxRhat);
  CHECK(run.diagnostics.ess.minCoeff() >= kMinEss);
  CHECK(run.diagnostics.converged);
  CHECK_NOTHROW(require_convergence(run.diagnostics));
  for (std::size_t i = 0; i < 15; ++i) {
    CHECK(run.diagnostics.accept_rate[i] > 0.3);
    CHECK(run.diagnostics.accept_rate[i] < 0.6);
  }
  CHECK(run.diagnostics.ess.maxCoeff() <= static_cast<double>(run.draws.size()));
  CHECK((run.draws.draws.col(16).array() > 0.0).all());
}

TEST_CASE("adaptation is frozen after warmup") {
  const HierLogitModel m;
  const auto data = simulate_logit(15, 50, 7);
  HierLogitSamplerOptions opts;
  opts.draws_per_chain = 1000;
  opts.warmup = 500;
  const auto run = sample_hier_logit(m, data, opts, 2);
  REQUIRE(run.warmup_step_sizes.size() == 3);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(run.warmup_step_sizes[c] == run.final_step_sizes[c]);
  }
}

TEST_CASE("all-zero counts sample without overflow") {
  HierLogitModel m;
  m.groups = 15;
  const ObservationSet data(std::vector<double>(15, 0.0), std::vector<int>(15, 50));
  HierLogitSamplerOptions opts;
  opts.draws_per_chain = 2000;
  opts.warmup = 1000;
  const auto run = sample_hier_logit(m, data, opts, 3);
  CHECK(run.draws.draws.allFinite());
  CHECK((run.draws.draws.col(16).array() > 0.0).all());
  CHECK(run.draws.draws.col(15).mean() < -2.0);
}

TEST_CASE("hier-logit sampler is deterministic per seed") {
  const HierLogitModel m;
  const auto data = simulate_logit(15, 50, 8);
  HierLogitSamplerOptions opts;
  opts.draws_per_chain = 300;
  opts.warmup = 100;
  const auto a = sample_hier_logit(m, data, opts, 55);
  opts.threads = 3;
  const auto b = sample_hier_logit(m, data, opts, 55);
  const auto c = sample_hier_logit(m, data, opts, 56);
  CHECK(a.draws.draws == b.draws.draws);
  CHECK(a.draws.chain_ids == b.draws.chain_ids);
  CHECK(a.draws.draws != c.draws.draws);
}

TEST_CASE("inactive groups are drawn from the random-effect distribution") {
  const HierLogitModel m;
  const auto data = simulate_logit(15, 50, 70);
  HierLogitSamplerOptions opts;
  opts.active.assign(15, true);
  opts.active[4] = false;
  const auto run = sample_hier_logit(m, data, opts, 1);
  // beta_4 - mu over tau should be standard normal.
  const auto& D = run.draws.draws;
  std::vector<double> zs(static_cast<std::size_t>(D.rows()));
  for (Eigen::Index s = 0; s < D.rows(); ++s) zs[s] = (D(s, 4) - D(s, 15)) / std::sqrt(D(s, 16));
  CHECK(std::abs(oracle::mean(zs)) < 0.05);
  CHECK(oracle::variance(zs) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("draws CSV round trip") {
  PosteriorDraws d;
  d.draws.resize(4, 3);
  d.draws << 0.1, -2.5, 1e-300, 1.0 / 3.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0;
  d.chain_ids = {0, 0, 1, 1};
  const auto path = std::filesystem::temp_directory_path() / "paic_draws_roundtrip.csv";
  write_draws_csv(d, path);
  const auto back = read_draws_csv(path);
  CHECK(back.draws == d.draws);
  CHECK(back.chain_ids == d.chain_ids);
  std::filesystem::remove(path);
}

TEST_CASE("draws CSV rejects malformed input with a line number") {
  std::istringstream bad_header("theta_1,foo\n1,0\n");
  CHECK_THROWS_AS(parse_draws_csv(bad_header), Error);
  std::istringstream bad_row("theta_1,theta_2,chain\n1,2,0\n1,x,0\n");
  try {
    parse_draws_csv(bad_row, "d.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK(std::string(e.what()).find("d.csv:3") != std::string::npos);
  }
}

}  // TEST_SUITE
