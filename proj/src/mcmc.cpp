#include "paic/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "paic/data_io.hpp"
#include "paic/error.hpp"
#include "paic/report.hpp"
#include "paic/rng.hpp"

namespace paic {

int PosteriorDraws::chain_count() const {
  if (chain_ids.empty()) return 0;
  return *std::max_element(chain_ids.begin(), chain_ids.end()) + 1;
}

PosteriorDraws sample_conjugate_normal(const ConjugateNormalModel& model,
                                       const ObservationSet& data, std::size_t draws,
                                       std::uint64_t seed) {
  if (draws < 1) throw Error(ErrorKind::Validation, "need at least one draw");
  const auto post = conjugate_posterior(model, data);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const double sd = std::sqrt(post.variance);
  PosteriorDraws out;
  out.draws.resize(static_cast<Eigen::Index>(draws), 1);
  for (Eigen::Index s = 0; s < out.draws.rows(); ++s) out.draws(s, 0) = post.mean + sd * z(rng);
  out.chain_ids.assign(draws, 0);
  out.seed = seed;
  return out;
}

// ---------------------------------------------------------------------------
// Hierarchical logit Metropolis-within-Gibbs

namespace {

struct ChainOutput {
  Matrix draws;
  Vector warmup_steps;
  Vector final_steps;
  std::vector<double> accepted;
};

double group_loglik(double y, int n, double beta) { return y * beta - n * log1p_exp(beta); }

ChainOutput run_chain(const HierLogitModel& model, const ObservationSet& data,
                      const HierLogitSamplerOptions& opts, const std::vector<bool>& active,
                      const ParameterVector& start, std::uint64_t chain_seed) {
  const auto N = static_cast<Eigen::Index>(model.groups);
  Rng rng(chain_seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Vector beta = start.head(N);
  double mu = start[N];
  double v = start[N + 1];
  // Overdispersed start per chain.
  for (Eigen::Index i = 0; i < N; ++i) beta[i] += 0.5 * z(rng);
  mu += 0.5 * z(rng);
  v *= std::exp(0.5 * z(rng));

  Vector log_step(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const double n = data.trials(static_cast<std::size_t>(i));
    log_step[i] = std::log(2.4 / std::sqrt(0.25 * n + 1.0 / v));
  }

  ChainOutput out;
  out.draws.resize(opts.draws_per_chain, N + 2);
  out.accepted.assign(static_cast<std::size_t>(N), 0.0);
  const double nu_post = model.tau2_df + static_cast<double>(N);
  const int total = opts.warmup + opts.draws_per_chain;

  for (int t = 0; t < total; ++t) {
    const bool adapting = t < opts.warmup;
    const double sd = std::sqrt(v);
    for (Eigen::Index i = 0; i < N; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (!active[k]) {
        beta[i] = mu + sd * z(rng);
        if (!adapting) out.accepted[k] += 1.0;
        continue;
      }
      const double y = data.y(k);
      const int n = data.trials(k);
      const double cur = beta[i];
      const double prop = cur + std::exp(log_step[i]) * z(rng);
      const double dc = cur - mu, dp = prop - mu;
      const double log_ratio = group_loglik(y, n, prop) - group_loglik(y, n, cur) -
                               (dp * dp - dc * dc) / (2.0 * v);
      const double accept_prob = log_ratio >= 0 ? 1.0 : std::exp(log_ratio);
      if (unif(rng) < accept_prob) {
        beta[i] = prop;
        if (!adapting) out.accepted[k] += 1.0;
      }
      if (adapting) {
        log_step[i] += (accept_prob - opts.target_accept) * std::pow(t + 1.0, -0.6);
      }
    }

    // mu | beta, tau2
    const double prec = static_cast<double>(N) / v + 1.0 / model.mu_prior_var;
    const double mean = (beta.sum() / v + model.mu_prior_mean / model.mu_prior_var) / prec;
    mu = mean + z(rng) / std::sqrt(prec);

    // tau2 | beta, mu ~ Scaled-Inv-chi2(df + N, (df*scale + SS) / (df + N))
    const double ss = (beta.array() - mu).square().sum();
    std::chi_squared_distribution<double> chi2(nu_post);
    double draw = 0.0;
    do {
      draw = chi2(rng);
    } while (!(draw > 0.0));
    v = (model.tau2_df * model.tau2_scale + ss) / draw;

    if (t + 1 == opts.warmup) out.warmup_steps = log_step.array().exp();
    if (!adapting) {
      const Eigen::Index row = t - opts.warmup;
      out.draws.row(row).head(N) = beta.transpose();
      out.draws(row, N) = mu;
      out.draws(row, N + 1) = v;
    }
  }
  if (opts.warmup == 0) out.warmup_steps = log_step.array().exp();
  out.final_steps = log_step.array().exp();
  for (auto& a : out.accepted) a /= std::max(1, opts.draws_per_chain);
  return out;
}

}  // namespace

HierLogitRun sample_hier_logit(const HierLogitModel& model, const ObservationSet& data,
                               const HierLogitSamplerOptions& opts, std::uint64_t seed) {
  model.validate();
  const ModelDefinition def = model.definition();
  def.check_data(data);
  if (opts.chains < 1 || opts.draws_per_chain < 1 || opts.warmup < 0) {
    throw Error(ErrorKind::Validation, "sampler needs chains >= 1, draws >= 1, warmup >= 0");
  }
  std::vector<bool> active = opts.active;
  if (active.empty()) active.assign(model.groups, true);
  if (active.size() != model.groups) {
    throw Error(ErrorKind::Validation, "active mask length does not match groups");
  }
  const ParameterVector start = def.initial_point(data);

  std::vector<ChainOutput> chains(static_cast<std::size_t>(opts.chains));
  auto run = [&](int c) {
    chains[static_cast<std::size_t>(c)] =
        run_chain(model, data, opts, active, start,
                  derive_seed(seed, {opts.stream, static_cast<std::uint64_t>(c)}));
  };
  if (opts.threads > 1 && opts.chains > 1) {
    std::vector<std::thread> pool;
    for (int c = 0; c < opts.chains; ++c) pool.emplace_back(run, c);
    for (auto& t : pool) t.join();
  } else {
    for (int c = 0; c < opts.chains; ++c) run(c);
  }

  HierLogitRun res;
  const auto p = static_cast<Eigen::Index>(model.dim());
  const Eigen::Index per = opts.draws_per_chain;
  res.draws.draws.resize(per * opts.chains, p);
  res.draws.chain_ids.resize(static_cast<std::size_t>(per * opts.chains));
  for (int c = 0; c < opts.chains; ++c) {
    const auto& ch = chains[static_cast<std::size_t>(c)];
    res.draws.draws.block(c * per, 0, per, p) = ch.draws;
    std::fill_n(res.draws.chain_ids.begin() + c * per, per, c);
    res.warmup_step_sizes.push_back(ch.warmup_steps);
    res.final_step_sizes.push_back(ch.final_steps);
  }
  res.draws.warmup_discarded = opts.warmup;
  res.draws.seed = seed;

  res.diagnostics = diagnose(res.draws);
  res.diagnostics.accept_rate.assign(model.groups + 2, 1.0);
  for (std::size_t i = 0; i < model.groups; ++i) {
    double a = 0.0;
    for (const auto& ch : chains) a += ch.accepted[i];
    res.diagnostics.accept_rate[i] = a / opts.chains;
  }
  return res;
}

void require_convergence(const Diagnostics& diag) {
  if (!diag.converged) throw Error(ErrorKind::NonConvergence, diag.summary);
}

// ---------------------------------------------------------------------------
// Diagnostics

double ess(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) return static_cast<double>(n);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double c0 = acov(0);
  if (!(c0 > 0.0)) return 0.0;
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (acov(2 * k) + acov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum += pair;
  }
  const double tau = -1.0 + 2.0 * sum;
  if (!(tau > 0.0)) return static_cast<double>(n);
  return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

namespace {

std::vector<std::vector<double>> split_by_chain(std::span<const double> draws,
                                                std::span<const int> chain_ids) {
  if (draws.size() != chain_ids.size()) {
    throw Error(ErrorKind::Validation, "draws and chain ids differ in length");
  }
  std::map<int, std::vector<double>> by_chain;
  for (std::size_t s = 0; s < draws.size(); ++s) by_chain[chain_ids[s]].push_back(draws[s]);
  std::vector<std::vector<double>> out;
  for (auto& [id, v] : by_chain) out.push_back(std::move(v));
  return out;
}

}  // namespace

double rhat(std::span<const double> draws, std::span<const int> chain_ids) {
  const auto chains = split_by_chain(draws, chain_ids);
  if (chains.empty()) throw Error(ErrorKind::Validation, "rhat needs draws");
  const std::size_t len = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != len) throw Error(ErrorKind::Validation, "rhat needs equal chain lengths");
  }
  if (len < 4) throw Error(ErrorKind::Validation, "rhat needs at least 4 draws per chain");
  const std::size_t half = len / 2;
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    for (int part = 0; part < 2; ++part) {
      // Odd lengths drop the middle draw.
      const std::size_t begin = part == 0 ? 0 : len - half;
      const double m =
          std::accumulate(c.begin() + begin, c.begin() + begin + half, 0.0) / half;
      double ss = 0.0;
      for (std::size_t i = begin; i < begin + half; ++i) ss += (c[i] - m) * (c[i] - m);
      means.push_back(m);
      vars.push_back(ss / (half - 1.0));
    }
  }
  const double m = static_cast<double>(means.size());
  const double h = static_cast<double>(half);
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b = 0.0;
  for (double x : means) b += (x - grand) * (x - grand);
  b *= h / (m - 1.0);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  if (!(w > 0.0)) return b > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (h - 1.0) / h * w + b / h;
  return std::sqrt(var_plus / w);
}

Diagnostics diagnose(const PosteriorDraws& d) {
  Diagnostics diag;
  const auto p = static_cast<Eigen::Index>(d.dim());
  diag.ess = Vector::Zero(p);
  diag.rhat = Vector::Ones(p);
  const auto chains = d.chain_count();
  std::ostringstream notes;
  for (Eigen::Index j = 0; j < p; ++j) {
    const Vector col = d.draws.col(j);
    const std::span<const double> all(col.data(), static_cast<std::size_t>(col.size()));
    const auto split = split_by_chain(all, d.chain_ids);
    double e = 0.0;
    for (const auto& c : split) e += ess(c);
    diag.ess[j] = e;
    if (e == 0.0) notes << "coordinate " << j << " is constant; ";
    bool equal = true;
    for (const auto& c : split) equal = equal && c.size() == split.front().size();
    if (equal && split.front().size() >= 4) diag.rhat[j] = rhat(all, d.chain_ids);
  }
  const double worst_rhat = p ? diag.rhat.maxCoeff() : 1.0;
  const double worst_ess = p ? diag.ess.minCoeff() : 0.0;
  diag.converged = worst_rhat <= kMaxRhat && worst_ess >= kMinEss;
  std::ostringstream os;
  os << "chains=" << chains << " draws=" << d.size() << " max_rhat=" << worst_rhat
     << " min_ess=" << worst_ess;
  if (!diag.converged) os << " (gate: rhat <= " << kMaxRhat << ", ess >= " << kMinEss << ")";
  const std::string extra = notes.str();
  if (!extra.empty()) os << "; " << extra;
  diag.summary = os.str();
  return diag;
}

// ---------------------------------------------------------------------------
// CSV

void write_draws_csv(const PosteriorDraws& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write draws file " + path.string());
  for (std::size_t j = 0; j < d.dim(); ++j) out << "theta_" << (j + 1) << ',';
  out << "chain\n";
  for (Eigen::Index s = 0; s < d.draws.rows(); ++s) {
    for (Eigen::Index j = 0; j < d.draws.cols(); ++j) out << format_double(d.draws(s, j)) << ',';
    out << d.chain_ids[static_cast<std::size_t>(s)] << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

PosteriorDraws parse_draws_csv(std::istream& in, const std::string& source) {
  auto fail = [&](std::size_t line, const std::string& msg) {
    throw Error(ErrorKind::Validation, source + ":" + std::to_string(line) + ": " + msg);
  };
  std::string line;
  if (!std::getline(in, line)) fail(1, "missing header row");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "chain") fail(1, "last column must be 'chain'");
  const std::size_t p = header.size() - 1;
  for (std::size_t j = 0; j < p; ++j) {
    if (header[j] != "theta_" + std::to_string(j + 1)) {
      fail(1, "expected column theta_" + std::to_string(j + 1) + ", got '" + header[j] + "'");
    }
  }
  std::vector<double> values;
  std::vector<int> chains;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != p + 1) fail(line_no, "expected " + std::to_string(p + 1) + " fields");
    for (std::size_t j = 0; j < p; ++j) {
      const auto v = parse_finite_double(cells[j]);
      if (!v) fail(line_no, "invalid value '" + cells[j] + "'");
      values.push_back(*v);
    }
    const auto c = parse_finite_double(cells[p]);
    if (!c || *c < 0 || std::floor(*c) != *c) fail(line_no, "invalid chain id '" + cells[p] + "'");
    chains.push_back(static_cast<int>(*c));
  }
  PosteriorDraws d;
  const auto S = static_cast<Eigen::Index>(chains.size());
  d.draws.resize(S, static_cast<Eigen::Index>(p));
  for (Eigen::Index s = 0; s < S; ++s) {
    for (std::size_t j = 0; j < p; ++j) {
      d.draws(s, static_cast<Eigen::Index>(j)) = values[static_cast<std::size_t>(s) * p + j];
    }
  }
  d.chain_ids = std::move(chains);
  return d;
}

PosteriorDraws read_draws_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open draws file " + path.string());
  return parse_draws_csv(in, path.string());
}

}  // namespace paic
