#include "paic/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "paic/criteria.hpp"
#include "paic/error.hpp"
#include "paic/info_matrices.hpp"
#include "paic/optimize.hpp"
#include "paic/parallel.hpp"
#include "paic/rng.hpp"

namespace paic {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Stream tags for the logit study: (replication, tag).
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kSamplerStream = 2;
constexpr std::uint64_t kEtaStream = 3;

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  if (x.empty()) return {std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::quiet_NaN()};
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - m.mean) * (v - m.mean);
    m.sd = std::sqrt(ss / (static_cast<double>(x.size()) - 1.0));
  }
  return m;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ";" : "") + format_double(v[k]);
  return s;
}

}  // namespace

std::optional<double> tau02_for(PriorRule rule, int n) {
  switch (rule) {
    case PriorRule::Vague: return 1e4;
    case PriorRule::ShrinkingWithN: return 1e4 / n;
    case PriorRule::Informative: return 0.25;
    case PriorRule::Flat: return std::nullopt;
  }
  return std::nullopt;
}

std::string to_string(PriorRule rule) {
  switch (rule) {
    case PriorRule::Vague: return "1e4";
    case PriorRule::ShrinkingWithN: return "1e4/n";
    case PriorRule::Informative: return "0.25";
    case PriorRule::Flat: return "flat";
  }
  return "?";
}

PriorRule parse_prior_rule(const std::string& label) {
  if (label == "1e4") return PriorRule::Vague;
  if (label == "1e4/n") return PriorRule::ShrinkingWithN;
  if (label == "0.25") return PriorRule::Informative;
  if (label == "flat") return PriorRule::Flat;
  throw Error(ErrorKind::Validation,
              "unknown prior rule '" + label + "' (expected 1e4, 1e4/n, 0.25 or flat)");
}

void NormalExperimentConfig::validate() const {
  if (!(sigma_T2 > 0)) throw Error(ErrorKind::Validation, "sigma_T2 must be positive");
  if (sigma_A2.empty() || priors.empty() || n_grid.empty()) {
    throw Error(ErrorKind::Validation, "normal study needs sigma_A2, prior and n grids");
  }
  for (double s : sigma_A2) {
    if (!(s > 0)) throw Error(ErrorKind::Validation, "sigma_A2 values must be positive");
  }
  for (int n : n_grid) {
    if (n < 2) throw Error(ErrorKind::Validation, "sample sizes must be >= 2");
  }
  if (replications < 1) throw Error(ErrorKind::Validation, "replications must be >= 1");
}

std::string NormalExperimentConfig::canonical() const {
  std::ostringstream os;
  os << "study=normal;mu_T=" << format_double(mu_T) << ";sigma_T2=" << format_double(sigma_T2)
     << ";sigma_A2=" << join_doubles(sigma_A2) << ";priors=";
  for (std::size_t k = 0; k < priors.size(); ++k) os << (k ? ";" : "") << to_string(priors[k]);
  os << ";mu0=" << format_double(mu0) << ";n=";
  for (std::size_t k = 0; k < n_grid.size(); ++k) os << (k ? ";" : "") << n_grid[k];
  os << ";reps=" << replications << ";seed=" << seed << ";generic=" << generic;
  return os.str();
}

void LogitExperimentConfig::validate() const {
  if (groups < 2) throw Error(ErrorKind::Validation, "logit study needs N >= 2");
  if (trials < 1) throw Error(ErrorKind::Validation, "logit study needs n_i >= 1");
  if (J < 100) throw Error(ErrorKind::Validation, "logit study needs J >= 100");
  if (replications < 1) throw Error(ErrorKind::Validation, "replications must be >= 1");
  if (!(tau_T > 0)) throw Error(ErrorKind::Validation, "tau_T must be positive");
}

std::string LogitExperimentConfig::canonical() const {
  std::ostringstream os;
  os << "study=logit;N=" << groups << ";n_i=" << trials << ";mu_T=" << format_double(mu_T)
     << ";tau_T=" << format_double(tau_T) << ";reps=" << replications
     << ";eta=" << (eta_mode == EtaMode::ExactSum ? "exact" : "sampled") << ";J=" << J
     << ";mu_prior=" << format_double(prior.mu_prior_mean) << "," << format_double(prior.mu_prior_var)
     << ";tau2_prior=" << format_double(prior.tau2_df) << "," << format_double(prior.tau2_scale)
     << ";chains=" << sampler.chains << ";draws=" << sampler.draws_per_chain
     << ";warmup=" << sampler.warmup << ";target=" << format_double(sampler.target_accept)
     << ";cv=" << compute_cv << ";max_fail=" << format_double(max_failure_fraction)
     << ";seed=" << seed;
  return os.str();
}

const EstimatorSummary& ExperimentResult::summary(std::size_t cell,
                                                  const std::string& estimator) const {
  for (const auto& agg : aggregates) {
    if (agg.cell != cell) continue;
    for (const auto& s : agg.estimators) {
      if (s.estimator == estimator) return s;
    }
  }
  throw Error(ErrorKind::Validation, "no aggregate for estimator " + estimator);
}

std::vector<CellAggregate> aggregate_records(const ExperimentResult& result) {
  std::vector<CellAggregate> out;
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    CellAggregate agg;
    agg.cell = c;
    std::vector<double> realized;
    std::vector<std::vector<double>> est(result.estimators.size()), err(result.estimators.size()),
        abs_err(result.estimators.size()), sq_err(result.estimators.size());
    for (const auto& rec : result.records) {
      if (rec.cell != c) continue;
      if (rec.excluded) {
        ++agg.excluded;
        continue;
      }
      ++agg.used;
      realized.push_back(rec.realized_bias());
      for (std::size_t k = 0; k < result.estimators.size(); ++k) {
        const double e = rec.error(k);
        est[k].push_back(rec.estimates[k]);
        err[k].push_back(e);
        abs_err[k].push_back(std::abs(e));
        sq_err[k].push_back(e * e);
      }
    }
    agg.mean_realized_bias = moments(realized).mean;
    for (std::size_t k = 0; k < result.estimators.size(); ++k) {
      EstimatorSummary s;
      s.estimator = result.estimators[k];
      s.count = est[k].size();
      const auto me = moments(est[k]);
      const auto mr = moments(err[k]);
      const auto ma = moments(abs_err[k]);
      const auto ms = moments(sq_err[k]);
      s.mean_estimate = me.mean;
      s.sd_estimate = me.sd;
      s.mean_error = mr.mean;
      s.sd_error = mr.sd;
      s.mae = ma.mean;
      s.sd_abs_error = ma.sd;
      s.mse = ms.mean;
      s.sd_sq_error = ms.sd;
      agg.estimators.push_back(s);
    }
    out.push_back(std::move(agg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normal study

double true_bias_normal(const NormalExperimentConfig& cfg, int n, std::optional<double> tau02,
                        double sigma_A2) {
  const double prec = (tau02 ? 1.0 / *tau02 : 0.0) + n / sigma_A2;
  const double sigma_hat2 = 1.0 / prec;
  return cfg.sigma_T2 * sigma_hat2 / (sigma_A2 * sigma_A2);
}

double true_eta_normal(double mu_T, double sigma_T2, double sigma_A2, double mu_hat,
                       double sigma_hat2) {
  const double d = mu_T - mu_hat;
  return -0.5 * (kLog2Pi + std::log(sigma_A2)) - (sigma_T2 + d * d + sigma_hat2) / (2.0 * sigma_A2);
}

ExperimentResult run_normal_bias_experiment(const NormalExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  res.study = "normal";
  res.scale = "per-observation: eta_hat, eta and every bias estimate are averages over the n observations";
  res.estimators = {"paic", "bpic", "waic2", "popt", "cv"};
  if (cfg.generic) {
    res.estimators.push_back("paic_generic");
    res.estimators.push_back("bpic_generic");
  }
  for (PriorRule rule : cfg.priors) {
    for (double s2a : cfg.sigma_A2) {
      for (int n : cfg.n_grid) {
        CellSpec c;
        c.n = n;
        c.prior = to_string(rule);
        c.tau02 = tau02_for(rule, n);
        c.sigma_A2 = s2a;
        c.target_bias = true_bias_normal(cfg, n, c.tau02, s2a);
        res.cells.push_back(c);
      }
    }
  }
  const std::size_t R = static_cast<std::size_t>(cfg.replications);
  res.records.resize(res.cells.size() * R);
  std::vector<double> discrepancy(res.records.size(), 0.0);

  parallel_for(res.records.size(), cfg.threads, [&](std::size_t k) {
    const std::size_t cell = k / R, rep = k % R;
    const CellSpec& c = res.cells[cell];
    Rng rng = make_rng(cfg.seed, {cell, rep});
    std::normal_distribution<double> dist(cfg.mu_T, std::sqrt(cfg.sigma_T2));
    std::vector<double> y(static_cast<std::size_t>(c.n));
    for (auto& v : y) v = dist(rng);
    const ObservationSet data(std::move(y));
    const ConjugateNormalModel model{c.sigma_A2, cfg.mu0, c.tau02};

    const auto post = conjugate_posterior(model, data);
    const ClosedFormBias b = closed_form_bias_estimators(model, data);
    ReplicationRecord& rec = res.records[k];
    rec.cell = cell;
    rec.replication = rep;
    rec.eta_hat = eta_hat_conjugate_normal(model, data);
    rec.eta = true_eta_normal(cfg.mu_T, cfg.sigma_T2, c.sigma_A2, post.mean, post.variance);
    rec.estimates = {b.paic, b.bpic, b.waic2, b.popt, b.cv};
    if (cfg.generic) {
      const ModelDefinition def = model.definition();
      const ModeResult mode = posterior_mode(def, data, def.initial_point(data));
      const double n = static_cast<double>(c.n);
      const double paic_g =
          trace_correction(make_info_pair(def, data, mode.theta_hat, FisherScaling::NMinusOne))
              .value / n;
      const double bpic_g =
          trace_correction(make_info_pair(def, data, mode.theta_hat, FisherScaling::N)).value / n;
      rec.estimates.push_back(paic_g);
      rec.estimates.push_back(bpic_g);
      discrepancy[k] = std::max(std::abs(paic_g - b.paic) / std::abs(b.paic),
                                std::abs(bpic_g - b.bpic) / std::abs(b.bpic));
    }
  });
  for (double d : discrepancy) res.max_generic_discrepancy = std::max(res.max_generic_discrepancy, d);
  res.aggregates = aggregate_records(res);
  return res;
}

// ---------------------------------------------------------------------------
// Logit study

TrueEta estimate_true_eta_logit(const PosteriorDraws& draws, const Vector& beta_T,
                                std::span<const int> trials, const EtaOptions& opts) {
  const auto N = beta_T.size();
  if (static_cast<std::size_t>(N) != trials.size() || draws.dim() < static_cast<std::size_t>(N)) {
    throw Error(ErrorKind::Validation, "true-eta inputs have mismatched group counts");
  }
  // mean_s log g(z | beta_s) = log C(n, z) + z * mean(beta) - n * mean(log(1 + e^beta)),
  // so each group needs only two posterior averages.
  Vector mean_beta(N), mean_softplus(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto col = draws.draws.col(i);
    mean_beta[i] = col.mean();
    double sp = 0.0;
    for (Eigen::Index s = 0; s < col.size(); ++s) sp += log1p_exp(col[s]);
    mean_softplus[i] = sp / static_cast<double>(col.size());
  }
  auto avg_loglik = [&](Eigen::Index i, int z) {
    const int n = trials[static_cast<std::size_t>(i)];
    return log_binomial_coefficient(n, z) + z * mean_beta[i] - n * mean_softplus[i];
  };

  TrueEta out;
  if (opts.mode == EtaMode::ExactSum) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      const int n = trials[static_cast<std::size_t>(i)];
      double e = 0.0;
      for (int z = 0; z <= n; ++z) {
        e += std::exp(binomial_logpmf_logit(z, n, beta_T[i])) * avg_loglik(i, z);
      }
      total += e;
    }
    out.value = total / static_cast<double>(N);
    return out;
  }
  if (opts.J < 2) throw Error(ErrorKind::Validation, "sampled eta needs J >= 2");
  Rng rng = make_rng(opts.seed);
  std::vector<std::binomial_distribution<int>> dists;
  for (Eigen::Index i = 0; i < N; ++i) {
    dists.emplace_back(trials[static_cast<std::size_t>(i)], inv_logit(beta_T[i]));
  }
  double sum = 0.0, sum_sq = 0.0;
  for (int j = 0; j < opts.J; ++j) {
    double eta_j = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) eta_j += avg_loglik(i, dists[static_cast<std::size_t>(i)](rng));
    eta_j /= static_cast<double>(N);
    sum += eta_j;
    sum_sq += eta_j * eta_j;
  }
  const double J = opts.J;
  out.value = sum / J;
  const double var = std::max(0.0, (sum_sq - J * out.value * out.value) / (J - 1.0));
  out.mc_se = std::sqrt(var / J);
  return out;
}

ExperimentResult run_logit_experiment(const LogitExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  res.study = "logit";
  res.scale =
      "per-group: eta_hat, eta and each bias estimate are averages over the N binomial "
      "observations (criterion penalty / N)";
  res.estimators = {"paic", "bpic", "waic2"};
  if (cfg.compute_cv) res.estimators.push_back("cv");
  CellSpec cell;
  cell.n = static_cast<int>(cfg.groups);
  cell.target_bias = std::numeric_limits<double>::quiet_NaN();
  res.cells.push_back(cell);

  HierLogitModel model = cfg.prior;
  model.groups = cfg.groups;
  const ModelDefinition def = model.definition();
  const double N = static_cast<double>(cfg.groups);

  const std::size_t R = static_cast<std::size_t>(cfg.replications);
  res.records.resize(R);
  parallel_for(R, cfg.threads, [&](std::size_t r) {
    ReplicationRecord& rec = res.records[r];
    rec.cell = 0;
    rec.replication = r;
    rec.estimates.assign(res.estimators.size(), std::numeric_limits<double>::quiet_NaN());

    Rng rng = make_rng(cfg.seed, {r, kDataStream});
    std::normal_distribution<double> beta_dist(cfg.mu_T, cfg.tau_T);
    Vector beta_T(static_cast<Eigen::Index>(cfg.groups));
    std::vector<double> y(cfg.groups);
    std::vector<int> trials(cfg.groups, cfg.trials);
    for (std::size_t i = 0; i < cfg.groups; ++i) {
      beta_T[static_cast<Eigen::Index>(i)] = beta_dist(rng);
      std::binomial_distribution<int> bin(cfg.trials, inv_logit(beta_T[static_cast<Eigen::Index>(i)]));
      y[i] = bin(rng);
    }
    const ObservationSet data(std::move(y), trials);

    const std::uint64_t mcmc_seed = derive_seed(cfg.seed, {r, kSamplerStream});
    try {
      const HierLogitRun run = sample_hier_logit(model, data, cfg.sampler, mcmc_seed);
      if (!run.diagnostics.converged) {
        rec.excluded = true;
        rec.note = "sampler: " + run.diagnostics.summary;
        return;
      }
      const ModeResult mode = find_posterior_mode(def, data);
      if (!mode.converged) {
        rec.excluded = true;
        rec.note = "mode: " + mode.message;
        return;
      }
      const PointwiseLogLik pw = pointwise_loglik(def, data, run.draws);
      const auto pair = make_info_pair(def, data, mode.theta_hat, FisherScaling::NMinusOne);
      const auto pair_n = make_info_pair(def, data, mode.theta_hat, FisherScaling::N);
      rec.eta_hat = pw.fit() / N;
      rec.estimates[0] = paic(pw, pair).bias_per_observation();
      rec.estimates[1] = bpic(def, data, run.draws, mode, pair_n).bias_per_observation();
      rec.estimates[2] = waic2(pw).bias_per_observation();
      if (cfg.compute_cv) {
        const auto loo = loo_exact(cfg.groups, hier_logit_sampled_folds(model, data, cfg.sampler,
                                                                        mcmc_seed),
                                   &pw);
        rec.estimates[3] = loo.bias_per_observation();
        rec.flagged_folds = static_cast<int>(loo.extras.at("flagged_folds"));
      }
      const TrueEta eta = estimate_true_eta_logit(
          run.draws, beta_T, trials,
          EtaOptions{cfg.eta_mode, cfg.J, derive_seed(cfg.seed, {r, kEtaStream})});
      rec.eta = eta.value;
      rec.eta_mc_se = eta.mc_se;
    } catch (const Error& e) {
      rec.excluded = true;
      rec.note = std::string(to_string(e.kind())) + ": " + e.what();
    }
  });

  std::size_t excluded = 0;
  for (const auto& rec : res.records) excluded += rec.excluded ? 1 : 0;
  if (static_cast<double>(excluded) > cfg.max_failure_fraction * static_cast<double>(R)) {
    std::string first;
    for (const auto& rec : res.records) {
      if (rec.excluded) {
        first = rec.note;
        break;
      }
    }
    throw Error(ErrorKind::NonConvergence,
                std::to_string(excluded) + " of " + std::to_string(R) +
                    " replications failed, above the allowed fraction; first: " + first);
  }
  res.aggregates = aggregate_records(res);
  return res;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string provenance_comment(const Provenance& p) {
  return "# tool_version=" + p.tool_version + " config_hash=" + p.config_hash +
         " seed=" + std::to_string(p.seed) + "\n";
}

std::string panel_key(const CellSpec& c) {
  std::string prior = c.prior;
  std::replace(prior.begin(), prior.end(), '/', '_');
  return "tau02-" + prior + "_sigmaA2-" + format_double(c.sigma_A2);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir,
                              const Provenance& provenance) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "plot", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + (dir / "plot").string());

  {
    auto out = open_out(dir / "records.csv");
    out << "study,cell,n,prior,sigma_A2,replication,estimator,estimate,eta_hat,eta,"
           "realized_bias,error,target_bias,excluded,tool_version,config_hash,seed\n";
    for (const auto& rec : result.records) {
      const CellSpec& c = result.cells[rec.cell];
      for (std::size_t k = 0; k < result.estimators.size(); ++k) {
        out << result.study << ',' << rec.cell << ',' << c.n << ',' << c.prior << ','
            << format_double(c.sigma_A2) << ',' << rec.replication << ','
            << result.estimators[k] << ',' << format_double(rec.estimates[k]) << ','
            << format_double(rec.eta_hat) << ',' << format_double(rec.eta) << ','
            << format_double(rec.realized_bias()) << ',' << format_double(rec.error(k)) << ','
            << format_double(c.target_bias) << ',' << (rec.excluded ? 1 : 0) << ','
            << provenance.tool_version << ',' << provenance.config_hash << ','
            << provenance.seed << '\n';
      }
    }
  }

  {
    using nlohmann::json;
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json cells = json::array();
    for (const auto& agg : result.aggregates) {
      const CellSpec& c = result.cells[agg.cell];
      json est = json::object();
      for (const auto& s : agg.estimators) {
        est[s.estimator] = json{{"count", s.count},
                                {"mean_estimate", num(s.mean_estimate)},
                                {"sd_estimate", num(s.sd_estimate)},
                                {"mean_error", num(s.mean_error)},
                                {"sd_error", num(s.sd_error)},
                                {"mae", num(s.mae)},
                                {"sd_abs_error", num(s.sd_abs_error)},
                                {"mse", num(s.mse)},
                                {"sd_sq_error", num(s.sd_sq_error)}};
      }
      cells.push_back(json{{"cell", agg.cell},
                           {"n", c.n},
                           {"prior", c.prior},
                           {"tau02", c.tau02 ? json(*c.tau02) : json(nullptr)},
                           {"sigma_A2", num(c.sigma_A2)},
                           {"target_bias", num(c.target_bias)},
                           {"used", agg.used},
                           {"excluded", agg.excluded},
                           {"mean_realized_bias", num(agg.mean_realized_bias)},
                           {"estimators", est}});
    }
    json doc{{"tool_version", provenance.tool_version},
             {"config_hash", provenance.config_hash},
             {"seed", provenance.seed},
             {"study", result.study},
             {"scale", result.scale},
             {"error_definition", "eta_hat - eta - b_hat"},
             {"max_generic_discrepancy", num(result.max_generic_discrepancy)},
             {"cells", cells}};
    auto out = open_out(dir / "aggregates.json");
    out << doc.dump(2) << '\n';
  }

  // Plot data: one file per panel and estimator, rows sorted by n.
  std::map<std::string, std::vector<std::size_t>> panels;
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    panels[panel_key(result.cells[c])].push_back(c);
  }
  for (auto& [key, cells] : panels) {
    std::sort(cells.begin(), cells.end(),
              [&](std::size_t a, std::size_t b) { return result.cells[a].n < result.cells[b].n; });
    auto write_series = [&](const std::string& name, auto&& value_of) {
      auto out = open_out(dir / "plot" / (key + "__" + name + ".dat"));
      out << provenance_comment(provenance) << "# n mean_bias\n";
      for (std::size_t c : cells) {
        out << result.cells[c].n << ' ' << format_double(value_of(c)) << '\n';
      }
    };
    write_series("true", [&](std::size_t c) { return result.cells[c].target_bias; });
    write_series("realized", [&](std::size_t c) { return result.aggregates[c].mean_realized_bias; });
    for (const auto& est : result.estimators) {
      write_series(est, [&](std::size_t c) { return result.summary(c, est).mean_estimate; });
    }
  }
}

}  // namespace paic
