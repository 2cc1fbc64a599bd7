// paic: information criteria for Bayesian models and the bias simulation studies.
//
// Exit codes: 0 success (including partial success with per-criterion error
// entries for expected refusals), 2 validation or I/O error, 3 numerical failure.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "paic/builtin_models.hpp"
#include "paic/criteria.hpp"
#include "paic/data_io.hpp"
#include "paic/error.hpp"
#include "paic/experiments.hpp"
#include "paic/info_matrices.hpp"
#include "paic/mcmc.hpp"
#include "paic/optimize.hpp"
#include "paic/parallel.hpp"
#include "paic/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct ComputeOptions {
  std::string model = "normal";
  std::string data;
  std::string draws;
  std::vector<std::string> criteria = {"paic", "bpic", "waic2", "loo", "dic"};
  std::uint64_t seed = 1;
  std::string out;
  std::string format;
  double sigma_A2 = 1.0;
  double mu0 = 0.0;
  double tau02 = 1e4;
  double mu_prior_mean = 0.0;
  double mu_prior_var = 1e6;
  double tau2_df = 0.1;
  double tau2_scale = 10.0;
  int normal_draws = 4000;
  int chains = 3;
  int draws_per_chain = 5000;
  int warmup = 2000;
  int threads = 0;
  std::string export_info;
};

struct NormalOptions {
  int reps = 2000;
  std::uint64_t seed = 1;
  std::string out;
  std::vector<int> n = {25, 50, 100, 200};
  std::vector<double> sigma_A2 = {1.0};
  std::vector<std::string> priors = {"1e4"};
  double mu_T = 0.0;
  double sigma_T2 = 1.0;
  double mu0 = 0.0;
  bool no_generic = false;
  int threads = 0;
};

struct LogitOptions {
  int reps = 100;
  std::uint64_t seed = 1;
  std::string out;
  int groups = 15;
  int trials = 50;
  double mu_T = 0.0;
  double tau_T = 1.0;
  std::string eta_mode = "exact";
  int J = 20000;
  int chains = 3;
  int draws_per_chain = 5000;
  int warmup = 2000;
  bool no_cv = false;
  double max_failure_fraction = 0.05;
  int threads = 0;
};

bool is_expected_refusal(paic::ErrorKind k) {
  return k == paic::ErrorKind::ImproperPrior || k == paic::ErrorKind::UnsupportedModel;
}

int exit_code_for(const paic::Error& e) {
  return e.is_validation() ? kExitValidation : kExitNumerical;
}

paic::ReportFormat pick_format(const std::string& format, const std::string& out) {
  if (format == "json") return paic::ReportFormat::Json;
  if (format == "csv") return paic::ReportFormat::Csv;
  if (!format.empty()) {
    throw paic::Error(paic::ErrorKind::Validation, "--format must be json or csv");
  }
  const auto ext = std::filesystem::path(out).extension().string();
  return ext == ".csv" ? paic::ReportFormat::Csv : paic::ReportFormat::Json;
}

std::string compute_canonical(const ComputeOptions& o) {
  std::ostringstream os;
  os << "compute;model=" << o.model << ";data=" << o.data << ";draws=" << o.draws << ";criteria=";
  for (const auto& c : o.criteria) os << c << ',';
  os << ";seed=" << o.seed;
  if (o.model == "hier-logit") {
    os << ";mu_prior=" << paic::format_double(o.mu_prior_mean) << ','
       << paic::format_double(o.mu_prior_var) << ";tau2_prior=" << paic::format_double(o.tau2_df)
       << ',' << paic::format_double(o.tau2_scale) << ";chains=" << o.chains
       << ";draws_per_chain=" << o.draws_per_chain << ";warmup=" << o.warmup;
  } else {
    os << ";sigma_A2=" << paic::format_double(o.sigma_A2) << ";mu0=" << paic::format_double(o.mu0);
    if (o.model == "normal") os << ";tau02=" << paic::format_double(o.tau02);
    os << ";normal_draws=" << o.normal_draws;
  }
  return os.str();
}

int run_compute(const ComputeOptions& o) {
  using namespace paic;
  for (const auto& c : o.criteria) {
    static const std::vector<std::string> known = {"paic", "bpic", "waic2", "loo", "dic", "popt"};
    if (std::find(known.begin(), known.end(), c) == known.end()) {
      throw Error(ErrorKind::Validation, "unknown criterion '" + c + "'");
    }
  }
  const ReportFormat format = pick_format(o.format, o.out);

  BuiltinModel builtin;
  if (o.model == "normal" || o.model == "normal-flat") {
    ConjugateNormalModel m{o.sigma_A2, o.mu0, std::nullopt};
    if (o.model == "normal") m.tau02 = o.tau02;
    m.validate();
    builtin = m;
  } else {
    HierLogitModel m;
    m.mu_prior_mean = o.mu_prior_mean;
    m.mu_prior_var = o.mu_prior_var;
    m.tau2_df = o.tau2_df;
    m.tau2_scale = o.tau2_scale;
    builtin = m;
  }

  const ObservationSet data = read_observations_csv(o.data);
  if (auto* h = std::get_if<HierLogitModel>(&builtin)) {
    h->groups = data.size();
    h->validate();
  }
  const ModelDefinition def = definition(builtin);
  check_data(def, data);

  const unsigned threads = resolve_threads(o.threads);
  HierLogitSamplerOptions sampler;
  sampler.chains = o.chains;
  sampler.draws_per_chain = o.draws_per_chain;
  sampler.warmup = o.warmup;
  sampler.threads = threads;

  PosteriorDraws draws;
  if (!o.draws.empty()) {
    draws = read_draws_csv(o.draws);
    if (draws.dim() != def.dim) {
      throw Error(ErrorKind::Validation, o.draws + ": draws have " + std::to_string(draws.dim()) +
                                             " columns, model expects " + std::to_string(def.dim));
    }
    draws.seed = o.seed;
  } else if (const auto* m = std::get_if<ConjugateNormalModel>(&builtin)) {
    if (o.normal_draws < 1) throw Error(ErrorKind::Validation, "--normal-draws must be >= 1");
    draws = sample_conjugate_normal(*m, data, static_cast<std::size_t>(o.normal_draws), o.seed);
  } else {
    const auto run = sample_hier_logit(std::get<HierLogitModel>(builtin), data, sampler, o.seed);
    require_convergence(run.diagnostics);
    draws = run.draws;
  }

  std::vector<CriterionReport> reports;
  int exit_code = kExitOk;
  auto guarded = [&](const std::string& name, auto&& fn) {
    try {
      CriterionReport r = fn();
      r.seed = o.seed;
      reports.push_back(std::move(r));
    } catch (const Error& e) {
      reports.push_back(failed_report(name, std::string(to_string(e.kind())) + ": " + e.what(),
                                      data.size(), draws.size(), o.seed));
      if (!is_expected_refusal(e.kind())) exit_code = std::max(exit_code, exit_code_for(e));
    }
  };

  const bool needs_mode = std::any_of(o.criteria.begin(), o.criteria.end(),
                                      [](const auto& c) { return c == "paic" || c == "bpic"; });
  std::optional<ModeResult> mode;
  std::optional<PointwiseLogLik> pw;
  auto get_mode = [&]() -> const ModeResult& {
    if (!mode) {
      mode = find_posterior_mode(def, data);
      if (!mode->converged) {
        throw Error(ErrorKind::NonConvergence, "posterior mode search failed: " + mode->message);
      }
    }
    return *mode;
  };
  auto get_pw = [&]() -> const PointwiseLogLik& {
    if (!pw) pw = pointwise_loglik(def, data, draws);
    return *pw;
  };
  if (needs_mode && !o.export_info.empty()) {
    export_info_pair_csv(make_info_pair(def, data, get_mode().theta_hat), o.export_info);
  }

  for (const auto& c : o.criteria) {
    if (c == "paic") {
      guarded(c, [&] {
        return paic::paic(get_pw(), make_info_pair(def, data, get_mode().theta_hat));
      });
    } else if (c == "bpic") {
      guarded(c, [&] {
        if (!def.prior_proper) {
          throw Error(ErrorKind::ImproperPrior, "BPIC undefined under degenerate prior");
        }
        const auto& m = get_mode();
        return bpic(def, data, draws, m,
                    make_info_pair(def, data, m.theta_hat, FisherScaling::N));
      });
    } else if (c == "waic2") {
      guarded(c, [&] { return waic2(get_pw()); });
    } else if (c == "dic") {
      guarded(c, [&] { return dic(def, data, draws); });
    } else if (c == "popt") {
      guarded(c, [&] { return popt_closed_form(builtin, data); });
    } else if (c == "loo") {
      guarded(c, [&] {
        FoldPredictor predictor;
        if (const auto* m = std::get_if<ConjugateNormalModel>(&builtin)) {
          predictor = conjugate_normal_fold_predictor(*m, data);
        } else {
          predictor = hier_logit_sampled_folds(std::get<HierLogitModel>(builtin), data, sampler,
                                               o.seed);
        }
        CriterionReport r = loo_exact(data.size(), predictor, &get_pw(), threads);
        r.S = draws.size();
        return r;
      });
    }
  }

  write_report(reports, format, o.out, Provenance{kToolVersion, config_hash(compute_canonical(o)), o.seed});
  for (const auto& r : reports) {
    if (r.error) std::cerr << "paic: " << r.name << ": " << *r.error << '\n';
  }
  return exit_code;
}

int run_normal(const NormalOptions& o) {
  using namespace paic;
  NormalExperimentConfig cfg;
  cfg.mu_T = o.mu_T;
  cfg.sigma_T2 = o.sigma_T2;
  cfg.sigma_A2 = o.sigma_A2;
  cfg.priors.clear();
  for (const auto& p : o.priors) cfg.priors.push_back(parse_prior_rule(p));
  cfg.mu0 = o.mu0;
  cfg.n_grid = o.n;
  cfg.replications = o.reps;
  cfg.seed = o.seed;
  cfg.threads = resolve_threads(o.threads);
  cfg.generic = !o.no_generic;
  const ExperimentResult res = run_normal_bias_experiment(cfg);
  write_experiment_outputs(res, o.out, Provenance{kToolVersion, config_hash(cfg.canonical()), o.seed});
  return kExitOk;
}

int run_logit(const LogitOptions& o) {
  using namespace paic;
  LogitExperimentConfig cfg;
  if (o.groups < 2) throw Error(ErrorKind::Validation, "--groups must be >= 2");
  cfg.groups = static_cast<std::size_t>(o.groups);
  cfg.trials = o.trials;
  cfg.mu_T = o.mu_T;
  cfg.tau_T = o.tau_T;
  cfg.replications = o.reps;
  if (o.eta_mode == "exact") {
    cfg.eta_mode = EtaMode::ExactSum;
  } else if (o.eta_mode == "sampled") {
    cfg.eta_mode = EtaMode::Sampled;
  } else {
    throw Error(ErrorKind::Validation, "--eta-mode must be exact or sampled");
  }
  cfg.J = o.J;
  cfg.sampler.chains = o.chains;
  cfg.sampler.draws_per_chain = o.draws_per_chain;
  cfg.sampler.warmup = o.warmup;
  cfg.compute_cv = !o.no_cv;
  cfg.max_failure_fraction = o.max_failure_fraction;
  cfg.seed = o.seed;
  cfg.threads = resolve_threads(o.threads);
  const ExperimentResult res = run_logit_experiment(cfg);
  write_experiment_outputs(res, o.out, Provenance{kToolVersion, config_hash(cfg.canonical()), o.seed});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Posterior averaging information criterion and competitors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", paic::kToolVersion);

  ComputeOptions co;
  auto* compute = app.add_subcommand("compute", "Compute criteria for one data set");
  compute->add_option("--model", co.model, "normal | normal-flat | hier-logit")
      ->check(CLI::IsMember({"normal", "normal-flat", "hier-logit"}));
  compute->add_option("--data", co.data, "Observation CSV (columns y[,n_trials])")->required();
  compute->add_option("--draws", co.draws, "Posterior draws CSV (theta_1..theta_p,chain)");
  compute->add_option("--criteria", co.criteria, "paic,bpic,waic2,loo,dic,popt")->delimiter(',');
  compute->add_option("--seed", co.seed, "Random seed");
  compute->add_option("--out", co.out, "Report path")->required();
  compute->add_option("--format", co.format, "json | csv (default from extension)");
  compute->add_option("--sigma-a2", co.sigma_A2, "Normal model variance");
  compute->add_option("--mu0", co.mu0, "Normal prior mean");
  compute->add_option("--tau02", co.tau02, "Normal prior variance");
  compute->add_option("--mu-prior-mean", co.mu_prior_mean, "hier-logit: prior mean of mu");
  compute->add_option("--mu-prior-var", co.mu_prior_var, "hier-logit: prior variance of mu");
  compute->add_option("--tau2-df", co.tau2_df, "hier-logit: Inv-chi2 degrees of freedom");
  compute->add_option("--tau2-scale", co.tau2_scale, "hier-logit: Inv-chi2 scale");
  compute->add_option("--normal-draws", co.normal_draws, "Draws for the normal sampler");
  compute->add_option("--chains", co.chains, "hier-logit chains");
  compute->add_option("--draws-per-chain", co.draws_per_chain, "hier-logit retained draws per chain");
  compute->add_option("--warmup", co.warmup, "hier-logit warmup iterations");
  compute->add_option("--threads", co.threads, "Worker threads (default PAIC_THREADS or cores)");
  compute->add_option("--export-info", co.export_info, "Write J_n/I_n CSVs with this path stem");

  auto* experiment = app.add_subcommand("experiment", "Run a bias simulation study");
  experiment->require_subcommand(1);

  NormalOptions no;
  auto* normal = experiment->add_subcommand("normal", "Conjugate normal study");
  normal->add_option("--reps", no.reps, "Replications per cell");
  normal->add_option("--seed", no.seed, "Random seed");
  normal->add_option("--out", no.out, "Output directory")->required();
  normal->add_option("--n", no.n, "Sample sizes")->delimiter(',');
  normal->add_option("--sigma-a2", no.sigma_A2, "Assumed variances")->delimiter(',');
  normal->add_option("--prior", no.priors, "Prior rules: 1e4, 1e4/n, 0.25, flat")->delimiter(',');
  normal->add_option("--mu-t", no.mu_T, "True mean");
  normal->add_option("--sigma-t2", no.sigma_T2, "True variance");
  normal->add_option("--mu0", no.mu0, "Prior mean");
  normal->add_flag("--no-generic", no.no_generic, "Skip the mode + information-matrix path");
  normal->add_option("--threads", no.threads, "Worker threads");

  LogitOptions lo;
  auto* logit = experiment->add_subcommand("logit", "Hierarchical logit study");
  logit->add_option("--reps", lo.reps, "Replications");
  logit->add_option("--seed", lo.seed, "Random seed");
  logit->add_option("--out", lo.out, "Output directory")->required();
  logit->add_option("--groups", lo.groups, "Number of groups N");
  logit->add_option("--trials", lo.trials, "Trials per group");
  logit->add_option("--mu-t", lo.mu_T, "True random-effect mean");
  logit->add_option("--tau-t", lo.tau_T, "True random-effect sd");
  logit->add_option("--eta-mode", lo.eta_mode, "exact | sampled");
  logit->add_option("--J", lo.J, "Replicate data sets for --eta-mode sampled");
  logit->add_option("--chains", lo.chains, "Chains");
  logit->add_option("--draws-per-chain", lo.draws_per_chain, "Retained draws per chain");
  logit->add_option("--warmup", lo.warmup, "Warmup iterations");
  logit->add_flag("--no-cv", lo.no_cv, "Skip the leave-one-out refits");
  logit->add_option("--max-failure-fraction", lo.max_failure_fraction,
                    "Abort when more replications fail to converge");
  logit->add_option("--threads", lo.threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*compute) return run_compute(co);
    if (*normal) return run_normal(no);
    if (*logit) return run_logit(lo);
  } catch (const paic::Error& e) {
    std::cerr << "paic: " << paic::to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "paic: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
