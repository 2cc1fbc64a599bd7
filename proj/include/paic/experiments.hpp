#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paic/builtin_models.hpp"
#include "paic/mcmc.hpp"
#include "paic/report.hpp"

namespace paic {

// Prior variance rules of the normal study.
enum class PriorRule {
  Vague,           // tau02 = 1e4
  ShrinkingWithN,  // tau02 = 1e4 / n
  Informative,     // tau02 = 0.25
  Flat,            // pi(mu) ∝ 1
};

std::optional<double> tau02_for(PriorRule rule, int n);
std::string to_string(PriorRule rule);
PriorRule parse_prior_rule(const std::string& label);

struct NormalExperimentConfig {
  double mu_T = 0.0;
  double sigma_T2 = 1.0;
  std::vector<double> sigma_A2 = {1.0};
  std::vector<PriorRule> priors = {PriorRule::Vague};
  double mu0 = 0.0;
  std::vector<int> n_grid = {25, 50, 100, 200};
  int replications = 2000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  // Also run the generic mode + information-matrix path in every replication.
  bool generic = true;

  void validate() const;
  std::string canonical() const;
};

enum class EtaMode { ExactSum, Sampled };

struct LogitExperimentConfig {
  std::size_t groups = 15;
  int trials = 50;
  double mu_T = 0.0;
  double tau_T = 1.0;
  int replications = 100;
  EtaMode eta_mode = EtaMode::ExactSum;
  int J = 20000;
  HierLogitModel prior;  // hyperprior settings; groups is overwritten
  HierLogitSamplerOptions sampler;
  bool compute_cv = true;
  double max_failure_fraction = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const;
  std::string canonical() const;
};

struct CellSpec {
  int n = 0;
  std::string prior;             // normal study only
  std::optional<double> tau02;   // normal study only
  double sigma_A2 = 0.0;         // normal study only
  double target_bias = 0.0;      // b_mu (normal); NaN for the logit study
};

struct ReplicationRecord {
  std::size_t cell = 0;
  std::size_t replication = 0;
  double eta_hat = 0.0;
  double eta = 0.0;
  double eta_mc_se = 0.0;
  std::vector<double> estimates;  // aligned with ExperimentResult::estimators
  bool excluded = false;
  int flagged_folds = 0;
  std::string note;

  double realized_bias() const { return eta_hat - eta; }
  // eta_hat - eta - b_hat
  double error(std::size_t k) const { return realized_bias() - estimates[k]; }
};

struct EstimatorSummary {
  std::string estimator;
  std::size_t count = 0;
  double mean_estimate = 0.0;
  double sd_estimate = 0.0;
  double mean_error = 0.0;
  double sd_error = 0.0;
  double mae = 0.0;
  double sd_abs_error = 0.0;
  double mse = 0.0;
  double sd_sq_error = 0.0;
};

struct CellAggregate {
  std::size_t cell = 0;
  std::size_t used = 0;
  std::size_t excluded = 0;
  double mean_realized_bias = 0.0;
  std::vector<EstimatorSummary> estimators;
};

struct ExperimentResult {
  std::string study;
  std::string scale;
  std::vector<std::string> estimators;
  std::vector<CellSpec> cells;
  std::vector<ReplicationRecord> records;
  std::vector<CellAggregate> aggregates;
  // Largest relative gap between generic and closed-form PAIC/BPIC biases.
  double max_generic_discrepancy = 0.0;

  const EstimatorSummary& summary(std::size_t cell, const std::string& estimator) const;
};

// Mean/sd/MAE/MSE per cell and estimator, recomputed from the records.
std::vector<CellAggregate> aggregate_records(const ExperimentResult& result);

// b_mu = sigma_T2 * sigma_hat2 / sigma_A2^2, sigma_hat2 = 1/(1/tau02 + n/sigma_A2).
double true_bias_normal(const NormalExperimentConfig& cfg, int n, std::optional<double> tau02,
                        double sigma_A2);

// Expected out-of-sample log density for the conjugate normal model:
// -1/2 log(2 pi sigma_A2) - (sigma_T2 + (mu_T - mu_hat)^2 + sigma_hat2) / (2 sigma_A2).
double true_eta_normal(double mu_T, double sigma_T2, double sigma_A2, double mu_hat,
                       double sigma_hat2);

ExperimentResult run_normal_bias_experiment(const NormalExperimentConfig& cfg);

struct TrueEta {
  double value = 0.0;
  double mc_se = 0.0;  // 0 for the exact sum
};

struct EtaOptions {
  EtaMode mode = EtaMode::ExactSum;
  int J = 20000;
  std::uint64_t seed = 0;
};

// eta = (1/N) sum_i E_{z_i} mean_s log g(z_i | theta^(s)) with z_i ~ Bin(n_i,
// logit^-1(beta_T_i)). ExactSum sums over the finite support; Sampled draws J
// replicate data sets.
TrueEta estimate_true_eta_logit(const PosteriorDraws& draws, const Vector& beta_T,
                                std::span<const int> trials, const EtaOptions& opts = {});

ExperimentResult run_logit_experiment(const LogitExperimentConfig& cfg);

// records.csv (one row per replication and estimator), aggregates.json and
// plot/<panel>__<estimator>.dat files with "n mean_bias" rows.
void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir,
                              const Provenance& provenance);

}  // namespace paic
