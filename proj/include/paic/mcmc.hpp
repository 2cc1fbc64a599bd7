#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "paic/builtin_models.hpp"
#include "paic/model.hpp"

namespace paic {

// Retained posterior draws, one row per draw, ordered by (chain, iteration).
struct PosteriorDraws {
  Matrix draws;                 // S x p
  std::vector<int> chain_ids;   // length S
  int warmup_discarded = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(draws.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(draws.cols()); }
  int chain_count() const;
};

struct Diagnostics {
  Vector ess;                       // per coordinate, summed over chains
  Vector rhat;                      // per coordinate, split-chain
  std::vector<double> accept_rate;  // per update block
  bool converged = true;
  std::string summary;
};

inline constexpr double kMaxRhat = 1.05;
inline constexpr double kMinEss = 400.0;

// iid draws from the closed-form posterior N(mu_hat, sigma_hat2).
PosteriorDraws sample_conjugate_normal(const ConjugateNormalModel& model,
                                       const ObservationSet& data, std::size_t draws,
                                       std::uint64_t seed);

struct HierLogitSamplerOptions {
  int chains = 3;
  int draws_per_chain = 5000;
  int warmup = 2000;
  double target_accept = 0.44;
  unsigned threads = 1;
  // Observations whose likelihood enters the target; empty means all. A group
  // whose observation is inactive keeps its beta, drawn from N(mu, tau2).
  std::vector<bool> active;
  // Extra coordinate for the stream path, e.g. a held-out fold index.
  std::uint64_t stream = 0;
};

struct HierLogitRun {
  PosteriorDraws draws;
  Diagnostics diagnostics;
  // Random-walk scales per chain at the end of warmup and at the end of the
  // run. Adaptation stops after warmup, so the two agree.
  std::vector<Vector> warmup_step_sizes;
  std::vector<Vector> final_step_sizes;
};

// Metropolis-within-Gibbs: adaptive random-walk Metropolis on each beta_i
// (Robbins-Monro scale adaptation toward target_accept during warmup only),
// exact normal draw of mu | beta, tau2, and exact scaled-inverse-chi-squared
// draw of tau2 | beta, mu. Chain c uses stream derive_seed(seed, {stream, c}).
HierLogitRun sample_hier_logit(const HierLogitModel& model, const ObservationSet& data,
                               const HierLogitSamplerOptions& opts, std::uint64_t seed);

// Throws NonConvergence when any rhat > kMaxRhat or ess < kMinEss.
void require_convergence(const Diagnostics& diag);

// Effective sample size by Geyer's initial monotone sequence. Returns 0 for a
// constant series. Capped at the series length.
double ess(std::span<const double> draws);

// Split-chain potential scale reduction of one coordinate. Every chain must
// have the same length (>= 4).
double rhat(std::span<const double> draws, std::span<const int> chain_ids);

Diagnostics diagnose(const PosteriorDraws& draws);

// CSV with header theta_1..theta_p,chain; one row per draw.
void write_draws_csv(const PosteriorDraws& draws, const std::filesystem::path& path);
PosteriorDraws read_draws_csv(const std::filesystem::path& path);
PosteriorDraws parse_draws_csv(std::istream& in, const std::string& source = "<stream>");

}  // namespace paic
