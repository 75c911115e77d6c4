#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "refmi/analysis.hpp"
#include "refmi/imputation.hpp"
#include "refmi/mvn.hpp"
#include "refmi/trial_data.hpp"

namespace refmi {

/// B x M matrix of complete-data estimates from bootstrap-then-impute.
struct BootMiGrid {
  Matrix estimates;
  /// Replicates that had to be redrawn because fitting failed, with reasons.
  std::vector<std::string> retries;

  int bootstraps() const { return static_cast<int>(estimates.rows()); }
  int imputations() const { return static_cast<int>(estimates.cols()); }
};

inline constexpr int kMaxBootstrapAttempts = 10;

/// For b = 1..B: stratified resample, per-arm MLE fit, M improper imputations
/// conditional on that fit, then the complete-data analysis. A replicate whose
/// fit fails is redrawn with a fresh resample, up to kMaxBootstrapAttempts
/// times; after that BootstrapFailed is thrown. Replicate b uses substreams of
/// derive_seed(seed, {b, attempt}), so `threads` never changes the grid.
BootMiGrid boot_then_impute(const TrialDataset& data, Strategy strategy, int bootstraps, int imputations,
                            std::uint64_t seed, Analysis analysis = Analysis::DiffMeans, int threads = 1);

/// Writes `b,m,theta` rows (1-based indices).
void write_grid_csv(const BootMiGrid& grid, std::ostream& out);

struct BootMiEstimate {
  double theta_bar = 0.0;
  double sigma2_b = 0.0;
  double sigma2_w = 0.0;
  double v_hat = 0.0;
  double df = 0.0;
  double alpha = 0.05;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  int bootstraps = 0;
  int imputations = 0;
  /// Set when v_hat == 0 (e.g. every grid entry equal); the interval collapses.
  bool degenerate = false;

  double se() const;
};

/// Random-intercepts pooling of a bootstrap/imputation grid by one-way ANOVA
/// method of moments:
///   MS_between = M * Var_b(row means),  MS_within = pooled within-row variance
///   sigma2_w = MS_within,  sigma2_b = max(0, (MS_between - MS_within) / M)
///   v_hat = (1 + 1/B) sigma2_b + sigma2_w / (B M)
/// with Satterthwaite degrees of freedom for v_hat as a combination of the
/// two mean squares and a t interval around the grand mean.
BootMiEstimate vonhippel_pool(const BootMiGrid& grid, double alpha = 0.05);

// ---------------------------------------------------------------------------
// Single follow-up, no-baseline case (last visit 1, dataset without baseline).
// D = 1 means y1 observed, D = 0 means y1 missing.

struct SimplifiedStats {
  double mu_hat_a = 0.0;       ///< mean y1, active with D = 1
  double mu_hat_r_obs = 0.0;   ///< mean y1, reference with D = 1
  double mu_hat_r_com = 0.0;   ///< mean y1 over reference plus active with D = 0
  double pi_hat_1 = 0.0;       ///< fraction of active with D = 0
  double sigma2_hat_a = 0.0;   ///< ML variance, active with D = 1
  double sigma2_hat_r = 0.0;   ///< ML variance over reference plus active with D = 0
  std::size_t n_a = 0;
  std::size_t n_r = 0;
};

/// Statistics of a completed dataset; dropout indicators come from the
/// observed dataset it was imputed from (same patients, same order).
SimplifiedStats simplified_stats(const TrialDataset& observed, const TrialDataset& completed);

/// Observed-data estimate (mu_a - mu_r_obs)(1 - pi_1); exactly 0 when no
/// active patient is observed. Throws NoObservedReference.
double simplified_point(const TrialDataset& observed);

/// Complete-data MLE of the effect under the embedding model,
/// (mu_a - mu_r_com)(1 - pi_1).
double simplified_complete_mle(const SimplifiedStats& stats);

/// Variance of the complete-data MLE under the embedding model:
/// (1-pi)[s2_r (1-pi)/(n_r + n_a pi) + s2_a/n_a + (mu_r_com - mu_a)^2 pi/n_a].
double simplified_mle_variance(const SimplifiedStats& stats);

/// Var(Y | X = 1) under the J2R mixture:
/// (mu_a - mu_r)^2 pi (1-pi) + s2_a (1-pi) + s2_r pi.
double simplified_var_active(double mu_a, double mu_r, double sigma2_a, double sigma2_r, double pi_1);

/// Posterior variance decomposition with the embedding model's complete-data
/// procedure in place of the analyst's: point = mean complete-data MLE,
/// within = mean simplified_mle_variance, between = variance of the MLEs,
/// total = within + (1 + 1/M) between.
struct EmbeddedMiEstimate {
  double point = 0.0;
  double within = 0.0;
  double between = 0.0;
  double total = 0.0;
};
EmbeddedMiEstimate embedded_mi_pool(const TrialDataset& observed, std::span<const TrialDataset> completed);

struct PosteriorSummary {
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int draws = 0;
};

/// Congenial Bayesian inference for the single follow-up case: independent
/// posteriors of (mu_r, s2_r) and (mu_a, s2_a) from the observed groups
/// (normal / scaled inverse chi-square), pi_1 ~ Beta(1 + #missing, 1 + #observed),
/// each draw mapped through (mu_a - mu_r)(1 - pi_1). Equal-tailed interval.
PosteriorSummary congenial_bayes_simplified(const TrialDataset& observed, int draws, std::uint64_t seed,
                                            double alpha = 0.05);

}  // namespace refmi
