#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "refmi/analysis.hpp"
#include "refmi/arm_model.hpp"
#include "refmi/imputation.hpp"
#include "refmi/trial_data.hpp"

namespace refmi {

/// Per-arm dropout mechanism. At each visit j = 1..J a patient still in
/// follow-up drops out (is missing from visit j on) with probability
///   MCAR:          rate[j-1]
///   MAR logistic:  1 / (1 + exp(-(intercept + slope * y_{j-1})))
/// where y_{j-1} is the last observed value (intercept only when there is none).
struct DropoutSpec {
  enum class Kind { Mcar, MarLogistic };
  Kind kind = Kind::Mcar;
  std::vector<double> rate;
  double intercept = 0.0;
  double slope = 0.0;

  double hazard(int visit, double last_observed, bool has_last) const;
};

enum class Estimator { Rubin, BootMi, SimplifiedMle, CongenialBayes };

std::string_view to_string(Estimator e) noexcept;
Estimator parse_estimator(std::string_view name);

struct ScenarioConfig {
  int n_a = 100;
  int n_r = 100;
  int J = 1;
  bool baseline = true;
  ArmModel true_ref;
  ArmModel true_act;
  DropoutSpec dropout_active;
  DropoutSpec dropout_reference;
  Strategy strategy = Strategy::J2R;
  Analysis analysis = Analysis::DiffMeans;
  std::vector<Estimator> estimators{Estimator::Rubin};
  int M = 25;          ///< imputations for Rubin and the embedded-model pool
  bool proper = true;  ///< posterior draws for those imputations
  int B = 200;         ///< bootstraps for bootMI
  int boot_M = 2;      ///< imputations per bootstrap
  int bayes_draws = 2000;
  int reps = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::optional<double> true_theta;

  int dimension() const { return J + (baseline ? 1 : 0); }
  bool wants(Estimator e) const;
  /// Throws InvalidArgument describing the first inconsistency.
  void validate() const;
};

/// Draws one trial: patient i (reference first, then active) uses the
/// substream derive_seed(seed, {i}).
TrialDataset generate_trial(const ScenarioConfig& cfg, std::uint64_t seed);

/// Estimand used for coverage. MAR: difference of true final-visit means.
/// J2R: expected final-visit value of an active patient under J2R at the
/// true parameters minus the reference mean; exact under MCAR dropout, Monte
/// Carlo (200000 active patients) under MAR dropout. Overridden by
/// cfg.true_theta.
double true_effect(const ScenarioConfig& cfg);

struct EstimatorOutcome {
  double point = 0.0;
  double variance = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double within = 0.0;   ///< NaN when the estimator has no such component
  double between = 0.0;
};

struct ReplicationResult {
  std::size_t rep = 0;
  bool ok = false;
  std::string error;
  std::vector<EstimatorOutcome> outcomes;  ///< one per cfg.estimators entry
};

/// Replication results keyed by replication index. Merging disjoint sets and
/// summarizing gives exactly the report of a single run over the union.
class ReplicationSet {
 public:
  void add(ReplicationResult r);
  void merge(const ReplicationSet& other);
  const std::vector<ReplicationResult>& results() const { return results_; }
  std::size_t size() const { return results_.size(); }

 private:
  std::vector<ReplicationResult> results_;
};

/// Runs replication `rep` (data from derive_seed(cfg.seed, {rep})).
ReplicationResult run_replication(const ScenarioConfig& cfg, std::size_t rep);

/// Runs replications [first, last) on `threads` workers.
ReplicationSet run_replications(const ScenarioConfig& cfg, std::size_t first, std::size_t last, int threads);

struct Summary {
  double value = 0.0;
  double mcse = 0.0;
};

struct EstimatorSummary {
  Estimator estimator = Estimator::Rubin;
  std::size_t n = 0;
  Summary mean_estimate;
  double empirical_sd = 0.0;
  Summary empirical_variance;
  Summary mean_variance;
  Summary variance_ratio;
  Summary coverage;
  Summary rejection_rate;
  std::optional<Summary> mean_within;
  std::optional<Summary> mean_between;
};

struct SimReport {
  ScenarioConfig config;
  double true_theta = 0.0;
  std::size_t replications = 0;
  std::size_t failed = 0;
  std::vector<std::string> failures;  ///< "rep <i>: <reason>", first 20
  std::vector<EstimatorSummary> estimators;
  double runtime_seconds = 0.0;

  const EstimatorSummary& get(Estimator e) const;
};

SimReport summarize(const ScenarioConfig& cfg, const ReplicationSet& set, double runtime_seconds = 0.0);

/// Maximum tolerated fraction of failed replications.
inline constexpr double kMaxFailureFraction = 0.01;

/// Full study. Deterministic given cfg.seed for any thread count; throws
/// ScenarioFailed when more than 1% of replications fail.
SimReport run_scenario(const ScenarioConfig& cfg, int threads = 1);

}  // namespace refmi
