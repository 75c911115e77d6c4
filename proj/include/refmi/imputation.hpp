#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "refmi/arm_model.hpp"
#include "refmi/mvn.hpp"
#include "refmi/trial_data.hpp"

namespace refmi {

enum class Strategy { Mar, J2R };

std::string_view to_string(Strategy s) noexcept;
/// Accepts "mar" / "j2r" (case-insensitive); throws InvalidArgument otherwise.
Strategy parse_strategy(std::string_view name);

/// Marginal distribution assumed for an active-arm patient whose first
/// `observed` modelled visits are observed: mean and covariance of the active
/// arm on the observed block, reference-arm conditional behaviour beyond it.
struct J2RJoint {
  Vector mu;
  Matrix sigma;
  int observed = 0;
};

/// Requires 0 <= observed < dimension. The observed block of sigma is a copy
/// of the active arm's; the missing block is symmetrized before the PD check.
J2RJoint build_j2r_joint(const ArmModel& reference, const ArmModel& active, int observed);

/// Conditional-sampling machinery for one (model, observed count) pair:
/// missing = mean_missing + slope * (y_obs - mean_observed) + lower * z.
struct ImputationPattern {
  Vector mean_observed;
  Vector mean_missing;
  Matrix slope;
  Matrix lower;
};

ImputationPattern make_pattern(const Vector& mu, const Matrix& sigma, int observed);

/// Imputes incomplete patients given one set of arm models. Patterns are built
/// once per (arm, observed count), so an Imputer is meant to live for one
/// parameter draw. Either model may be absent when no patient needs it.
class Imputer {
 public:
  Imputer(std::optional<ArmModel> reference, std::optional<ArmModel> active, Strategy strategy);

  Strategy strategy() const noexcept { return strategy_; }

  /// Pattern used for a patient of `arm` with `observed` leading visits.
  const ImputationPattern& pattern(Arm arm, int observed) const;

  /// Overwrites row[observed..] with a draw from the conditional distribution.
  void fill(std::span<double> row, Arm arm, int observed, Stream& rng) const;

  /// Completed copy of `data`. Patient i draws from the substream
  /// derive_seed(seed, {id_hash(i)}), so results do not depend on processing
  /// order.
  TrialDataset impute(const TrialDataset& data, std::uint64_t seed) const;

 private:
  Strategy strategy_;
  std::vector<ImputationPattern> patterns_[2];
};

/// Completes a single record; returned unchanged when nothing is missing.
PatientRecord impute_patient(const PatientRecord& record, int first_visit, const ArmModel& reference,
                             const ArmModel& active, Strategy strategy, Stream& rng);

/// Which arm models are needed to impute `data` under `strategy`.
struct ModelNeeds {
  bool reference = false;
  bool active = false;
};
ModelNeeds model_needs(const TrialDataset& data, Strategy strategy);

/// M completed datasets. proper: every imputation conditions on fresh
/// posterior draws of both arm models; improper: all imputations condition on
/// the MLE. Imputation m (0-based) uses substreams of derive_seed(seed, {m}).
std::vector<TrialDataset> impute_dataset(const TrialDataset& data, Strategy strategy, int imputations,
                                         bool proper, std::uint64_t seed);

/// Improper imputations conditioning on already fitted models.
std::vector<TrialDataset> impute_with_models(const TrialDataset& data, const Imputer& imputer,
                                             int imputations, std::uint64_t seed);

}  // namespace refmi
