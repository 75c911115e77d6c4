#pragma once

#include <vector>

#include "refmi/mvn.hpp"
#include "refmi/rng.hpp"
#include "refmi/trial_data.hpp"

namespace refmi {

/// Unstructured multivariate-normal model for one arm's modelled visits.
struct ArmModel {
  Vector mu;
  Matrix sigma;

  Eigen::Index dimension() const { return mu.size(); }
};

/// Regression of visit k on (1, y_0, ..., y_{k-1}); stage 0 is the marginal
/// of the first modelled visit (coef = {mean}).
struct RegressionStage {
  Vector coef;
  double residual_variance = 0.0;
};

/// Factored-likelihood parameterization of an ArmModel.
struct SequentialFactors {
  std::vector<RegressionStage> stages;
};

SequentialFactors factor(const ArmModel& model);
ArmModel recompose(const SequentialFactors& factors);

/// Exact maximum-likelihood estimate for one arm under monotone MAR, via
/// sequential least squares with ML (divisor n) residual variances. Each
/// stage k needs at least k + 3 patients observed through visit k; otherwise
/// throws InsufficientData. A rank-deficient stage throws SingularDesign.
ArmModel fit_mle(const TrialDataset& data, Arm arm);

/// One posterior draw under the per-stage noninformative prior: residual
/// variance from a scaled inverse chi-square, then coefficients from their
/// conditional normal. Same preconditions as fit_mle.
ArmModel posterior_draw(const TrialDataset& data, Arm arm, Stream& rng);

}  // namespace refmi
