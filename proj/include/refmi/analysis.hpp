#pragma once

#include <span>
#include <string_view>

#include "refmi/trial_data.hpp"

namespace refmi {

enum class Analysis { DiffMeans, Ancova };

std::string_view to_string(Analysis a) noexcept;
Analysis parse_analysis(std::string_view name);

/// Complete-data treatment-effect estimate with its variance and the
/// complete-data degrees of freedom used by small-sample pooling.
struct CompleteDataEstimate {
  double theta_hat = 0.0;
  double w = 0.0;
  double dof = 0.0;
};

/// Difference in final-visit means, active minus reference, with the unpooled
/// variance Var_a/n_a + Var_r/n_r (sample variances, divisor n - 1).
/// dof = n_a + n_r - 2.
CompleteDataEstimate analyze_diff_means(const TrialDataset& completed);

/// OLS of the final visit on (1, y0, arm); theta is the arm coefficient and w
/// its model-based variance. dof = n - 3. Needs a baseline.
CompleteDataEstimate analyze_ancova(const TrialDataset& completed);

CompleteDataEstimate analyze(const TrialDataset& completed, Analysis analysis);

struct PooledEstimate {
  double theta_bar = 0.0;
  double w_bar = 0.0;
  double b = 0.0;
  double t_total = 0.0;
  double df = 0.0;
  double alpha = 0.05;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  int imputations = 0;

  double se() const;
};

/// Rubin's rules with Barnard-Rubin degrees of freedom. The complete-data dof
/// is taken from the estimates (they must agree); an infinite dof gives the
/// classical large-sample formula. Throws TooFewImputations for M < 2.
PooledEstimate rubin_pool(std::span<const CompleteDataEstimate> estimates, double alpha = 0.05);

/// Barnard-Rubin degrees of freedom for the given components.
double barnard_rubin_df(double w_bar, double b, int imputations, double complete_dof);

/// Two-sided critical value t_{df, 1 - alpha/2}; the normal quantile when df
/// is infinite or very large.
double t_critical(double df, double alpha);

}  // namespace refmi
