#include "refmi/analysis.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

#include "refmi/error.hpp"

namespace refmi {
namespace {

void require_complete(const TrialDataset& data) {
  if (!data.fully_observed()) {
    throw Error(ErrorKind::InvalidArgument,
                "analysis needs a completed dataset (" + std::to_string(data.incomplete_count()) +
                    " incomplete patients)");
  }
}

}  // namespace

std::string_view to_string(Analysis a) noexcept {
  return a == Analysis::DiffMeans ? "diff_means" : "ancova";
}

Analysis parse_analysis(std::string_view name) {
  if (name == "diff_means" || name == "diff-means") return Analysis::DiffMeans;
  if (name == "ancova") return Analysis::Ancova;
  throw Error(ErrorKind::InvalidArgument,
              "unknown analysis '" + std::string(name) + "' (diff_means|ancova)");
}

CompleteDataEstimate analyze_diff_means(const TrialDataset& completed) {
  require_complete(completed);
  double n[2] = {0, 0};
  double mean[2] = {0, 0};
  double m2[2] = {0, 0};
  for (std::size_t i = 0; i < completed.size(); ++i) {
    const int a = static_cast<int>(completed.arm(i));
    const double y = completed.final_outcome(i);
    n[a] += 1;
    const double delta = y - mean[a];
    mean[a] += delta / n[a];
    m2[a] += delta * (y - mean[a]);
  }
  if (n[0] == 0 || n[1] == 0) {
    throw Error(ErrorKind::EmptyArm, n[1] == 0 ? "no active patients" : "no reference patients");
  }
  if (n[0] < 2 || n[1] < 2) {
    throw Error(ErrorKind::DegenerateVariance, "each arm needs at least 2 patients");
  }
  CompleteDataEstimate est;
  est.theta_hat = mean[1] - mean[0];
  est.w = m2[1] / (n[1] - 1) / n[1] + m2[0] / (n[0] - 1) / n[0];
  est.dof = n[0] + n[1] - 2;
  return est;
}

CompleteDataEstimate analyze_ancova(const TrialDataset& completed) {
  require_complete(completed);
  if (!completed.has_baseline()) {
    throw Error(ErrorKind::InvalidArgument, "baseline-adjusted analysis needs a baseline visit");
  }
  if (completed.n_active() == 0 || completed.n_reference() == 0) {
    throw Error(ErrorKind::EmptyArm, "both arms must be present");
  }
  const auto n = static_cast<Eigen::Index>(completed.size());
  if (n <= 3) throw Error(ErrorKind::SingularDesign, "need more than 3 patients");
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i);
    x(i, 0) = 1.0;
    x(i, 1) = completed.outcome(row, 0);
    x(i, 2) = completed.arm(row) == Arm::Active ? 1.0 : 0.0;
    y[i] = completed.final_outcome(row);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(3).triangularView<Eigen::Upper>();
  const Eigen::VectorXd diag = r.diagonal().cwiseAbs();
  if (!(diag.minCoeff() > 1e-10 * diag.maxCoeff())) {
    throw Error(ErrorKind::SingularDesign, "design (1, y0, arm) is rank deficient");
  }
  const Eigen::VectorXd beta = qr.solve(y);
  const double rss = (y - x * beta).squaredNorm();
  const double sigma2 = rss / static_cast<double>(n - 3);
  // (X'X)^-1 = R^-1 R^-T; the arm entry is the squared norm of row 2 of R^-1.
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(3, 3));
  CompleteDataEstimate est;
  est.theta_hat = beta[2];
  est.w = sigma2 * r_inv.row(2).squaredNorm();
  est.dof = static_cast<double>(n - 3);
  return est;
}

CompleteDataEstimate analyze(const TrialDataset& completed, Analysis analysis) {
  return analysis == Analysis::DiffMeans ? analyze_diff_means(completed) : analyze_ancova(completed);
}

double PooledEstimate::se() const { return std::sqrt(t_total); }

double t_critical(double df, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha must be in (0,1)");
  if (!(df > 0.0)) throw Error(ErrorKind::InvalidArgument, "degrees of freedom must be positive");
  if (!std::isfinite(df) || df > 1e12) {
    return boost::math::quantile(boost::math::complement(boost::math::normal(), alpha / 2));
  }
  return boost::math::quantile(boost::math::complement(boost::math::students_t(df), alpha / 2));
}

double barnard_rubin_df(double w_bar, double b, int imputations, double complete_dof) {
  const double m = imputations;
  const double t = w_bar + (1.0 + 1.0 / m) * b;
  const double lambda = t > 0.0 ? (1.0 + 1.0 / m) * b / t : 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  const double df_old = lambda > 0.0 ? (m - 1.0) / (lambda * lambda) : inf;
  double df_obs = inf;
  if (std::isfinite(complete_dof)) {
    df_obs = (complete_dof + 1.0) / (complete_dof + 3.0) * complete_dof * (1.0 - lambda);
  }
  if (!std::isfinite(df_old)) return df_obs;
  if (!std::isfinite(df_obs)) return df_old;
  return 1.0 / (1.0 / df_old + 1.0 / df_obs);
}

PooledEstimate rubin_pool(std::span<const CompleteDataEstimate> estimates, double alpha) {
  const auto m = static_cast<int>(estimates.size());
  if (m < 2) throw Error(ErrorKind::TooFewImputations, "Rubin's rules need at least 2 imputations");
  const double dof = estimates[0].dof;
  double theta_sum = 0.0;
  double w_sum = 0.0;
  for (const auto& e : estimates) {
    if (!std::isfinite(e.theta_hat) || !(e.w >= 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "complete-data estimates must be finite with w >= 0");
    }
    if (e.dof != dof) throw Error(ErrorKind::InvalidArgument, "complete-data dof differ across imputations");
    theta_sum += e.theta_hat;
    w_sum += e.w;
  }
  PooledEstimate out;
  out.imputations = m;
  out.alpha = alpha;
  out.theta_bar = theta_sum / m;
  out.w_bar = w_sum / m;
  double ss = 0.0;
  for (const auto& e : estimates) ss += (e.theta_hat - out.theta_bar) * (e.theta_hat - out.theta_bar);
  out.b = ss / (m - 1);
  out.t_total = out.w_bar + (1.0 + 1.0 / m) * out.b;
  out.df = barnard_rubin_df(out.w_bar, out.b, m, dof);
  const double half = t_critical(out.df, alpha) * std::sqrt(out.t_total);
  out.ci_lower = out.theta_bar - half;
  out.ci_upper = out.theta_bar + half;
  return out;
}

}  // namespace refmi
