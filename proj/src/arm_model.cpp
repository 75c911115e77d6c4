#include "refmi/arm_model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "refmi/error.hpp"

namespace refmi {
namespace {

std::string arm_name(Arm arm) { return arm == Arm::Active ? "active" : "reference"; }

// Least-squares summary of one stage: X = QR with R upper triangular.
struct StageFit {
  int n = 0;
  Vector beta;
  Matrix r_factor;
  double rss = 0.0;
};

std::vector<StageFit> fit_stages(const TrialDataset& data, Arm arm) {
  const int dim = data.dimension();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.arm(i) == arm) rows.push_back(i);
  }
  std::vector<StageFit> fits;
  fits.reserve(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim; ++k) {
    std::erase_if(rows, [&](std::size_t i) { return data.observed_count(i) < k + 1; });
    const int p = k + 1;
    const auto n = static_cast<int>(rows.size());
    if (n < p + 2) {
      throw Error(ErrorKind::InsufficientData,
                  arm_name(arm) + " arm: " + std::to_string(n) + " patients observed at visit " +
                      std::to_string(k + data.first_visit()) + ", need at least " +
                      std::to_string(p + 2));
    }
    Matrix x(n, p);
    Vector y(n);
    for (int r = 0; r < n; ++r) {
      const auto i = rows[static_cast<std::size_t>(r)];
      x(r, 0) = 1.0;
      for (int c = 0; c < k; ++c) x(r, c + 1) = data.outcome(i, c);
      y[r] = data.outcome(i, k);
    }
    Eigen::HouseholderQR<Matrix> qr(x);
    Matrix r_factor = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const Vector diag = r_factor.diagonal().cwiseAbs();
    if (!(diag.minCoeff() > 1e-10 * diag.maxCoeff())) {
      throw Error(ErrorKind::SingularDesign, arm_name(arm) + " arm: collinear predictors at visit " +
                                                 std::to_string(k + data.first_visit()));
    }
    StageFit fit;
    fit.n = n;
    fit.beta = qr.solve(y);
    fit.rss = (y - x * fit.beta).squaredNorm();
    fit.r_factor = std::move(r_factor);
    fits.push_back(std::move(fit));
  }
  return fits;
}

}  // namespace

SequentialFactors factor(const ArmModel& model) {
  const Eigen::Index dim = model.dimension();
  SequentialFactors out;
  out.stages.reserve(static_cast<std::size_t>(dim));
  for (Eigen::Index k = 0; k < dim; ++k) {
    RegressionStage stage;
    stage.coef.resize(k + 1);
    if (k == 0) {
      stage.coef[0] = model.mu[0];
      stage.residual_variance = model.sigma(0, 0);
    } else {
      const Matrix lower = cholesky(model.sigma.topLeftCorner(k, k));
      const Vector b = cholesky_solve(lower, model.sigma.block(0, k, k, 1));
      stage.coef[0] = model.mu[k] - b.dot(model.mu.head(k));
      stage.coef.tail(k) = b;
      stage.residual_variance = model.sigma(k, k) - model.sigma.block(0, k, k, 1).col(0).dot(b);
    }
    out.stages.push_back(std::move(stage));
  }
  return out;
}

ArmModel recompose(const SequentialFactors& factors) {
  const auto dim = static_cast<Eigen::Index>(factors.stages.size());
  ArmModel m{Vector::Zero(dim), Matrix::Zero(dim, dim)};
  for (Eigen::Index k = 0; k < dim; ++k) {
    const auto& stage = factors.stages[static_cast<std::size_t>(k)];
    if (stage.coef.size() != k + 1) {
      throw Error(ErrorKind::InvalidArgument, "regression stage " + std::to_string(k) +
                                                  " has the wrong number of coefficients");
    }
    if (!(stage.residual_variance > 0.0)) {
      throw Error(ErrorKind::NotPositiveDefinite,
                  "zero residual variance at regression stage " + std::to_string(k));
    }
    if (k == 0) {
      m.mu[0] = stage.coef[0];
      m.sigma(0, 0) = stage.residual_variance;
      continue;
    }
    const Vector b = stage.coef.tail(k);
    const Vector c = m.sigma.topLeftCorner(k, k) * b;
    m.mu[k] = stage.coef[0] + b.dot(m.mu.head(k));
    m.sigma.block(0, k, k, 1) = c;
    m.sigma.block(k, 0, 1, k) = c.transpose();
    m.sigma(k, k) = stage.residual_variance + b.dot(c);
  }
  return m;
}

ArmModel fit_mle(const TrialDataset& data, Arm arm) {
  SequentialFactors factors;
  for (auto& fit : fit_stages(data, arm)) {
    factors.stages.push_back({std::move(fit.beta), fit.rss / fit.n});
  }
  return recompose(factors);
}

ArmModel posterior_draw(const TrialDataset& data, Arm arm, Stream& rng) {
  SequentialFactors factors;
  for (auto& fit : fit_stages(data, arm)) {
    const auto p = fit.beta.size();
    std::chi_squared_distribution<double> chi2(static_cast<double>(fit.n - p));
    const double variance = fit.rss / chi2(rng);
    Vector z(p);
    for (Eigen::Index c = 0; c < p; ++c) z[c] = rng.normal();
    Vector coef = fit.beta + std::sqrt(variance) * fit.r_factor.triangularView<Eigen::Upper>().solve(z);
    factors.stages.push_back({std::move(coef), variance});
  }
  return recompose(factors);
}

}  // namespace refmi
