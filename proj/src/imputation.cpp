#include "refmi/imputation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "refmi/error.hpp"

namespace refmi {

std::string_view to_string(Strategy s) noexcept { return s == Strategy::Mar ? "mar" : "j2r"; }

Strategy parse_strategy(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "mar") return Strategy::Mar;
  if (lower == "j2r") return Strategy::J2R;
  throw Error(ErrorKind::InvalidArgument, "unknown strategy '" + std::string(name) + "' (mar|j2r)");
}

J2RJoint build_j2r_joint(const ArmModel& reference, const ArmModel& active, int observed) {
  const Eigen::Index dim = reference.dimension();
  if (active.dimension() != dim) {
    throw Error(ErrorKind::InvalidArgument, "arm models have different dimensions");
  }
  if (observed < 0 || observed >= dim) {
    throw Error(ErrorKind::InvalidArgument, "observed count must be in [0, dimension)");
  }
  const Eigen::Index k = observed;
  const Eigen::Index m = dim - k;
  J2RJoint joint;
  joint.observed = observed;
  joint.mu.resize(dim);
  joint.mu.head(k) = active.mu.head(k);
  joint.mu.tail(m) = reference.mu.tail(m);
  joint.sigma.resize(dim, dim);

  const Matrix& r = reference.sigma;
  if (k == 0) {
    joint.sigma = symmetrize(r);
  } else {
    const Matrix a11 = active.sigma.topLeftCorner(k, k);
    const Matrix r11_lower = cholesky(r.topLeftCorner(k, k));
    // g = R11^-1 R12
    const Matrix g = cholesky_solve(r11_lower, r.topRightCorner(k, m));
    const Matrix s21 = g.transpose() * a11;
    const Matrix s22 = r.bottomRightCorner(m, m) - g.transpose() * (r.topLeftCorner(k, k) - a11) * g;
    joint.sigma.topLeftCorner(k, k) = a11;
    joint.sigma.bottomLeftCorner(m, k) = s21;
    joint.sigma.topRightCorner(k, m) = s21.transpose();
    joint.sigma.bottomRightCorner(m, m) = symmetrize(s22);
  }
  cholesky(joint.sigma);
  return joint;
}

ImputationPattern make_pattern(const Vector& mu, const Matrix& sigma, int observed) {
  const Eigen::Index dim = mu.size();
  const Eigen::Index k = observed;
  const Eigen::Index m = dim - k;
  ImputationPattern p;
  p.mean_observed = mu.head(k);
  p.mean_missing = mu.tail(m);
  if (k == 0) {
    p.slope = Matrix::Zero(m, 0);
    p.lower = cholesky_psd(symmetrize(sigma));
    return p;
  }
  const Matrix lower = cholesky(sigma.topLeftCorner(k, k));
  // slope = S_mo S_oo^-1
  p.slope = cholesky_solve(lower, sigma.topRightCorner(k, m)).transpose();
  const Matrix cond = sigma.bottomRightCorner(m, m) - p.slope * sigma.topRightCorner(k, m);
  p.lower = cholesky_psd(symmetrize(cond));
  return p;
}

Imputer::Imputer(std::optional<ArmModel> reference, std::optional<ArmModel> active, Strategy strategy)
    : strategy_(strategy) {
  if (reference && active && reference->dimension() != active->dimension()) {
    throw Error(ErrorKind::InvalidArgument, "arm models have different dimensions");
  }
  if (reference) {
    for (int k = 0; k < reference->dimension(); ++k) {
      patterns_[0].push_back(make_pattern(reference->mu, reference->sigma, k));
    }
  }
  if (strategy == Strategy::Mar) {
    if (active) {
      for (int k = 0; k < active->dimension(); ++k) {
        patterns_[1].push_back(make_pattern(active->mu, active->sigma, k));
      }
    }
  } else if (reference) {
    // Nothing observed: the reference marginal, no active model needed.
    patterns_[1].push_back(patterns_[0].front());
    if (active) {
      for (int k = 1; k < active->dimension(); ++k) {
        const J2RJoint joint = build_j2r_joint(*reference, *active, k);
        patterns_[1].push_back(make_pattern(joint.mu, joint.sigma, k));
      }
    }
  }
}

const ImputationPattern& Imputer::pattern(Arm arm, int observed) const {
  const auto& list = patterns_[static_cast<int>(arm)];
  if (observed < 0 || static_cast<std::size_t>(observed) >= list.size()) {
    throw Error(ErrorKind::InvalidArgument,
                std::string("no imputation model available for the ") +
                    (arm == Arm::Active ? "active" : "reference") + " arm");
  }
  return list[static_cast<std::size_t>(observed)];
}

void Imputer::fill(std::span<double> row, Arm arm, int observed, Stream& rng) const {
  const auto& p = pattern(arm, observed);
  const Eigen::Index k = observed;
  const Eigen::Index m = p.mean_missing.size();
  Eigen::Map<const Vector> y_obs(row.data(), k);
  Vector z(m);
  for (Eigen::Index c = 0; c < m; ++c) z[c] = rng.normal();
  Vector draw = p.mean_missing + p.lower.triangularView<Eigen::Lower>() * z;
  if (k > 0) draw += p.slope * (y_obs - p.mean_observed);
  Eigen::Map<Vector>(row.data() + k, m) = draw;
}

TrialDataset Imputer::impute(const TrialDataset& data, std::uint64_t seed) const {
  const auto dim = static_cast<std::size_t>(data.dimension());
  std::vector<double> filled;
  filled.reserve(data.size() * dim);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto y = data.outcomes(i);
    filled.insert(filled.end(), y.begin(), y.end());
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int observed = data.observed_count(i);
    if (static_cast<std::size_t>(observed) == dim) continue;
    Stream rng(derive_seed(seed, {data.id_hash(i)}));
    fill(std::span<double>(filled.data() + i * dim, dim), data.arm(i), observed, rng);
  }
  return data.completed_with(std::move(filled));
}

PatientRecord impute_patient(const PatientRecord& record, int first_visit, const ArmModel& reference,
                             const ArmModel& active, Strategy strategy, Stream& rng) {
  const int dim = static_cast<int>(record.outcomes.size());
  const int observed = record.dropout + 1 - first_visit;
  if (observed < 0 || observed > dim) {
    throw Error(ErrorKind::InvalidArgument, "patient " + record.id + ": dropout out of range");
  }
  for (int k = 0; k < dim; ++k) {
    if (std::isnan(record.outcomes[static_cast<std::size_t>(k)]) != (k >= observed)) {
      throw Error(ErrorKind::NonMonotoneMissingness,
                  "patient " + record.id + ": outcomes do not match dropout");
    }
  }
  PatientRecord out = record;
  if (observed == dim) return out;

  Vector mu;
  Matrix sigma;
  if (record.arm == Arm::Reference) {
    mu = reference.mu;
    sigma = reference.sigma;
  } else if (strategy == Strategy::Mar) {
    mu = active.mu;
    sigma = active.sigma;
  } else {
    J2RJoint joint = build_j2r_joint(reference, active, observed);
    mu = std::move(joint.mu);
    sigma = std::move(joint.sigma);
  }
  const ImputationPattern p = make_pattern(mu, sigma, observed);
  Eigen::Map<const Vector> y_obs(record.outcomes.data(), observed);
  Vector z(dim - observed);
  for (Eigen::Index c = 0; c < z.size(); ++c) z[c] = rng.normal();
  Vector draw = p.mean_missing + p.lower.triangularView<Eigen::Lower>() * z;
  if (observed > 0) draw += p.slope * (y_obs - p.mean_observed);
  for (int k = observed; k < dim; ++k) out.outcomes[static_cast<std::size_t>(k)] = draw[k - observed];
  out.dropout = dim - 1 + first_visit;
  return out;
}

ModelNeeds model_needs(const TrialDataset& data, Strategy strategy) {
  ModelNeeds needs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.observed_count(i) == data.dimension()) continue;
    if (data.arm(i) == Arm::Active) {
      if (strategy == Strategy::Mar || data.observed_count(i) > 0) needs.active = true;
      if (strategy == Strategy::J2R) needs.reference = true;
    } else {
      needs.reference = true;
    }
  }
  return needs;
}

std::vector<TrialDataset> impute_with_models(const TrialDataset& data, const Imputer& imputer,
                                             int imputations, std::uint64_t seed) {
  if (imputations < 1) throw Error(ErrorKind::InvalidArgument, "imputation count must be >= 1");
  std::vector<TrialDataset> out;
  out.reserve(static_cast<std::size_t>(imputations));
  for (int m = 0; m < imputations; ++m) {
    out.push_back(imputer.impute(data, derive_seed(seed, {static_cast<std::uint64_t>(m), 1})));
  }
  return out;
}

std::vector<TrialDataset> impute_dataset(const TrialDataset& data, Strategy strategy, int imputations,
                                         bool proper, std::uint64_t seed) {
  if (imputations < 1) throw Error(ErrorKind::InvalidArgument, "imputation count must be >= 1");
  const ModelNeeds needs = model_needs(data, strategy);
  if (!needs.reference && !needs.active) {
    return std::vector<TrialDataset>(static_cast<std::size_t>(imputations), data);
  }
  if (!proper) {
    std::optional<ArmModel> ref;
    std::optional<ArmModel> act;
    if (needs.reference) ref = fit_mle(data, Arm::Reference);
    if (needs.active) act = fit_mle(data, Arm::Active);
    return impute_with_models(data, Imputer(std::move(ref), std::move(act), strategy), imputations, seed);
  }
  std::vector<TrialDataset> out;
  out.reserve(static_cast<std::size_t>(imputations));
  for (int m = 0; m < imputations; ++m) {
    const auto m64 = static_cast<std::uint64_t>(m);
    std::optional<ArmModel> ref;
    std::optional<ArmModel> act;
    if (needs.reference) {
      Stream rng(derive_seed(seed, {m64, 2, 0}));
      ref = posterior_draw(data, Arm::Reference, rng);
    }
    if (needs.active) {
      Stream rng(derive_seed(seed, {m64, 2, 1}));
      act = posterior_draw(data, Arm::Active, rng);
    }
    const Imputer imputer(std::move(ref), std::move(act), strategy);
    out.push_back(imputer.impute(data, derive_seed(seed, {m64, 1})));
  }
  return out;
}

}  // namespace refmi
