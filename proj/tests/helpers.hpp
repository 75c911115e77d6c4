#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "refmi/arm_model.hpp"
#include "refmi/mvn.hpp"
#include "refmi/rng.hpp"
#include "refmi/trial_data.hpp"

namespace testutil {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Row {
  std::string id;
  int arm;
  std::vector<double> y;
};

// Dropout follows the last non-missing position.
inline refmi::TrialDataset make(int last_visit, bool baseline, const std::vector<Row>& rows) {
  std::vector<refmi::PatientRecord> recs;
  const int first = baseline ? 0 : 1;
  for (const auto& r : rows) {
    int last = -1;
    for (int k = 0; k < static_cast<int>(r.y.size()); ++k) {
      if (!std::isnan(r.y[static_cast<std::size_t>(k)])) last = k;
    }
    recs.push_back({r.id, r.arm ? refmi::Arm::Active : refmi::Arm::Reference, last + first, r.y});
  }
  return refmi::TrialDataset(last_visit, baseline, std::move(recs));
}

inline refmi::Matrix random_pd(int dim, refmi::Stream& rng) {
  refmi::Matrix g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
  refmi::Matrix m = g * g.transpose() + 0.5 * refmi::Matrix::Identity(dim, dim);
  return refmi::symmetrize(m);
}

inline refmi::Vector random_vector(int dim, refmi::Stream& rng) {
  refmi::Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = 2.0 * rng.normal();
  return v;
}

inline double rel_diff(const refmi::Matrix& a, const refmi::Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Fully observed draws from one model per arm.
inline refmi::TrialDataset simulate_complete(const refmi::ArmModel& ref, const refmi::ArmModel& act, int n_r, int n_a,
                                             bool baseline, std::uint64_t seed) {
  refmi::Stream rng(seed);
  const int dim = static_cast<int>(ref.mu.size());
  const refmi::Matrix lr = refmi::cholesky(ref.sigma);
  const refmi::Matrix la = refmi::cholesky(act.sigma);
  std::vector<refmi::PatientRecord> recs;
  for (int i = 0; i < n_r + n_a; ++i) {
    const bool active = i >= n_r;
    const refmi::Vector y = refmi::draw_with_factor(active ? act.mu : ref.mu, active ? la : lr, rng);
    recs.push_back({(active ? "a" : "r") + std::to_string(i), active ? refmi::Arm::Active : refmi::Arm::Reference,
                    dim - (baseline ? 1 : 0), std::vector<double>(y.data(), y.data() + dim)});
  }
  return refmi::TrialDataset(dim - (baseline ? 1 : 0), baseline, std::move(recs));
}

// Blanks the tail of each record after an MCAR dropout draw per visit.
inline refmi::TrialDataset mcar_dropout(const refmi::TrialDataset& full, double rate_active, double rate_reference,
                                        std::uint64_t seed) {
  refmi::Stream rng(seed);
  auto recs = full.records();
  const int first = full.first_visit();
  for (auto& r : recs) {
    const double rate = r.arm == refmi::Arm::Active ? rate_active : rate_reference;
    for (int k = first == 0 ? 1 : 0; k < static_cast<int>(r.outcomes.size()); ++k) {
      if (rng.uniform() < rate) {
        for (std::size_t j = static_cast<std::size_t>(k); j < r.outcomes.size(); ++j) r.outcomes[j] = kNaN;
        r.dropout = k - 1 + first;
        break;
      }
    }
  }
  return refmi::TrialDataset(full.last_visit(), full.has_baseline(), std::move(recs));
}

}  // namespace testutil
