#include "refmi/freq_variance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>

#include "refmi/arm_model.hpp"
#include "refmi/error.hpp"
#include "refmi/parallel.hpp"

namespace refmi {
namespace {

void require_single_followup(const TrialDataset& data) {
  if (data.has_baseline() || data.last_visit() != 1) {
    throw Error(ErrorKind::InvalidArgument,
                "the single follow-up estimators need a dataset with columns id,arm,y1");
  }
}

struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double y) {
    n += 1.0;
    const double d = y - mean;
    mean += d / n;
    m2 += d * (y - mean);
  }
  double ml_variance() const { return m2 / n; }
};

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootMiGrid boot_then_impute(const TrialDataset& data, Strategy strategy, int bootstraps, int imputations,
                            std::uint64_t seed, Analysis analysis, int threads) {
  if (bootstraps < 2 || imputations < 2) {
    throw Error(ErrorKind::InvalidArgument, "bootstrap-then-impute needs B >= 2 and M >= 2");
  }
  BootMiGrid grid;
  grid.estimates.resize(bootstraps, imputations);
  std::vector<std::vector<std::string>> retries(static_cast<std::size_t>(bootstraps));

  parallel_for(static_cast<std::size_t>(bootstraps), threads, [&](std::size_t b) {
    for (int attempt = 0; attempt < kMaxBootstrapAttempts; ++attempt) {
      const auto a64 = static_cast<std::uint64_t>(attempt);
      try {
        Stream rng(derive_seed(seed, {b, a64, 0}));
        const TrialDataset sample = resample(data, rng);
        const ModelNeeds needs = model_needs(sample, strategy);
        std::optional<ArmModel> ref;
        std::optional<ArmModel> act;
        if (needs.reference) ref = fit_mle(sample, Arm::Reference);
        if (needs.active) act = fit_mle(sample, Arm::Active);
        const Imputer imputer(std::move(ref), std::move(act), strategy);
        const auto completed = impute_with_models(sample, imputer, imputations, derive_seed(seed, {b, a64, 1}));
        for (int m = 0; m < imputations; ++m) {
          grid.estimates(static_cast<Eigen::Index>(b), m) =
              analyze(completed[static_cast<std::size_t>(m)], analysis).theta_hat;
        }
        return;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidArgument) throw;
        retries[b].push_back("bootstrap " + std::to_string(b + 1) + " attempt " +
                             std::to_string(attempt + 1) + ": " + e.what());
      }
    }
    throw Error(ErrorKind::BootstrapFailed,
                "bootstrap " + std::to_string(b + 1) + " failed " + std::to_string(kMaxBootstrapAttempts) +
                    " times; last: " + retries[b].back());
  });
  for (auto& r : retries) grid.retries.insert(grid.retries.end(), r.begin(), r.end());
  return grid;
}

void write_grid_csv(const BootMiGrid& grid, std::ostream& out) {
  out << "b,m,theta\n";
  out.precision(17);
  for (Eigen::Index b = 0; b < grid.estimates.rows(); ++b) {
    for (Eigen::Index m = 0; m < grid.estimates.cols(); ++m) {
      out << (b + 1) << ',' << (m + 1) << ',' << grid.estimates(b, m) << '\n';
    }
  }
}

double BootMiEstimate::se() const { return std::sqrt(v_hat); }

BootMiEstimate vonhippel_pool(const BootMiGrid& grid, double alpha) {
  const Eigen::Index nb = grid.estimates.rows();
  const Eigen::Index nm = grid.estimates.cols();
  if (nb < 2 || nm < 2) throw Error(ErrorKind::InvalidArgument, "grid needs B >= 2 and M >= 2");
  if (!grid.estimates.allFinite()) throw Error(ErrorKind::InvalidArgument, "grid has non-finite entries");
  const double b = static_cast<double>(nb);
  const double m = static_cast<double>(nm);

  const Vector row_means = grid.estimates.rowwise().mean();
  const double grand = row_means.mean();
  const double ms_between = m * (row_means.array() - grand).square().sum() / (b - 1.0);
  const double ms_within =
      (grid.estimates.colwise() - row_means).array().square().sum() / (b * (m - 1.0));

  BootMiEstimate out;
  out.bootstraps = static_cast<int>(nb);
  out.imputations = static_cast<int>(nm);
  out.alpha = alpha;
  out.theta_bar = grand;
  out.sigma2_w = ms_within;
  out.sigma2_b = std::max(0.0, (ms_between - ms_within) / m);
  out.v_hat = (1.0 + 1.0 / b) * out.sigma2_b + out.sigma2_w / (b * m);

  const double df_between = b - 1.0;
  const double df_within = b * (m - 1.0);
  if (out.sigma2_b > 0.0) {
    // v_hat = c_b MS_between + c_w MS_within
    const double c_b = (b + 1.0) / (b * m);
    const double c_w = -1.0 / m;
    const double denom = std::pow(c_b * ms_between, 2) / df_between + std::pow(c_w * ms_within, 2) / df_within;
    out.df = out.v_hat * out.v_hat / denom;
  } else {
    out.df = df_within;
  }
  if (!(out.v_hat > 0.0)) {
    out.degenerate = true;
    out.v_hat = 0.0;
    out.df = df_within;
    out.ci_lower = out.ci_upper = grand;
    return out;
  }
  const double half = t_critical(out.df, alpha) * std::sqrt(out.v_hat);
  out.ci_lower = grand - half;
  out.ci_upper = grand + half;
  return out;
}

SimplifiedStats simplified_stats(const TrialDataset& observed, const TrialDataset& completed) {
  require_single_followup(observed);
  require_single_followup(completed);
  if (!completed.fully_observed() || completed.size() != observed.size()) {
    throw Error(ErrorKind::InvalidArgument, "completed dataset does not match the observed one");
  }
  Moments active_obs, ref_obs, ref_com;
  std::size_t n_a = 0, n_r = 0, active_missing = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed.id(i) != completed.id(i) || observed.arm(i) != completed.arm(i)) {
      throw Error(ErrorKind::InvalidArgument, "completed dataset rows do not match the observed ones");
    }
    const bool seen = observed.dropout(i) == 1;
    const double y = completed.final_outcome(i);
    if (observed.arm(i) == Arm::Active) {
      ++n_a;
      if (seen) {
        active_obs.add(y);
      } else {
        ++active_missing;
        ref_com.add(y);
      }
    } else {
      ++n_r;
      if (seen) ref_obs.add(y);
      ref_com.add(y);
    }
  }
  if (n_a == 0 || n_r == 0) throw Error(ErrorKind::EmptyArm, "both arms must be present");
  if (ref_obs.n == 0) throw Error(ErrorKind::NoObservedReference, "no observed reference outcome");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  SimplifiedStats s;
  s.n_a = n_a;
  s.n_r = n_r;
  s.pi_hat_1 = static_cast<double>(active_missing) / static_cast<double>(n_a);
  s.mu_hat_a = active_obs.n > 0 ? active_obs.mean : nan;
  s.sigma2_hat_a = active_obs.n > 0 ? active_obs.ml_variance() : nan;
  s.mu_hat_r_obs = ref_obs.mean;
  s.mu_hat_r_com = ref_com.mean;
  s.sigma2_hat_r = ref_com.ml_variance();
  return s;
}

double simplified_point(const TrialDataset& observed) {
  require_single_followup(observed);
  Moments active_obs, ref_obs;
  std::size_t n_a = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const bool seen = observed.dropout(i) == 1;
    if (observed.arm(i) == Arm::Active) {
      ++n_a;
      if (seen) active_obs.add(observed.final_outcome(i));
    } else if (seen) {
      ref_obs.add(observed.final_outcome(i));
    }
  }
  if (n_a == 0) throw Error(ErrorKind::EmptyArm, "no active patients");
  if (ref_obs.n == 0) throw Error(ErrorKind::NoObservedReference, "no observed reference outcome");
  if (active_obs.n == 0) return 0.0;
  const double pi_1 = 1.0 - active_obs.n / static_cast<double>(n_a);
  return (active_obs.mean - ref_obs.mean) * (1.0 - pi_1);
}

double simplified_complete_mle(const SimplifiedStats& s) {
  if (s.pi_hat_1 == 1.0) return 0.0;
  return (s.mu_hat_a - s.mu_hat_r_com) * (1.0 - s.pi_hat_1);
}

double simplified_mle_variance(const SimplifiedStats& s) {
  if (!(s.pi_hat_1 >= 0.0 && s.pi_hat_1 <= 1.0) || !(s.sigma2_hat_r >= 0.0) || s.n_a == 0 || s.n_r == 0) {
    throw Error(ErrorKind::InvalidArgument, "invalid single follow-up statistics");
  }
  if (s.pi_hat_1 == 1.0) return 0.0;
  if (!(s.sigma2_hat_a >= 0.0)) throw Error(ErrorKind::InvalidArgument, "invalid active-arm variance");
  const double pi = s.pi_hat_1;
  const double n_a = static_cast<double>(s.n_a);
  const double n_r = static_cast<double>(s.n_r);
  const double gap = s.mu_hat_r_com - s.mu_hat_a;
  return (1.0 - pi) *
         (s.sigma2_hat_r * (1.0 - pi) / (n_r + n_a * pi) + s.sigma2_hat_a / n_a + gap * gap * pi / n_a);
}

double simplified_var_active(double mu_a, double mu_r, double sigma2_a, double sigma2_r, double pi_1) {
  if (!(pi_1 >= 0.0 && pi_1 <= 1.0)) throw Error(ErrorKind::InvalidArgument, "pi_1 must be in [0, 1]");
  const double gap = mu_a - mu_r;
  return gap * gap * pi_1 * (1.0 - pi_1) + sigma2_a * (1.0 - pi_1) + sigma2_r * pi_1;
}

EmbeddedMiEstimate embedded_mi_pool(const TrialDataset& observed, std::span<const TrialDataset> completed) {
  const auto m = static_cast<double>(completed.size());
  if (completed.size() < 2) throw Error(ErrorKind::TooFewImputations, "need at least 2 imputations");
  std::vector<double> points;
  points.reserve(completed.size());
  double within = 0.0;
  for (const auto& c : completed) {
    const SimplifiedStats s = simplified_stats(observed, c);
    points.push_back(simplified_complete_mle(s));
    within += simplified_mle_variance(s);
  }
  EmbeddedMiEstimate out;
  for (double p : points) out.point += p;
  out.point /= m;
  for (double p : points) out.between += (p - out.point) * (p - out.point);
  out.between /= (m - 1.0);
  out.within = within / m;
  out.total = out.within + (1.0 + 1.0 / m) * out.between;
  return out;
}

PosteriorSummary congenial_bayes_simplified(const TrialDataset& observed, int draws, std::uint64_t seed,
                                            double alpha) {
  require_single_followup(observed);
  if (draws < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 posterior draws");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha must be in (0,1)");
  Moments group[2];
  double active_missing = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const int a = static_cast<int>(observed.arm(i));
    if (observed.dropout(i) == 1) {
      group[a].add(observed.final_outcome(i));
    } else if (a == 1) {
      active_missing += 1.0;
    }
  }
  for (int a = 0; a < 2; ++a) {
    if (group[a].n < 2) {
      throw Error(ErrorKind::InsufficientData, std::string(a == 1 ? "active" : "reference") +
                                                   " arm needs at least 2 observed outcomes");
    }
  }
  Stream rng(seed);
  std::chi_squared_distribution<double> chi_r(group[0].n - 1.0);
  std::chi_squared_distribution<double> chi_a(group[1].n - 1.0);
  std::gamma_distribution<double> gamma_missing(1.0 + active_missing);
  std::gamma_distribution<double> gamma_observed(1.0 + group[1].n);

  std::vector<double> theta(static_cast<std::size_t>(draws));
  for (auto& t : theta) {
    const double var_r = group[0].m2 / chi_r(rng);
    const double mu_r = group[0].mean + std::sqrt(var_r / group[0].n) * rng.normal();
    const double var_a = group[1].m2 / chi_a(rng);
    const double mu_a = group[1].mean + std::sqrt(var_a / group[1].n) * rng.normal();
    const double g_miss = gamma_missing(rng);
    const double g_obs = gamma_observed(rng);
    const double pi_1 = g_miss / (g_miss + g_obs);
    t = (mu_a - mu_r) * (1.0 - pi_1);
  }
  PosteriorSummary out;
  out.draws = draws;
  for (double t : theta) out.mean += t;
  out.mean /= draws;
  double ss = 0.0;
  for (double t : theta) ss += (t - out.mean) * (t - out.mean);
  out.sd = std::sqrt(ss / (draws - 1));
  std::sort(theta.begin(), theta.end());
  out.lower = quantile_sorted(theta, alpha / 2);
  out.upper = quantile_sorted(theta, 1.0 - alpha / 2);
  return out;
}

}  // namespace refmi
