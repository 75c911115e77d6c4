#include "refmi/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "refmi/error.hpp"
#include "refmi/freq_variance.hpp"
#include "refmi/parallel.hpp"

namespace refmi {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kTruthPatients = 200000;
constexpr std::size_t kMaxListedFailures = 20;

void check_truth(const ArmModel& m, int dim, const char* name) {
  if (m.mu.size() != dim || m.sigma.rows() != dim || m.sigma.cols() != dim) {
    throw Error(ErrorKind::InvalidArgument, std::string(name) + " must have dimension " + std::to_string(dim));
  }
  if (!m.mu.allFinite()) throw Error(ErrorKind::InvalidArgument, std::string(name) + " mean is not finite");
  cholesky(m.sigma);
}

void check_dropout(const DropoutSpec& d, int J, const char* name) {
  if (d.kind == DropoutSpec::Kind::Mcar) {
    if (d.rate.size() != static_cast<std::size_t>(J)) {
      throw Error(ErrorKind::InvalidArgument, std::string(name) + ": need one MCAR rate per visit 1..J");
    }
    for (double r : d.rate) {
      if (!(r >= 0.0 && r <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, std::string(name) + ": dropout rates must lie in [0,1]");
      }
    }
  } else if (!std::isfinite(d.intercept) || !std::isfinite(d.slope)) {
    throw Error(ErrorKind::InvalidArgument, std::string(name) + ": logistic parameters must be finite");
  }
}

// Visits 1..J of one patient; returns the dropout visit index D.
int draw_dropout(const DropoutSpec& spec, std::span<const double> y, int first_visit, int last_visit,
                 Stream& rng) {
  for (int visit = 1; visit <= last_visit; ++visit) {
    const int prev = visit - 1 - first_visit;
    const bool has_last = prev >= 0;
    const double h = spec.hazard(visit, has_last ? y[static_cast<std::size_t>(prev)] : 0.0, has_last);
    if (rng.uniform() < h) return visit - 1;
  }
  return last_visit;
}

Summary mean_of(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {mean, sd / std::sqrt(n)};
}

Summary proportion(std::size_t hits, std::size_t n) {
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

}  // namespace

double DropoutSpec::hazard(int visit, double last_observed, bool has_last) const {
  if (kind == Kind::Mcar) return rate[static_cast<std::size_t>(visit - 1)];
  const double eta = intercept + (has_last ? slope * last_observed : 0.0);
  return 1.0 / (1.0 + std::exp(-eta));
}

std::string_view to_string(Estimator e) noexcept {
  switch (e) {
    case Estimator::Rubin: return "rubin";
    case Estimator::BootMi: return "bootMI";
    case Estimator::SimplifiedMle: return "simplifiedMLE";
    case Estimator::CongenialBayes: return "congenialBayes";
  }
  return "unknown";
}

Estimator parse_estimator(std::string_view name) {
  for (Estimator e : {Estimator::Rubin, Estimator::BootMi, Estimator::SimplifiedMle, Estimator::CongenialBayes}) {
    if (name == to_string(e)) return e;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown estimator '" + std::string(name) +
                                              "' (rubin|bootMI|simplifiedMLE|congenialBayes)");
}

bool ScenarioConfig::wants(Estimator e) const {
  return std::find(estimators.begin(), estimators.end(), e) != estimators.end();
}

void ScenarioConfig::validate() const {
  if (n_a < 1 || n_r < 1) throw Error(ErrorKind::InvalidArgument, "n_a and n_r must be positive");
  if (J < (baseline ? 0 : 1)) throw Error(ErrorKind::InvalidArgument, "J too small for this configuration");
  check_truth(true_ref, dimension(), "true_ref");
  check_truth(true_act, dimension(), "true_act");
  check_dropout(dropout_active, J, "dropout.active");
  check_dropout(dropout_reference, J, "dropout.reference");
  if (estimators.empty()) throw Error(ErrorKind::InvalidArgument, "no estimators requested");
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    for (std::size_t j = i + 1; j < estimators.size(); ++j) {
      if (estimators[i] == estimators[j]) throw Error(ErrorKind::InvalidArgument, "duplicate estimator");
    }
  }
  if (reps < 1) throw Error(ErrorKind::InvalidArgument, "reps must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha must be in (0,1)");
  if ((wants(Estimator::Rubin) || wants(Estimator::SimplifiedMle)) && M < 2) {
    throw Error(ErrorKind::InvalidArgument, "M must be >= 2");
  }
  if (wants(Estimator::BootMi) && (B < 2 || boot_M < 2)) {
    throw Error(ErrorKind::InvalidArgument, "B and boot_M must be >= 2");
  }
  if (wants(Estimator::CongenialBayes) && bayes_draws < 2) {
    throw Error(ErrorKind::InvalidArgument, "bayes_draws must be >= 2");
  }
  if ((wants(Estimator::SimplifiedMle) || wants(Estimator::CongenialBayes)) && (baseline || J != 1)) {
    throw Error(ErrorKind::InvalidArgument,
                "simplifiedMLE and congenialBayes need J = 1 without baseline");
  }
  if (analysis == Analysis::Ancova && !baseline) {
    throw Error(ErrorKind::InvalidArgument, "ancova needs a baseline");
  }
}

TrialDataset generate_trial(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int dim = cfg.dimension();
  const int first = cfg.baseline ? 0 : 1;
  const Matrix lower[2] = {cholesky(cfg.true_ref.sigma), cholesky(cfg.true_act.sigma)};
  const Vector* mean[2] = {&cfg.true_ref.mu, &cfg.true_act.mu};
  const DropoutSpec* dropout[2] = {&cfg.dropout_reference, &cfg.dropout_active};

  const auto n = static_cast<std::size_t>(cfg.n_r + cfg.n_a);
  std::vector<PatientRecord> patients;
  patients.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool active = i >= static_cast<std::size_t>(cfg.n_r);
    const int a = active ? 1 : 0;
    Stream rng(derive_seed(seed, {i}));
    const Vector y = draw_with_factor(*mean[a], lower[a], rng);
    PatientRecord p;
    const std::size_t local = active ? i - static_cast<std::size_t>(cfg.n_r) + 1 : i + 1;
    p.id = (active ? "a" : "r") + std::to_string(local);
    p.arm = active ? Arm::Active : Arm::Reference;
    p.outcomes.assign(y.data(), y.data() + dim);
    p.dropout = draw_dropout(*dropout[a], p.outcomes, first, cfg.J, rng);
    const int observed = p.dropout + 1 - first;
    for (int k = observed; k < dim; ++k) p.outcomes[static_cast<std::size_t>(k)] = kNaN;
    patients.push_back(std::move(p));
  }
  return TrialDataset(cfg.J, cfg.baseline, std::move(patients));
}

double true_effect(const ScenarioConfig& cfg) {
  if (cfg.true_theta) return *cfg.true_theta;
  cfg.validate();
  const int dim = cfg.dimension();
  const double gap = cfg.true_act.mu[dim - 1] - cfg.true_ref.mu[dim - 1];
  const bool same = cfg.true_act.mu == cfg.true_ref.mu && cfg.true_act.sigma == cfg.true_ref.sigma;
  if (cfg.strategy == Strategy::Mar || same) return gap;
  const DropoutSpec& d = cfg.dropout_active;
  if (d.kind == DropoutSpec::Kind::Mcar) {
    // J2R conditional means of dropouts average to the reference mean.
    double complete = 1.0;
    for (double r : d.rate) complete *= 1.0 - r;
    return complete * gap;
  }
  const int first = cfg.baseline ? 0 : 1;
  const Matrix lower = cholesky(cfg.true_act.sigma);
  std::vector<ImputationPattern> patterns;
  for (int k = 0; k < dim; ++k) {
    const J2RJoint joint = build_j2r_joint(cfg.true_ref, cfg.true_act, k);
    patterns.push_back(make_pattern(joint.mu, joint.sigma, k));
  }
  const std::uint64_t seed = derive_seed(cfg.seed, {0x7472757468ULL});
  double total = 0.0;
  for (std::size_t i = 0; i < kTruthPatients; ++i) {
    Stream rng(derive_seed(seed, {i}));
    const Vector y = draw_with_factor(cfg.true_act.mu, lower, rng);
    std::span<const double> ys(y.data(), static_cast<std::size_t>(dim));
    const int observed = draw_dropout(d, ys, first, cfg.J, rng) + 1 - first;
    if (observed == dim) {
      total += y[dim - 1];
      continue;
    }
    const auto& p = patterns[static_cast<std::size_t>(observed)];
    double value = p.mean_missing[p.mean_missing.size() - 1];
    if (observed > 0) {
      value += p.slope.row(p.slope.rows() - 1).dot(y.head(observed) - p.mean_observed);
    }
    total += value;
  }
  return total / static_cast<double>(kTruthPatients) - cfg.true_ref.mu[dim - 1];
}

void ReplicationSet::add(ReplicationResult r) {
  auto pos = std::lower_bound(results_.begin(), results_.end(), r.rep,
                              [](const ReplicationResult& a, std::size_t rep) { return a.rep < rep; });
  if (pos != results_.end() && pos->rep == r.rep) {
    throw Error(ErrorKind::InvalidArgument, "replication " + std::to_string(r.rep) + " recorded twice");
  }
  results_.insert(pos, std::move(r));
}

void ReplicationSet::merge(const ReplicationSet& other) {
  for (const auto& r : other.results_) add(r);
}

ReplicationResult run_replication(const ScenarioConfig& cfg, std::size_t rep) {
  ReplicationResult out;
  out.rep = rep;
  const std::uint64_t seed = derive_seed(cfg.seed, {rep});
  try {
    const TrialDataset data = generate_trial(cfg, derive_seed(seed, {0}));
    std::vector<TrialDataset> completed;
    if (cfg.wants(Estimator::Rubin) || cfg.wants(Estimator::SimplifiedMle)) {
      completed = impute_dataset(data, cfg.strategy, cfg.M, cfg.proper, derive_seed(seed, {1}));
    }
    for (Estimator e : cfg.estimators) {
      EstimatorOutcome o;
      o.within = o.between = kNaN;
      switch (e) {
        case Estimator::Rubin: {
          std::vector<CompleteDataEstimate> ests;
          ests.reserve(completed.size());
          for (const auto& c : completed) ests.push_back(analyze(c, cfg.analysis));
          const PooledEstimate p = rubin_pool(ests, cfg.alpha);
          o = {p.theta_bar, p.t_total, p.ci_lower, p.ci_upper, p.w_bar, p.b};
          break;
        }
        case Estimator::SimplifiedMle: {
          const EmbeddedMiEstimate p = embedded_mi_pool(data, completed);
          const double half = t_critical(std::numeric_limits<double>::infinity(), cfg.alpha) * std::sqrt(p.total);
          o = {p.point, p.total, p.point - half, p.point + half, p.within, p.between};
          break;
        }
        case Estimator::BootMi: {
          const BootMiGrid grid =
              boot_then_impute(data, cfg.strategy, cfg.B, cfg.boot_M, derive_seed(seed, {2}), cfg.analysis);
          const BootMiEstimate p = vonhippel_pool(grid, cfg.alpha);
          o = {p.theta_bar, p.v_hat, p.ci_lower, p.ci_upper, p.sigma2_w, p.sigma2_b};
          break;
        }
        case Estimator::CongenialBayes: {
          const PosteriorSummary p =
              congenial_bayes_simplified(data, cfg.bayes_draws, derive_seed(seed, {3}), cfg.alpha);
          o.point = p.mean;
          o.variance = p.sd * p.sd;
          o.lower = p.lower;
          o.upper = p.upper;
          break;
        }
      }
      out.outcomes.push_back(o);
    }
    out.ok = true;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) throw;
    out.ok = false;
    out.outcomes.clear();
    out.error = e.what();
  }
  return out;
}

ReplicationSet run_replications(const ScenarioConfig& cfg, std::size_t first, std::size_t last, int threads) {
  cfg.validate();
  if (last < first) throw Error(ErrorKind::InvalidArgument, "empty replication range");
  std::vector<ReplicationResult> results(last - first);
  parallel_for(results.size(), threads, [&](std::size_t i) { results[i] = run_replication(cfg, first + i); });
  ReplicationSet set;
  for (auto& r : results) set.add(std::move(r));
  return set;
}

const EstimatorSummary& SimReport::get(Estimator e) const {
  for (const auto& s : estimators) {
    if (s.estimator == e) return s;
  }
  throw Error(ErrorKind::InvalidArgument, "estimator " + std::string(to_string(e)) + " not in report");
}

SimReport summarize(const ScenarioConfig& cfg, const ReplicationSet& set, double runtime_seconds) {
  SimReport report;
  report.config = cfg;
  report.true_theta = true_effect(cfg);
  report.replications = set.size();
  report.runtime_seconds = runtime_seconds;
  std::vector<const ReplicationResult*> ok;
  for (const auto& r : set.results()) {
    if (r.ok) {
      ok.push_back(&r);
    } else {
      ++report.failed;
      if (report.failures.size() < kMaxListedFailures) {
        report.failures.push_back("rep " + std::to_string(r.rep) + ": " + r.error);
      }
    }
  }
  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    EstimatorSummary s;
    s.estimator = cfg.estimators[e];
    s.n = ok.size();
    if (ok.empty()) {
      report.estimators.push_back(s);
      continue;
    }
    std::vector<double> points, variances, within, between;
    std::size_t covered = 0, rejected = 0;
    for (const auto* r : ok) {
      const auto& o = r->outcomes[e];
      points.push_back(o.point);
      variances.push_back(o.variance);
      if (!std::isnan(o.within)) within.push_back(o.within);
      if (!std::isnan(o.between)) between.push_back(o.between);
      covered += (o.lower <= report.true_theta && report.true_theta <= o.upper);
      rejected += (o.lower > 0.0 || o.upper < 0.0);
    }
    const double n = static_cast<double>(s.n);
    s.mean_estimate = mean_of(points);
    double ss = 0.0;
    for (double p : points) ss += (p - s.mean_estimate.value) * (p - s.mean_estimate.value);
    const double emp_var = s.n > 1 ? ss / (n - 1.0) : 0.0;
    s.empirical_sd = std::sqrt(emp_var);
    const double rel_var_se = s.n > 1 ? std::sqrt(2.0 / (n - 1.0)) : 0.0;
    s.empirical_variance = {emp_var, emp_var * rel_var_se};
    s.mean_variance = mean_of(variances);
    if (emp_var > 0.0 && s.mean_variance.value > 0.0) {
      const double ratio = s.mean_variance.value / emp_var;
      const double rel_mean_se = s.mean_variance.mcse / s.mean_variance.value;
      s.variance_ratio = {ratio, ratio * std::sqrt(rel_mean_se * rel_mean_se + rel_var_se * rel_var_se)};
    } else {
      s.variance_ratio = {kNaN, kNaN};
    }
    s.coverage = proportion(covered, s.n);
    s.rejection_rate = proportion(rejected, s.n);
    if (!within.empty()) s.mean_within = mean_of(within);
    if (!between.empty()) s.mean_between = mean_of(between);
    report.estimators.push_back(s);
  }
  return report;
}

SimReport run_scenario(const ScenarioConfig& cfg, int threads) {
  const auto start = std::chrono::steady_clock::now();
  const ReplicationSet set = run_replications(cfg, 0, static_cast<std::size_t>(cfg.reps), threads);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  SimReport report = summarize(cfg, set, elapsed);
  if (static_cast<double>(report.failed) > kMaxFailureFraction * static_cast<double>(report.replications)) {
    std::string msg = std::to_string(report.failed) + " of " + std::to_string(report.replications) +
                      " replications failed";
    if (!report.failures.empty()) msg += "; first: " + report.failures.front();
    throw Error(ErrorKind::ScenarioFailed, msg);
  }
  return report;
}

}  // namespace refmi
