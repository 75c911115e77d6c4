// Acceptance checks. Prints one PASS/FAIL line per check and exits non-zero
// if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "refmi/analysis.hpp"
#include "refmi/error.hpp"
#include "refmi/freq_variance.hpp"
#include "refmi/imputation.hpp"
#include "refmi/mvn.hpp"
#include "refmi/simulation.hpp"

using namespace refmi;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

Matrix random_pd(int dim, Stream& rng) {
  Matrix g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
  return symmetrize(g * g.transpose() + 0.5 * Matrix::Identity(dim, dim));
}

ScenarioConfig null_single_followup(double active_dropout) {
  ScenarioConfig cfg;
  cfg.n_a = cfg.n_r = 250;
  cfg.J = 1;
  cfg.baseline = false;
  cfg.true_ref = cfg.true_act = ArmModel{Vector::Zero(1), Matrix::Identity(1, 1)};
  cfg.dropout_active = {DropoutSpec::Kind::Mcar, {active_dropout}, 0, 0};
  cfg.dropout_reference = {DropoutSpec::Kind::Mcar, {0.0}, 0, 0};
  cfg.strategy = Strategy::J2R;
  cfg.M = 25;
  cfg.proper = true;
  cfg.B = 200;
  cfg.boot_M = 2;
  cfg.reps = 2000;
  cfg.seed = 20240611;
  return cfg;
}

void null_scenario_checks() {
  auto cfg = null_single_followup(0.5);
  cfg.estimators = {Estimator::Rubin, Estimator::BootMi, Estimator::SimplifiedMle};
  const auto start = std::chrono::steady_clock::now();
  const SimReport r = run_scenario(cfg, threads());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& rubin = r.get(Estimator::Rubin);
  const auto& boot = r.get(Estimator::BootMi);
  const auto& simple = r.get(Estimator::SimplifiedMle);

  const double rubin_ratio = rubin.mean_variance.value / rubin.empirical_variance.value;
  const double simple_ratio = simple.variance_ratio.value;
  report(rubin_ratio > 1.2 && simple_ratio >= 0.9 && simple_ratio <= 1.1 && secs < 300,
         "Rubin variance biased upwards, embedding-model MLE variance unbiased",
         fmt("mean T / Var(theta) = %.3f (need > 1.2); MLE variance ratio = %.3f +- %.3f (need [0.9, 1.1]); "
             "%zu reps, %zu failed, %.0f s",
             rubin_ratio, simple_ratio, simple.variance_ratio.mcse, r.replications, r.failed, secs));

  report(rubin.rejection_rate.value < 0.04 && boot.rejection_rate.value >= 0.035 &&
             boot.rejection_rate.value <= 0.065,
         "conservative type I error under the null",
         fmt("Rubin rejection = %.4f (need < 0.04); bootstrap-MI rejection = %.4f +- %.4f (need [0.035, 0.065])",
             rubin.rejection_rate.value, boot.rejection_rate.value, boot.rejection_rate.mcse));

  const double boot_ratio = boot.mean_variance.value / boot.empirical_variance.value;
  report(std::abs(boot_ratio - 1.0) <= 0.1, "random-intercepts pooling calibration",
         fmt("mean v_hat = %.6f, empirical variance = %.6f +- %.6f, ratio %.3f (need within 10%%)",
             boot.mean_variance.value, boot.empirical_variance.value, boot.empirical_variance.mcse, boot_ratio));
}

void mi_convergence_check() {
  auto cfg = null_single_followup(0.5);
  cfg.true_act.mu[0] = 0.4;
  const TrialDataset data = generate_trial(cfg, 777);
  const int m = 10000;
  const auto completed = impute_dataset(data, Strategy::J2R, m, false, 778);
  std::vector<double> theta;
  theta.reserve(m);
  for (const auto& c : completed) theta.push_back(analyze_diff_means(c).theta_hat);
  double mean = 0;
  for (double t : theta) mean += t;
  mean /= m;
  double ss = 0;
  for (double t : theta) ss += (t - mean) * (t - mean);
  const double se = std::sqrt(ss / (m - 1) / m);
  const double target = simplified_point(data);
  report(std::abs(mean - target) <= 3 * se, "improper J2R MI converges to the observed-data estimate",
         fmt("MI mean = %.6f, (mu_a - mu_r_obs)(1 - pi) = %.6f, |diff| = %.2e, 3 MC SE = %.2e", mean, target,
             std::abs(mean - target), 3 * se));
}

void extreme_missingness_check() {
  auto cfg = null_single_followup(0.95);
  cfg.estimators = {Estimator::Rubin, Estimator::SimplifiedMle};
  cfg.reps = 1000;
  cfg.seed = 95;
  const SimReport r = run_scenario(cfg, threads());
  const auto& rubin = r.get(Estimator::Rubin);
  const auto& simple = r.get(Estimator::SimplifiedMle);
  const double analyst = rubin.mean_within->value;
  const double mle_var = simple.mean_within->value;
  const double t = rubin.mean_variance.value;
  const bool ok = std::abs(rubin.mean_estimate.value) <= 3 * rubin.mean_estimate.mcse && mle_var < 0.1 * analyst &&
                  t > 0.5 * analyst;
  report(ok, "95% active dropout: estimate near zero, MLE variance collapses",
         fmt("mean estimate = %.5f (3 MC SE = %.5f); MLE variance = %.6f vs 0.1 x analyst W = %.6f; "
             "T = %.6f vs 0.5 x W = %.6f",
             rubin.mean_estimate.value, 3 * rubin.mean_estimate.mcse, mle_var, 0.1 * analyst, t, 0.5 * analyst));
}

void joint_identity_check() {
  Stream rng(5150);
  double worst = 0.0;
  bool copied = true;
  for (int rep = 0; rep < 1000; ++rep) {
    const int dim = 2 + static_cast<int>(rng() % 7);
    const int k = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(dim - 1));
    const Matrix r = random_pd(dim, rng);
    const Matrix a = random_pd(dim, rng);
    const J2RJoint j = build_j2r_joint(ArmModel{Vector::Zero(dim), r}, ArmModel{Vector::Zero(dim), a}, k);
    if (!(j.sigma.topLeftCorner(k, k).array() == a.topLeftCorner(k, k).array()).all()) copied = false;
    const int m = dim - k;
    const auto schur = [&](const Matrix& s) {
      const Eigen::LDLT<Matrix> ldlt(s.topLeftCorner(k, k));
      return Matrix(s.bottomRightCorner(m, m) - s.bottomLeftCorner(m, k) * ldlt.solve(s.topRightCorner(k, m)));
    };
    const Matrix target = schur(r);
    worst = std::max(worst, (schur(j.sigma) - target).norm() / target.norm());
  }
  report(copied && worst <= 1e-10, "J2R joint covariance identities",
         fmt("observed block copied exactly: %s; worst relative Schur error %.2e (need <= 1e-10) over 1000 pairs",
             copied ? "yes" : "no", worst));
}

void conditioning_check() {
  using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  Stream rng(6006);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const Matrix s = random_pd(3, rng);
    Vector mu(3);
    for (int i = 0; i < 3; ++i) mu[i] = 2 * rng.normal();
    std::vector<int> obs;
    std::vector<int> mis;
    const int n_obs = 1 + static_cast<int>(rng() % 2);
    const int skip = static_cast<int>(rng() % 3);
    for (int i = 0; i < 3; ++i) {
      const bool observed = n_obs == 1 ? i == skip : i != skip;
      (observed ? obs : mis).push_back(i);
    }
    Vector y(n_obs);
    for (int i = 0; i < n_obs; ++i) y[i] = mu[obs[static_cast<std::size_t>(i)]] + rng.normal();
    const auto g = condition(mu, s, obs, y);

    const int m = 3 - n_obs;
    LMatrix soo(n_obs, n_obs), smo(m, n_obs), smm(m, m);
    for (int a = 0; a < n_obs; ++a)
      for (int b = 0; b < n_obs; ++b) soo(a, b) = s(obs[a], obs[b]);
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < n_obs; ++b) smo(a, b) = s(mis[a], obs[b]);
      for (int b = 0; b < m; ++b) smm(a, b) = s(mis[a], mis[b]);
    }
    LMatrix inv(n_obs, n_obs);
    if (n_obs == 1) {
      inv(0, 0) = 1.0L / soo(0, 0);
    } else {
      const long double det = soo(0, 0) * soo(1, 1) - soo(0, 1) * soo(1, 0);
      inv << soo(1, 1) / det, -soo(0, 1) / det, -soo(1, 0) / det, soo(0, 0) / det;
    }
    LMatrix resid(n_obs, 1);
    for (int a = 0; a < n_obs; ++a) resid(a, 0) = static_cast<long double>(y[a]) - mu[obs[a]];
    const LMatrix mean_shift = smo * inv * resid;
    const LMatrix cov = smm - smo * inv * smo.transpose();
    for (int a = 0; a < m; ++a) {
      const long double expected = mu[mis[a]] + mean_shift(a, 0);
      worst = std::max(worst, static_cast<double>(std::abs(g.mean[a] - expected)));
      for (int b = 0; b < m; ++b) worst = std::max(worst, static_cast<double>(std::abs(g.cov(a, b) - cov(a, b))));
    }
  }
  report(worst <= 1e-10, "conditioning matches the extended-precision explicit-inverse formula",
         fmt("worst absolute error %.2e (need <= 1e-10) over 1000 three-dimensional cases", worst));
}

void no_missingness_check() {
  auto cfg = null_single_followup(0.0);
  cfg.true_act.mu[0] = 0.3;
  cfg.true_act.sigma(0, 0) = 1.5;
  const TrialDataset data = generate_trial(cfg, 4242);
  const CompleteDataEstimate direct = analyze_diff_means(data);
  const auto completed = impute_dataset(data, Strategy::J2R, 5, false, 1);
  std::vector<CompleteDataEstimate> ests;
  for (const auto& c : completed) ests.push_back(analyze_diff_means(c));
  const PooledEstimate pooled = rubin_pool(ests);
  const double point_err = std::abs(pooled.theta_bar - direct.theta_hat);
  const double var_err = std::abs(pooled.t_total - direct.w);

  const BootMiGrid grid = boot_then_impute(data, Strategy::J2R, 2000, 2, 4343, Analysis::DiffMeans, threads());
  const BootMiEstimate boot = vonhippel_pool(grid);
  const double rel = std::abs(boot.v_hat - direct.w) / direct.w;
  report(point_err <= 1e-12 && var_err <= 1e-12 && rel <= 0.1, "complete data: MI is the identity",
         fmt("|pooled - direct| = %.1e, |T - W| = %.1e (need <= 1e-12); bootstrap v_hat = %.6f vs W = %.6f "
             "(%.1f%%, need within 10%%)",
             point_err, var_err, boot.v_hat, direct.w, 100 * rel));
}

void mixture_variance_check() {
  struct Setting {
    double mu_a, mu_r, s2_a, s2_r, pi;
  };
  const Setting settings[] = {
      {0.0, 0.0, 1.0, 1.0, 0.5}, {1.0, 0.0, 1.0, 1.0, 0.3}, {2.0, -1.0, 0.5, 2.0, 0.7},
      {-0.5, 0.5, 3.0, 0.2, 0.1}, {4.0, 0.0, 1.0, 1.0, 0.95}};
  Stream rng(8080);
  const int n = 1000000;
  bool ok = true;
  std::string detail;
  for (const auto& s : settings) {
    double sum = 0, sum2 = 0;
    std::vector<double> y(n);
    for (auto& v : y) {
      const bool jump = rng.uniform() < s.pi;
      v = jump ? s.mu_r + std::sqrt(s.s2_r) * rng.normal() : s.mu_a + std::sqrt(s.s2_a) * rng.normal();
      sum += v;
    }
    const double mean = sum / n;
    double m4 = 0;
    for (double v : y) {
      const double d = (v - mean) * (v - mean);
      sum2 += d;
      m4 += d * d;
    }
    const double var = sum2 / (n - 1);
    const double se = std::sqrt((m4 / n - var * var) / n);
    const double expected = simplified_var_active(s.mu_a, s.mu_r, s.s2_a, s.s2_r, s.pi);
    const double z = (var - expected) / se;
    if (std::abs(z) > 3) ok = false;
    detail += fmt("%s%.4f vs %.4f (z=%.2f)", detail.empty() ? "" : "; ", var, expected, z);
  }
  report(ok, "active-arm mixture variance", detail + " (need |z| <= 3, 1e6 draws each)");
}

void run(const char* name, void (*check)()) {
  try {
    check();
  } catch (const std::exception& e) {
    report(false, name, std::string("threw: ") + e.what());
  }
}

}  // namespace

int main() {
  run("Rubin / embedding-model variance, type I error, pooling calibration", null_scenario_checks);
  run("MI convergence", mi_convergence_check);
  run("extreme missingness", extreme_missingness_check);
  run("J2R joint identities", joint_identity_check);
  run("conditioning", conditioning_check);
  run("complete data", no_missingness_check);
  run("mixture variance", mixture_variance_check);
  std::printf("%s: %d check(s) failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
