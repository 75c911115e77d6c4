#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "refmi/arm_model.hpp"
#include "refmi/error.hpp"

using namespace refmi;
using testutil::kNaN;

namespace {

ArmModel truth3() {
  ArmModel m{Vector{{1.0, 1.5, 2.2}}, Matrix(3, 3)};
  m.sigma << 1.0, 0.6, 0.5, 0.6, 1.2, 0.7, 0.5, 0.7, 1.5;
  return m;
}

// EM for a bivariate normal with y0 complete and y1 partly missing.
ArmModel em_bivariate(const TrialDataset& d) {
  const auto n = static_cast<double>(d.size());
  Vector mu = Vector::Zero(2);
  Matrix s = Matrix::Identity(2, 2);
  for (int iter = 0; iter < 100000; ++iter) {
    double s0 = 0, s1 = 0, s00 = 0, s01 = 0, s11 = 0;
    const double slope = s(0, 1) / s(0, 0);
    const double resid = s(1, 1) - slope * s(0, 1);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double y0 = d.outcome(i, 0);
      double e1, e11;
      if (d.dropout(i) == 1) {
        e1 = d.outcome(i, 1);
        e11 = e1 * e1;
      } else {
        e1 = mu[1] + slope * (y0 - mu[0]);
        e11 = e1 * e1 + resid;
      }
      s0 += y0;
      s1 += e1;
      s00 += y0 * y0;
      s01 += y0 * e1;
      s11 += e11;
    }
    Vector mu_new{{s0 / n, s1 / n}};
    Matrix s_new(2, 2);
    s_new(0, 0) = s00 / n - mu_new[0] * mu_new[0];
    s_new(0, 1) = s_new(1, 0) = s01 / n - mu_new[0] * mu_new[1];
    s_new(1, 1) = s11 / n - mu_new[1] * mu_new[1];
    const double change = (mu_new - mu).norm() + (s_new - s).norm();
    mu = mu_new;
    s = s_new;
    if (change < 1e-15) break;
  }
  return {mu, s};
}

}  // namespace

TEST_CASE("complete data gives the sample mean and ML covariance") {
  const auto d = testutil::simulate_complete(truth3(), truth3(), 40, 5, true, 1);
  const auto m = fit_mle(d, Arm::Reference);
  Matrix y(40, 3);
  int r = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.arm(i) != Arm::Reference) continue;
    for (int k = 0; k < 3; ++k) y(r, k) = d.outcome(i, k);
    ++r;
  }
  const Vector mean = y.colwise().mean();
  const Matrix c = y.rowwise() - mean.transpose();
  const Matrix cov = c.transpose() * c / 40.0;
  CHECK((m.mu - mean).norm() < 1e-12);
  CHECK(testutil::rel_diff(m.sigma, cov) < 1e-12);
}

TEST_CASE("J=1 monotone MLE matches the EM fixed point") {
  Stream rng(3);
  std::vector<testutil::Row> rows;
  for (int i = 0; i < 30; ++i) {
    const double y0 = rng.normal();
    const double y1 = 0.5 + 0.8 * y0 + 0.6 * rng.normal();
    rows.push_back({"p" + std::to_string(i), 0, {y0, i < 8 ? y1 : kNaN}});
  }
  const auto d = testutil::make(1, true, rows);
  const auto mle = fit_mle(d, Arm::Reference);
  const auto em = em_bivariate(d);
  CHECK((mle.mu - em.mu).norm() < 1e-9);
  CHECK((mle.sigma - em.sigma).norm() < 1e-9);
  // mu_1 is the stage regression evaluated at the full-sample mean of y0.
  double ybar0 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) ybar0 += d.outcome(i, 0);
  ybar0 /= 30;
  const auto stages = factor(mle).stages;
  CHECK(mle.mu[1] == doctest::Approx(stages[1].coef[0] + stages[1].coef[1] * ybar0).epsilon(1e-12));
}

TEST_CASE("MLE is consistent under MCAR dropout") {
  const auto full = testutil::simulate_complete(truth3(), truth3(), 10000, 2, true, 77);
  const auto d = testutil::mcar_dropout(full, 0.2, 0.2, 78);
  const auto m = fit_mle(d, Arm::Reference);
  const auto t = truth3();
  for (int k = 0; k < 3; ++k) {
    const double se = std::sqrt(t.sigma(k, k) / 10000.0 / 0.6);
    CHECK(std::abs(m.mu[k] - t.mu[k]) < 4 * se);
    CHECK(std::abs(m.sigma(k, k) - t.sigma(k, k)) < 4 * t.sigma(k, k) * std::sqrt(2.0 / 6000.0));
  }
}

TEST_CASE("factor and recompose round trip") {
  Stream rng(8);
  for (int rep = 0; rep < 100; ++rep) {
    const int dim = 1 + rep % 7;
    const ArmModel m{testutil::random_vector(dim, rng), testutil::random_pd(dim, rng)};
    const auto f = factor(m);
    const auto back = recompose(f);
    CHECK((back.mu - m.mu).norm() < 1e-10 * (1 + m.mu.norm()));
    CHECK(testutil::rel_diff(back.sigma, m.sigma) < 1e-10);
    const auto f2 = factor(back);
    for (std::size_t k = 0; k < f.stages.size(); ++k) {
      CHECK((f2.stages[k].coef - f.stages[k].coef).norm() < 1e-10 * (1 + f.stages[k].coef.norm()));
      CHECK(std::abs(f2.stages[k].residual_variance - f.stages[k].residual_variance) <
            1e-10 * f.stages[k].residual_variance);
    }
  }
}

TEST_CASE("recompose validates its input") {
  SequentialFactors bad{{{Vector::Constant(1, 0.0), 1.0}, {Vector::Constant(1, 0.0), 1.0}}};
  CHECK_THROWS_AS(recompose(bad), Error);
  SequentialFactors zero{{{Vector::Constant(1, 0.0), 0.0}}};
  try {
    recompose(zero);
    FAIL("expected NotPositiveDefinite");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotPositiveDefinite);
  }
}

TEST_CASE("MLE does not depend on patient order") {
  const auto full = testutil::simulate_complete(truth3(), truth3(), 60, 60, true, 5);
  const auto d = testutil::mcar_dropout(full, 0.3, 0.2, 6);
  std::vector<std::size_t> rows(d.size());
  std::iota(rows.begin(), rows.end(), 0);
  std::reverse(rows.begin(), rows.end());
  std::vector<std::string> ids;
  for (auto r : rows) ids.push_back(d.id(r));
  const auto rev = d.select(rows, ids);
  for (Arm arm : {Arm::Reference, Arm::Active}) {
    const auto a = fit_mle(d, arm);
    const auto b = fit_mle(rev, arm);
    CHECK((a.mu - b.mu).norm() < 1e-12);
    CHECK((a.sigma - b.sigma).norm() < 1e-12);
  }
}

TEST_CASE("too few observations at a stage") {
  std::vector<testutil::Row> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({"p" + std::to_string(i), 1, {double(i), i < 3 ? double(i * i) : kNaN}});
  const auto d = testutil::make(1, true, rows);
  try {
    fit_mle(d, Arm::Active);
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
  try {
    fit_mle(d, Arm::Reference);
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
}

TEST_CASE("collinear history is a singular design") {
  std::vector<testutil::Row> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({"p" + std::to_string(i), 0, {1.0, double(i)}});
  try {
    fit_mle(testutil::make(1, true, rows), Arm::Reference);
    FAIL("expected SingularDesign");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularDesign);
  }
}

TEST_CASE("posterior draws concentrate on the MLE") {
  const auto full = testutil::simulate_complete(truth3(), truth3(), 5000, 2, true, 12);
  const auto d = testutil::mcar_dropout(full, 0.2, 0.2, 13);
  const auto mle = fit_mle(d, Arm::Reference);
  Stream rng(14);
  const int draws = 500;
  Matrix mu(draws, 3);
  for (int i = 0; i < draws; ++i) mu.row(i) = posterior_draw(d, Arm::Reference, rng).mu.transpose();
  const Vector mean = mu.colwise().mean();
  for (int k = 0; k < 3; ++k) {
    const double sd = std::sqrt((mu.col(k).array() - mean[k]).square().sum() / (draws - 1));
    CHECK(std::abs(mean[k] - mle.mu[k]) < 4 * sd / std::sqrt(double(draws)));
    CHECK(sd < 0.05);
  }
}

TEST_CASE("posterior draw is deterministic and valid") {
  const auto full = testutil::simulate_complete(truth3(), truth3(), 50, 50, true, 2);
  const auto d = testutil::mcar_dropout(full, 0.2, 0.2, 3);
  Stream a(1);
  Stream b(1);
  const auto x = posterior_draw(d, Arm::Active, a);
  const auto y = posterior_draw(d, Arm::Active, b);
  CHECK(x.mu == y.mu);
  CHECK(x.sigma == y.sigma);
  CHECK_NOTHROW(cholesky(x.sigma));
}

TEST_CASE("single-visit posterior of the mean has t moments") {
  const std::vector<double> y{1.2, 0.4, 2.5, 1.9, 0.7, 1.1, 3.0, 1.6};
  std::vector<testutil::Row> rows;
  for (std::size_t i = 0; i < y.size(); ++i) rows.push_back({"p" + std::to_string(i), 0, {y[i]}});
  const auto d = testutil::make(0, true, rows);
  const double n = 8;
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double rss = 0;
  for (double v : y) rss += (v - ybar) * (v - ybar);
  // ybar + sqrt(rss / ((n-1) n)) t_{n-1}
  const double post_var = rss / (n * (n - 3));
  Stream rng(10);
  const int draws = 10000;
  double s = 0, ss = 0;
  for (int i = 0; i < draws; ++i) {
    const double m = posterior_draw(d, Arm::Reference, rng).mu[0];
    s += m;
    ss += m * m;
  }
  const double mean = s / draws;
  const double var = ss / draws - mean * mean;
  CHECK(std::abs(mean - ybar) < 4 * std::sqrt(post_var / draws));
  // t with 7 df has kurtosis 5, so the sample variance has relative SE sqrt(4 / draws).
  CHECK(std::abs(var / post_var - 1) < 4 * std::sqrt(4.0 / draws));
}
