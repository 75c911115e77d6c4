#include "refmi/mvn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "refmi/error.hpp"

namespace refmi {
namespace {

void require_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::InvalidArgument, "covariance matrix is not square");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::InvalidArgument, "covariance matrix is not symmetric and finite");
  }
}

Matrix factorize(const Matrix& m, bool allow_semidefinite) {
  require_symmetric(m);
  const Eigen::Index n = m.rows();
  Matrix lower = Matrix::Zero(n, n);
  if (n == 0) return lower;
  const double tol = kPivotTolerance * std::max(m.diagonal().maxCoeff(), 0.0);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = m(j, j) - lower.row(j).head(j).squaredNorm();
    if (!(pivot > tol)) {
      if (allow_semidefinite && pivot >= -1e4 * tol) {
        continue;  // zero column
      }
      std::ostringstream msg;
      msg << "pivot " << j << " = " << pivot << " is not above tolerance " << tol;
      throw Error(ErrorKind::NotPositiveDefinite, msg.str());
    }
    const double d = std::sqrt(pivot);
    lower(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      lower(i, j) = (m(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j))) / d;
    }
  }
  return lower;
}

}  // namespace

Matrix cholesky(const Matrix& m) { return factorize(m, false); }

Matrix cholesky_psd(const Matrix& m) { return factorize(m, true); }

Matrix cholesky_solve(const Matrix& lower, const Matrix& rhs) {
  Matrix y = lower.triangularView<Eigen::Lower>().solve(rhs);
  return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

ConditionalGaussian condition(const Vector& mu, const Matrix& sigma,
                              std::span<const int> obs_idx, const Vector& y_obs) {
  const auto n = static_cast<int>(mu.size());
  if (sigma.rows() != n || sigma.cols() != n) {
    throw Error(ErrorKind::InvalidArgument, "mean and covariance dimensions differ");
  }
  if (static_cast<Eigen::Index>(obs_idx.size()) != y_obs.size()) {
    throw Error(ErrorKind::InvalidArgument, "observed index count differs from observed values");
  }
  std::vector<bool> observed(static_cast<std::size_t>(n), false);
  for (int idx : obs_idx) {
    if (idx < 0 || idx >= n || observed[static_cast<std::size_t>(idx)]) {
      throw Error(ErrorKind::InvalidArgument, "observed indices must be distinct and in range");
    }
    observed[static_cast<std::size_t>(idx)] = true;
  }

  ConditionalGaussian out;
  out.conditioned_on.assign(obs_idx.begin(), obs_idx.end());
  for (int i = 0; i < n; ++i) {
    if (!observed[static_cast<std::size_t>(i)]) out.free_idx.push_back(i);
  }
  const auto& o = out.conditioned_on;
  const auto& f = out.free_idx;
  const auto no = static_cast<Eigen::Index>(o.size());
  const auto nf = static_cast<Eigen::Index>(f.size());

  Vector mu_f(nf);
  Matrix s_ff(nf, nf);
  for (Eigen::Index a = 0; a < nf; ++a) {
    mu_f[a] = mu[f[a]];
    for (Eigen::Index b = 0; b < nf; ++b) s_ff(a, b) = sigma(f[a], f[b]);
  }
  if (no == 0) {
    out.mean = mu_f;
    out.cov = s_ff;
    return out;
  }

  Vector resid(no);
  Matrix s_oo(no, no);
  Matrix s_of(no, nf);
  for (Eigen::Index a = 0; a < no; ++a) {
    resid[a] = y_obs[a] - mu[o[a]];
    for (Eigen::Index b = 0; b < no; ++b) s_oo(a, b) = sigma(o[a], o[b]);
    for (Eigen::Index b = 0; b < nf; ++b) s_of(a, b) = sigma(o[a], f[b]);
  }
  const Matrix lower = cholesky(s_oo);
  const auto tri = lower.triangularView<Eigen::Lower>();
  const Vector z = tri.solve(resid);
  const Matrix zf = tri.solve(s_of);
  out.mean = mu_f + zf.transpose() * z;
  out.cov = symmetrize(s_ff - zf.transpose() * zf);
  return out;
}

Matrix sample(const ConditionalGaussian& g, Stream& rng, int count) {
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "sample count must be positive");
  const Matrix lower = cholesky_psd(g.cov);
  Matrix draws(count, g.dimension());
  for (int r = 0; r < count; ++r) {
    draws.row(r) = draw_with_factor(g.mean, lower, rng).transpose();
  }
  return draws;
}

}  // namespace refmi
