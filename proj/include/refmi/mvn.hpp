#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "refmi/rng.hpp"

namespace refmi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Relative pivot tolerance for positive-definiteness: a Cholesky pivot at or
/// below kPivotTolerance * max(diag) is treated as zero.
inline constexpr double kPivotTolerance = 1e-12;

/// Lower-triangular L with L * L^T == m. Throws NotPositiveDefinite when a
/// pivot falls at or below the relative tolerance, InvalidArgument when m is
/// not square and symmetric.
Matrix cholesky(const Matrix& m);

/// Semi-definite variant used for sampling: near-zero pivots give zero
/// columns instead of an error, so degenerate (zero-variance) directions
/// reproduce the mean exactly.
Matrix cholesky_psd(const Matrix& m);

/// Solves m * x = rhs given the lower Cholesky factor of m.
Matrix cholesky_solve(const Matrix& lower, const Matrix& rhs);

/// A multivariate normal over the `free_idx` coordinates of a larger vector,
/// obtained by conditioning on the coordinates in `conditioned_on`.
struct ConditionalGaussian {
  Vector mean;
  Matrix cov;
  std::vector<int> conditioned_on;
  std::vector<int> free_idx;

  Eigen::Index dimension() const { return mean.size(); }
};

/// N(mu_m + S_mo S_oo^-1 (y_obs - mu_o), S_mm - S_mo S_oo^-1 S_om) over the
/// indices not in obs_idx. obs_idx must be distinct and in range; its order
/// matches y_obs. An empty obs_idx returns the marginal unchanged.
ConditionalGaussian condition(const Vector& mu, const Matrix& sigma,
                              std::span<const int> obs_idx, const Vector& y_obs);

/// count x dim matrix of independent draws (one draw per row).
Matrix sample(const ConditionalGaussian& g, Stream& rng, int count);

/// Draws one vector from N(mean, L L^T) given a precomputed factor.
inline Vector draw_with_factor(const Vector& mean, const Matrix& lower, Stream& rng) {
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + lower.triangularView<Eigen::Lower>() * z;
}

/// Copies the lower triangle into the upper one after averaging, i.e. (m + m^T)/2.
Matrix symmetrize(const Matrix& m);

}  // namespace refmi
