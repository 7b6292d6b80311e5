#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "npglm/errors.hpp"
#include "npglm/model.hpp"
#include "npglm/rand_kernels.hpp"

namespace npglm {

// Squared-exponential kernel on a one-dimensional grid, unit scale:
// K_lm = exp(-kappa * (t_l - t_m)^2). The diagonal is exactly 1.
inline Eigen::MatrixXd build_kernel_matrix(const std::vector<double>& grid, double kappa) {
  if (!(kappa > 0.0)) throw InvalidParameter("kernel decay must be positive");
  const int n = static_cast<int>(grid.size());
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (int j = 0; j < i; ++j) {
      const double d = grid[i] - grid[j];
      if (d == 0.0) throw InvalidParameter("kernel grid has duplicate entries");
      k(i, j) = k(j, i) = std::exp(-kappa * d * d);
    }
  }
  return k;
}

// Per-cell sufficient statistics for one level's functional update: the
// summed working responses z = y - 1/2 - omega * (intercept + x'beta) and the
// summed omega weights.
struct FunctionalStats {
  Eigen::VectorXd z;  // grid_size
  Eigen::VectorXd w;  // grid_size, nonnegative
};

inline FunctionalStats functional_stats(const ChainState& s, const ModelSpec& spec,
                                        const Dataset& ds, int level) {
  const int m = ds.grid_size(level);
  FunctionalStats st{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
  for (int i = 0; i < ds.n; ++i) {
    if (ds.level[i] != level) continue;
    double rest = group_intercept(s, spec, ds.group[i]);
    for (int j = 0; j < ds.p; ++j) rest += ds.x(i, j) * s.beta[j];
    st.z[ds.cell[i]] += ds.y[i] - 0.5 - s.omega[i] * rest;
    st.w[ds.cell[i]] += s.omega[i];
  }
  return st;
}

// Draws from N(Sigma z, Sigma) with Sigma = (W + K^{-1})^{-1}, written
// without forming K^{-1}:
//   Sigma = K - K W^{1/2} (I + W^{1/2} K W^{1/2})^{-1} W^{1/2} K.
// With all weights zero this reduces to the prior N(0, K), so levels with no
// data fall back to prior draws through the same code path.
inline Eigen::VectorXd sample_gp_conditional(const Eigen::MatrixXd& kernel,
                                             const FunctionalStats& st, RngStream& rng) {
  const int m = static_cast<int>(kernel.rows());
  if (st.z.size() != m || st.w.size() != m)
    throw ShapeMismatch("functional statistics do not match the kernel dimension");
  if (m == 0) return Eigen::VectorXd();

  const Eigen::VectorXd sw = st.w.cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd ks = kernel * sw.asDiagonal();      // K W^{1/2}
  Eigen::MatrixXd inner = sw.asDiagonal() * ks;             // W^{1/2} K W^{1/2}
  inner.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("inner matrix of the weighted kernel update is not positive definite");

  Eigen::MatrixXd cov = kernel - ks * llt.solve(ks.transpose());
  cov = 0.5 * (cov + cov.transpose());  // kill round-off asymmetry
  return rnd::sample_mvn(cov * st.z, cov, rng);
}

inline Eigen::VectorXd sample_functional_effect(const ChainState& s, const ModelSpec& spec,
                                                const Dataset& ds, int level,
                                                const Eigen::MatrixXd& kernel,
                                                RngStream& rng) {
  return sample_gp_conditional(kernel, functional_stats(s, spec, ds, level), rng);
}

// Conditional mean of the process at new locations given its values on the
// grid: k(t*, grid) K^{-1} f.
inline Eigen::VectorXd gp_predict_mean(const std::vector<double>& grid,
                                       const Eigen::VectorXd& values, double kappa,
                                       const std::vector<double>& targets) {
  const int m = static_cast<int>(grid.size());
  if (values.size() != m) throw ShapeMismatch("grid values do not match the grid");
  const Eigen::MatrixXd kernel = build_kernel_matrix(grid, kappa);
  const auto chol = rnd::cholesky_with_jitter(kernel);
  const Eigen::VectorXd kinv_f =
      chol.lower.transpose().triangularView<Eigen::Upper>().solve(
          chol.lower.triangularView<Eigen::Lower>().solve(values));
  Eigen::VectorXd out(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    double acc = 0.0;
    for (int l = 0; l < m; ++l) {
      const double d = targets[t] - grid[l];
      acc += std::exp(-kappa * d * d) * kinv_f[l];
    }
    out[static_cast<Eigen::Index>(t)] = acc;
  }
  return out;
}

}  // namespace npglm
