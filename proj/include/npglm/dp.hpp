#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "npglm/errors.hpp"
#include "npglm/model.hpp"
#include "npglm/rand_kernels.hpp"

namespace npglm {

inline constexpr double kStickFloor = 1e-12;  // keeps log(1 - V) finite

// Truncated stick-breaking weights pi_h = V_h * prod_{l<h} (1 - V_l). The
// last break is fixed at 1 so the weights sum to one exactly.
inline Eigen::VectorXd stick_weights(const Eigen::VectorXd& v) {
  const int h = static_cast<int>(v.size());
  if (h == 0) throw InvalidParameter("empty stick vector");
  if (v[h - 1] != 1.0) throw InvalidParameter("last stick must equal 1");
  Eigen::VectorXd pi(h);
  double remaining = 1.0;
  for (int l = 0; l < h; ++l) {
    if (!(v[l] > 0.0) || v[l] > 1.0)
      throw InvalidParameter("stick proportions must lie in (0, 1]");
    pi[l] = v[l] * remaining;
    remaining *= 1.0 - v[l];
  }
  return pi;
}

// Cluster labels for every group: the categorical posterior mixes the stick
// weights with each group's Bernoulli likelihood under candidate intercepts,
// computed in log space with the max subtracted before exponentiation.
// Groups draw from disjoint substreams of rng, so the result is invariant to
// evaluation order.
inline Eigen::VectorXi sample_cluster_assignments(const ChainState& s, const ModelSpec& spec,
                                                  const Dataset& ds, RngStream& rng) {
  const int h = static_cast<int>(s.atoms.size());
  const Eigen::VectorXd pi = stick_weights(s.sticks);
  Eigen::VectorXd log_pi = pi.array().max(1e-300).log();

  Eigen::VectorXi assign(ds.num_groups);
  for (int g = 0; g < ds.num_groups; ++g) {
    Eigen::VectorXd lp = log_pi;
    for (int i : ds.obs_of_group[g]) {
      double rest = functional_value(s, spec, ds, i);
      for (int j = 0; j < ds.p; ++j) rest += ds.x(i, j) * s.beta[j];
      for (int c = 0; c < h; ++c) lp[c] += bernoulli_log_lik(ds.y[i], s.atoms[c] + rest);
    }
    const Eigen::VectorXd w = (lp.array() - lp.maxCoeff()).exp();
    RngStream gs = rng.substream(static_cast<std::uint64_t>(g));
    assign[g] = rnd::sample_categorical(w, gs);
  }
  return assign;
}

// Stick proportions given labels: V_h ~ Beta(1 + n_h, alpha + sum_{r>h} n_r),
// clamped away from {0,1} so downstream logs stay finite; the last stick is 1.
inline Eigen::VectorXd sample_stick_weights(const Eigen::VectorXi& assign, double alpha,
                                            int truncation, RngStream& rng) {
  if (truncation < 1) throw InvalidParameter("truncation must be positive");
  if (!(alpha > 0.0)) throw InvalidParameter("concentration must be positive");
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(truncation);
  for (int g = 0; g < assign.size(); ++g) {
    if (assign[g] < 0 || assign[g] >= truncation)
      throw IndexOutOfRange("cluster label outside truncation");
    counts[assign[g]] += 1.0;
  }
  Eigen::VectorXd v(truncation);
  double tail = assign.size() - counts[0];
  for (int h = 0; h + 1 < truncation; ++h) {
    double draw = rnd::sample_beta(1.0 + counts[h], alpha + tail, rng);
    v[h] = std::min(std::max(draw, kStickFloor), 1.0 - kStickFloor);
    tail -= counts[h + 1];
  }
  v[truncation - 1] = 1.0;
  return v;
}

// Atom update: with the diagonal working-response likelihood the posterior of
// each intercept is independent Gaussian with precision sigma_inv plus the
// summed omega of its member observations. Unoccupied atoms refresh from the
// base measure N(0, 1/sigma_inv).
inline Eigen::VectorXd sample_atoms(const ChainState& s, const ModelSpec& spec,
                                    const Dataset& ds, RngStream& rng) {
  const int h = static_cast<int>(s.atoms.size());
  Eigen::VectorXd zsum = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(h);
  for (int i = 0; i < ds.n; ++i) {
    const int c = s.assign[ds.group[i]];
    double rest = functional_value(s, spec, ds, i);
    for (int j = 0; j < ds.p; ++j) rest += ds.x(i, j) * s.beta[j];
    zsum[c] += ds.y[i] - 0.5 - s.omega[i] * rest;
    wsum[c] += s.omega[i];
  }
  Eigen::VectorXd atoms(h);
  for (int c = 0; c < h; ++c) {
    const double prec = s.sigma_inv + wsum[c];
    atoms[c] = zsum[c] / prec + rng.normal() / std::sqrt(prec);
  }
  return atoms;
}

inline double sample_sigma_inv(const Eigen::VectorXd& values, double a, double b,
                               RngStream& rng) {
  return rnd::sample_gamma(a + 0.5 * values.size(), b + 0.5 * values.squaredNorm(), rng);
}

// Concentration update from the stick proportions:
// alpha ~ Ga(a_alpha + H - 1, b_alpha - sum_{h<H} log(1 - V_h)).
inline double sample_alpha(const Eigen::VectorXd& v, double a_alpha, double b_alpha,
                           RngStream& rng) {
  const int h = static_cast<int>(v.size());
  if (h == 0) throw InvalidParameter("empty stick vector");
  double rate = b_alpha;
  for (int l = 0; l + 1 < h; ++l)
    rate -= std::log1p(-std::min(v[l], 1.0 - kStickFloor));
  return rnd::sample_gamma(a_alpha + h - 1, rate, rng);
}

}  // namespace npglm
