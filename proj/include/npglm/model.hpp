#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>

#include "npglm/data.hpp"
#include "npglm/errors.hpp"

namespace npglm {

enum class InterceptMode { dp, gaussian, none };
enum class FunctionalMode { gp, parabolic, none };

inline std::string to_string(InterceptMode m) {
  switch (m) {
    case InterceptMode::dp: return "dp";
    case InterceptMode::gaussian: return "gaussian";
    default: return "none";
  }
}

inline std::string to_string(FunctionalMode m) {
  switch (m) {
    case FunctionalMode::gp: return "gp";
    case FunctionalMode::parabolic: return "parabolic";
    default: return "none";
  }
}

inline InterceptMode intercept_mode_from_string(const std::string& s) {
  if (s == "dp") return InterceptMode::dp;
  if (s == "gaussian") return InterceptMode::gaussian;
  if (s == "none") return InterceptMode::none;
  throw InvalidParameter("unknown intercept mode '" + s + "'");
}

inline FunctionalMode functional_mode_from_string(const std::string& s) {
  if (s == "gp") return FunctionalMode::gp;
  if (s == "parabolic") return FunctionalMode::parabolic;
  if (s == "none") return FunctionalMode::none;
  throw InvalidParameter("unknown functional mode '" + s + "'");
}

// Model configuration. The default prior on beta is flat (empty prior
// covariance means zero prior precision); truncation 0 resolves to the number
// of groups.
struct ModelSpec {
  InterceptMode intercepts = InterceptMode::dp;
  FunctionalMode functional = FunctionalMode::gp;
  double kappa = 0.02;
  int truncation = 0;
  double a = 0.001;        // shape, precision of the intercept base measure
  double b = 0.001;        // rate
  double a_alpha = 1.0;    // shape, DP concentration
  double b_alpha = 1.0;    // rate
  Eigen::VectorXd beta_prior_mean;  // empty -> zero
  Eigen::MatrixXd beta_prior_cov;   // empty -> flat prior

  bool flat_beta_prior() const { return beta_prior_cov.size() == 0; }

  int resolved_truncation(const Dataset& ds) const {
    return truncation > 0 ? truncation : ds.num_groups;
  }

  void validate(const Dataset& ds) const {
    if (!(kappa > 0.0)) throw InvalidParameter("kappa must be positive");
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidParameter("a, b must be positive");
    if (!(a_alpha > 0.0) || !(b_alpha > 0.0))
      throw InvalidParameter("a_alpha, b_alpha must be positive");
    if (intercepts == InterceptMode::dp) {
      const int h = resolved_truncation(ds);
      if (h < 1 || h > ds.num_groups)
        throw InvalidParameter("truncation must lie in [1, number of groups]");
    }
    if (!flat_beta_prior()) {
      if (beta_prior_cov.rows() != ds.p || beta_prior_cov.cols() != ds.p)
        throw ShapeMismatch("beta prior covariance has wrong dimension");
      if (beta_prior_mean.size() != 0 && beta_prior_mean.size() != ds.p)
        throw ShapeMismatch("beta prior mean has wrong dimension");
    }
  }
};

// Current values of every sampled block. Functional effects are kept as
// their evaluations on the per-level grids; the parabolic variant also keeps
// the three polynomial coefficients per level that generate those values.
struct ChainState {
  Eigen::VectorXd omega;                        // n
  std::array<Eigen::VectorXd, kNumLevels> f;    // grid evaluations per level
  std::array<Eigen::Vector3d, kNumLevels> fcoef;
  Eigen::VectorXd beta;    // p
  Eigen::VectorXi assign;  // num_groups, 0-based atom index (dp)
  Eigen::VectorXd sticks;  // truncation, last entry fixed at 1 (dp)
  Eigen::VectorXd atoms;   // truncation (dp)
  Eigen::VectorXd mu;      // num_groups (gaussian)
  double sigma_inv = 1.0;
  double alpha = 1.0;
};

inline double group_intercept(const ChainState& s, const ModelSpec& spec, int g) {
  switch (spec.intercepts) {
    case InterceptMode::dp: {
      const int h = s.assign[g];
      if (h < 0 || h >= s.atoms.size())
        throw IndexOutOfRange("cluster label " + std::to_string(h) + " outside truncation");
      return s.atoms[h];
    }
    case InterceptMode::gaussian:
      return s.mu[g];
    default:
      return 0.0;
  }
}

inline double functional_value(const ChainState& s, const ModelSpec& spec,
                               const Dataset& ds, int obs) {
  if (spec.functional == FunctionalMode::none) return 0.0;
  const int k = ds.level[obs];
  const int c = ds.cell[obs];
  if (c < 0 || c >= s.f[k].size())
    throw IndexOutOfRange("grid cell " + std::to_string(c) + " outside level grid");
  return s.f[k][c];
}

inline double linear_predictor(const ChainState& s, const ModelSpec& spec,
                               const Dataset& ds, int obs) {
  if (obs < 0 || obs >= ds.n) throw IndexOutOfRange("observation index out of range");
  double eta = group_intercept(s, spec, ds.group[obs]) + functional_value(s, spec, ds, obs);
  for (int j = 0; j < ds.p; ++j) eta += ds.x(obs, j) * s.beta[j];
  return eta;
}

// log(1 + e^x) without overflow; below -37 the result underflows to e^x and
// above 33.3 it equals x to double precision.
inline double log1pexp(double x) {
  if (x > 33.3) return x;
  if (x > -37.0) return std::log1p(std::exp(x));
  return std::exp(x);
}

inline double bernoulli_log_lik(int y, double eta) {
  return static_cast<double>(y) * eta - log1pexp(eta);
}

inline double log_likelihood(const ChainState& s, const ModelSpec& spec, const Dataset& ds) {
  double ll = 0.0;
  for (int i = 0; i < ds.n; ++i) ll += bernoulli_log_lik(ds.y[i], linear_predictor(s, spec, ds, i));
  return ll;
}

}  // namespace npglm
