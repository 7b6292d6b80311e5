#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>

#include "npglm/errors.hpp"
#include "npglm/rng.hpp"

namespace npglm::rnd {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kPiSq = 9.869604401089358618834490999876151135;

// Parameters of a PG(b,c) variable. The sampler itself only handles b = 1,
// which is all the logistic augmentation needs; the moment formulas accept
// general b.
struct PolyaGammaParams {
  double shape = 1.0;  // b
  double tilt = 0.0;   // c
};

// sinh(c) - c without cancellation. The direct subtraction loses half the
// mantissa near c = 0 (both operands agree through O(c)), so for moderate c
// the difference is summed as its own series sum_{k>=1} c^(2k+1)/(2k+1)!.
inline double sinh_minus_arg(double c) {
  if (std::abs(c) > 1.0) return std::sinh(c) - c;
  const double c2 = c * c;
  double term = c * c2 / 6.0;
  double sum = term;
  for (int k = 1; k <= 12; ++k) {
    term *= c2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
    sum += term;
    if (std::abs(term) < 0x1p-60 * std::abs(sum)) break;
  }
  return sum;
}

// Analytic mean and variance of PG(b,c):
//   mean = b tanh(c/2)/(2c),  var = b (sinh c - c) sech^2(c/2) / (4 c^3),
// with limits b/4 and b/24 at c = 0, reached through a short series so the
// 0/0 forms never evaluate.
inline std::pair<double, double> polya_gamma_moments(double b, double c) {
  if (!(b > 0.0)) throw InvalidParameter("polya_gamma_moments: shape must be > 0");
  const double c2 = c * c;
  if (std::abs(c) < 1e-4) {
    const double x2 = 0.25 * c2;  // (c/2)^2
    const double mean =
        0.25 * b * (1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0 - 17.0 * x2 * x2 * x2 / 315.0);
    const double var =
        b / 24.0 *
        (1.0 - c2 / 5.0 + 17.0 * c2 * c2 / 560.0 - 31.0 * c2 * c2 * c2 / 7560.0);
    return {mean, var};
  }
  const double mean = b * std::tanh(0.5 * c) / (2.0 * c);
  const double sech = 1.0 / std::cosh(0.5 * c);
  const double var = b * sinh_minus_arg(c) * sech * sech / (4.0 * c2 * c);
  return {mean, var};
}

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

inline double normal_log_cdf(double x) {
  if (x > -26.0) return std::log(normal_cdf(x));
  // Tail asymptotic: log phi(x) - log|x| + log(1 - 1/x^2 + 3/x^4)
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.9189385332046727418 + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// Piecewise series coefficient log a_n(x) of the J*(1) density, relative to
// the truncation point t that separates the inverse-Gaussian and exponential
// proposal pieces.
inline double log_series_coef(int n, double x, double t) {
  const double np = n + 0.5;
  if (x <= t) {
    // log pi(n+1/2) + (3/2) log(2/(pi x)) - 2(n+1/2)^2/x
    return std::log(kPi * np) + 1.5 * (std::log(2.0 / (kPi * x))) - 2.0 * np * np / x;
  }
  return std::log(kPi * np) - np * np * kPiSq * x / 2.0;
}

// Inverse-Gaussian IG(mu, 1) via Michael, Schucany & Haas, arranged to avoid
// the cancellation in the textbook root.
inline double inverse_gaussian(double mu, RngStream& rng) {
  const double w = rng.normal();
  const double s = mu * w * w;
  const double d = std::sqrt(s * s + 4.0 * s);
  const double x1 = mu * (d - s) / (d + s);
  if (rng.uniform() <= mu / (mu + x1)) return x1;
  return mu * mu / x1;
}

// IG(1/c, 1) conditioned on X <= t. For c t < 1 the mean sits right of the
// truncation point and plain rejection stalls, so sample the 1/2-stable
// (c = 0) body restricted to (0, t] and tilt it by exp(-c^2 X / 2).
inline double truncated_inverse_gaussian(double c, double t, RngStream& rng) {
  if (c * t < 1.0) {
    while (true) {
      double e1, e2;
      do {
        e1 = rng.exponential();
        e2 = rng.exponential();
      } while (e1 * e1 > 2.0 * e2 / t);
      const double x = t / ((1.0 + t * e1) * (1.0 + t * e1));
      if (std::log(rng.uniform()) <= -0.5 * c * c * x) return x;
    }
  }
  const double mu = 1.0 / c;
  while (true) {
    const double x = inverse_gaussian(mu, rng);
    if (x <= t) return x;
  }
}

}  // namespace detail

// Exact draw from PG(1, z) by the alternating-series rejection sampler of
// Devroye (2009) in the form given by Polson, Scott & Windle (2013), with the
// proposal split at t = 0.64 between a truncated inverse-Gaussian body and an
// exponential tail. O(1) expected cost, no tuning parameters.
inline double sample_polya_gamma(double z, RngStream& rng) {
  if (!std::isfinite(z)) throw InvalidParameter("sample_polya_gamma: tilt must be finite");
  constexpr double t = 0.64;
  const double c = 0.5 * std::abs(z);  // PG(1,z) = J*(1, z/2) / 4
  const double K = kPiSq / 8.0 + 0.5 * c * c;

  // Piece masses: p for the exponential tail on (t, inf), q for the tilted
  // inverse-Gaussian body on (0, t]. Kept in logs so extreme tilts stay finite.
  const double log_p = std::log(kPi / (2.0 * K)) - K * t;
  const double sqrt_t = std::sqrt(t);
  const double ig_cdf_1 = detail::normal_cdf((t * c - 1.0) / sqrt_t);
  const double ig_cdf_2 = std::exp(2.0 * c + detail::normal_log_cdf(-(t * c + 1.0) / sqrt_t));
  const double log_q = std::log(2.0) - c + std::log(ig_cdf_1 + ig_cdf_2);
  double prob_tail;
  const double diff = log_q - log_p;
  if (diff > 700.0) {
    prob_tail = 0.0;
  } else if (diff < -700.0) {
    prob_tail = 1.0;
  } else {
    prob_tail = 1.0 / (1.0 + std::exp(diff));
  }

  while (true) {
    double x;
    if (rng.uniform() < prob_tail) {
      x = t + rng.exponential() / K;
    } else {
      x = detail::truncated_inverse_gaussian(c, t, rng);
    }

    // Squeeze acceptance on the alternating series, normalized by a_0 so the
    // partial sums stay O(1) for every x.
    const double log_a0 = detail::log_series_coef(0, x, t);
    double s = 1.0;
    const double y = rng.uniform();
    int n = 0;
    bool rejected = false;
    while (!rejected) {
      ++n;
      const double term = std::exp(detail::log_series_coef(n, x, t) - log_a0);
      if (n % 2 == 1) {
        s -= term;
        if (y <= s) return 0.25 * x;
      } else {
        s += term;
        if (y > s) rejected = true;
      }
    }
  }
}

// Gamma(shape, rate) by Marsaglia & Tsang, with the standard boost for
// shape < 1.
inline double sample_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw InvalidParameter("sample_gamma: shape and rate must be > 0");
  if (shape < 1.0) {
    const double u = rng.uniform();
    return sample_gamma(shape + 1.0, rate, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double cc = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + cc * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

inline double sample_beta(double a, double b, RngStream& rng) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidParameter("sample_beta: parameters must be > 0");
  while (true) {
    const double ga = sample_gamma(a, 1.0, rng);
    const double gb = sample_gamma(b, 1.0, rng);
    if (ga + gb > 0.0) return ga / (ga + gb);
  }
}

// Index in [0, weights.size()) with probability proportional to weights.
inline int sample_categorical(const Eigen::VectorXd& weights, RngStream& rng) {
  if (weights.size() == 0) throw InvalidParameter("sample_categorical: empty weight vector");
  double total = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw InvalidParameter("sample_categorical: negative weight");
    total += weights[i];
  }
  if (!(total > 0.0)) throw InvalidParameter("sample_categorical: all-zero weight vector");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u <= acc) return i;
  }
  return static_cast<int>(weights.size()) - 1;
}

struct CholeskyResult {
  Eigen::MatrixXd lower;
  double jitter = 0.0;  // diagonal boost that made the factorization succeed
};

// Lower-triangular factorization with an escalating diagonal jitter:
// start at 1e-8 x mean(diag), multiply by 10 on failure, give up above
// 1e-4 x mean(diag). Squared-exponential kernels on dense grids are
// numerically rank-deficient, so the zero-jitter attempt routinely fails.
inline CholeskyResult cholesky_with_jitter(const Eigen::MatrixXd& cov) {
  const auto n = cov.rows();
  const double mean_diag = cov.diagonal().sum() / static_cast<double>(n);
  double jitter = 0.0;
  while (true) {
    Eigen::MatrixXd work = cov;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    if (jitter == 0.0) {
      jitter = 1e-8 * mean_diag;
      if (!(jitter > 0.0)) break;
    } else {
      jitter *= 10.0;
    }
    if (jitter > 1e-4 * mean_diag) break;
  }
  throw NotPositiveDefinite("cholesky_with_jitter: factorization failed at maximum jitter");
}

inline Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                  RngStream& rng) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size())
    throw InvalidParameter("sample_mvn: dimension mismatch");
  const double scale = cov.cwiseAbs().maxCoeff();
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-8 * std::max(scale, 1.0))
    throw InvalidParameter("sample_mvn: covariance not symmetric");
  const CholeskyResult chol = cholesky_with_jitter(cov);
  Eigen::VectorXd v(mean.size());
  for (int i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return mean + chol.lower * v;
}

}  // namespace npglm::rnd
