#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "npglm/errors.hpp"
#include "npglm/gibbs.hpp"
#include "npglm/io.hpp"

namespace npglm {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Highest posterior density interval as the shortest window containing
// ceil(mass * n) of the sorted samples; ties resolve to the lowest lower
// endpoint.
inline Interval hpd_interval(std::vector<double> samples, double mass) {
  if (!(mass > 0.0) || !(mass < 1.0)) throw InvalidParameter("interval mass must lie in (0,1)");
  const int n = static_cast<int>(samples.size());
  if (n == 0) throw InsufficientSamples("no samples for an interval");
  std::sort(samples.begin(), samples.end());
  const int m = std::max(1, std::min(n, static_cast<int>(std::ceil(mass * n))));
  int best = 0;
  double best_width = samples[m - 1] - samples[0];
  for (int i = 1; i + m <= n; ++i) {
    const double width = samples[i + m - 1] - samples[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  return {samples[best], samples[best + m - 1]};
}

inline double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) throw InsufficientSamples("standard error needs at least two samples");
  const double mean = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double sample_median(std::vector<double> v) {
  if (v.empty()) throw InsufficientSamples("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Effective sample size via the initial monotone positive sequence estimator
// on pairwise-summed autocovariances.
inline double effective_sample_size(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  if (n < 2) throw InsufficientSamples("effective size needs at least two samples");
  const double mean = sample_mean(v);
  const auto gamma = [&](int t) {
    double s = 0.0;
    for (int i = 0; i + t < n; ++i) s += (v[i] - mean) * (v[i + t] - mean);
    return s / n;
  };
  const double g0 = gamma(0);
  if (!(g0 > 0.0)) return static_cast<double>(n);  // constant series

  double var = -g0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (int k = 0; 2 * k + 1 < n; ++k) {
    double pair = gamma(2 * k) + gamma(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    var += 2.0 * pair;
  }
  if (!(var > 0.0)) return static_cast<double>(n);
  return std::min(static_cast<double>(n), n * g0 / var);
}

struct CoefficientSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double se = 0.0;
  Interval hpd;
};

inline CoefficientSummary summarize_scalar(const std::string& name,
                                           const std::vector<double>& samples,
                                           double mass = 0.95) {
  CoefficientSummary s;
  s.name = name;
  s.mean = sample_mean(samples);
  s.median = sample_median(samples);
  s.se = sample_sd(samples);
  s.hpd = hpd_interval(samples, mass);
  return s;
}

inline std::vector<CoefficientSummary> summarize_coefficients(const PosteriorDraws& d,
                                                              double mass = 0.95) {
  if (d.kept() < 2) throw InsufficientSamples("need at least two kept draws");
  std::vector<CoefficientSummary> out;
  std::vector<double> col(d.kept());
  for (std::size_t j = 0; j < d.beta_names.size(); ++j) {
    for (int r = 0; r < d.kept(); ++r) col[r] = d.beta[r][static_cast<Eigen::Index>(j)];
    out.push_back(summarize_scalar(d.beta_names[j], col, mass));
  }
  if (d.intercepts != InterceptMode::none) {
    for (int r = 0; r < d.kept(); ++r) col[r] = d.sigma_inv[r];
    out.push_back(summarize_scalar("sigma2.inv", col, mass));
  }
  if (d.intercepts == InterceptMode::dp) {
    for (int r = 0; r < d.kept(); ++r) col[r] = d.alpha[r];
    out.push_back(summarize_scalar("alpha", col, mass));
  }
  return out;
}

inline std::string coefficients_to_csv(const std::vector<CoefficientSummary>& rows) {
  std::ostringstream out;
  out << "name,mean,median,se,hpd_lo,hpd_hi\n";
  for (const auto& s : rows)
    out << s.name << ',' << format_double(s.mean) << ',' << format_double(s.median) << ','
        << format_double(s.se) << ',' << format_double(s.hpd.lo) << ','
        << format_double(s.hpd.hi) << '\n';
  return out.str();
}

// Pointwise posterior band for one level's curve.
struct FunctionalBand {
  std::vector<double> grid;
  Eigen::VectorXd mean;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

inline FunctionalBand functional_summary(const PosteriorDraws& d, int level,
                                         double mass = 0.95) {
  if (d.functional != FunctionalMode::gp)
    throw ModeMismatch("functional bands need draws from the smooth-curve variant");
  if (level < 0 || level >= kNumLevels) throw IndexOutOfRange("level out of range");
  if (d.kept() == 0) throw InsufficientSamples("no kept draws");
  FunctionalBand band;
  band.grid = d.grids[level];
  const int m = static_cast<int>(band.grid.size());
  band.mean.resize(m);
  band.lo.resize(m);
  band.hi.resize(m);
  std::vector<double> col(d.kept());
  for (int c = 0; c < m; ++c) {
    for (int r = 0; r < d.kept(); ++r) col[r] = d.f[r][level][c];
    band.mean[c] = sample_mean(col);
    const Interval hpd = hpd_interval(col, mass);
    band.lo[c] = hpd.lo;
    band.hi[c] = hpd.hi;
  }
  return band;
}

inline std::string functional_band_to_csv(const FunctionalBand& band) {
  std::ostringstream out;
  out << "age,mean,hpd_lo,hpd_hi\n";
  for (std::size_t c = 0; c < band.grid.size(); ++c)
    out << format_double(band.grid[c]) << ',' << format_double(band.mean[c]) << ','
        << format_double(band.lo[c]) << ',' << format_double(band.hi[c]) << '\n';
  return out.str();
}

// Pairwise co-clustering probabilities and per-group intercept summaries for
// the discrete-intercept variant.
struct ClusterSummary {
  Eigen::MatrixXd coclustering;       // num_groups x num_groups, in [0,1]
  Eigen::VectorXd mu_mean;            // posterior mean intercept per group
  std::vector<int> occupied_clusters; // per kept draw
};

inline ClusterSummary cluster_summary(const PosteriorDraws& d) {
  if (d.intercepts != InterceptMode::dp)
    throw ModeMismatch("cluster summaries need draws from the discrete-intercept variant");
  if (d.kept() == 0) throw InsufficientSamples("no kept draws");
  const int g = d.num_groups;
  ClusterSummary cs;
  cs.coclustering = Eigen::MatrixXd::Zero(g, g);
  cs.mu_mean = Eigen::VectorXd::Zero(g);
  cs.occupied_clusters.reserve(d.kept());
  for (int r = 0; r < d.kept(); ++r) {
    const Eigen::VectorXi& a = d.assign[r];
    std::vector<char> seen(static_cast<std::size_t>(d.truncation), 0);
    int occ = 0;
    for (int i = 0; i < g; ++i) {
      if (!seen[a[i]]) {
        seen[a[i]] = 1;
        ++occ;
      }
      cs.mu_mean[i] += d.atoms[r][a[i]];
      for (int j = 0; j < g; ++j)
        if (a[i] == a[j]) cs.coclustering(i, j) += 1.0;
    }
    cs.occupied_clusters.push_back(occ);
  }
  cs.coclustering /= d.kept();
  cs.mu_mean /= d.kept();
  return cs;
}

inline std::string coclustering_to_csv(const ClusterSummary& cs,
                                       const std::vector<long long>& labels) {
  std::ostringstream out;
  out << "state";
  for (long long l : labels) out << ',' << l;
  out << '\n';
  for (int i = 0; i < cs.coclustering.rows(); ++i) {
    out << labels[i];
    for (int j = 0; j < cs.coclustering.cols(); ++j)
      out << ',' << format_double(cs.coclustering(i, j));
    out << '\n';
  }
  return out.str();
}

}  // namespace npglm
