#pragma once

#include <Eigen/Dense>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "npglm/data.hpp"
#include "npglm/dp.hpp"
#include "npglm/errors.hpp"
#include "npglm/gp.hpp"
#include "npglm/model.hpp"
#include "npglm/rand_kernels.hpp"
#include "npglm/rng.hpp"

namespace npglm {

struct ChainConfig {
  int iterations = 5000;
  int burnin = 2000;
  int thin = 1;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    if (iterations < 1) throw InvalidParameter("iterations must be positive");
    if (burnin < 0 || burnin >= iterations)
      throw InvalidParameter("burn-in must lie in [0, iterations)");
    if (thin < 1) throw InvalidParameter("thinning interval must be positive");
    if (threads < 1) throw InvalidParameter("thread count must be positive");
  }

  int kept_draws() const { return (iterations - burnin + thin - 1) / thin; }
};

// How often each update block actually ran; lets callers verify that a
// restricted variant leaves the foreign blocks untouched.
struct StepCounters {
  long omega = 0, functional = 0, beta = 0, assign = 0, sticks = 0, atoms = 0,
       sigma = 0, alpha = 0, mu_block = 0;
};

// Retained posterior sample plus everything needed to interpret it without
// the originating Dataset.
struct PosteriorDraws {
  InterceptMode intercepts = InterceptMode::dp;
  FunctionalMode functional = FunctionalMode::gp;
  double kappa = 0.02;
  int truncation = 0;
  int num_groups = 0;
  int n = 0;
  ChainConfig config;
  std::array<std::vector<double>, kNumLevels> grids;
  std::vector<std::string> beta_names;
  std::vector<long long> group_labels;
  std::string data_digest;  // hex digest of the input data, filled by callers

  std::vector<int> iteration;  // 1-based source iteration of each kept draw
  std::vector<Eigen::VectorXd> beta;
  std::vector<std::array<Eigen::VectorXd, kNumLevels>> f;
  std::vector<Eigen::VectorXd> atoms;
  std::vector<Eigen::VectorXd> sticks;
  std::vector<Eigen::VectorXi> assign;
  std::vector<Eigen::VectorXd> mu;
  std::vector<double> sigma_inv;
  std::vector<double> alpha;

  StepCounters counters;
  double wall_seconds = 0.0;

  int kept() const { return static_cast<int>(iteration.size()); }

  // Group intercepts of one kept draw, whichever variant produced it.
  Eigen::VectorXd group_intercepts(int draw) const {
    if (intercepts == InterceptMode::gaussian) return mu[draw];
    if (intercepts == InterceptMode::none)
      return Eigen::VectorXd::Zero(num_groups);
    Eigen::VectorXd out(num_groups);
    for (int g = 0; g < num_groups; ++g) out[g] = atoms[draw][assign[draw][g]];
    return out;
  }
};

// Raised when an update block fails mid-chain; carries the last state that
// passed all checks so callers can dump diagnostics.
struct ChainAbortedWithState final : ChainAborted {
  std::shared_ptr<const ChainState> last_state;
  ChainAbortedWithState(int iter, const std::string& what, ChainState state)
      : ChainAborted(iter, what),
        last_state(std::make_shared<const ChainState>(std::move(state))) {}
};

namespace detail {

// Static partition of [0, n) over a fixed number of workers. Each index uses
// its own substream, so the split changes nothing but wall time.
template <typename Fn>
inline void parallel_for(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2 * threads) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = t * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Latent Polya-Gamma weights, one per observation: omega_i ~ PG(1, eta_i).
inline Eigen::VectorXd sample_omega(const ChainState& s, const ModelSpec& spec,
                                    const Dataset& ds, RngStream& rng, int threads = 1) {
  Eigen::VectorXd omega(ds.n);
  detail::parallel_for(ds.n, threads, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      RngStream os = rng.substream(static_cast<std::uint64_t>(i));
      omega[i] = rnd::sample_polya_gamma(linear_predictor(s, spec, ds, i), os);
    }
  });
  return omega;
}

namespace detail {

// Columns of the parabolic functional block: per level an intercept, a slope,
// and a curvature in the covariate.
inline double parabolic_column(const Dataset& ds, int obs, int col) {
  const int k = col / 3;
  if (ds.level[obs] != k) return 0.0;
  const double t = ds.age[obs];
  switch (col % 3) {
    case 0: return 1.0;
    case 1: return t;
    default: return t * t;
  }
}

inline std::string collinear_column_report(const Eigen::MatrixXd& design,
                                           const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  const auto& perm = qr.colsPermutation().indices();
  std::string msg;
  for (int j = rank; j < design.cols(); ++j) {
    if (!msg.empty()) msg += ", ";
    msg += names[perm[j]];
  }
  return msg.empty() ? "unknown" : msg;
}

}  // namespace detail

// Regression block. In the parabolic variant the nine polynomial
// coefficients join beta in one flat-prior Gaussian update and the evaluated
// level curves are refreshed from the drawn coefficients.
inline void sample_beta(ChainState& s, const ModelSpec& spec, const Dataset& ds,
                        RngStream& rng) {
  const bool parab = spec.functional == FunctionalMode::parabolic;
  const int extra = parab ? 3 * kNumLevels : 0;
  const int dim = ds.p + extra;
  if (dim == 0) return;

  Eigen::MatrixXd design(ds.n, dim);
  design.leftCols(ds.p) = ds.x;
  for (int c = 0; c < extra; ++c)
    for (int i = 0; i < ds.n; ++i) design(i, ds.p + c) = detail::parabolic_column(ds, i, c);

  Eigen::VectorXd z(ds.n);
  for (int i = 0; i < ds.n; ++i) {
    double rest = group_intercept(s, spec, ds.group[i]);
    if (!parab) rest += functional_value(s, spec, ds, i);
    z[i] = ds.y[i] - 0.5 - s.omega[i] * rest;
  }

  Eigen::MatrixXd prec = design.transpose() * s.omega.asDiagonal() * design;
  Eigen::VectorXd rhs = design.transpose() * z;
  if (!spec.flat_beta_prior() && ds.p > 0) {
    Eigen::LLT<Eigen::MatrixXd> pl(spec.beta_prior_cov);
    if (pl.info() != Eigen::Success)
      throw NotPositiveDefinite("beta prior covariance is not positive definite");
    const Eigen::MatrixXd binv =
        pl.solve(Eigen::MatrixXd::Identity(ds.p, ds.p));
    prec.topLeftCorner(ds.p, ds.p) += binv;
    if (spec.beta_prior_mean.size() > 0) rhs.head(ds.p) += binv * spec.beta_prior_mean;
  }

  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) {
    std::vector<std::string> names = ds.beta_names;
    for (int k = 0; k < (parab ? kNumLevels : 0); ++k)
      for (int d = 0; d < 3; ++d)
        names.push_back("f" + std::to_string(k) + ".c" + std::to_string(d));
    throw NotPositiveDefinite(
        "regression precision is singular; collinear columns: " +
        detail::collinear_column_report(s.omega.cwiseSqrt().asDiagonal() * design, names));
  }

  Eigen::VectorXd draw = llt.solve(rhs);
  Eigen::VectorXd noise(dim);
  for (int j = 0; j < dim; ++j) noise[j] = rng.normal();
  draw += llt.matrixU().solve(noise);

  s.beta = draw.head(ds.p);
  if (parab) {
    for (int k = 0; k < kNumLevels; ++k) {
      s.fcoef[k] = draw.segment(ds.p + 3 * k, 3);
      const int m = ds.grid_size(k);
      s.f[k].resize(m);
      for (int c = 0; c < m; ++c) {
        const double t = ds.grids[k][c];
        s.f[k][c] = s.fcoef[k][0] + s.fcoef[k][1] * t + s.fcoef[k][2] * t * t;
      }
    }
  }
}

// Gaussian-intercept variant: with a N(0, 1/sigma_inv) population the group
// intercepts are conditionally independent, so the block update is
// componentwise.
inline Eigen::VectorXd sample_gaussian_intercepts(const ChainState& s, const ModelSpec& spec,
                                                  const Dataset& ds, RngStream& rng) {
  Eigen::VectorXd mu(ds.num_groups);
  for (int g = 0; g < ds.num_groups; ++g) {
    double zsum = 0.0, wsum = 0.0;
    for (int i : ds.obs_of_group[g]) {
      double rest = functional_value(s, spec, ds, i);
      for (int j = 0; j < ds.p; ++j) rest += ds.x(i, j) * s.beta[j];
      zsum += ds.y[i] - 0.5 - s.omega[i] * rest;
      wsum += s.omega[i];
    }
    const double prec = s.sigma_inv + wsum;
    RngStream gs = rng.substream(static_cast<std::uint64_t>(g));
    mu[g] = zsum / prec + gs.normal() / std::sqrt(prec);
  }
  return mu;
}

inline ChainState initial_state(const ModelSpec& spec, const Dataset& ds) {
  ChainState s;
  s.omega = Eigen::VectorXd::Constant(ds.n, 0.25);
  for (int k = 0; k < kNumLevels; ++k) {
    s.f[k] = Eigen::VectorXd::Zero(ds.grid_size(k));
    s.fcoef[k].setZero();
  }
  s.beta = Eigen::VectorXd::Zero(ds.p);
  s.sigma_inv = 1.0;
  s.alpha = 1.0;
  if (spec.intercepts == InterceptMode::dp) {
    const int h = spec.resolved_truncation(ds);
    s.assign.resize(ds.num_groups);
    for (int g = 0; g < ds.num_groups; ++g) s.assign[g] = g % h;
    s.sticks = Eigen::VectorXd::Constant(h, 0.5);
    s.sticks[h - 1] = 1.0;
    s.atoms = Eigen::VectorXd::Zero(h);
  } else if (spec.intercepts == InterceptMode::gaussian) {
    s.mu = Eigen::VectorXd::Zero(ds.num_groups);
  }
  return s;
}

namespace detail {

// Fixed substream tags for the update blocks of one sweep.
enum StepTag : std::uint64_t {
  kTagOmega = 1,
  kTagFunctional = 2,
  kTagBeta = 3,
  kTagAssign = 4,
  kTagSticks = 5,
  kTagAtoms = 6,
  kTagSigma = 7,
  kTagAlpha = 8,
  kTagMu = 9,
  kTagOmegaRefresh = 10,
};

}  // namespace detail

// One full sweep over the update blocks in their fixed order. Exposed so the
// joint-distribution test can interleave sweeps with response redraws.
inline void gibbs_sweep(ChainState& s, const ModelSpec& spec, const Dataset& ds,
                        const std::array<Eigen::MatrixXd, kNumLevels>& kernels,
                        RngStream& iter_rng, StepCounters& counters, int threads = 1) {
  {
    RngStream r = iter_rng.substream(detail::kTagOmega);
    s.omega = sample_omega(s, spec, ds, r, threads);
    ++counters.omega;
    for (int i = 0; i < ds.n; ++i)
      if (!(s.omega[i] > 0.0)) throw InvalidParameter("latent weight is not positive");
  }

  if (spec.functional == FunctionalMode::gp) {
    RngStream r = iter_rng.substream(detail::kTagFunctional);
    for (int k = 0; k < kNumLevels; ++k) {
      if (ds.grid_size(k) == 0) continue;
      RngStream rk = r.substream(static_cast<std::uint64_t>(k));
      s.f[k] = sample_functional_effect(s, spec, ds, k, kernels[k], rk);
      ++counters.functional;
    }
  }

  {
    RngStream r = iter_rng.substream(detail::kTagBeta);
    sample_beta(s, spec, ds, r);
    ++counters.beta;
  }

  if (spec.intercepts == InterceptMode::dp) {
    {
      RngStream r = iter_rng.substream(detail::kTagAssign);
      s.assign = sample_cluster_assignments(s, spec, ds, r);
      ++counters.assign;
    }
    {
      // The allocation draw marginalizes the latent weights out of its
      // conditional, so they are re-imputed before any later block reads
      // them. Skipping this re-imputation leaves the atom update conditioned
      // on weights adapted to the previous allocation, and the scan then
      // fails to preserve the joint law (van Dyk & Park 2008 treat exactly
      // this marginalize-then-re-impute requirement).
      RngStream r = iter_rng.substream(detail::kTagOmegaRefresh);
      s.omega = sample_omega(s, spec, ds, r, threads);
      ++counters.omega;
    }
    {
      RngStream r = iter_rng.substream(detail::kTagSticks);
      s.sticks = sample_stick_weights(s.assign, s.alpha, static_cast<int>(s.atoms.size()), r);
      ++counters.sticks;
    }
    {
      RngStream r = iter_rng.substream(detail::kTagAtoms);
      s.atoms = sample_atoms(s, spec, ds, r);
      ++counters.atoms;
    }
    {
      RngStream r = iter_rng.substream(detail::kTagSigma);
      s.sigma_inv = sample_sigma_inv(s.atoms, spec.a, spec.b, r);
      ++counters.sigma;
    }
    {
      RngStream r = iter_rng.substream(detail::kTagAlpha);
      s.alpha = sample_alpha(s.sticks, spec.a_alpha, spec.b_alpha, r);
      ++counters.alpha;
    }
  } else if (spec.intercepts == InterceptMode::gaussian) {
    {
      RngStream r = iter_rng.substream(detail::kTagMu);
      s.mu = sample_gaussian_intercepts(s, spec, ds, r);
      ++counters.mu_block;
    }
    {
      RngStream r = iter_rng.substream(detail::kTagSigma);
      s.sigma_inv = sample_sigma_inv(s.mu, spec.a, spec.b, r);
      ++counters.sigma;
    }
  }
}

inline PosteriorDraws run_chain(const Dataset& ds, const ModelSpec& spec,
                                const ChainConfig& config) {
  config.validate();
  spec.validate(ds);
  if (ds.n < 1) throw InvalidParameter("empty dataset");

  PosteriorDraws out;
  out.intercepts = spec.intercepts;
  out.functional = spec.functional;
  out.kappa = spec.kappa;
  out.truncation =
      spec.intercepts == InterceptMode::dp ? spec.resolved_truncation(ds) : 0;
  out.num_groups = ds.num_groups;
  out.n = ds.n;
  out.config = config;
  out.grids = ds.grids;
  out.beta_names = ds.beta_names;
  out.group_labels = ds.group_labels;
  out.iteration.reserve(config.kept_draws());

  std::array<Eigen::MatrixXd, kNumLevels> kernels;
  if (spec.functional == FunctionalMode::gp)
    for (int k = 0; k < kNumLevels; ++k)
      if (ds.grid_size(k) > 0) kernels[k] = build_kernel_matrix(ds.grids[k], spec.kappa);

  ChainState s = initial_state(spec, ds);
  RngStream base(config.seed);

  const auto t0 = std::chrono::steady_clock::now();
  for (int t = 0; t < config.iterations; ++t) {
    ChainState prev = s;
    try {
      RngStream iter_rng = base.substream(static_cast<std::uint64_t>(t) + 1);
      gibbs_sweep(s, spec, ds, kernels, iter_rng, out.counters, config.threads);
    } catch (const ChainAborted&) {
      throw;
    } catch (const std::exception& e) {
      throw ChainAbortedWithState(t + 1, e.what(), std::move(prev));
    }

    if (t >= config.burnin && (t - config.burnin) % config.thin == 0) {
      out.iteration.push_back(t + 1);
      out.beta.push_back(s.beta);
      out.f.push_back(s.f);
      out.sigma_inv.push_back(s.sigma_inv);
      out.alpha.push_back(s.alpha);
      if (spec.intercepts == InterceptMode::dp) {
        out.atoms.push_back(s.atoms);
        out.sticks.push_back(s.sticks);
        out.assign.push_back(s.assign);
      } else if (spec.intercepts == InterceptMode::gaussian) {
        out.mu.push_back(s.mu);
      }
    }
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace npglm
