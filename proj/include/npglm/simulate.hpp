#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "npglm/data.hpp"
#include "npglm/errors.hpp"
#include "npglm/gibbs.hpp"
#include "npglm/gp.hpp"
#include "npglm/io.hpp"
#include "npglm/model.hpp"
#include "npglm/rand_kernels.hpp"

namespace npglm {

// Synthetic-study dimensions: 33 groups, ages 1..36 at each of the three
// interaction levels, and a single 3-level covariate with effects 0.3, 0.5.
inline constexpr int kSimGroups = 33;
inline constexpr int kSimAges = 36;
inline constexpr double kSimCrpConcentration = 2.0;

namespace detail {
inline constexpr std::uint64_t kTruthStream = 101;
inline constexpr std::uint64_t kResponseStream = 102;
}  // namespace detail

struct ScenarioTruth {
  int scenario = 1;
  std::vector<double> grid;  // shared by the three levels
  std::array<Eigen::VectorXd, kNumLevels> f;
  Eigen::VectorXd beta;  // effects of the two covariate dummies
  Eigen::VectorXd mu;    // one intercept per group
};

// Draws the generating quantities: smooth level curves from the same
// process prior the model uses, covariate effects fixed at (0.3, 0.5), and
// group intercepts that are exchangeable normal (scenario 1) or drawn from a
// discrete random distribution with normal base (scenario 2), so scenario 2
// has ties among the intercepts.
inline ScenarioTruth generate_truth(int scenario, std::uint64_t seed, double kappa = 0.02) {
  if (scenario != 1 && scenario != 2) throw InvalidParameter("scenario must be 1 or 2");
  ScenarioTruth truth;
  truth.scenario = scenario;
  truth.grid.resize(kSimAges);
  for (int t = 0; t < kSimAges; ++t) truth.grid[t] = t + 1.0;
  truth.beta.resize(2);
  truth.beta << 0.3, 0.5;

  RngStream rng(seed, detail::kTruthStream);
  const Eigen::MatrixXd kernel = build_kernel_matrix(truth.grid, kappa);
  const auto chol = rnd::cholesky_with_jitter(kernel);
  for (int k = 0; k < kNumLevels; ++k) {
    RngStream rk = rng.substream(static_cast<std::uint64_t>(k));
    Eigen::VectorXd z(kSimAges);
    for (int t = 0; t < kSimAges; ++t) z[t] = rk.normal();
    truth.f[k] = chol.lower * z;
  }

  truth.mu.resize(kSimGroups);
  RngStream rmu = rng.substream(1000);
  if (scenario == 1) {
    for (int g = 0; g < kSimGroups; ++g) truth.mu[g] = rmu.normal();
  } else {
    // Chinese-restaurant construction of one realization of the discrete
    // random measure: each group joins an existing table with probability
    // proportional to its size or opens a new one with weight alpha.
    std::vector<double> values;
    std::vector<int> counts;
    for (int g = 0; g < kSimGroups; ++g) {
      const double total = kSimCrpConcentration + g;
      double u = rmu.uniform() * total;
      int table = -1;
      for (std::size_t t = 0; t < counts.size(); ++t) {
        u -= counts[t];
        if (u < 0.0) {
          table = static_cast<int>(t);
          break;
        }
      }
      if (table < 0) {
        values.push_back(rmu.normal());
        counts.push_back(0);
        table = static_cast<int>(values.size()) - 1;
      }
      ++counts[table];
      truth.mu[g] = values[table];
    }
  }
  return truth;
}

// Full factorial layout: every group sees every (level, age, covariate)
// combination once. Responses come from the model's own predictor, so the
// generator and the sampler share one code path for eta.
inline Dataset generate_dataset(const ScenarioTruth& truth, std::uint64_t seed) {
  std::vector<FactorDef> factors = {known_factors().back()};  // x3
  std::vector<RawRow> rows;
  rows.reserve(kSimGroups * kNumLevels * kSimAges * 3);
  for (int g = 1; g <= kSimGroups; ++g)
    for (int k = 0; k < kNumLevels; ++k)
      for (int t = 1; t <= kSimAges; ++t)
        for (int x = 0; x < 3; ++x) {
          RawRow r;
          r.y = 0;
          r.group = g;
          r.age = t;
          r.level = k;
          r.factor_codes = {x};
          rows.push_back(std::move(r));
        }
  Dataset ds = build_dataset(rows, factors);

  ModelSpec gen;
  gen.intercepts = InterceptMode::gaussian;
  gen.functional = FunctionalMode::gp;
  ChainState s;
  s.mu = truth.mu;
  s.f = truth.f;
  s.beta = truth.beta;

  RngStream rng(seed, detail::kResponseStream);
  for (int i = 0; i < ds.n; ++i) {
    const double eta = linear_predictor(s, gen, ds, i);
    RngStream ri = rng.substream(static_cast<std::uint64_t>(i));
    ds.y[i] = ri.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Fit-versus-truth error metrics: absolute errors for the covariate effects,
// and mean plus upper-0.95 quantile of pointwise squared errors for each
// level curve and for the intercept vector.

struct EvalMetrics {
  Eigen::VectorXd beta_abs;
  bool has_functional = false;
  std::array<double, kNumLevels> f_mse{}, f_q95{};
  double mu_mse = 0.0, mu_q95 = 0.0;
};

namespace detail {

inline double upper_quantile(std::vector<double> v, double q) {
  const int m = static_cast<int>(v.size());
  if (m == 0) throw InsufficientSamples("quantile of an empty set");
  std::sort(v.begin(), v.end());
  int idx = static_cast<int>(std::ceil(q * m));
  idx = std::max(1, std::min(m, idx));
  return v[idx - 1];
}

}  // namespace detail

inline EvalMetrics evaluate(const PosteriorDraws& draws, const ScenarioTruth& truth) {
  if (draws.kept() == 0) throw InsufficientSamples("no kept draws to evaluate");
  if (draws.beta_names.size() != static_cast<std::size_t>(truth.beta.size()))
    throw ShapeMismatch("drawn coefficients do not match the generating effects");
  if (draws.num_groups != truth.mu.size())
    throw ShapeMismatch("drawn intercepts do not match the generating groups");

  EvalMetrics m;
  const int kept = draws.kept();

  Eigen::VectorXd beta_mean = Eigen::VectorXd::Zero(truth.beta.size());
  for (int r = 0; r < kept; ++r) beta_mean += draws.beta[r];
  beta_mean /= kept;
  m.beta_abs = (beta_mean - truth.beta).cwiseAbs();

  if (draws.functional != FunctionalMode::none) {
    m.has_functional = true;
    for (int k = 0; k < kNumLevels; ++k) {
      if (draws.grids[k] != truth.grid)
        throw ShapeMismatch("draw grid does not match the generating grid");
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(truth.f[k].size());
      for (int r = 0; r < kept; ++r) mean += draws.f[r][k];
      mean /= kept;
      const Eigen::VectorXd sq = (mean - truth.f[k]).array().square();
      m.f_mse[k] = sq.mean();
      m.f_q95[k] = detail::upper_quantile({sq.data(), sq.data() + sq.size()}, 0.95);
    }
  }

  Eigen::VectorXd mu_mean = Eigen::VectorXd::Zero(draws.num_groups);
  for (int r = 0; r < kept; ++r) mu_mean += draws.group_intercepts(r);
  mu_mean /= kept;
  const Eigen::VectorXd sq = (mu_mean - truth.mu).array().square();
  m.mu_mse = sq.mean();
  m.mu_q95 = detail::upper_quantile({sq.data(), sq.data() + sq.size()}, 0.95);
  return m;
}

inline std::string render_metric_table(
    const std::vector<std::pair<std::string, EvalMetrics>>& table) {
  std::ostringstream out;
  out << "variant,beta1.abs,beta2.abs";
  for (int k = 0; k < kNumLevels; ++k)
    out << ",f" << k << ".mse,f" << k << ".q95";
  out << ",mu.mse,mu.q95\n";
  for (const auto& [name, m] : table) {
    out << name;
    for (int j = 0; j < m.beta_abs.size(); ++j) out << ',' << format_double(m.beta_abs[j]);
    for (int k = 0; k < kNumLevels; ++k) {
      if (m.has_functional)
        out << ',' << format_double(m.f_mse[k]) << ',' << format_double(m.f_q95[k]);
      else
        out << ",,";
    }
    out << ',' << format_double(m.mu_mse) << ',' << format_double(m.mu_q95) << '\n';
  }
  return out.str();
}

// Truth serialization: long-format CSV with one row per generating quantity.
inline std::string truth_to_csv(const ScenarioTruth& truth) {
  std::ostringstream out;
  out << "kind,level,point,value\n";
  out << "scenario,0,0," << truth.scenario << '\n';
  for (int j = 0; j < truth.beta.size(); ++j)
    out << "beta," << j + 1 << ",0," << format_double(truth.beta[j]) << '\n';
  for (int k = 0; k < kNumLevels; ++k)
    for (int t = 0; t < truth.f[k].size(); ++t)
      out << "f," << k << ',' << format_double(truth.grid[t]) << ','
          << format_double(truth.f[k][t]) << '\n';
  for (int g = 0; g < truth.mu.size(); ++g)
    out << "mu," << g + 1 << ",0," << format_double(truth.mu[g]) << '\n';
  return out.str();
}

inline ScenarioTruth truth_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "kind,level,point,value")
    throw FormatError("not a recognized truth file");
  ScenarioTruth truth;
  std::vector<double> beta, mu;
  std::array<std::vector<double>, kNumLevels> f;
  std::array<std::vector<double>, kNumLevels> grid;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::string where = "row " + std::to_string(lineno);
    const std::vector<std::string> tok = split(t, ',');
    if (tok.size() != 4) throw FormatError(where + ": expected 4 fields");
    const double value = parse_double(tok[3], where);
    if (tok[0] == "scenario") {
      truth.scenario = static_cast<int>(value);
    } else if (tok[0] == "beta") {
      beta.push_back(value);
    } else if (tok[0] == "f") {
      const int k = static_cast<int>(parse_int(tok[1], where));
      if (k < 0 || k >= kNumLevels) throw FormatError(where + ": bad level");
      f[k].push_back(value);
      grid[k].push_back(parse_double(tok[2], where));
    } else if (tok[0] == "mu") {
      mu.push_back(value);
    } else {
      throw FormatError(where + ": unknown kind '" + tok[0] + "'");
    }
  }
  truth.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), beta.size());
  truth.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), mu.size());
  for (int k = 0; k < kNumLevels; ++k) {
    truth.f[k] = Eigen::Map<const Eigen::VectorXd>(f[k].data(), f[k].size());
    if (k == 0) truth.grid = grid[k];
    else if (grid[k] != truth.grid)
      throw FormatError("level grids disagree in truth file");
  }
  return truth;
}

}  // namespace npglm
