#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "npglm/errors.hpp"

namespace npglm {

inline constexpr int kNumLevels = 3;  // interaction levels 0,1,2

// A categorical covariate: declared codes in ascending order, first code is
// the baseline (dropped dummy).
struct FactorDef {
  std::string name;
  std::vector<int> levels;
  std::vector<std::string> dummy_names;  // one per non-baseline level
};

// Factors understood by the ingestion layer, in fixed column order.
inline std::vector<FactorDef> known_factors() {
  return {
      {"area", {0, 1}, {"urb"}},
      {"relig", {0, 1, 2}, {"musl", "chri"}},
      {"educ", {0, 1, 2}, {"med", "high"}},
      {"x3", {0, 1, 2}, {"x3.1", "x3.2"}},
  };
}

struct RawRow {
  int y = 0;
  long long group = 0;
  double age = 0.0;
  int level = 0;                  // interaction level ("child")
  std::vector<int> factor_codes;  // parallel to the FactorDef list in use
};

// Immutable observation store plus the index structures the sampler needs:
// per-level distinct covariate grids, each observation's grid cell, the
// baseline-dropped dummy design, and per-group observation lists.
struct Dataset {
  int n = 0;
  int num_groups = 0;
  int p = 0;

  Eigen::VectorXi y;      // n, in {0,1}
  Eigen::VectorXi group;  // n, 0-based
  Eigen::VectorXi level;  // n, in {0,1,2}
  Eigen::VectorXi cell;   // n, index into grids[level]
  Eigen::VectorXd age;    // n, rounded functional covariate
  Eigen::MatrixXd x;      // n x p dummy design

  std::array<std::vector<double>, kNumLevels> grids;  // ascending, unique
  std::vector<std::string> beta_names;
  std::vector<long long> group_labels;  // ascending original labels
  std::vector<FactorDef> factors;
  std::vector<std::vector<int>> obs_of_group;

  int grid_size(int k) const { return static_cast<int>(grids[k].size()); }
};

// Builds the dataset from parsed rows. The functional covariate is keyed by
// exact equality after rounding to integer years; continuous inputs must be
// pre-binned by the caller.
inline Dataset build_dataset(const std::vector<RawRow>& rows,
                             const std::vector<FactorDef>& factors) {
  Dataset ds;
  ds.factors = factors;
  ds.n = static_cast<int>(rows.size());

  int p = 0;
  for (const auto& f : factors) {
    if (f.levels.empty()) throw SchemaError("factor '" + f.name + "' declares no levels");
    if (f.dummy_names.size() + 1 != f.levels.size())
      throw SchemaError("factor '" + f.name + "' has mismatched dummy names");
    p += static_cast<int>(f.levels.size()) - 1;
    for (const auto& dn : f.dummy_names) ds.beta_names.push_back(dn);
  }
  ds.p = p;

  std::set<long long> labels;
  std::array<std::set<long long>, kNumLevels> age_sets;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.y != 0 && row.y != 1)
      throw SchemaError("row " + std::to_string(r + 1) + ": non-binary response");
    if (row.level < 0 || row.level >= kNumLevels)
      throw SchemaError("row " + std::to_string(r + 1) + ": interaction level out of {0,1,2}");
    if (row.factor_codes.size() != factors.size())
      throw SchemaError("row " + std::to_string(r + 1) + ": wrong number of factor codes");
    if (!std::isfinite(row.age))
      throw SchemaError("row " + std::to_string(r + 1) + ": non-finite covariate value");
    for (std::size_t fi = 0; fi < factors.size(); ++fi) {
      const auto& lv = factors[fi].levels;
      if (std::find(lv.begin(), lv.end(), row.factor_codes[fi]) == lv.end())
        throw SchemaError("row " + std::to_string(r + 1) + ": unknown level " +
                          std::to_string(row.factor_codes[fi]) + " for factor '" +
                          factors[fi].name + "'");
    }
    labels.insert(row.group);
    age_sets[row.level].insert(std::llround(row.age));
  }

  ds.group_labels.assign(labels.begin(), labels.end());
  ds.num_groups = static_cast<int>(ds.group_labels.size());
  std::map<long long, int> group_index;
  for (int i = 0; i < ds.num_groups; ++i) group_index[ds.group_labels[i]] = i;

  std::array<std::map<long long, int>, kNumLevels> cell_index;
  for (int k = 0; k < kNumLevels; ++k) {
    for (long long a : age_sets[k]) {
      cell_index[k][a] = static_cast<int>(ds.grids[k].size());
      ds.grids[k].push_back(static_cast<double>(a));
    }
  }

  ds.y.resize(ds.n);
  ds.group.resize(ds.n);
  ds.level.resize(ds.n);
  ds.cell.resize(ds.n);
  ds.age.resize(ds.n);
  ds.x.resize(ds.n, ds.p);
  ds.obs_of_group.assign(ds.num_groups, {});

  for (int r = 0; r < ds.n; ++r) {
    const auto& row = rows[r];
    ds.y[r] = row.y;
    ds.group[r] = group_index[row.group];
    ds.level[r] = row.level;
    const long long a = std::llround(row.age);
    ds.age[r] = static_cast<double>(a);
    ds.cell[r] = cell_index[row.level][a];
    int col = 0;
    for (std::size_t fi = 0; fi < factors.size(); ++fi) {
      const auto& lv = factors[fi].levels;
      for (std::size_t li = 1; li < lv.size(); ++li)
        ds.x(r, col++) = (row.factor_codes[fi] == lv[li]) ? 1.0 : 0.0;
    }
    ds.obs_of_group[ds.group[r]].push_back(r);
  }
  return ds;
}

// Inverse of build_dataset's encoding; used by serialization.
inline std::vector<RawRow> dataset_to_rows(const Dataset& ds) {
  std::vector<RawRow> rows(ds.n);
  for (int r = 0; r < ds.n; ++r) {
    RawRow& row = rows[r];
    row.y = ds.y[r];
    row.group = ds.group_labels[ds.group[r]];
    row.age = ds.age[r];
    row.level = ds.level[r];
    int col = 0;
    for (const auto& f : ds.factors) {
      int code = f.levels.front();
      for (std::size_t li = 1; li < f.levels.size(); ++li, ++col)
        if (ds.x(r, col) == 1.0) code = f.levels[li];
      row.factor_codes.push_back(code);
    }
  }
  return rows;
}

}  // namespace npglm
