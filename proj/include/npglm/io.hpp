#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "npglm/data.hpp"
#include "npglm/errors.hpp"
#include "npglm/gibbs.hpp"
#include "npglm/sha256.hpp"

namespace npglm {

inline constexpr const char* kDrawsMagic = "# npglm-draws v1";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& tok, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE)
    throw FormatError(where + ": cannot parse '" + tok + "' as a number");
  return v;
}

inline long long parse_int(const std::string& tok, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE)
    throw FormatError(where + ": cannot parse '" + tok + "' as an integer");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("write failure on '" + path + "'");
}

// ---------------------------------------------------------------------------
// Observation CSV: columns y,state,age,child plus any subset of the known
// categorical covariates. Unknown columns are skipped with a warning.

struct ParsedData {
  std::vector<RawRow> rows;
  std::vector<FactorDef> factors;
  std::vector<std::string> warnings;
};

inline ParsedData parse_data_csv(const std::string& text) {
  ParsedData out;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty data file");
  const std::vector<std::string> header = split(trim(line), ',');

  int col_y = -1, col_state = -1, col_age = -1, col_child = -1;
  const std::vector<FactorDef> catalog = known_factors();
  std::vector<int> factor_cols;  // column index per selected factor
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    if (name == "y") col_y = static_cast<int>(c);
    else if (name == "state") col_state = static_cast<int>(c);
    else if (name == "age") col_age = static_cast<int>(c);
    else if (name == "child") col_child = static_cast<int>(c);
    else {
      bool known = false;
      for (const auto& f : catalog) {
        if (f.name == name) {
          out.factors.push_back(f);
          factor_cols.push_back(static_cast<int>(c));
          known = true;
          break;
        }
      }
      if (!known) out.warnings.push_back("ignoring unknown column '" + name + "'");
    }
  }
  if (col_y < 0 || col_state < 0 || col_age < 0 || col_child < 0)
    throw SchemaError("data file must have columns y, state, age, child");

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::vector<std::string> tok = split(t, ',');
    if (tok.size() != header.size())
      throw SchemaError("row " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(tok.size()));
    const std::string where = "row " + std::to_string(lineno);
    try {
      RawRow r;
      r.y = static_cast<int>(parse_int(tok[col_y], where));
      r.group = parse_int(tok[col_state], where);
      r.age = parse_double(tok[col_age], where);
      r.level = static_cast<int>(parse_int(tok[col_child], where));
      for (int fc : factor_cols)
        r.factor_codes.push_back(static_cast<int>(parse_int(tok[fc], where)));
      out.rows.push_back(std::move(r));
    } catch (const FormatError& e) {
      throw SchemaError(e.what());
    }
  }
  return out;
}

inline ParsedData read_data_csv(const std::string& path) {
  return parse_data_csv(read_text_file(path));
}

inline std::string data_to_csv(const Dataset& ds) {
  std::ostringstream out;
  out << "y,state,age,child";
  for (const auto& f : ds.factors) out << ',' << f.name;
  out << '\n';
  const std::vector<RawRow> rows = dataset_to_rows(ds);
  for (const auto& r : rows) {
    out << r.y << ',' << r.group << ',' << format_double(r.age) << ',' << r.level;
    for (int code : r.factor_codes) out << ',' << code;
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Flat key = value files ('#' comments), used for run options and manifests.

inline std::vector<std::pair<std::string, std::string>> parse_keyvalue(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty())
      throw FormatError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return out;
}

inline std::string render_keyvalue(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Draws file: a versioned header of '# key = value' lines followed by one
// CSV block with named columns, one row per kept draw.

namespace detail {

template <typename T>
inline std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << values[i];
  }
  return out.str();
}

inline std::string join_doubles(const std::vector<double>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << format_double(values[i]);
  }
  return out.str();
}

}  // namespace detail

inline std::vector<std::string> draws_column_names(const PosteriorDraws& d) {
  std::vector<std::string> cols;
  cols.push_back("iter");
  for (const auto& b : d.beta_names) cols.push_back("beta." + b);
  if (d.functional != FunctionalMode::none)
    for (int k = 0; k < kNumLevels; ++k)
      for (double t : d.grids[k])
        cols.push_back("f" + std::to_string(k) + ".age" + format_double(t));
  if (d.intercepts == InterceptMode::dp) {
    for (int h = 1; h <= d.truncation; ++h) cols.push_back("theta." + std::to_string(h));
    for (int h = 1; h <= d.truncation; ++h) cols.push_back("V." + std::to_string(h));
    for (int g = 1; g <= d.num_groups; ++g) cols.push_back("S." + std::to_string(g));
  } else if (d.intercepts == InterceptMode::gaussian) {
    for (int g = 1; g <= d.num_groups; ++g) cols.push_back("mu." + std::to_string(g));
  }
  if (d.intercepts != InterceptMode::none) cols.push_back("sigma2.inv");
  if (d.intercepts == InterceptMode::dp) cols.push_back("alpha");
  return cols;
}

inline std::string render_draws(const PosteriorDraws& d) {
  std::ostringstream out;
  out << kDrawsMagic << '\n';
  out << "# intercepts = " << to_string(d.intercepts) << '\n';
  out << "# functional = " << to_string(d.functional) << '\n';
  out << "# kappa = " << format_double(d.kappa) << '\n';
  out << "# truncation = " << d.truncation << '\n';
  out << "# n = " << d.n << '\n';
  out << "# groups = " << detail::join(d.group_labels) << '\n';
  out << "# beta = " << detail::join(d.beta_names) << '\n';
  for (int k = 0; k < kNumLevels; ++k)
    out << "# grid" << k << " = " << detail::join_doubles(d.grids[k]) << '\n';
  out << "# iterations = " << d.config.iterations << '\n';
  out << "# burnin = " << d.config.burnin << '\n';
  out << "# thin = " << d.config.thin << '\n';
  out << "# seed = " << d.config.seed << '\n';
  out << "# threads = " << d.config.threads << '\n';
  out << "# data_digest = " << d.data_digest << '\n';

  const std::vector<std::string> cols = draws_column_names(d);
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << '\n';

  for (int r = 0; r < d.kept(); ++r) {
    out << d.iteration[r];
    for (int j = 0; j < d.beta[r].size(); ++j) out << ',' << format_double(d.beta[r][j]);
    if (d.functional != FunctionalMode::none)
      for (int k = 0; k < kNumLevels; ++k)
        for (int c = 0; c < d.f[r][k].size(); ++c) out << ',' << format_double(d.f[r][k][c]);
    if (d.intercepts == InterceptMode::dp) {
      for (int h = 0; h < d.truncation; ++h) out << ',' << format_double(d.atoms[r][h]);
      for (int h = 0; h < d.truncation; ++h) out << ',' << format_double(d.sticks[r][h]);
      for (int g = 0; g < d.num_groups; ++g) out << ',' << d.assign[r][g] + 1;
    } else if (d.intercepts == InterceptMode::gaussian) {
      for (int g = 0; g < d.num_groups; ++g) out << ',' << format_double(d.mu[r][g]);
    }
    if (d.intercepts != InterceptMode::none) out << ',' << format_double(d.sigma_inv[r]);
    if (d.intercepts == InterceptMode::dp) out << ',' << format_double(d.alpha[r]);
    out << '\n';
  }
  return out.str();
}

inline void write_draws(const PosteriorDraws& d, const std::string& path) {
  write_text_file(path, render_draws(d));
}

inline PosteriorDraws parse_draws(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kDrawsMagic)
    throw FormatError("not a recognized draws file (missing version line)");

  std::map<std::string, std::string> meta;
  std::string header_line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw FormatError("malformed header line: '" + t + "'");
      meta[trim(t.substr(1, eq - 1))] = trim(t.substr(eq + 1));
      continue;
    }
    header_line = t;
    break;
  }
  if (header_line.empty()) throw FormatError("draws file has no column header");

  const auto need = [&](const std::string& key) -> std::string {
    const auto it = meta.find(key);
    if (it == meta.end()) throw FormatError("draws header is missing '" + key + "'");
    return it->second;
  };

  PosteriorDraws d;
  d.intercepts = intercept_mode_from_string(need("intercepts"));
  d.functional = functional_mode_from_string(need("functional"));
  d.kappa = parse_double(need("kappa"), "header kappa");
  d.truncation = static_cast<int>(parse_int(need("truncation"), "header truncation"));
  d.n = static_cast<int>(parse_int(need("n"), "header n"));
  for (const std::string& tok : split(need("groups"), ','))
    if (!tok.empty()) d.group_labels.push_back(parse_int(tok, "header groups"));
  d.num_groups = static_cast<int>(d.group_labels.size());
  for (const std::string& tok : split(need("beta"), ','))
    if (!tok.empty()) d.beta_names.push_back(tok);
  for (int k = 0; k < kNumLevels; ++k)
    for (const std::string& tok : split(need("grid" + std::to_string(k)), ','))
      if (!tok.empty()) d.grids[k].push_back(parse_double(tok, "header grid"));
  d.config.iterations = static_cast<int>(parse_int(need("iterations"), "header iterations"));
  d.config.burnin = static_cast<int>(parse_int(need("burnin"), "header burnin"));
  d.config.thin = static_cast<int>(parse_int(need("thin"), "header thin"));
  d.config.seed = static_cast<std::uint64_t>(parse_int(need("seed"), "header seed"));
  d.config.threads = static_cast<int>(parse_int(need("threads"), "header threads"));
  d.data_digest = need("data_digest");

  const std::vector<std::string> expect = draws_column_names(d);
  const std::vector<std::string> cols = split(header_line, ',');
  if (cols != expect)
    throw FormatError("draws column header does not match the declared layout");

  const int p = static_cast<int>(d.beta_names.size());
  int record = 0;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    ++record;
    const std::string where = "record " + std::to_string(record);
    const std::vector<std::string> tok = split(t, ',');
    if (tok.size() != cols.size())
      throw FormatError(where + ": expected " + std::to_string(cols.size()) +
                        " fields, got " + std::to_string(tok.size()));
    std::size_t c = 0;
    d.iteration.push_back(static_cast<int>(parse_int(tok[c++], where)));
    Eigen::VectorXd beta(p);
    for (int j = 0; j < p; ++j) beta[j] = parse_double(tok[c++], where);
    d.beta.push_back(std::move(beta));
    if (d.functional != FunctionalMode::none) {
      std::array<Eigen::VectorXd, kNumLevels> f;
      for (int k = 0; k < kNumLevels; ++k) {
        f[k].resize(static_cast<Eigen::Index>(d.grids[k].size()));
        for (int l = 0; l < f[k].size(); ++l) f[k][l] = parse_double(tok[c++], where);
      }
      d.f.push_back(std::move(f));
    }
    if (d.intercepts == InterceptMode::dp) {
      Eigen::VectorXd atoms(d.truncation), sticks(d.truncation);
      Eigen::VectorXi assign(d.num_groups);
      for (int h = 0; h < d.truncation; ++h) atoms[h] = parse_double(tok[c++], where);
      for (int h = 0; h < d.truncation; ++h) sticks[h] = parse_double(tok[c++], where);
      for (int g = 0; g < d.num_groups; ++g) {
        const long long s = parse_int(tok[c++], where);
        if (s < 1 || s > d.truncation)
          throw FormatError(where + ": cluster label " + std::to_string(s) +
                            " outside truncation");
        assign[g] = static_cast<int>(s) - 1;
      }
      d.atoms.push_back(std::move(atoms));
      d.sticks.push_back(std::move(sticks));
      d.assign.push_back(std::move(assign));
    } else if (d.intercepts == InterceptMode::gaussian) {
      Eigen::VectorXd mu(d.num_groups);
      for (int g = 0; g < d.num_groups; ++g) mu[g] = parse_double(tok[c++], where);
      d.mu.push_back(std::move(mu));
    }
    if (d.intercepts != InterceptMode::none)
      d.sigma_inv.push_back(parse_double(tok[c++], where));
    if (d.intercepts == InterceptMode::dp)
      d.alpha.push_back(parse_double(tok[c++], where));
  }
  return d;
}

inline PosteriorDraws read_draws(const std::string& path) {
  return parse_draws(read_text_file(path));
}

}  // namespace npglm
