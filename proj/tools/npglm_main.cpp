#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "npglm/npglm.hpp"

namespace fs = std::filesystem;
using namespace npglm;

namespace {

// Everything one run needs beyond the data itself. Values resolve in layers:
// built-in defaults, then NPGLM_SEED, then the options file, then flags.
struct RunSettings {
  ModelSpec spec;
  ChainConfig config;
};

void apply_setting(RunSettings& rs, const std::string& key, const std::string& value) {
  const std::string where = "option '" + key + "'";
  if (key == "intercepts") rs.spec.intercepts = intercept_mode_from_string(value);
  else if (key == "functional") rs.spec.functional = functional_mode_from_string(value);
  else if (key == "kappa") rs.spec.kappa = parse_double(value, where);
  else if (key == "truncation") rs.spec.truncation = static_cast<int>(parse_int(value, where));
  else if (key == "a") rs.spec.a = parse_double(value, where);
  else if (key == "b") rs.spec.b = parse_double(value, where);
  else if (key == "a_alpha") rs.spec.a_alpha = parse_double(value, where);
  else if (key == "b_alpha") rs.spec.b_alpha = parse_double(value, where);
  else if (key == "iterations") rs.config.iterations = static_cast<int>(parse_int(value, where));
  else if (key == "burnin") rs.config.burnin = static_cast<int>(parse_int(value, where));
  else if (key == "thin") rs.config.thin = static_cast<int>(parse_int(value, where));
  else if (key == "seed") rs.config.seed = static_cast<std::uint64_t>(parse_int(value, where));
  else if (key == "threads") rs.config.threads = static_cast<int>(parse_int(value, where));
  else throw FormatError("unknown run option '" + key + "'");
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("NPGLM_SEED");
  if (!s || !*s) return std::nullopt;
  return static_cast<std::uint64_t>(parse_int(s, "NPGLM_SEED"));
}

// Option holders bound to flags; count() on the option objects decides
// which ones override the file-provided settings.
struct CliValues {
  std::string data;
  std::string options_file;
  std::string out;
  std::string draws;
  std::string intercepts = "dp";
  std::string functional = "gp";
  std::string targets = "all";
  int scenario = 1;
  int iterations = 5000;
  int burnin = 2000;
  int thin = 1;
  int truncation = 0;
  int threads = 1;
  int level = -1;
  double kappa = 0.02;
  std::uint64_t seed = 0;
};

void write_summary_files(const PosteriorDraws& d, const fs::path& out,
                         const std::string& targets, int level) {
  const bool all = targets == "all";
  if (all || targets == "beta")
    write_text_file((out / "coefficients.csv").string(),
                    coefficients_to_csv(summarize_coefficients(d)));
  if (targets == "f" || (all && d.functional == FunctionalMode::gp)) {
    for (int k = 0; k < kNumLevels; ++k) {
      if (level >= 0 && level != k) continue;
      write_text_file((out / ("functional_" + std::to_string(k) + ".csv")).string(),
                      functional_band_to_csv(functional_summary(d, k)));
    }
  }
  if (targets == "cluster" || (all && d.intercepts == InterceptMode::dp)) {
    const ClusterSummary cs = cluster_summary(d);
    write_text_file((out / "coclustering.csv").string(),
                    coclustering_to_csv(cs, d.group_labels));
  }
  if ((all || targets == "cluster") && d.intercepts != InterceptMode::none) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d.num_groups);
    for (int r = 0; r < d.kept(); ++r) mean += d.group_intercepts(r);
    mean /= d.kept();
    std::ostringstream txt;
    txt << "state,mean\n";
    for (int g = 0; g < d.num_groups; ++g)
      txt << d.group_labels[g] << ',' << format_double(mean[g]) << '\n';
    write_text_file((out / "intercepts.csv").string(), txt.str());
  }
}

int run_simulate(const CliValues& cli, std::uint64_t seed) {
  const ScenarioTruth truth = generate_truth(cli.scenario, seed);
  const Dataset ds = generate_dataset(truth, seed);
  const fs::path out(cli.out);
  fs::create_directories(out);
  const std::string data_csv = data_to_csv(ds);
  write_text_file((out / "data.csv").string(), data_csv);
  write_text_file((out / "truth.csv").string(), truth_to_csv(truth));
  write_text_file((out / "manifest.txt").string(),
                  render_keyvalue({{"command", "simulate"},
                                   {"version", NPGLM_VERSION},
                                   {"scenario", std::to_string(cli.scenario)},
                                   {"seed", std::to_string(seed)},
                                   {"rows", std::to_string(ds.n)},
                                   {"data_digest", sha256_hex(data_csv)}}));
  std::cout << "wrote " << ds.n << " observations to " << out.string() << "\n";
  return 0;
}

// An input file that cannot be read is a problem with the invocation, not
// with the run, so it reports through the validation exit code. Write
// failures keep their runtime classification.
std::string read_input_file(const std::string& path) {
  try {
    return read_text_file(path);
  } catch (const IoError& e) {
    throw FormatError(e.what());
  }
}

int run_fit(const RunSettings& rs, const CliValues& cli) {
  const std::string data_text = read_input_file(cli.data);
  const std::string digest = sha256_hex(data_text);
  const ParsedData parsed = parse_data_csv(data_text);
  for (const std::string& w : parsed.warnings) std::cerr << "warning: " << w << "\n";
  const Dataset ds = build_dataset(parsed.rows, parsed.factors);

  const fs::path out(cli.out);
  fs::create_directories(out);

  PosteriorDraws draws;
  try {
    draws = run_chain(ds, rs.spec, rs.config);
  } catch (const ChainAbortedWithState& e) {
    std::ostringstream diag;
    diag << e.what() << "\n";
    if (e.last_state) {
      diag << "last good state:\n";
      diag << "  beta =";
      for (int j = 0; j < e.last_state->beta.size(); ++j)
        diag << ' ' << format_double(e.last_state->beta[j]);
      diag << "\n  sigma2.inv = " << format_double(e.last_state->sigma_inv)
           << "\n  alpha = " << format_double(e.last_state->alpha) << "\n";
    }
    write_text_file((out / "diagnostics.txt").string(), diag.str());
    std::cerr << "error: " << e.what() << " (diagnostics written to "
              << (out / "diagnostics.txt").string() << ")\n";
    return 1;
  }
  draws.data_digest = digest;

  write_draws(draws, (out / "draws.csv").string());
  write_summary_files(draws, out, "all", -1);

  std::vector<std::pair<std::string, std::string>> manifest = {
      {"command", "fit"},
      {"version", NPGLM_VERSION},
      {"data", cli.data},
      {"data_digest", digest},
      {"intercepts", to_string(draws.intercepts)},
      {"functional", to_string(draws.functional)},
      {"kappa", format_double(rs.spec.kappa)},
      {"truncation", std::to_string(draws.truncation)},
      {"a", format_double(rs.spec.a)},
      {"b", format_double(rs.spec.b)},
      {"a_alpha", format_double(rs.spec.a_alpha)},
      {"b_alpha", format_double(rs.spec.b_alpha)},
      {"iterations", std::to_string(rs.config.iterations)},
      {"burnin", std::to_string(rs.config.burnin)},
      {"thin", std::to_string(rs.config.thin)},
      {"seed", std::to_string(rs.config.seed)},
      {"threads", std::to_string(rs.config.threads)},
      {"kept", std::to_string(draws.kept())}};
  write_text_file((out / "manifest.txt").string(), render_keyvalue(manifest));

  std::cout << "kept " << draws.kept() << " draws in "
            << format_double(draws.wall_seconds) << " s; outputs in "
            << out.string() << "\n";
  return 0;
}

int run_summarize(const CliValues& cli) {
  const PosteriorDraws draws = parse_draws(read_input_file(cli.draws));
  const fs::path out(cli.out);
  fs::create_directories(out);
  write_summary_files(draws, out, cli.targets, cli.level);
  write_text_file((out / "manifest.txt").string(),
                  render_keyvalue({{"command", "summarize"},
                                   {"version", NPGLM_VERSION},
                                   {"draws", cli.draws},
                                   {"targets", cli.targets},
                                   {"data_digest", draws.data_digest}}));
  std::cout << "wrote summaries for " << draws.kept() << " draws to "
            << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical Bayesian logistic regression with smooth age "
               "effects and clustered group intercepts"};
  app.require_subcommand(1);
  CliValues cli;

  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim->add_option("--scenario", cli.scenario, "Generating scenario (1 or 2)")->required();
  CLI::Option* sim_seed = sim->add_option("--seed", cli.seed, "Generator seed");
  sim->add_option("--out", cli.out, "Output directory")->required();

  CLI::App* fit = app.add_subcommand("fit", "Fit the model to a dataset");
  fit->add_option("--data", cli.data, "Observation CSV")->required();
  fit->add_option("--options", cli.options_file, "key = value run options file");
  CLI::Option* f_int = fit->add_option("--intercepts", cli.intercepts,
                                       "Group intercept model: dp, gaussian, none");
  CLI::Option* f_fun = fit->add_option("--functional", cli.functional,
                                       "Age effect model: gp, parabolic, none");
  CLI::Option* f_kappa = fit->add_option("--kappa", cli.kappa, "Kernel length-scale");
  CLI::Option* f_trunc = fit->add_option("--truncation", cli.truncation,
                                         "Stick-breaking truncation (0 = number of groups)");
  CLI::Option* f_iter = fit->add_option("--iterations", cli.iterations, "Total sweeps");
  CLI::Option* f_burn = fit->add_option("--burnin", cli.burnin, "Discarded initial sweeps");
  CLI::Option* f_thin = fit->add_option("--thin", cli.thin, "Keep every thin-th sweep");
  CLI::Option* f_seed = fit->add_option("--seed", cli.seed, "Chain seed");
  CLI::Option* f_thr = fit->add_option("--threads", cli.threads, "Worker cap");
  fit->add_option("--out", cli.out, "Output directory")->required();

  CLI::App* sum = app.add_subcommand("summarize", "Recompute summaries from a draws file");
  sum->add_option("--draws", cli.draws, "Draws file from a fit")->required();
  sum->add_option("--targets", cli.targets, "Which summaries to write")
      ->check(CLI::IsMember({"all", "beta", "f", "cluster"}));
  sum->add_option("--level", cli.level, "Restrict the band tables to one level")
      ->check(CLI::Range(0, kNumLevels - 1));
  sum->add_option("--out", cli.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      std::uint64_t seed = 0;
      if (const auto es = env_seed()) seed = *es;
      if (sim_seed->count() > 0) seed = cli.seed;
      return run_simulate(cli, seed);
    }
    if (fit->parsed()) {
      RunSettings rs;
      if (const auto es = env_seed()) rs.config.seed = *es;
      if (!cli.options_file.empty())
        for (const auto& [k, v] : parse_keyvalue(read_input_file(cli.options_file)))
          apply_setting(rs, k, v);
      if (f_int->count()) rs.spec.intercepts = intercept_mode_from_string(cli.intercepts);
      if (f_fun->count()) rs.spec.functional = functional_mode_from_string(cli.functional);
      if (f_kappa->count()) rs.spec.kappa = cli.kappa;
      if (f_trunc->count()) rs.spec.truncation = cli.truncation;
      if (f_iter->count()) rs.config.iterations = cli.iterations;
      if (f_burn->count()) rs.config.burnin = cli.burnin;
      if (f_thin->count()) rs.config.thin = cli.thin;
      if (f_seed->count()) rs.config.seed = cli.seed;
      if (f_thr->count()) rs.config.threads = cli.threads;
      return run_fit(rs, cli);
    }
    return run_summarize(cli);
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidParameter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ModeMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InsufficientSamples& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
