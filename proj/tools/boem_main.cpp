#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "boem/csv.hpp"
#include "boem/harness.hpp"

namespace fs = std::filesystem;
using namespace boem;

namespace {

std::vector<long> parse_checkpoints(const std::string& spec, long budget) {
  if (spec.empty()) return log_spaced_checkpoints(100, budget, 20);
  std::vector<long> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stol(item));
  return out;
}

Eigen::VectorXd parse_levels(const std::string& spec) {
  std::vector<double> vals;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
  Eigen::VectorXd out(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) out(i) = vals[i];
  return out;
}

std::string join_longs(const std::vector<long>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

struct CommonOpts {
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 0;
  std::string config_file;
};

void add_common(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--out", opts->out_dir, "output directory");
  cmd->add_option("--seed", opts->seed, "base RNG seed")->envname("BOEM_SEED");
  cmd->add_option("--threads", opts->threads,
                  "max worker threads for Monte Carlo runs (0 = default)");
  cmd->add_option("--config", opts->config_file,
                  "flat key=value config file; flags win");
}

// Expands a flat key=value config file into flags. Keys already present on
// the command line are skipped, so explicit flags win; unknown keys surface
// as ordinary unrecognized-option errors.
std::vector<std::string> apply_config_file(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    }
  }
  if (file.empty()) return args;

  std::ifstream in(file);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot read config file " + file);
  }
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::UsageError,
                  file + ":" + std::to_string(lineno) +
                      ": expected key=value, got '" + line + "'");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    const std::string flag = "--" + key;
    bool given = false;
    for (const auto& arg : args) {
      if (arg == flag || arg.rfind(flag + "=", 0) == 0) {
        given = true;
        break;
      }
    }
    if (given || key == "config") continue;
    args.push_back(flag);
    args.push_back(value);
  }
  return args;
}

fs::path prepare_out(const std::string& dir) {
  fs::create_directories(dir);
  return fs::path(dir);
}

ChiPolicy parse_chi(const std::string& s) {
  if (s == "warm") return ChiPolicy::WarmStart;
  if (s == "reset") return ChiPolicy::Reset;
  throw Error(ErrorCode::UsageError, "--chi must be 'warm' or 'reset'");
}

void require_a(const std::optional<double>& a) {
  if (!a) throw Error(ErrorCode::UsageError, "--a is required for boem algorithms");
  if (!(*a > 1.0)) throw Error(ErrorCode::UsageError, "--a must be > 1");
}

int run_simulate(const CommonOpts& common, const std::string& model, long n,
                 double phi, double var_u, double var_v,
                 const std::string& states_spec, double hmm_var) {
  const auto out = prepare_out(common.out_dir);
  SimulatedPath path;
  std::vector<std::pair<std::string, std::string>> meta{
      {"command", "simulate"}, {"model", model}, {"n", std::to_string(n)},
      {"seed", std::to_string(common.seed)}};
  if (model == "lgssm") {
    const LgssmParams p{phi, var_u, var_v};
    path = simulate_lgssm(p, n, common.seed);
    meta.push_back({"phi", format_double(phi)});
    meta.push_back({"var_u", format_double(var_u)});
    meta.push_back({"var_v", format_double(var_v)});
  } else if (model == "hmm") {
    FiniteGaussianHmm m = sixstate_true_hmm();
    if (!states_spec.empty()) {
      m.states = parse_levels(states_spec);
      m.d = static_cast<int>(m.states.size());
      if (m.d != 6) {
        throw Error(ErrorCode::UsageError,
                    "--states must list 6 levels for the built-in matrix");
      }
    }
    m.var = hmm_var;
    const DiscreteDist uniform{Eigen::VectorXd::Constant(m.d, 1.0 / m.d)};
    path = simulate_finite(m, uniform, n, common.seed);
    meta.push_back({"var", format_double(hmm_var)});
  } else {
    throw Error(ErrorCode::UsageError, "--model must be 'lgssm' or 'hmm'");
  }
  write_path_csv((out / "path.csv").string(), path, model == "hmm");
  write_metadata((out / "metadata.txt").string(), meta);
  return 0;
}

int run_fit(const CommonOpts& common, const std::string& model,
            const std::string& algo_str, std::optional<double> a, double c,
            std::optional<double> gamma_exp, long burn_in, long n0, long n,
            const std::string& data_file, const std::string& chi_str,
            const std::string& checkpoint_spec) {
  const auto out = prepare_out(common.out_dir);
  const Algo algo = algo_from_name(algo_str);
  const bool is_boem = (algo == Algo::Boem || algo == Algo::BoemAvg);
  if (is_boem) {
    require_a(a);
  } else {
    if (!gamma_exp) {
      throw Error(ErrorCode::UsageError,
                  "--gamma-exp is required for oem algorithms");
    }
    if (model != "hmm") {
      throw Error(ErrorCode::UsageError,
                  "the OEM baseline is implemented for the finite model");
    }
  }
  const ChiPolicy chi_policy = parse_chi(chi_str);
  const auto checkpoints = parse_checkpoints(checkpoint_spec, n);

  std::vector<double> observations;
  if (!data_file.empty()) {
    observations = read_path_observations(data_file);
    if (static_cast<long>(observations.size()) < n) {
      throw Error(ErrorCode::StreamExhausted,
                  "data file supplies " +
                      std::to_string(observations.size()) +
                      " observations, need " + std::to_string(n));
    }
    observations.resize(n);
  } else if (model == "lgssm") {
    observations =
        simulate_lgssm(LgssmParams{0.9, 0.6, 1.0}, n, common.seed)
            .observations;
  } else {
    const auto truth = sixstate_true_hmm();
    const DiscreteDist uniform{
        Eigen::VectorXd::Constant(truth.d, 1.0 / truth.d)};
    observations = simulate_finite(truth, uniform, n, common.seed).observations;
  }

  RunOutcome run;
  run.ok = true;
  run.seed = common.seed;
  if (model == "lgssm") {
    const BlockSchedule sched(c, *a);
    BoemOptions opt;
    opt.averaged = (algo == Algo::BoemAvg);
    opt.checkpoints = checkpoints;
    opt.chi_policy = chi_policy;
    opt.burn_in = burn_in;
    long n_blocks = 0;
    long total = 0;
    while (total + sched.tau(n_blocks + 1) <= n) total += sched.tau(++n_blocks);
    const LgssmParams init{0.1, 1.0, 2.0};
    auto res = boem_run<LgssmFamily>(init, lgssm_stationary(init), sched,
                                     observations, n_blocks, opt);
    run.trajectories[algo] =
        (algo == Algo::BoemAvg) ? std::move(res.averaged)
                                : std::move(res.plain);
  } else if (is_boem) {
    const BlockSchedule sched(c, *a);
    BoemOptions opt;
    opt.averaged = (algo == Algo::BoemAvg);
    opt.checkpoints = checkpoints;
    opt.chi_policy = chi_policy;
    opt.burn_in = burn_in;
    long n_blocks = 0;
    long total = 0;
    while (total + sched.tau(n_blocks + 1) <= n) total += sched.tau(++n_blocks);
    const auto init = sixstate_init_hmm();
    const DiscreteDist uniform{
        Eigen::VectorXd::Constant(init.d, 1.0 / init.d)};
    auto res = boem_run<FiniteFamily>(init, uniform, sched, observations,
                                      n_blocks, opt);
    run.trajectories[algo] =
        (algo == Algo::BoemAvg) ? std::move(res.averaged)
                                : std::move(res.plain);
  } else {
    OemOptions opt;
    opt.gamma_exponent = *gamma_exp;
    opt.burn_in = burn_in;
    opt.averaging_start = n0 > 0 ? n0 : n / 10;
    opt.checkpoints = checkpoints;
    opt.averaged = (algo == Algo::OemAvg);
    const auto init = sixstate_init_hmm();
    const DiscreteDist uniform{
        Eigen::VectorXd::Constant(init.d, 1.0 / init.d)};
    auto res = oem_run(init, uniform, observations, n, opt);
    run.trajectories[algo] =
        (algo == Algo::OemAvg) ? std::move(res.averaged)
                               : std::move(res.plain);
  }

  write_trajectory_csv((out / "trajectory.csv").string(), {run});
  std::vector<std::pair<std::string, std::string>> meta{
      {"command", "fit"},
      {"model", model},
      {"algo", algo_str},
      {"n", std::to_string(n)},
      {"seed", std::to_string(common.seed)},
      {"chi", chi_str},
      {"checkpoints", join_longs(checkpoints)},
      {"data", data_file}};
  if (is_boem) {
    meta.push_back({"a", format_double(*a)});
    meta.push_back({"c", format_double(c)});
  } else {
    meta.push_back({"gamma_exp", format_double(*gamma_exp)});
    meta.push_back({"burn_in", std::to_string(burn_in)});
    meta.push_back({"n0", std::to_string(n0)});
  }
  write_metadata((out / "metadata.txt").string(), meta);
  return 0;
}

int run_experiment_cmd(const CommonOpts& common, const std::string& name,
                       int runs, long n, std::optional<double> a, double c,
                       double gamma_exp, const std::string& chi_str) {
  const auto out = prepare_out(common.out_dir);
  const ChiPolicy chi_policy = parse_chi(chi_str);
  std::vector<std::pair<std::string, std::string>> meta{
      {"command", "experiment"},  {"name", name},
      {"runs", std::to_string(runs)}, {"n", std::to_string(n)},
      {"seed", std::to_string(common.seed)}, {"chi", chi_str},
      {"c", format_double(c)},
      {"gamma_exp", format_double(gamma_exp)},
      {"threads", std::to_string(common.threads)}};

  if (name == "lgm-quantiles") {
    auto cfg = lgssm_experiment_config();
    cfg.n_runs = runs;
    cfg.n_obs = n;
    cfg.checkpoints = log_spaced_checkpoints(100, n, 20);
    cfg.base_seed = common.seed;
    cfg.threads = common.threads;
    cfg.schedule_c = c;
    if (a) cfg.schedule_a = *a;
    cfg.chi_policy = chi_policy;
    meta.push_back({"a", format_double(cfg.schedule_a)});
    const auto result = run_experiment(cfg);
    write_summary_csv((out / "fig1_quantiles.csv").string(), result.summary);
    meta.push_back({"excluded", std::to_string(result.summary.excluded)});
  } else if (name == "lgm-blocksize") {
    auto cfg = lgssm_experiment_config();
    cfg.n_runs = runs;
    cfg.n_obs = n;
    cfg.base_seed = common.seed;
    cfg.threads = common.threads;
    cfg.schedule_c = c;
    cfg.chi_policy = chi_policy;
    cfg.checkpoints.clear();
    for (int l = 1; l <= 7; ++l) {
      cfg.checkpoints.push_back(
          static_cast<long>(std::llround(double(l) * double(n) / 7.0)));
    }
    const std::vector<double> exponents{1.2, 1.8, 2.0, 2.5};
    const auto tables = variance_vs_schedule(cfg, exponents);
    write_variance_csv((out / "fig2_variance.csv").string(), tables);
  } else if (name == "hmm-quantiles") {
    // Two companion studies: state levels + variance with the transition
    // matrix known, then the transition matrix + variance with the state
    // levels known.
    auto states_cfg = finite_states_config();
    states_cfg.n_runs = runs;
    states_cfg.n_obs = n;
    states_cfg.checkpoints = log_spaced_checkpoints(100, n, 20);
    states_cfg.base_seed = common.seed;
    states_cfg.threads = common.threads;
    states_cfg.schedule_c = c;
    if (a) states_cfg.schedule_a = *a;
    states_cfg.gamma_exponent = gamma_exp;
    states_cfg.chi_policy = chi_policy;
    meta.push_back({"a", format_double(states_cfg.schedule_a)});
    const auto states_result = run_experiment(states_cfg);
    SummaryTable fig3;
    fig3.excluded = states_result.summary.excluded;
    for (const auto& row : states_result.summary.rows) {
      if (row.param.rfind("m_", 0) != 0) fig3.rows.push_back(row);
    }
    write_summary_csv((out / "fig3_quantiles.csv").string(), fig3);

    auto trans_cfg = finite_trans_config();
    trans_cfg.n_runs = runs;
    trans_cfg.n_obs = n;
    trans_cfg.checkpoints = log_spaced_checkpoints(100, n, 20);
    trans_cfg.base_seed = common.seed;
    trans_cfg.threads = common.threads;
    trans_cfg.schedule_c = c;
    if (a) trans_cfg.schedule_a = *a;
    trans_cfg.chi_policy = chi_policy;
    const auto trans_result = run_experiment(trans_cfg);
    SummaryTable fig5;
    fig5.excluded = trans_result.summary.excluded;
    for (const auto& row : trans_result.summary.rows) {
      if (row.param.rfind("m_", 0) == 0 || row.param == "v") {
        fig5.rows.push_back(row);
      }
    }
    write_summary_csv((out / "fig5_quantiles.csv").string(), fig5);
    meta.push_back(
        {"excluded", std::to_string(states_result.summary.excluded +
                                    trans_result.summary.excluded)});
  } else if (name == "rates") {
    auto cfg = lgssm_experiment_config();
    cfg.n_runs = runs;
    cfg.n_obs = n;
    cfg.checkpoints = log_spaced_checkpoints(1000, n, 9);
    cfg.base_seed = common.seed;
    cfg.threads = common.threads;
    cfg.schedule_c = c;
    if (a) cfg.schedule_a = *a;
    cfg.chi_policy = chi_policy;
    meta.push_back({"a", format_double(cfg.schedule_a)});
    const auto result = run_experiment(cfg);
    std::vector<std::pair<std::string, SlopeEstimate>> slopes;
    slopes.emplace_back(
        "boem", rate_slope(result.runs, Algo::Boem, "phi", 0.9, 0.5));
    slopes.emplace_back(
        "boem-avg", rate_slope(result.runs, Algo::BoemAvg, "phi", 0.9, 0.5));
    write_rates_csv((out / "rates.csv").string(), slopes, "phi");
    meta.push_back({"excluded", std::to_string(result.summary.excluded)});
  } else {
    throw Error(ErrorCode::UsageError,
                "--name must be one of lgm-quantiles, lgm-blocksize, "
                "hmm-quantiles, rates");
  }
  write_metadata((out / "metadata.txt").string(), meta);
  return 0;
}

int run_compare(const CommonOpts& common, int runs, long n, double a, double c,
                double gamma_exp) {
  const auto out = prepare_out(common.out_dir);
  auto cfg = finite_states_config();
  cfg.algos = {Algo::BoemAvg, Algo::OemAvg};
  cfg.n_runs = runs;
  cfg.n_obs = n;
  cfg.checkpoints = log_spaced_checkpoints(100, n, 20);
  cfg.base_seed = common.seed;
  cfg.threads = common.threads;
  cfg.schedule_a = a;
  cfg.schedule_c = c;
  cfg.gamma_exponent = gamma_exp;
  const auto result = run_experiment(cfg);
  write_summary_csv((out / "compare.csv").string(), result.summary);
  write_metadata((out / "metadata.txt").string(),
                 {{"command", "compare"},
                  {"runs", std::to_string(runs)},
                  {"n", std::to_string(n)},
                  {"seed", std::to_string(common.seed)},
                  {"a", format_double(a)},
                  {"c", format_double(c)},
                  {"gamma_exp", format_double(gamma_exp)},
                  {"threads", std::to_string(common.threads)},
                  {"excluded", std::to_string(result.summary.excluded)}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block online EM estimation for hidden Markov models"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate a synthetic path");
  CommonOpts sim_common;
  add_common(sim, &sim_common);
  std::string sim_model = "lgssm";
  long sim_n = 10000;
  double sim_phi = 0.9, sim_var_u = 0.6, sim_var_v = 1.0, sim_hmm_var = 1.0;
  std::string sim_states;
  sim->add_option("--model", sim_model, "lgssm | hmm");
  sim->add_option("--n", sim_n, "number of observations");
  sim->add_option("--phi", sim_phi, "LGSSM autoregression coefficient");
  sim->add_option("--var-u", sim_var_u, "LGSSM state noise variance");
  sim->add_option("--var-v", sim_var_v, "LGSSM observation noise variance");
  sim->add_option("--states", sim_states, "HMM state levels, comma-separated");
  sim->add_option("--var", sim_hmm_var, "HMM emission variance");

  // fit
  auto* fit = app.add_subcommand("fit", "fit one stream with one algorithm");
  CommonOpts fit_common;
  add_common(fit, &fit_common);
  std::string fit_model = "lgssm", fit_algo = "boem-avg", fit_data,
              fit_chi = "warm", fit_checkpoints;
  std::optional<double> fit_a, fit_gamma;
  double fit_c = 1.0;
  long fit_n = 100000, fit_burn_in = 20, fit_n0 = 0;
  fit->add_option("--model", fit_model, "lgssm | hmm");
  fit->add_option("--algo", fit_algo, "boem | boem-avg | oem | oem-avg");
  fit->add_option("--a", fit_a, "block schedule exponent (boem)");
  fit->add_option("--c", fit_c, "block schedule scale (boem)");
  fit->add_option("--gamma-exp", fit_gamma, "step-size exponent (oem)");
  fit->add_option("--burn-in", fit_burn_in,
                  "observations accumulated before the first update");
  fit->add_option("--n0", fit_n0, "Polyak-Ruppert averaging start");
  fit->add_option("--n", fit_n, "observation budget");
  fit->add_option("--data", fit_data, "path CSV to fit (else simulate inline)");
  fit->add_option("--chi", fit_chi, "block initial distribution: warm | reset");
  fit->add_option("--checkpoints", fit_checkpoints,
                  "comma-separated observation counts");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Monte Carlo study presets");
  CommonOpts exp_common;
  add_common(exp, &exp_common);
  std::string exp_name, exp_chi = "warm";
  int exp_runs = 20;
  long exp_n = 100000;
  std::optional<double> exp_a;
  double exp_c = 1.0, exp_gamma = 0.53;
  exp->add_option("--name", exp_name,
                  "lgm-quantiles | lgm-blocksize | hmm-quantiles | rates")
      ->required();
  exp->add_option("--runs", exp_runs, "Monte Carlo runs");
  exp->add_option("--n", exp_n, "observation budget per run");
  exp->add_option("--a", exp_a, "block schedule exponent");
  exp->add_option("--c", exp_c, "block schedule scale");
  exp->add_option("--gamma-exp", exp_gamma, "OEM step-size exponent");
  exp->add_option("--chi", exp_chi, "warm | reset");

  // compare
  auto* cmp = app.add_subcommand(
      "compare", "averaged BOEM vs averaged OEM on matched seeds");
  CommonOpts cmp_common;
  add_common(cmp, &cmp_common);
  int cmp_runs = 20;
  long cmp_n = 100000;
  double cmp_a = 1.1, cmp_c = 1.0, cmp_gamma = 0.53;
  cmp->add_option("--runs", cmp_runs, "Monte Carlo runs");
  cmp->add_option("--n", cmp_n, "observation budget per run");
  cmp->add_option("--a", cmp_a, "block schedule exponent");
  cmp->add_option("--c", cmp_c, "block schedule scale");
  cmp->add_option("--gamma-exp", cmp_gamma, "OEM step-size exponent");

  try {
    auto args = apply_config_file(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (sim->parsed()) {
      return run_simulate(sim_common, sim_model, sim_n, sim_phi, sim_var_u,
                          sim_var_v, sim_states, sim_hmm_var);
    }
    if (fit->parsed()) {
      return run_fit(fit_common, fit_model, fit_algo, fit_a, fit_c, fit_gamma,
                     fit_burn_in, fit_n0, fit_n, fit_data, fit_chi,
                     fit_checkpoints);
    }
    if (exp->parsed()) {
      return run_experiment_cmd(exp_common, exp_name, exp_runs, exp_n, exp_a,
                                exp_c, exp_gamma, exp_chi);
    }
    if (cmp->parsed()) {
      return run_compare(cmp_common, cmp_runs, cmp_n, cmp_a, cmp_c, cmp_gamma);
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "ERROR UsageError: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "ERROR " << to_string(e.code()) << ": " << e.detail() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ERROR Internal: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
