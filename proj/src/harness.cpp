#include "boem/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace boem {

const char* algo_name(Algo a) {
  switch (a) {
    case Algo::Boem: return "boem";
    case Algo::BoemAvg: return "boem-avg";
    case Algo::Oem: return "oem";
    case Algo::OemAvg: return "oem-avg";
  }
  return "unknown";
}

Algo algo_from_name(const std::string& name) {
  if (name == "boem") return Algo::Boem;
  if (name == "boem-avg") return Algo::BoemAvg;
  if (name == "oem") return Algo::Oem;
  if (name == "oem-avg") return Algo::OemAvg;
  throw Error(ErrorCode::UsageError, "unknown algorithm '" + name + "'");
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.n_runs < 1) {
    throw Error(ErrorCode::InvalidLength, "n_runs must be >= 1");
  }
  if (cfg.n_obs < 1) {
    throw Error(ErrorCode::InvalidLength, "observation budget must be >= 1");
  }
  if (cfg.algos.empty()) {
    throw Error(ErrorCode::UsageError, "no algorithms selected");
  }
  long prev = 0;
  for (long k : cfg.checkpoints) {
    if (k <= prev) {
      throw Error(ErrorCode::InvalidLength,
                  "checkpoints must be strictly ascending and positive");
    }
    if (k > cfg.n_obs) {
      throw Error(ErrorCode::InvalidLength,
                  "checkpoint " + std::to_string(k) + " exceeds the budget");
    }
    prev = k;
  }
  if (cfg.family == Family::FiniteHmm) {
    validate_finite_hmm(cfg.hmm_true);
    validate_finite_hmm(cfg.hmm_init);
  } else {
    validate_lgssm(cfg.lgssm_true);
    validate_lgssm(cfg.lgssm_init);
  }
}

namespace {

bool wants(const std::vector<Algo>& algos, Algo a) {
  return std::find(algos.begin(), algos.end(), a) != algos.end();
}

long blocks_within_budget(const BlockSchedule& sched, long n_obs) {
  long total = 0;
  long n = 0;
  while (true) {
    const long tau = sched.tau(n + 1);
    if (total + tau > n_obs) break;
    total += tau;
    ++n;
  }
  return n;
}

RunOutcome execute_run(const ExperimentConfig& cfg, int run_index) {
  RunOutcome out;
  out.seed = cfg.base_seed + static_cast<std::uint64_t>(run_index);
  try {
    const bool run_boem =
        wants(cfg.algos, Algo::Boem) || wants(cfg.algos, Algo::BoemAvg);
    const bool run_oem =
        wants(cfg.algos, Algo::Oem) || wants(cfg.algos, Algo::OemAvg);

    if (cfg.family == Family::Lgssm) {
      if (run_oem) {
        throw Error(ErrorCode::UsageError,
                    "the OEM baseline is implemented for the finite model");
      }
      const auto path = simulate_lgssm(cfg.lgssm_true, cfg.n_obs, out.seed);
      if (run_boem) {
        const BlockSchedule sched(cfg.schedule_c, cfg.schedule_a);
        BoemOptions opt;
        opt.averaged = wants(cfg.algos, Algo::BoemAvg);
        opt.checkpoints = cfg.checkpoints;
        opt.chi_policy = cfg.chi_policy;
        opt.burn_in = cfg.burn_in;
        opt.averaging_start = cfg.boem_averaging_start;
        const long n_blocks = blocks_within_budget(sched, cfg.n_obs);
        auto res = boem_run<LgssmFamily>(
            cfg.lgssm_init, lgssm_stationary(cfg.lgssm_init), sched,
            path.observations, n_blocks, opt);
        if (wants(cfg.algos, Algo::Boem)) {
          out.trajectories[Algo::Boem] = std::move(res.plain);
        }
        if (opt.averaged) {
          out.trajectories[Algo::BoemAvg] = std::move(res.averaged);
        }
      }
    } else {
      const int d = cfg.hmm_true.d;
      const DiscreteDist uniform{Eigen::VectorXd::Constant(d, 1.0 / d)};
      const auto path =
          simulate_finite(cfg.hmm_true, uniform, cfg.n_obs, out.seed);
      if (run_boem) {
        const BlockSchedule sched(cfg.schedule_c, cfg.schedule_a);
        BoemOptions opt;
        opt.averaged = wants(cfg.algos, Algo::BoemAvg);
        opt.checkpoints = cfg.checkpoints;
        opt.chi_policy = cfg.chi_policy;
        opt.burn_in = cfg.burn_in;
        opt.averaging_start = cfg.boem_averaging_start;
        const long n_blocks = blocks_within_budget(sched, cfg.n_obs);
        const FiniteFamily family{cfg.hmm_estimands, cfg.hmm_true};
        auto res = boem_run<FiniteFamily>(cfg.hmm_init, uniform, sched,
                                          path.observations, n_blocks, opt,
                                          family);
        if (wants(cfg.algos, Algo::Boem)) {
          out.trajectories[Algo::Boem] = std::move(res.plain);
        }
        if (opt.averaged) {
          out.trajectories[Algo::BoemAvg] = std::move(res.averaged);
        }
      }
      if (run_oem) {
        OemOptions opt;
        opt.gamma_exponent = cfg.gamma_exponent;
        opt.burn_in = cfg.burn_in;
        opt.averaging_start =
            cfg.averaging_start > 0 ? cfg.averaging_start : cfg.n_obs / 10;
        opt.checkpoints = cfg.checkpoints;
        opt.averaged = wants(cfg.algos, Algo::OemAvg);
        opt.estimands = cfg.hmm_estimands;
        opt.fixed = cfg.hmm_true;
        auto res =
            oem_run(cfg.hmm_init, uniform, path.observations, cfg.n_obs, opt);
        if (wants(cfg.algos, Algo::Oem)) {
          out.trajectories[Algo::Oem] = std::move(res.plain);
        }
        if (opt.averaged) {
          out.trajectories[Algo::OemAvg] = std::move(res.averaged);
        }
      }
    }
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.error = std::string(to_string(e.code())) + ": " + e.detail();
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

double sample_variance(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / (n - 1);
}

}  // namespace

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) {
    throw Error(ErrorCode::InvalidLength, "quantile of empty sample");
  }
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - lo) * (values[lo + 1] - values[lo]);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);

  ExperimentResult result;
  result.runs.resize(cfg.n_runs);

#ifdef _OPENMP
  const int threads =
      cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (int r = 0; r < cfg.n_runs; ++r) {
    result.runs[r] = execute_run(cfg, r);
  }

  for (const auto& run : result.runs) {
    if (!run.ok) ++result.summary.excluded;
  }

  // Ordered reduction: algorithms in config order, checkpoints ascending,
  // parameters in their declared order.
  for (Algo algo : cfg.algos) {
    const Trajectory* ref = nullptr;
    for (const auto& run : result.runs) {
      if (run.ok && run.trajectories.count(algo)) {
        ref = &run.trajectories.at(algo);
        break;
      }
    }
    if (ref == nullptr) continue;
    for (std::size_t ci = 0; ci < ref->checkpoints.size(); ++ci) {
      for (std::size_t pi = 0; pi < ref->param_names.size(); ++pi) {
        std::vector<double> values;
        for (const auto& run : result.runs) {
          if (!run.ok) continue;
          values.push_back(
              run.trajectories.at(algo).checkpoints[ci].values[pi]);
        }
        if (values.empty()) continue;
        SummaryRow row;
        row.algorithm = algo_name(algo);
        row.n_obs = ref->checkpoints[ci].n_obs;
        row.param = ref->param_names[pi];
        row.median = quantile_type7(values, 0.5);
        row.q1 = quantile_type7(values, 0.25);
        row.q3 = quantile_type7(values, 0.75);
        row.variance = sample_variance(values);
        result.summary.rows.push_back(std::move(row));
      }
    }
  }
  return result;
}

std::map<double, SummaryTable> variance_vs_schedule(
    const ExperimentConfig& base, const std::vector<double>& exponents) {
  std::map<double, SummaryTable> out;
  for (double a : exponents) {
    if (!(a > 1.0)) {
      throw Error(ErrorCode::InvalidSchedule,
                  "schedule exponent must be > 1");
    }
    ExperimentConfig cfg = base;
    cfg.schedule_a = a;
    out[a] = run_experiment(cfg).summary;
  }
  return out;
}

SlopeEstimate rate_slope(const std::vector<RunOutcome>& runs, Algo algo,
                         const std::string& param, double theta_star,
                         double sanity_bound) {
  const Trajectory* ref = nullptr;
  for (const auto& run : runs) {
    if (run.ok && run.trajectories.count(algo)) {
      ref = &run.trajectories.at(algo);
      break;
    }
  }
  if (ref == nullptr || ref->checkpoints.size() < 3) {
    throw Error(ErrorCode::InsufficientSpan, "need at least 3 checkpoints");
  }
  const double span =
      std::log10(static_cast<double>(ref->checkpoints.back().n_obs)) -
      std::log10(static_cast<double>(ref->checkpoints.front().n_obs));
  if (span < 1.5) {
    throw Error(ErrorCode::InsufficientSpan,
                "checkpoints span " + std::to_string(span) +
                    " decades, need >= 1.5");
  }

  const std::size_t pi = static_cast<std::size_t>(
      std::find(ref->param_names.begin(), ref->param_names.end(), param) -
      ref->param_names.begin());
  if (pi >= ref->param_names.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "unknown parameter " + param);
  }

  SlopeEstimate est;
  for (std::size_t ci = 0; ci < ref->checkpoints.size(); ++ci) {
    double ss = 0.0;
    int count = 0;
    for (const auto& run : runs) {
      if (!run.ok) continue;
      const double err =
          run.trajectories.at(algo).checkpoints[ci].values[pi] - theta_star;
      ss += err * err;
      ++count;
    }
    est.n_obs.push_back(ref->checkpoints[ci].n_obs);
    est.rmse.push_back(std::sqrt(ss / count));
  }
  if (est.rmse.back() > sanity_bound) {
    throw Error(ErrorCode::NotConverged,
                "final RMSE " + std::to_string(est.rmse.back()) +
                    " exceeds bound " + std::to_string(sanity_bound));
  }

  const std::size_t n = est.rmse.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(static_cast<double>(est.n_obs[i]));
    const double y = std::log(std::max(est.rmse[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  est.slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - est.slope * sx) / n;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(static_cast<double>(est.n_obs[i]));
    const double y = std::log(std::max(est.rmse[i], 1e-300));
    const double resid = y - (intercept + est.slope * x);
    rss += resid * resid;
  }
  if (n > 2) {
    est.std_error = std::sqrt(rss / (n - 2) / (sxx - sx * sx / n));
  }
  return est;
}

FiniteGaussianHmm sixstate_true_hmm() {
  FiniteGaussianHmm m;
  m.d = 6;
  m.states.resize(6);
  m.states << -1.0, 0.0, 1.0, 2.0, 3.0, 4.0;
  m.var = 1.0;
  m.trans.resize(6, 6);
  m.trans << 0.5, 0.05, 0.1, 0.15, 0.15, 0.05,
             0.2, 0.35, 0.1, 0.15, 0.05, 0.15,
             0.1, 0.1, 0.6, 0.05, 0.05, 0.1,
             0.02, 0.03, 0.1, 0.7, 0.1, 0.05,
             0.1, 0.05, 0.13, 0.02, 0.6, 0.1,
             0.1, 0.1, 0.13, 0.12, 0.1, 0.45;
  return m;
}

FiniteGaussianHmm sixstate_init_hmm() {
  FiniteGaussianHmm m;
  m.d = 6;
  m.states.resize(6);
  m.states << -1.0, 0.0, 0.5, 2.0, 3.0, 4.0;
  m.var = 2.0;
  m.trans = Eigen::MatrixXd::Constant(6, 6, 1.0 / 6.0);
  return m;
}

ExperimentConfig lgssm_experiment_config() {
  ExperimentConfig cfg;
  cfg.family = Family::Lgssm;
  cfg.lgssm_true = LgssmParams{0.9, 0.6, 1.0};
  cfg.lgssm_init = LgssmParams{0.1, 1.0, 2.0};
  cfg.algos = {Algo::Boem, Algo::BoemAvg};
  cfg.schedule_c = 1.0;
  cfg.schedule_a = 1.1;
  cfg.n_runs = 20;
  cfg.n_obs = 100000;
  cfg.checkpoints = log_spaced_checkpoints(100, cfg.n_obs, 20);
  return cfg;
}

ExperimentConfig finite_states_config() {
  ExperimentConfig cfg;
  cfg.family = Family::FiniteHmm;
  cfg.hmm_true = sixstate_true_hmm();
  cfg.hmm_init = sixstate_init_hmm();
  cfg.hmm_init.trans = cfg.hmm_true.trans;  // transition matrix known
  cfg.hmm_estimands = FiniteEstimands::StatesAndVariance;
  cfg.algos = {Algo::Boem, Algo::BoemAvg, Algo::Oem, Algo::OemAvg};
  cfg.schedule_c = 1.0;
  cfg.schedule_a = 1.1;
  cfg.gamma_exponent = 0.53;
  cfg.n_runs = 20;
  cfg.n_obs = 100000;
  cfg.checkpoints = log_spaced_checkpoints(100, cfg.n_obs, 20);
  return cfg;
}

ExperimentConfig finite_trans_config() {
  ExperimentConfig cfg;
  cfg.family = Family::FiniteHmm;
  cfg.hmm_true = sixstate_true_hmm();
  cfg.hmm_init = sixstate_true_hmm();  // state levels known
  cfg.hmm_init.var = 2.0;
  cfg.hmm_init.trans = Eigen::MatrixXd::Constant(6, 6, 1.0 / 6.0);
  cfg.hmm_estimands = FiniteEstimands::TransitionAndVariance;
  cfg.algos = {Algo::Boem, Algo::BoemAvg};
  cfg.schedule_c = 1.0;
  cfg.schedule_a = 1.1;
  cfg.n_runs = 20;
  cfg.n_obs = 100000;
  cfg.boem_averaging_start = 10000;
  cfg.checkpoints = log_spaced_checkpoints(100, cfg.n_obs, 20);
  return cfg;
}

std::vector<long> log_spaced_checkpoints(long lo, long hi, int count) {
  std::vector<long> out;
  const double llo = std::log10(static_cast<double>(lo));
  const double lhi = std::log10(static_cast<double>(hi));
  long prev = 0;
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 1.0 : static_cast<double>(i) / (count - 1);
    long k = static_cast<long>(std::llround(std::pow(10.0, llo + f * (lhi - llo))));
    k = std::max(k, prev + 1);
    out.push_back(k);
    prev = k;
  }
  return out;
}

}  // namespace boem
