#ifndef BOEM_HARNESS_HPP
#define BOEM_HARNESS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "boem/estimators.hpp"

namespace boem {

enum class Algo { Boem, BoemAvg, Oem, OemAvg };

const char* algo_name(Algo a);
Algo algo_from_name(const std::string& name);

enum class Family { Lgssm, FiniteHmm };

struct ExperimentConfig {
  Family family = Family::Lgssm;

  LgssmParams lgssm_true;
  LgssmParams lgssm_init;
  FiniteGaussianHmm hmm_true;
  FiniteGaussianHmm hmm_init;

  std::vector<Algo> algos;
  double schedule_c = 1.0;
  double schedule_a = 1.1;
  double gamma_exponent = 0.53;
  long burn_in = 20;
  long averaging_start = 0;       // OEM: 0 means 10% of the budget
  long boem_averaging_start = 0;  // BOEM: 0 means average from the start
  // Finite model only: which parameters the M-step re-estimates; the rest
  // stay at their true values, mirroring the split experimental protocol.
  FiniteEstimands hmm_estimands = FiniteEstimands::All;

  int n_runs = 1;
  long n_obs = 0;
  std::vector<long> checkpoints;  // ascending, last <= n_obs
  std::uint64_t base_seed = 0;
  ChiPolicy chi_policy = ChiPolicy::WarmStart;
  int threads = 0;  // 0 = OpenMP default
};

void validate_config(const ExperimentConfig& cfg);

struct RunOutcome {
  bool ok = false;
  std::string error;
  std::uint64_t seed = 0;
  std::map<Algo, Trajectory> trajectories;
};

struct SummaryRow {
  std::string algorithm;
  long n_obs = 0;
  std::string param;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double variance = 0.0;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
  int excluded = 0;  // failed runs, excluded from the aggregates
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  SummaryTable summary;
};

// Runs n_runs independent simulate + estimate passes with seeds
// base_seed + run_index, in an OpenMP worker pool; aggregation is a
// deterministic reduction ordered by run index.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Reruns the experiment for each schedule exponent and tabulates the
// empirical variance of the estimates per checkpoint.
std::map<double, SummaryTable> variance_vs_schedule(
    const ExperimentConfig& base, const std::vector<double>& exponents);

struct SlopeEstimate {
  double slope = 0.0;
  double std_error = 0.0;
  std::vector<long> n_obs;
  std::vector<double> rmse;
};

// Least-squares slope of log RMSE(theta_hat - theta_star) vs log n_obs over
// the checkpoint range, with RMSE taken across successful runs.
SlopeEstimate rate_slope(const std::vector<RunOutcome>& runs, Algo algo,
                         const std::string& param, double theta_star,
                         double sanity_bound);

// Quantile by linear interpolation of order statistics (type 7).
double quantile_type7(std::vector<double> values, double p);

// Experiment presets. The finite model has two companion studies: one
// estimates the state levels and emission variance with the transition
// matrix known, the other estimates the transition matrix and variance
// with the state levels known.
ExperimentConfig lgssm_experiment_config();
ExperimentConfig finite_states_config();
ExperimentConfig finite_trans_config();
FiniteGaussianHmm sixstate_true_hmm();
FiniteGaussianHmm sixstate_init_hmm();
std::vector<long> log_spaced_checkpoints(long lo, long hi, int count);

}  // namespace boem

#endif  // BOEM_HARNESS_HPP
