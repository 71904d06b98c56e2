#ifndef BOEM_ESTIMATORS_HPP
#define BOEM_ESTIMATORS_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "boem/smoothing.hpp"

namespace boem {

// Parameter-set box constraints standing in for the compactness assumption.
constexpr double kMinVar = 1e-6;
constexpr double kMaxVar = 1e6;
constexpr double kMinTransEntry = 1e-8;
constexpr double kPhiMargin = 1e-6;
constexpr double kOccEps = 1e-12;   // minimum state occupancy in the M-step
constexpr double kVarEps = 1e-10;   // minimum computed variance

// Polynomial block schedule tau_n = floor(c n^a), a > 1.
class BlockSchedule {
 public:
  BlockSchedule(double c, double a);

  long tau(long n) const;
  double c() const { return c_; }
  double a() const { return a_; }

 private:
  double c_;
  double a_;
};

// (tau_n, T_n) with T_n the cumulative block length.
std::pair<long, long> schedule_block(const BlockSchedule& sched, long n);

// Which finite-model parameters the M-step re-estimates; the remaining ones
// are copied from a reference parameter set. The emission variance is always
// re-estimated.
enum class FiniteEstimands { All, StatesAndVariance, TransitionAndVariance };

FiniteGaussianHmm mstep_finite(const FiniteSuffStats& s);
FiniteGaussianHmm mstep_finite(const FiniteSuffStats& s, FiniteEstimands which,
                               const FiniteGaussianHmm& fixed);
LgssmParams mstep_lgssm(const LgssmSuffStats& s);

// Complete-data objectives maximized by the M-steps (up to constants).
double complete_data_objective(const FiniteGaussianHmm& theta,
                               const FiniteSuffStats& s);
double complete_data_objective(const LgssmParams& theta,
                               const LgssmSuffStats& s);

enum class ChiPolicy { WarmStart, Reset };

struct Checkpoint {
  long n_obs = 0;
  std::vector<double> values;
};

struct Trajectory {
  std::vector<std::string> param_names;
  std::vector<Checkpoint> checkpoints;

  double value_at(std::size_t checkpoint_idx, const std::string& name) const;
};

std::vector<std::pair<std::string, double>> flatten(const LgssmParams& p);
std::vector<std::pair<std::string, double>> flatten(const FiniteGaussianHmm& p);

struct BoemOptions {
  bool averaged = true;
  std::vector<long> checkpoints;  // observation counts, ascending
  ChiPolicy chi_policy = ChiPolicy::WarmStart;
  // No parameter update until this many observations have accumulated. The
  // early blocks of a polynomial schedule are tiny, and an M-step on a
  // near-empty block can pin distinct state levels to the same value.
  long burn_in = 20;
  // Blocks ending at or before this observation count stay out of the
  // running statistic average (0 = average from the start).
  long averaging_start = 0;
};

struct EstimatorResult {
  Trajectory plain;
  Trajectory averaged;  // empty when averaging is disabled
};

// Model-family glue used by the generic BOEM driver. An instance carries
// per-run estimation choices, e.g. which finite-model parameters to hold
// fixed.
struct FiniteFamily {
  using Params = FiniteGaussianHmm;
  using Stats = FiniteSuffStats;
  using Chi = DiscreteDist;
  using BlockResult = FiniteBlockResult;

  FiniteEstimands estimands = FiniteEstimands::All;
  Params fixed;  // reference values for the parameters held fixed

  BlockResult block_stats(const Params& theta, const Chi& chi,
                          std::span<const double> block) const {
    return block_stats_finite(theta, chi, block);
  }
  Params mstep(const Stats& s) const {
    return mstep_finite(s, estimands, fixed);
  }
  Chi end_chi(const BlockResult& r) const { return Chi{r.final_filter}; }
  static Stats combine(const Stats& a, double wa, const Stats& b, double wb);
};

struct LgssmFamily {
  using Params = LgssmParams;
  using Stats = LgssmSuffStats;
  using Chi = GaussianDist;
  using BlockResult = LgssmBlockResult;

  BlockResult block_stats(const Params& theta, const Chi& chi,
                          std::span<const double> block) const {
    return block_stats_lgssm(theta, chi, block);
  }
  Params mstep(const Stats& s) const { return mstep_lgssm(s); }
  Chi end_chi(const BlockResult& r) const { return r.final_filter; }
  static Stats combine(const Stats& a, double wa, const Stats& b, double wb);
};

// Running T_n-weighted statistic average (Sigma update); the first call with
// t_prev = 0 sets the average to s_new.
template <class Stats>
Stats update_average(const Stats& sigma, long t_prev, const Stats& s_new,
                     long tau);

template <class Family>
EstimatorResult boem_run(const typename Family::Params& theta0,
                         const typename Family::Chi& chi0,
                         const BlockSchedule& sched,
                         std::span<const double> observations, long n_blocks,
                         const BoemOptions& options,
                         const Family& family = Family{});

struct OemOptions {
  double gamma_exponent = 0.53;
  long burn_in = 20;
  long averaging_start = 0;  // Polyak-Ruppert start (observation count)
  std::vector<long> checkpoints;
  bool averaged = true;
  FiniteEstimands estimands = FiniteEstimands::All;
  FiniteGaussianHmm fixed;  // reference values for parameters held fixed
};

// Online EM baseline for the finite model: per-observation stochastic
// approximation with step sizes gamma_t = t^{-gamma_exponent}, plus a
// Polyak-Ruppert running mean of the parameter iterates.
EstimatorResult oem_run(const FiniteGaussianHmm& theta0,
                        const DiscreteDist& chi0,
                        std::span<const double> observations, long n_obs,
                        const OemOptions& options);

}  // namespace boem

#endif  // BOEM_ESTIMATORS_HPP
