#include "boem/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace boem {

namespace {
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
}

BlockSchedule::BlockSchedule(double c, double a) : c_(c), a_(a) {
  if (!(a > 1.0)) {
    throw Error(ErrorCode::InvalidSchedule, "exponent a must be > 1");
  }
  if (std::floor(c) < 1.0) {
    throw Error(ErrorCode::InvalidSchedule,
                "floor(c) must be >= 1 so that tau_1 >= 1");
  }
}

long BlockSchedule::tau(long n) const {
  if (n < 1) throw Error(ErrorCode::InvalidSchedule, "block index must be >= 1");
  return static_cast<long>(
      std::floor(c_ * std::pow(static_cast<double>(n), a_)));
}

std::pair<long, long> schedule_block(const BlockSchedule& sched, long n) {
  long total = 0;
  for (long k = 1; k <= n; ++k) total += sched.tau(k);
  return {sched.tau(n), total};
}

FiniteGaussianHmm mstep_finite(const FiniteSuffStats& s, FiniteEstimands which,
                               const FiniteGaussianHmm& fixed) {
  const int d = static_cast<int>(s.s0.size());
  FiniteGaussianHmm theta;
  theta.d = d;

  if (which == FiniteEstimands::TransitionAndVariance) {
    theta.states = fixed.states;
  } else {
    theta.states.resize(d);
    for (int i = 0; i < d; ++i) {
      if (s.s0(i) < kOccEps) {
        throw Error(ErrorCode::DegenerateState,
                    "state " + std::to_string(i) + " has occupancy " +
                        std::to_string(s.s0(i)));
      }
      theta.states(i) = s.s1(i) / s.s0(i);
    }
  }

  // Maximizing over the variance given the state levels above.
  double v = s.s2.sum();
  for (int i = 0; i < d; ++i) {
    v += theta.states(i) * theta.states(i) * s.s0(i) -
         2.0 * theta.states(i) * s.s1(i);
  }
  // A one-observation block has zero within-state spread; project onto the
  // variance box instead of failing. Substantially negative values mean the
  // statistics themselves are broken.
  if (v < -1e-9 * std::max(1.0, s.s2.sum())) {
    throw Error(ErrorCode::DegenerateVariance,
                "emission variance collapsed to " + std::to_string(v));
  }
  theta.var = std::clamp(v, kMinVar, kMaxVar);

  if (which == FiniteEstimands::StatesAndVariance) {
    theta.trans = fixed.trans;
  } else {
    theta.trans.resize(d, d);
    for (int i = 0; i < d; ++i) {
      const double row_sum = s.spair.row(i).sum();
      if (row_sum < kOccEps) {
        throw Error(ErrorCode::DegenerateState,
                    "transition row " + std::to_string(i) + " unvisited");
      }
      double floored_sum = 0.0;
      for (int j = 0; j < d; ++j) {
        theta.trans(i, j) = std::max(s.spair(i, j) / row_sum, kMinTransEntry);
        floored_sum += theta.trans(i, j);
      }
      theta.trans.row(i) /= floored_sum;
    }
  }
  return theta;
}

FiniteGaussianHmm mstep_finite(const FiniteSuffStats& s) {
  return mstep_finite(s, FiniteEstimands::All, FiniteGaussianHmm{});
}

LgssmParams mstep_lgssm(const LgssmSuffStats& s) {
  if (!(s.m_prev2 > 0.0)) {
    throw Error(ErrorCode::DegenerateVariance, "m_prev2 must be positive");
  }
  LgssmParams theta;
  theta.phi = std::clamp(s.m_cross / s.m_prev2, -1.0 + kPhiMargin,
                         1.0 - kPhiMargin);
  const double var_u = s.m_cur2 - s.m_cross * s.m_cross / s.m_prev2;
  const double var_v = s.m_y2 - 2.0 * s.m_xy + s.m_cur2;
  const double tol = -1e-9 * std::max(1.0, std::abs(s.m_cur2) + s.m_y2);
  if (var_u < tol) {
    throw Error(ErrorCode::DegenerateVariance,
                "state variance collapsed to " + std::to_string(var_u));
  }
  if (var_v < tol) {
    throw Error(ErrorCode::DegenerateVariance,
                "observation variance collapsed to " + std::to_string(var_v));
  }
  theta.var_u = std::clamp(var_u, kMinVar, kMaxVar);
  theta.var_v = std::clamp(var_v, kMinVar, kMaxVar);
  return theta;
}

double complete_data_objective(const FiniteGaussianHmm& theta,
                               const FiniteSuffStats& s) {
  const int d = theta.d;
  double obj = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (s.spair(i, j) > 0.0) {
        obj += s.spair(i, j) * std::log(theta.trans(i, j));
      }
    }
  }
  obj += -0.5 * std::log(kTwoPi * theta.var) * s.s0.sum();
  double quad = s.s2.sum();
  for (int i = 0; i < d; ++i) {
    quad += theta.states(i) * theta.states(i) * s.s0(i) -
            2.0 * theta.states(i) * s.s1(i);
  }
  obj -= quad / (2.0 * theta.var);
  return obj;
}

double complete_data_objective(const LgssmParams& theta,
                               const LgssmSuffStats& s) {
  const double qu = s.m_cur2 - 2.0 * theta.phi * s.m_cross +
                    theta.phi * theta.phi * s.m_prev2;
  const double qv = s.m_y2 - 2.0 * s.m_xy + s.m_cur2;
  return -0.5 * std::log(kTwoPi * theta.var_u) - qu / (2.0 * theta.var_u) -
         0.5 * std::log(kTwoPi * theta.var_v) - qv / (2.0 * theta.var_v);
}

double Trajectory::value_at(std::size_t checkpoint_idx,
                            const std::string& name) const {
  const auto it =
      std::find(param_names.begin(), param_names.end(), name);
  if (it == param_names.end()) {
    throw Error(ErrorCode::IndexOutOfRange, "unknown parameter " + name);
  }
  return checkpoints.at(checkpoint_idx)
      .values.at(static_cast<std::size_t>(it - param_names.begin()));
}

std::vector<std::pair<std::string, double>> flatten(const LgssmParams& p) {
  return {{"phi", p.phi}, {"var_u", p.var_u}, {"var_v", p.var_v}};
}

std::vector<std::pair<std::string, double>> flatten(
    const FiniteGaussianHmm& p) {
  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("v", p.var);
  for (int i = 0; i < p.d; ++i) {
    out.emplace_back("x" + std::to_string(i + 1), p.states(i));
  }
  for (int i = 0; i < p.d; ++i) {
    for (int j = 0; j < p.d; ++j) {
      out.emplace_back(
          "m_" + std::to_string(i + 1) + "_" + std::to_string(j + 1),
          p.trans(i, j));
    }
  }
  return out;
}

FiniteSuffStats FiniteFamily::combine(const FiniteSuffStats& a, double wa,
                                      const FiniteSuffStats& b, double wb) {
  FiniteSuffStats out;
  out.s0 = wa * a.s0 + wb * b.s0;
  out.s1 = wa * a.s1 + wb * b.s1;
  out.s2 = wa * a.s2 + wb * b.s2;
  out.spair = wa * a.spair + wb * b.spair;
  return out;
}

LgssmSuffStats LgssmFamily::combine(const LgssmSuffStats& a, double wa,
                                    const LgssmSuffStats& b, double wb) {
  LgssmSuffStats out;
  out.m_prev2 = wa * a.m_prev2 + wb * b.m_prev2;
  out.m_cross = wa * a.m_cross + wb * b.m_cross;
  out.m_cur2 = wa * a.m_cur2 + wb * b.m_cur2;
  out.m_xy = wa * a.m_xy + wb * b.m_xy;
  out.m_y2 = wa * a.m_y2 + wb * b.m_y2;
  return out;
}

template <class Stats>
Stats combine_dispatch(const Stats& a, double wa, const Stats& b, double wb);

template <>
FiniteSuffStats combine_dispatch(const FiniteSuffStats& a, double wa,
                                 const FiniteSuffStats& b, double wb) {
  return FiniteFamily::combine(a, wa, b, wb);
}

template <>
LgssmSuffStats combine_dispatch(const LgssmSuffStats& a, double wa,
                                const LgssmSuffStats& b, double wb) {
  return LgssmFamily::combine(a, wa, b, wb);
}

template <class Stats>
Stats update_average(const Stats& sigma, long t_prev, const Stats& s_new,
                     long tau) {
  if (tau < 1) throw Error(ErrorCode::InvalidLength, "tau must be >= 1");
  if (t_prev == 0) return s_new;
  const double t_new = static_cast<double>(t_prev + tau);
  return combine_dispatch(sigma, t_prev / t_new, s_new, tau / t_new);
}

template FiniteSuffStats update_average(const FiniteSuffStats&, long,
                                        const FiniteSuffStats&, long);
template LgssmSuffStats update_average(const LgssmSuffStats&, long,
                                       const LgssmSuffStats&, long);

namespace {

// Records the estimate in force at each requested observation count: the
// estimates are step functions updated at block boundaries T_n.
class CheckpointRecorder {
 public:
  CheckpointRecorder(Trajectory* traj, std::vector<long> checkpoints)
      : traj_(traj), checkpoints_(std::move(checkpoints)) {}

  // Called when a new estimate takes effect at observation count t; flushes
  // all checkpoints strictly before t with the previous values.
  void advance(long t, const std::vector<double>& prev_values) {
    while (next_ < checkpoints_.size() && checkpoints_[next_] < t) {
      traj_->checkpoints.push_back({checkpoints_[next_], prev_values});
      ++next_;
    }
  }

  void finish(const std::vector<double>& last_values) {
    while (next_ < checkpoints_.size()) {
      traj_->checkpoints.push_back({checkpoints_[next_], last_values});
      ++next_;
    }
  }

 private:
  Trajectory* traj_;
  std::vector<long> checkpoints_;
  std::size_t next_ = 0;
};

std::vector<double> values_of(
    const std::vector<std::pair<std::string, double>>& named) {
  std::vector<double> out;
  out.reserve(named.size());
  for (const auto& [name, value] : named) out.push_back(value);
  return out;
}

std::vector<std::string> names_of(
    const std::vector<std::pair<std::string, double>>& named) {
  std::vector<std::string> out;
  out.reserve(named.size());
  for (const auto& [name, value] : named) out.push_back(name);
  return out;
}

}  // namespace

template <class Family>
EstimatorResult boem_run(const typename Family::Params& theta0,
                         const typename Family::Chi& chi0,
                         const BlockSchedule& sched,
                         std::span<const double> observations, long n_blocks,
                         const BoemOptions& options, const Family& family) {
  using Stats = typename Family::Stats;

  EstimatorResult result;
  const auto names = names_of(flatten(theta0));
  result.plain.param_names = names;
  if (options.averaged) result.averaged.param_names = names;

  CheckpointRecorder plain_rec(&result.plain, options.checkpoints);
  CheckpointRecorder avg_rec(&result.averaged, options.checkpoints);

  std::vector<double> plain_values = values_of(flatten(theta0));
  std::vector<double> avg_values = plain_values;

  typename Family::Params theta = theta0;
  typename Family::Chi chi = chi0;
  Stats sigma{};
  long t_total = 0;
  long sigma_total = 0;  // observations represented in the running average

  for (long n = 1; n <= n_blocks; ++n) {
    const long tau = sched.tau(n);
    if (t_total + tau > static_cast<long>(observations.size())) {
      throw Error(ErrorCode::StreamExhausted,
                  "block " + std::to_string(n) + " needs " +
                      std::to_string(t_total + tau) + " observations, have " +
                      std::to_string(observations.size()));
    }
    const auto block = observations.subspan(t_total, tau);
    const auto block_result = family.block_stats(theta, chi, block);
    const bool warmed = t_total + tau >= options.burn_in;
    const bool averaging =
        warmed && t_total + tau > options.averaging_start;

    if (warmed) {
      theta = family.mstep(block_result.stats);
      if (options.averaged && averaging) {
        sigma = update_average(sigma, sigma_total, block_result.stats, tau);
        sigma_total += tau;
      }
    }
    if (options.chi_policy == ChiPolicy::WarmStart) {
      chi = family.end_chi(block_result);
    } else {
      chi = chi0;
    }
    t_total += tau;

    plain_rec.advance(t_total, plain_values);
    plain_values = values_of(flatten(theta));
    if (options.averaged) {
      avg_rec.advance(t_total, avg_values);
      avg_values = sigma_total > 0 ? values_of(flatten(family.mstep(sigma)))
                                   : plain_values;
    }
  }

  plain_rec.finish(plain_values);
  if (options.averaged) avg_rec.finish(avg_values);
  return result;
}

template EstimatorResult boem_run<FiniteFamily>(const FiniteGaussianHmm&,
                                                const DiscreteDist&,
                                                const BlockSchedule&,
                                                std::span<const double>, long,
                                                const BoemOptions&,
                                                const FiniteFamily&);
template EstimatorResult boem_run<LgssmFamily>(const LgssmParams&,
                                               const GaussianDist&,
                                               const BlockSchedule&,
                                               std::span<const double>, long,
                                               const BoemOptions&,
                                               const LgssmFamily&);

EstimatorResult oem_run(const FiniteGaussianHmm& theta0,
                        const DiscreteDist& chi0,
                        std::span<const double> observations, long n_obs,
                        const OemOptions& options) {
  if (!(options.gamma_exponent > 0.5 && options.gamma_exponent <= 1.0)) {
    throw Error(ErrorCode::InvalidSchedule,
                "gamma exponent must lie in (0.5, 1]");
  }
  if (options.burn_in < 1) {
    throw Error(ErrorCode::InvalidSchedule, "burn-in must be >= 1");
  }
  if (n_obs > static_cast<long>(observations.size())) {
    throw Error(ErrorCode::StreamExhausted, "not enough observations");
  }
  validate_finite_hmm(theta0);
  validate_discrete_dist(chi0, theta0.d);

  const int d = theta0.d;
  const int dim = stat_dim(d);

  EstimatorResult result;
  const auto names = names_of(flatten(theta0));
  result.plain.param_names = names;
  if (options.averaged) result.averaged.param_names = names;
  CheckpointRecorder plain_rec(&result.plain, options.checkpoints);
  CheckpointRecorder avg_rec(&result.averaged, options.checkpoints);

  FiniteGaussianHmm theta = theta0;
  Eigen::VectorXd phi = chi0.weights;
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(d, dim);
  Eigen::MatrixXd r(d, d);

  std::vector<double> plain_values = values_of(flatten(theta));
  std::vector<double> mean_values = plain_values;
  long mean_count = 0;

  for (long t = 1; t <= n_obs; ++t) {
    plain_rec.advance(t, plain_values);
    if (options.averaged) avg_rec.advance(t, mean_values);

    const double y = observations[t - 1];
    const double gamma =
        std::pow(static_cast<double>(t), -options.gamma_exponent);

    const FilterState prev{phi, static_cast<int>(t - 1)};
    const Eigen::MatrixXd kernel = retrospective_kernel(prev, theta);
    const FilterState cur = filter_step(prev, theta, y);

    Eigen::MatrixXd rho_next = (1.0 - gamma) * (kernel * rho);
    for (int x = 0; x < d; ++x) {
      rho_next(x, x) += gamma;
      rho_next(x, d + x) += gamma * y;
      rho_next(x, 2 * d + x) += gamma * y * y;
      for (int i = 0; i < d; ++i) {
        rho_next(x, 3 * d + i * d + x) += gamma * kernel(x, i);
      }
    }
    rho = std::move(rho_next);
    phi = cur.probs;

    if (t > options.burn_in) {
      const Eigen::VectorXd flat = rho.transpose() * phi;
      FiniteSuffStats s;
      s.s0 = flat.segment(0, d);
      s.s1 = flat.segment(d, d);
      s.s2 = flat.segment(2 * d, d);
      s.spair = Eigen::Map<const Eigen::Matrix<
          double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          flat.data() + 3 * d, d, d);
      theta = mstep_finite(s, options.estimands, options.fixed);
    }

    plain_values = values_of(flatten(theta));

    if (options.averaged) {
      if (t > options.averaging_start) {
        const auto cur_values = values_of(flatten(theta));
        ++mean_count;
        if (mean_count == 1) {
          mean_values = cur_values;
        } else {
          for (std::size_t k = 0; k < mean_values.size(); ++k) {
            mean_values[k] +=
                (cur_values[k] - mean_values[k]) / mean_count;
          }
        }
      }
    }
  }

  plain_rec.finish(plain_values);
  if (options.averaged) avg_rec.finish(mean_values);
  return result;
}

}  // namespace boem
