#ifndef BOEM_SMOOTHING_HPP
#define BOEM_SMOOTHING_HPP

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "boem/models.hpp"

namespace boem {

// Block-averaged smoothed sufficient statistics of the finite model:
//   s0(i)      = average smoothed P(X_t = i)
//   s1(i)      = average smoothed Y_t P(X_t = i)
//   s2(i)      = average smoothed Y_t^2 P(X_t = i)
//   spair(i,j) = average smoothed P(X_{t-1} = i, X_t = j)
struct FiniteSuffStats {
  Eigen::VectorXd s0, s1, s2;
  Eigen::MatrixXd spair;

  void validate() const;
};

// Block-averaged smoothed second moments of the LGSSM:
// E[X_{t-1}^2], E[X_{t-1} X_t], E[X_t^2], Y_t E[X_t], Y_t^2.
struct LgssmSuffStats {
  double m_prev2 = 0.0;
  double m_cross = 0.0;
  double m_cur2 = 0.0;
  double m_xy = 0.0;
  double m_y2 = 0.0;

  void validate() const;
};

// Normalized one-step filter phi_t over states, with the within-block index.
struct FilterState {
  Eigen::VectorXd probs;
  int t = 0;
};

// Per-state running expectations rho_t(x, component). Component layout for a
// d-state model: [s0(0..d-1), s1(0..d-1), s2(0..d-1), spair row-major].
struct SmootherAccumulator {
  Eigen::MatrixXd rho;  // d x (3d + d^2)
  int t = 0;
};

int stat_dim(int d);
SmootherAccumulator make_accumulator(int d);

// One forward filter update under the current parameter.
FilterState filter_step(const FilterState& state,
                        const FiniteGaussianHmm& theta, double y);

// Backward retrospective kernel r_t(x, x') built from phi_{t-1}; rows are
// indexed by the current state x and sum to 1.
Eigen::MatrixXd retrospective_kernel(const FilterState& state,
                                     const FiniteGaussianHmm& theta);

// Generic convex-combination update of the accumulator. s_contrib[k](x', x)
// is the k-th statistic component evaluated at (previous = x', current = x).
SmootherAccumulator smoother_step(const SmootherAccumulator& acc,
                                  const Eigen::MatrixXd& r_t,
                                  const std::vector<Eigen::MatrixXd>& s_contrib,
                                  int t);

struct FiniteBlockResult {
  FiniteSuffStats stats;
  double loglik = 0.0;             // block incomplete-data log-likelihood
  Eigen::VectorXd final_filter;    // phi_tau, used for warm-started chi
};

// Single forward pass over the block: O(d^2) per observation.
FiniteBlockResult block_stats_finite(const FiniteGaussianHmm& theta,
                                     const DiscreteDist& chi,
                                     std::span<const double> block);

// Brute-force path enumeration over all d^(tau+1) state paths.
FiniteSuffStats block_stats_finite_oracle(const FiniteGaussianHmm& theta,
                                          const DiscreteDist& chi,
                                          std::span<const double> block);

struct LgssmBlockResult {
  LgssmSuffStats stats;
  double loglik = 0.0;
  GaussianDist final_filter;
};

// Kalman filter plus backward fixed-interval smoother with lag-one
// cross-covariances; exact smoothed moments averaged over the block.
LgssmBlockResult block_stats_lgssm(const LgssmParams& theta,
                                   const GaussianDist& chi,
                                   std::span<const double> block);

// Dense joint-Gaussian conditioning oracle (builds a (tau+1) x (tau+1)
// covariance and solves).
LgssmSuffStats block_stats_lgssm_oracle(const LgssmParams& theta,
                                        const GaussianDist& chi,
                                        std::span<const double> block);

// Max-norm difference between block statistics started from chi1 and chi2 on
// the same observations, for each prefix length.
std::vector<double> forgetting_gap(const FiniteGaussianHmm& theta,
                                   const DiscreteDist& chi1,
                                   const DiscreteDist& chi2,
                                   std::span<const double> observations,
                                   std::span<const int> prefix_lengths);

double max_abs_diff(const FiniteSuffStats& a, const FiniteSuffStats& b);
double max_abs_diff(const LgssmSuffStats& a, const LgssmSuffStats& b);

}  // namespace boem

#endif  // BOEM_SMOOTHING_HPP
