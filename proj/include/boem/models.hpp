#ifndef BOEM_MODELS_HPP
#define BOEM_MODELS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "boem/errors.hpp"

namespace boem {

// Finite state-space HMM with Gaussian emissions: the hidden chain moves on
// the state levels x_1..x_d with row-stochastic transition matrix, and
// Y_t = X_t + N(0, var).
struct FiniteGaussianHmm {
  int d = 0;
  Eigen::VectorXd states;  // state levels x_1..x_d
  Eigen::MatrixXd trans;   // d x d, row-stochastic
  double var = 1.0;        // emission variance
};

// Linear Gaussian state-space model: X_{t+1} = phi X_t + sigma_u U_t,
// Y_t = X_t + sigma_v V_t.
struct LgssmParams {
  double phi = 0.0;
  double var_u = 1.0;
  double var_v = 1.0;
};

// Initial state distribution for the finite model (point weights on the
// state levels).
struct DiscreteDist {
  Eigen::VectorXd weights;
};

// Initial state distribution for the LGSSM.
struct GaussianDist {
  double mean = 0.0;
  double var = 1.0;
};

struct SimulatedPath {
  std::vector<int> state_indices;   // finite model only
  std::vector<double> states;       // state values (levels or real states)
  std::vector<double> observations;
  std::uint64_t seed = 0;
};

void validate_finite_hmm(const FiniteGaussianHmm& model);
void validate_lgssm(const LgssmParams& model);
void validate_discrete_dist(const DiscreteDist& chi, int d);
void validate_gaussian_dist(const GaussianDist& chi);

// Emission density g(x_i, y) of the finite model; state_index is 0-based.
double emission_density(const FiniteGaussianHmm& model, int state_index,
                        double y);

SimulatedPath simulate_finite(const FiniteGaussianHmm& model,
                              const DiscreteDist& chi, long n,
                              std::uint64_t seed);

SimulatedPath simulate_lgssm(const LgssmParams& model, long n,
                             std::uint64_t seed);

// Stationary distribution of the model's transition matrix (power iteration).
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& trans);

// Stationary law N(0, var_u / (1 - phi^2)) of the LGSSM state.
GaussianDist lgssm_stationary(const LgssmParams& model);

}  // namespace boem

#endif  // BOEM_MODELS_HPP
