#include "boem/models.hpp"

#include <cmath>

#include "boem/rng.hpp"

namespace boem {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonStochasticRow: return "NonStochasticRow";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidLength: return "InvalidLength";
    case ErrorCode::DegenerateLikelihood: return "DegenerateLikelihood";
    case ErrorCode::IndexMismatch: return "IndexMismatch";
    case ErrorCode::EmptyBlock: return "EmptyBlock";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::DegenerateState: return "DegenerateState";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::StreamExhausted: return "StreamExhausted";
    case ErrorCode::InsufficientSpan: return "InsufficientSpan";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {
constexpr double kStochTol = 1e-12;
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
}  // namespace

void validate_finite_hmm(const FiniteGaussianHmm& model) {
  if (model.d < 1) {
    throw Error(ErrorCode::DimensionMismatch, "state count must be >= 1");
  }
  if (model.states.size() != model.d) {
    throw Error(ErrorCode::DimensionMismatch,
                "states has length " + std::to_string(model.states.size()) +
                    ", expected " + std::to_string(model.d));
  }
  if (model.trans.rows() != model.d || model.trans.cols() != model.d) {
    throw Error(ErrorCode::DimensionMismatch, "transition matrix is not dxd");
  }
  for (int i = 0; i < model.d; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < model.d; ++j) {
      const double m = model.trans(i, j);
      if (m < 0.0) {
        throw Error(ErrorCode::NonStochasticRow,
                    "negative entry in row " + std::to_string(i + 1));
      }
      row_sum += m;
    }
    if (std::abs(row_sum - 1.0) > kStochTol) {
      throw Error(ErrorCode::NonStochasticRow,
                  "row " + std::to_string(i + 1) + " sums to " +
                      std::to_string(row_sum));
    }
  }
  if (!(model.var > 0.0)) {
    throw Error(ErrorCode::NonPositiveVariance,
                "emission variance must be positive");
  }
}

void validate_lgssm(const LgssmParams& model) {
  if (!(std::abs(model.phi) < 1.0)) {
    throw Error(ErrorCode::NonStochasticRow, "|phi| must be < 1");
  }
  if (!(model.var_u > 0.0)) {
    throw Error(ErrorCode::NonPositiveVariance, "var_u must be positive");
  }
  if (!(model.var_v > 0.0)) {
    throw Error(ErrorCode::NonPositiveVariance, "var_v must be positive");
  }
}

void validate_discrete_dist(const DiscreteDist& chi, int d) {
  if (chi.weights.size() != d) {
    throw Error(ErrorCode::DimensionMismatch,
                "initial distribution has wrong length");
  }
  double sum = 0.0;
  for (int i = 0; i < d; ++i) {
    if (chi.weights(i) < 0.0) {
      throw Error(ErrorCode::NonStochasticRow,
                  "negative initial weight at index " + std::to_string(i));
    }
    sum += chi.weights(i);
  }
  if (std::abs(sum - 1.0) > kStochTol) {
    throw Error(ErrorCode::NonStochasticRow,
                "initial weights sum to " + std::to_string(sum));
  }
}

void validate_gaussian_dist(const GaussianDist& chi) {
  if (!(chi.var > 0.0)) {
    throw Error(ErrorCode::NonPositiveVariance,
                "initial variance must be positive");
  }
}

double emission_density(const FiniteGaussianHmm& model, int state_index,
                        double y) {
  if (state_index < 0 || state_index >= model.d) {
    throw Error(ErrorCode::IndexOutOfRange,
                "state index " + std::to_string(state_index));
  }
  const double diff = y - model.states(state_index);
  return std::exp(-diff * diff / (2.0 * model.var)) /
         std::sqrt(kTwoPi * model.var);
}

namespace {

int sample_discrete(const Eigen::VectorXd& weights, double u) {
  double acc = 0.0;
  const int d = static_cast<int>(weights.size());
  for (int i = 0; i < d; ++i) {
    acc += weights(i);
    if (u <= acc) return i;
  }
  return d - 1;
}

}  // namespace

SimulatedPath simulate_finite(const FiniteGaussianHmm& model,
                              const DiscreteDist& chi, long n,
                              std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidLength, "need n >= 1");
  validate_finite_hmm(model);
  validate_discrete_dist(chi, model.d);

  Rng rng(seed);
  SimulatedPath path;
  path.seed = seed;
  path.state_indices.resize(n);
  path.states.resize(n);
  path.observations.resize(n);

  const double emit_sd = std::sqrt(model.var);
  int x = sample_discrete(chi.weights, rng.uniform());
  for (long t = 0; t < n; ++t) {
    if (t > 0) x = sample_discrete(model.trans.row(x), rng.uniform());
    path.state_indices[t] = x;
    path.states[t] = model.states(x);
    path.observations[t] = model.states(x) + emit_sd * rng.gaussian();
  }
  return path;
}

SimulatedPath simulate_lgssm(const LgssmParams& model, long n,
                             std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidLength, "need n >= 1");
  validate_lgssm(model);

  Rng rng(seed);
  SimulatedPath path;
  path.seed = seed;
  path.states.resize(n);
  path.observations.resize(n);

  const double sd_u = std::sqrt(model.var_u);
  const double sd_v = std::sqrt(model.var_v);
  const double sd_0 = std::sqrt(model.var_u / (1.0 - model.phi * model.phi));
  double x = sd_0 * rng.gaussian();
  for (long t = 0; t < n; ++t) {
    if (t > 0) x = model.phi * x + sd_u * rng.gaussian();
    path.states[t] = x;
    path.observations[t] = x + sd_v * rng.gaussian();
  }
  return path;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& trans) {
  const int d = static_cast<int>(trans.rows());
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(d, 1.0 / d);
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd next = trans.transpose() * pi;
    next /= next.sum();
    const double diff = (next - pi).lpNorm<Eigen::Infinity>();
    pi = next;
    if (diff < 1e-15) break;
  }
  return pi;
}

GaussianDist lgssm_stationary(const LgssmParams& model) {
  validate_lgssm(model);
  return GaussianDist{0.0, model.var_u / (1.0 - model.phi * model.phi)};
}

}  // namespace boem
