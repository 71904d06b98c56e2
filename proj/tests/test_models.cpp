#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "boem/harness.hpp"
#include "boem/models.hpp"

using namespace boem;

TEST_CASE("six-state preset transition matrix validates") {
  CHECK_NOTHROW(validate_finite_hmm(sixstate_true_hmm()));
}

TEST_CASE("non-stochastic row rejected") {
  FiniteGaussianHmm m;
  m.d = 2;
  m.states.resize(2);
  m.states << 0.0, 1.0;
  m.trans.resize(2, 2);
  m.trans << 0.5, 0.6, 0.5, 0.5;
  m.var = 1.0;
  CHECK_THROWS_WITH_AS(validate_finite_hmm(m), doctest::Contains("row 1"),
                       Error);
  try {
    validate_finite_hmm(m);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonStochasticRow);
  }
}

TEST_CASE("zero variance rejected") {
  FiniteGaussianHmm m;
  m.d = 2;
  m.states.resize(2);
  m.states << 0.0, 1.0;
  m.trans = Eigen::MatrixXd::Constant(2, 2, 0.5);
  m.var = 0.0;
  try {
    validate_finite_hmm(m);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveVariance);
  }
}

TEST_CASE("dimension mismatch rejected") {
  FiniteGaussianHmm m;
  m.d = 3;
  m.states.resize(2);
  m.states << 0.0, 1.0;
  m.trans = Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0);
  m.var = 1.0;
  try {
    validate_finite_hmm(m);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("emission density values") {
  FiniteGaussianHmm m;
  m.d = 2;
  m.states.resize(2);
  m.states << 0.0, 3.0;
  m.trans = Eigen::MatrixXd::Constant(2, 2, 0.5);
  m.var = 1.0;

  CHECK(emission_density(m, 0, 0.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-12));
  CHECK(emission_density(m, 0, 40.0) < 1e-100);
  CHECK(emission_density(m, 0, -40.0) < 1e-100);

  m.var = 2.0;
  // Density of N(3, 2) at 4, evaluated independently.
  const double expected = std::exp(-0.25) / std::sqrt(4.0 * M_PI);
  CHECK(emission_density(m, 1, 4.0) == doctest::Approx(expected).epsilon(1e-14));

  CHECK_THROWS_AS(emission_density(m, 2, 0.0), Error);
}

TEST_CASE("emission density integrates to 1") {
  FiniteGaussianHmm m;
  m.d = 1;
  m.states.resize(1);
  m.states << 0.7;
  m.trans = Eigen::MatrixXd::Constant(1, 1, 1.0);
  m.var = 1.7;
  // Simpson quadrature over +-12 standard deviations.
  const double sd = std::sqrt(m.var);
  const double lo = m.states(0) - 12 * sd, hi = m.states(0) + 12 * sd;
  const int n = 4000;
  const double h = (hi - lo) / n;
  double sum = emission_density(m, 0, lo) + emission_density(m, 0, hi);
  for (int i = 1; i < n; ++i) {
    sum += (i % 2 ? 4.0 : 2.0) * emission_density(m, 0, lo + i * h);
  }
  CHECK(sum * h / 3.0 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("finite simulation is deterministic") {
  const auto m = sixstate_true_hmm();
  const DiscreteDist chi{Eigen::VectorXd::Constant(6, 1.0 / 6.0)};
  const auto a = simulate_finite(m, chi, 500, 42);
  const auto b = simulate_finite(m, chi, 500, 42);
  CHECK(a.state_indices == b.state_indices);
  CHECK(a.observations == b.observations);
  const auto c = simulate_finite(m, chi, 500, 43);
  CHECK(a.observations != c.observations);
}

TEST_CASE("single-state chain collapses to iid noise") {
  FiniteGaussianHmm m;
  m.d = 1;
  m.states.resize(1);
  m.states << 0.0;
  m.trans = Eigen::MatrixXd::Constant(1, 1, 1.0);
  m.var = 1.0;
  const DiscreteDist chi{Eigen::VectorXd::Constant(1, 1.0)};
  const auto path = simulate_finite(m, chi, 50000, 7);
  double mean = 0.0, ss = 0.0;
  for (double y : path.observations) mean += y;
  mean /= path.observations.size();
  for (double y : path.observations) ss += (y - mean) * (y - mean);
  ss /= path.observations.size();
  CHECK(std::abs(mean) < 0.02);
  CHECK(ss == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("empirical occupancy matches the stationary vector") {
  const auto m = sixstate_true_hmm();
  const DiscreteDist chi{Eigen::VectorXd::Constant(6, 1.0 / 6.0)};
  const auto path = simulate_finite(m, chi, 100000, 11);
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(6);
  for (int s : path.state_indices) occ(s) += 1.0;
  occ /= path.state_indices.size();
  const Eigen::VectorXd pi = stationary_distribution(m.trans);
  CHECK((occ - pi).lpNorm<Eigen::Infinity>() < 0.02);
}

TEST_CASE("empirical transition frequencies match the matrix") {
  const auto m = sixstate_true_hmm();
  const DiscreteDist chi{Eigen::VectorXd::Constant(6, 1.0 / 6.0)};
  const auto path = simulate_finite(m, chi, 100000, 3);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(6, 6);
  for (std::size_t t = 1; t < path.state_indices.size(); ++t) {
    counts(path.state_indices[t - 1], path.state_indices[t]) += 1.0;
  }
  for (int i = 0; i < 6; ++i) counts.row(i) /= counts.row(i).sum();
  CHECK((counts - m.trans).lpNorm<Eigen::Infinity>() < 0.02);
}

TEST_CASE("invalid length rejected") {
  const auto m = sixstate_true_hmm();
  const DiscreteDist chi{Eigen::VectorXd::Constant(6, 1.0 / 6.0)};
  try {
    simulate_finite(m, chi, 0, 1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidLength);
  }
}

TEST_CASE("lgssm simulation is deterministic and stationary") {
  const LgssmParams p{0.9, 0.6, 1.0};
  const auto a = simulate_lgssm(p, 100000, 5);
  const auto b = simulate_lgssm(p, 100000, 5);
  CHECK(a.states == b.states);
  CHECK(a.observations == b.observations);

  double ss = 0.0;
  for (double x : a.states) ss += x * x;
  ss /= a.states.size();
  const double target = 0.6 / (1.0 - 0.81);
  CHECK(ss == doctest::Approx(target).epsilon(0.05));
}

TEST_CASE("phi=0 gives iid states") {
  const LgssmParams p{0.0, 2.0, 1.0};
  const auto path = simulate_lgssm(p, 50000, 9);
  double ss = 0.0, lag1 = 0.0;
  for (double x : path.states) ss += x * x;
  for (std::size_t t = 1; t < path.states.size(); ++t) {
    lag1 += path.states[t - 1] * path.states[t];
  }
  ss /= path.states.size();
  lag1 /= path.states.size() - 1;
  CHECK(ss == doctest::Approx(2.0).epsilon(0.05));
  CHECK(std::abs(lag1) < 0.05);
}

TEST_CASE("lgssm rejects invalid parameters") {
  try {
    simulate_lgssm(LgssmParams{1.0, 1.0, 1.0}, 10, 0);
    CHECK(false);
  } catch (const Error&) {
  }
  try {
    simulate_lgssm(LgssmParams{0.5, 1.0, 1.0}, 0, 0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidLength);
  }
}
