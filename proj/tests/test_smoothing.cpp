#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "boem/harness.hpp"
#include "boem/rng.hpp"
#include "boem/smoothing.hpp"

using namespace boem;

namespace {

FiniteGaussianHmm random_hmm(Rng& rng, int d) {
  FiniteGaussianHmm m;
  m.d = d;
  m.states.resize(d);
  for (int i = 0; i < d; ++i) m.states(i) = 3.0 * (rng.uniform() - 0.5) + i;
  m.trans.resize(d, d);
  for (int i = 0; i < d; ++i) {
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      m.trans(i, j) = 0.05 + rng.uniform();
      sum += m.trans(i, j);
    }
    m.trans.row(i) /= sum;
  }
  m.var = 0.3 + 1.5 * rng.uniform();
  return m;
}

DiscreteDist random_chi(Rng& rng, int d) {
  Eigen::VectorXd w(d);
  double sum = 0.0;
  for (int i = 0; i < d; ++i) {
    w(i) = 0.05 + rng.uniform();
    sum += w(i);
  }
  return DiscreteDist{w / sum};
}

std::vector<double> random_obs(Rng& rng, int n) {
  std::vector<double> y(n);
  for (auto& v : y) v = 4.0 * (rng.uniform() - 0.5);
  return y;
}

}  // namespace

TEST_CASE("filter step keeps full symmetry") {
  FiniteGaussianHmm m;
  m.d = 2;
  m.states.resize(2);
  m.states << 1.0, 1.0;  // equal emissions for any y
  m.trans = Eigen::MatrixXd::Constant(2, 2, 0.5);
  m.var = 1.0;
  const FilterState s{Eigen::VectorXd::Constant(2, 0.5), 0};
  const auto next = filter_step(s, m, 0.3);
  CHECK(next.probs(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(next.t == 1);
}

TEST_CASE("absorbing chain keeps a point-mass filter") {
  FiniteGaussianHmm m;
  m.d = 2;
  m.states.resize(2);
  m.states << 0.0, 5.0;
  m.trans = Eigen::MatrixXd::Identity(2, 2);
  m.var = 1.0;
  Eigen::VectorXd w(2);
  w << 1.0, 0.0;
  FilterState s{w, 0};
  for (double y : {0.4, 4.9, -2.0}) {
    s = filter_step(s, m, y);
    CHECK(s.probs(0) == doctest::Approx(1.0));
    CHECK(s.probs(1) == doctest::Approx(0.0));
  }
}

TEST_CASE("filter step matches the direct quotient on random inputs") {
  Rng rng(123);
  for (int rep = 0; rep < 30; ++rep) {
    const auto m = random_hmm(rng, 3);
    const auto chi = random_chi(rng, 3);
    const double y = 4.0 * (rng.uniform() - 0.5);
    const auto next = filter_step(FilterState{chi.weights, 0}, m, y);

    Eigen::VectorXd direct(3);
    double denom = 0.0;
    for (int x = 0; x < 3; ++x) {
      double num = 0.0;
      for (int xp = 0; xp < 3; ++xp) {
        num += chi.weights(xp) * m.trans(xp, x) * emission_density(m, x, y);
      }
      direct(x) = num;
      denom += num;
    }
    direct /= denom;
    CHECK((next.probs - direct).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("filter stays normalized over many steps") {
  const auto m = sixstate_true_hmm();
  const DiscreteDist chi{Eigen::VectorXd::Constant(6, 1.0 / 6.0)};
  const auto path = simulate_finite(m, chi, 10000, 17);
  FilterState s{chi.weights, 0};
  for (double y : path.observations) {
    s = filter_step(s, m, y);
    CHECK(std::abs(s.probs.sum() - 1.0) < 1e-10);
    CHECK(s.probs.minCoeff() >= 0.0);
  }
}

TEST_CASE("retrospective kernel rows are distributions") {
  Rng rng(7);
  for (int rep = 0; rep < 30; ++rep) {
    const auto m = random_hmm(rng, 3);
    const auto chi = random_chi(rng, 3);
    const auto r = retrospective_kernel(FilterState{chi.weights, 1}, m);
    for (int x = 0; x < 3; ++x) {
      CHECK(std::abs(r.row(x).sum() - 1.0) < 1e-10);
      for (int xp = 0; xp < 3; ++xp) {
        const double direct =
            chi.weights(xp) * m.trans(xp, x) /
            (chi.weights.transpose() * m.trans.col(x)).value();
        CHECK(r(x, xp) == doctest::Approx(direct).epsilon(1e-12));
        CHECK(r(x, xp) >= 0.0);
      }
    }
  }
}

TEST_CASE("uniform filter and uniform rows give a flat kernel") {
  FiniteGaussianHmm m;
  m.d = 4;
  m.states.resize(4);
  m.states << 0, 1, 2, 3;
  m.trans = Eigen::MatrixXd::Constant(4, 4, 0.25);
  m.var = 1.0;
  const auto r =
      retrospective_kernel(FilterState{Eigen::VectorXd::Constant(4, 0.25), 0}, m);
  CHECK((r.array() - 0.25).abs().maxCoeff() < 1e-14);
}

TEST_CASE("point-mass past dominates the kernel") {
  FiniteGaussianHmm m;
  m.d = 2;
  m.states.resize(2);
  m.states << 0.0, 1.0;
  m.trans.resize(2, 2);
  m.trans << 0.7, 0.3, 0.4, 0.6;
  m.var = 1.0;
  Eigen::VectorXd w(2);
  w << 1.0, 0.0;
  const auto r = retrospective_kernel(FilterState{w, 0}, m);
  for (int x = 0; x < 2; ++x) {
    CHECK(r(x, 0) == doctest::Approx(1.0));
    CHECK(r(x, 1) == doctest::Approx(0.0));
  }
}

TEST_CASE("smoother step first-step collapse and index checks") {
  const int d = 2;
  const int dim = stat_dim(d);
  auto acc = make_accumulator(d);
  Eigen::MatrixXd r(2, 2);
  r << 0.3, 0.7, 0.8, 0.2;
  std::vector<Eigen::MatrixXd> contrib(dim, Eigen::MatrixXd::Zero(d, d));
  contrib[0] << 1.0, 2.0, 3.0, 4.0;  // arbitrary values S(prev, cur)

  const auto next = smoother_step(acc, r, contrib, 1);
  // t=1: rho_1(x) = sum_x' S(x', x) r(x, x').
  CHECK(next.rho(0, 0) == doctest::Approx(1.0 * 0.3 + 3.0 * 0.7));
  CHECK(next.rho(1, 0) == doctest::Approx(2.0 * 0.8 + 4.0 * 0.2));
  CHECK(next.t == 1);

  try {
    smoother_step(next, r, contrib, 3);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IndexMismatch);
  }
}

TEST_CASE("constant statistic stays constant through the smoother") {
  const int d = 3;
  const int dim = stat_dim(d);
  const double kappa = 2.5;
  Rng rng(99);
  auto acc = make_accumulator(d);
  std::vector<Eigen::MatrixXd> contrib(dim,
                                       Eigen::MatrixXd::Constant(d, d, kappa));
  for (int t = 1; t <= 5; ++t) {
    const auto m = random_hmm(rng, d);
    const auto chi = random_chi(rng, d);
    const auto r = retrospective_kernel(FilterState{chi.weights, t - 1}, m);
    acc = smoother_step(acc, r, contrib, t);
    CHECK((acc.rho.array() - kappa).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("forward smoother matches the path-enumeration oracle") {
  Rng rng(2024);
  int checked = 0;
  for (int rep = 0; rep < 120; ++rep) {
    const int d = 2 + static_cast<int>(rng.uniform() * 2);  // 2 or 3
    const int tau = 1 + static_cast<int>(rng.uniform() * 8);
    const auto m = random_hmm(rng, d);
    const auto chi = random_chi(rng, d);
    const auto obs = random_obs(rng, tau);

    const auto fast = block_stats_finite(m, chi, obs);
    const auto oracle = block_stats_finite_oracle(m, chi, obs);
    CHECK(max_abs_diff(fast.stats, oracle) < 1e-10);
    CHECK_NOTHROW(fast.stats.validate());
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("tau=1 collapses to the one-step smoothed marginal") {
  Rng rng(31);
  const auto m = random_hmm(rng, 3);
  const auto chi = random_chi(rng, 3);
  const double y = 0.8;
  const auto res = block_stats_finite(m, chi, std::vector<double>{y});

  Eigen::VectorXd direct(3);
  for (int x = 0; x < 3; ++x) {
    double num = 0.0;
    for (int xp = 0; xp < 3; ++xp) {
      num += chi.weights(xp) * m.trans(xp, x) * emission_density(m, x, y);
    }
    direct(x) = num;
  }
  direct /= direct.sum();
  CHECK((res.stats.s0 - direct).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("indicator statistics sum to one") {
  Rng rng(55);
  for (int rep = 0; rep < 20; ++rep) {
    const auto m = random_hmm(rng, 4);
    const auto chi = random_chi(rng, 4);
    const auto obs = random_obs(rng, 30);
    const auto res = block_stats_finite(m, chi, obs);
    CHECK(std::abs(res.stats.s0.sum() - 1.0) < 1e-10);
    CHECK(std::abs(res.stats.spair.sum() - 1.0) < 1e-10);
  }
}

TEST_CASE("oracle single-state model") {
  FiniteGaussianHmm m;
  m.d = 1;
  m.states.resize(1);
  m.states << 0.4;
  m.trans = Eigen::MatrixXd::Constant(1, 1, 1.0);
  m.var = 1.0;
  const DiscreteDist chi{Eigen::VectorXd::Constant(1, 1.0)};
  const std::vector<double> obs{1.0, -2.0, 0.5};
  const auto s = block_stats_finite_oracle(m, chi, obs);
  CHECK(s.s0(0) == doctest::Approx(1.0));
  CHECK(s.spair(0, 0) == doctest::Approx(1.0));
  CHECK(s.s1(0) == doctest::Approx((1.0 - 2.0 + 0.5) / 3.0));
  CHECK(s.s2(0) == doctest::Approx((1.0 + 4.0 + 0.25) / 3.0));
}

TEST_CASE("oracle matches a hand-computed 4-path sum") {
  // d=2, tau=2: paths over (x0, x1, x2) with hand-checkable numbers.
  FiniteGaussianHmm m;
  m.d = 2;
  m.states.resize(2);
  m.states << 0.0, 1.0;
  m.trans.resize(2, 2);
  m.trans << 0.6, 0.4, 0.3, 0.7;
  m.var = 1.0;
  Eigen::VectorXd w(2);
  w << 0.5, 0.5;
  const DiscreteDist chi{w};
  const std::vector<double> obs{0.2, 0.9};

  auto g = [&](int i, double y) { return emission_density(m, i, y); };
  double z = 0.0;
  Eigen::VectorXd s0 = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd sp = Eigen::MatrixXd::Zero(2, 2);
  for (int x0 = 0; x0 < 2; ++x0) {
    for (int x1 = 0; x1 < 2; ++x1) {
      for (int x2 = 0; x2 < 2; ++x2) {
        const double weight = chi.weights(x0) * m.trans(x0, x1) *
                              g(x1, obs[0]) * m.trans(x1, x2) * g(x2, obs[1]);
        z += weight;
        s0(x1) += 0.5 * weight;
        s0(x2) += 0.5 * weight;
        sp(x0, x1) += 0.5 * weight;
        sp(x1, x2) += 0.5 * weight;
      }
    }
  }
  const auto oracle = block_stats_finite_oracle(m, chi, obs);
  CHECK((oracle.s0 - s0 / z).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((oracle.spair - sp / z).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("oracle guard rejects huge instances") {
  const auto m = sixstate_true_hmm();
  const DiscreteDist chi{Eigen::VectorXd::Constant(6, 1.0 / 6.0)};
  const std::vector<double> obs(30, 0.0);
  try {
    block_stats_finite_oracle(m, chi, obs);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooLarge);
  }
}

TEST_CASE("empty block rejected") {
  const auto m = sixstate_true_hmm();
  const DiscreteDist chi{Eigen::VectorXd::Constant(6, 1.0 / 6.0)};
  try {
    block_stats_finite(m, chi, std::vector<double>{});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyBlock);
  }
}

TEST_CASE("lgssm smoother matches the joint-Gaussian oracle") {
  Rng rng(77);
  int checked = 0;
  for (int rep = 0; rep < 120; ++rep) {
    LgssmParams p;
    p.phi = 1.8 * (rng.uniform() - 0.5);
    p.var_u = 0.2 + 2.0 * rng.uniform();
    p.var_v = 0.2 + 2.0 * rng.uniform();
    const GaussianDist chi{2.0 * (rng.uniform() - 0.5),
                           0.3 + 2.0 * rng.uniform()};
    const int tau = 1 + static_cast<int>(rng.uniform() * 50);
    const auto obs = random_obs(rng, tau);

    const auto fast = block_stats_lgssm(p, chi, obs);
    const auto oracle = block_stats_lgssm_oracle(p, chi, obs);
    CHECK(max_abs_diff(fast.stats, oracle) < 1e-8);
    CHECK_NOTHROW(fast.stats.validate());
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("noiseless observation limit pins the states") {
  const LgssmParams p{0.7, 0.5, 1e-8};
  const GaussianDist chi{0.0, 1.0};
  Rng rng(4);
  const auto obs = random_obs(rng, 40);
  const auto res = block_stats_lgssm(p, chi, obs);
  double y2 = 0.0, xy = 0.0;
  for (double y : obs) {
    y2 += y * y;
    xy += y * y;
  }
  y2 /= obs.size();
  CHECK(res.stats.m_cur2 == doctest::Approx(y2).epsilon(1e-5));
  CHECK(res.stats.m_xy == doctest::Approx(y2).epsilon(1e-5));
}

TEST_CASE("phi=0 with unit variances halves the observation") {
  const LgssmParams p{0.0, 1.0, 1.0};
  const GaussianDist chi{0.0, 1.0};
  const std::vector<double> obs{1.4, -0.6, 2.2, 0.8, -1.0};
  // E[X_t | Y] = y_t / 2 for every observed t when phi = 0.
  const auto res = block_stats_lgssm(p, chi, obs);
  double expected_xy = 0.0;
  for (double y : obs) expected_xy += y * (y / 2.0);
  expected_xy /= obs.size();
  CHECK(res.stats.m_xy == doctest::Approx(expected_xy).epsilon(1e-12));
}

TEST_CASE("lgssm oracle tau=1 is the conjugate Bayes update") {
  const LgssmParams p{0.8, 0.5, 1.5};
  const GaussianDist chi{0.3, 0.9};
  const double y = 1.1;
  const auto s = block_stats_lgssm_oracle(p, chi, std::vector<double>{y});

  // One-step prediction then a single Gaussian update.
  const double pm = p.phi * chi.mean;
  const double pv = p.phi * p.phi * chi.var + p.var_u;
  const double k = pv / (pv + p.var_v);
  const double post_mean = pm + k * (y - pm);
  const double post_var = (1.0 - k) * pv;
  CHECK(s.m_cur2 == doctest::Approx(post_var + post_mean * post_mean)
                        .epsilon(1e-12));
  CHECK(s.m_xy == doctest::Approx(y * post_mean).epsilon(1e-12));
}

TEST_CASE("lgssm oracle guard") {
  const LgssmParams p{0.5, 1.0, 1.0};
  const GaussianDist chi{0.0, 1.0};
  const std::vector<double> obs(51, 0.0);
  try {
    block_stats_lgssm_oracle(p, chi, obs);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooLarge);
  }
}

TEST_CASE("forgetting gap vanishes for identical initial laws") {
  const auto m = sixstate_true_hmm();
  const DiscreteDist chi{Eigen::VectorXd::Constant(6, 1.0 / 6.0)};
  const auto path = simulate_finite(m, chi, 300, 21);
  const std::vector<int> lengths{10, 50, 100};
  const auto gaps = forgetting_gap(m, chi, chi, path.observations, lengths);
  for (double g : gaps) CHECK(g == 0.0);
}

TEST_CASE("forgetting gap decays for distinct initial laws") {
  const auto m = sixstate_true_hmm();
  const DiscreteDist chi1{Eigen::VectorXd::Constant(6, 1.0 / 6.0)};
  Eigen::VectorXd w2 = Eigen::VectorXd::Zero(6);
  w2(0) = 1.0;
  const DiscreteDist chi2{w2};
  const auto path = simulate_finite(m, chi1, 250, 2);

  std::vector<int> lengths;
  for (int tau = 10; tau <= 200; tau += 10) lengths.push_back(tau);
  const auto gaps = forgetting_gap(m, chi1, chi2, path.observations, lengths);

  // Least-squares slope of log gap vs tau must be negative.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const double x = lengths[i];
    const double y = std::log(std::max(gaps[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(lengths.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope < 0.0);
  // The 1/tau averaging alone bounds the decay by gap(10) * 10/200.
  CHECK(gaps.back() < 0.2 * gaps.front());
}
