#include "boem/smoothing.hpp"

#include <algorithm>
#include <cmath>

namespace boem {

namespace {
constexpr double kSumTol = 1e-10;
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

Eigen::VectorXd log_emissions(const FiniteGaussianHmm& theta, double y) {
  const int d = theta.d;
  Eigen::VectorXd logg(d);
  const double c = -0.5 * std::log(kTwoPi * theta.var);
  for (int i = 0; i < d; ++i) {
    const double diff = y - theta.states(i);
    logg(i) = c - diff * diff / (2.0 * theta.var);
  }
  return logg;
}

}  // namespace

int stat_dim(int d) { return 3 * d + d * d; }

SmootherAccumulator make_accumulator(int d) {
  return SmootherAccumulator{Eigen::MatrixXd::Zero(d, stat_dim(d)), 0};
}

void FiniteSuffStats::validate() const {
  const int d = static_cast<int>(s0.size());
  if (s1.size() != d || s2.size() != d || spair.rows() != d ||
      spair.cols() != d) {
    throw Error(ErrorCode::DimensionMismatch, "inconsistent statistic sizes");
  }
  if (std::abs(s0.sum() - 1.0) > kSumTol) {
    throw Error(ErrorCode::NonStochasticRow, "s0 does not sum to 1");
  }
  if (std::abs(spair.sum() - 1.0) > kSumTol) {
    throw Error(ErrorCode::NonStochasticRow, "spair does not sum to 1");
  }
  for (int i = 0; i < d; ++i) {
    if (s0(i) < 0.0 || s2(i) < 0.0) {
      throw Error(ErrorCode::NonStochasticRow, "negative statistic entry");
    }
    for (int j = 0; j < d; ++j) {
      if (spair(i, j) < 0.0) {
        throw Error(ErrorCode::NonStochasticRow, "negative spair entry");
      }
    }
  }
}

void LgssmSuffStats::validate() const {
  if (m_prev2 < 0.0 || m_cur2 < 0.0 || m_y2 < 0.0) {
    throw Error(ErrorCode::NonPositiveVariance, "negative second moment");
  }
  if (m_cross * m_cross > m_prev2 * m_cur2 + 1e-9) {
    throw Error(ErrorCode::NonPositiveVariance,
                "cross moment violates Cauchy-Schwarz");
  }
}

FilterState filter_step(const FilterState& state,
                        const FiniteGaussianHmm& theta, double y) {
  const int d = theta.d;
  const Eigen::VectorXd logg = log_emissions(theta, y);
  const double shift = logg.maxCoeff();
  const Eigen::VectorXd g = (logg.array() - shift).exp();
  const Eigen::VectorXd pred = theta.trans.transpose() * state.probs;
  Eigen::VectorXd w = pred.cwiseProduct(g);
  const double norm = w.sum();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::DegenerateLikelihood,
                "filter normalizer vanished at t=" + std::to_string(state.t + 1));
  }
  return FilterState{w / norm, state.t + 1};
}

Eigen::MatrixXd retrospective_kernel(const FilterState& state,
                                     const FiniteGaussianHmm& theta) {
  const int d = theta.d;
  const Eigen::VectorXd pred = theta.trans.transpose() * state.probs;
  Eigen::MatrixXd r(d, d);
  for (int x = 0; x < d; ++x) {
    if (!(pred(x) > 0.0)) {
      throw Error(ErrorCode::DegenerateLikelihood,
                  "retrospective kernel column " + std::to_string(x) +
                      " has zero mass");
    }
    for (int xp = 0; xp < d; ++xp) {
      r(x, xp) = state.probs(xp) * theta.trans(xp, x) / pred(x);
    }
  }
  return r;
}

SmootherAccumulator smoother_step(const SmootherAccumulator& acc,
                                  const Eigen::MatrixXd& r_t,
                                  const std::vector<Eigen::MatrixXd>& s_contrib,
                                  int t) {
  if (t < 1 || acc.t != t - 1) {
    throw Error(ErrorCode::IndexMismatch,
                "accumulator at t=" + std::to_string(acc.t) +
                    " cannot take step t=" + std::to_string(t));
  }
  const int d = static_cast<int>(acc.rho.rows());
  const int dim = static_cast<int>(acc.rho.cols());
  if (static_cast<int>(s_contrib.size()) != dim) {
    throw Error(ErrorCode::DimensionMismatch, "wrong statistic dimension");
  }
  const double inv_t = 1.0 / t;
  SmootherAccumulator next{Eigen::MatrixXd(d, dim), t};
  for (int k = 0; k < dim; ++k) {
    for (int x = 0; x < d; ++x) {
      double sum = 0.0;
      for (int xp = 0; xp < d; ++xp) {
        sum += (inv_t * s_contrib[k](xp, x) +
                (1.0 - inv_t) * acc.rho(xp, k)) *
               r_t(x, xp);
      }
      next.rho(x, k) = sum;
    }
  }
  return next;
}

FiniteBlockResult block_stats_finite(const FiniteGaussianHmm& theta,
                                     const DiscreteDist& chi,
                                     std::span<const double> block) {
  if (block.empty()) throw Error(ErrorCode::EmptyBlock, "empty block");
  const int d = theta.d;
  const int dim = stat_dim(d);
  const long tau = static_cast<long>(block.size());

  Eigen::VectorXd phi = chi.weights;
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(d, dim);
  Eigen::MatrixXd r(d, d);
  double loglik = 0.0;

  for (long t = 1; t <= tau; ++t) {
    const double y = block[t - 1];
    const Eigen::VectorXd logg = log_emissions(theta, y);
    const double shift = logg.maxCoeff();
    const Eigen::VectorXd g = (logg.array() - shift).exp();
    const Eigen::VectorXd pred = theta.trans.transpose() * phi;

    Eigen::VectorXd w = pred.cwiseProduct(g);
    const double norm = w.sum();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorCode::DegenerateLikelihood,
                  "filter normalizer vanished at t=" + std::to_string(t));
    }
    loglik += std::log(norm) + shift;

    for (int x = 0; x < d; ++x) {
      if (!(pred(x) > 0.0)) {
        throw Error(ErrorCode::DegenerateLikelihood,
                    "zero predictive mass in state " + std::to_string(x));
      }
      for (int xp = 0; xp < d; ++xp) {
        r(x, xp) = phi(xp) * theta.trans(xp, x) / pred(x);
      }
    }

    // Shared mixing term, then the sparse statistic contributions: the
    // indicator statistics only touch components selected by the current
    // state.
    const double inv_t = 1.0 / t;
    Eigen::MatrixXd rho_next = (1.0 - inv_t) * (r * rho);
    for (int x = 0; x < d; ++x) {
      rho_next(x, x) += inv_t;                  // s0
      rho_next(x, d + x) += inv_t * y;          // s1
      rho_next(x, 2 * d + x) += inv_t * y * y;  // s2
      for (int i = 0; i < d; ++i) {
        rho_next(x, 3 * d + i * d + x) += inv_t * r(x, i);  // spair(i, x)
      }
    }
    rho = std::move(rho_next);
    phi = w / norm;
  }

  const Eigen::VectorXd flat = rho.transpose() * phi;
  FiniteBlockResult out;
  out.stats.s0 = flat.segment(0, d);
  out.stats.s1 = flat.segment(d, d);
  out.stats.s2 = flat.segment(2 * d, d);
  out.stats.spair = Eigen::Map<const Eigen::Matrix<
      double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data() + 3 * d, d, d);
  out.loglik = loglik;
  out.final_filter = phi;
  return out;
}

FiniteSuffStats block_stats_finite_oracle(const FiniteGaussianHmm& theta,
                                          const DiscreteDist& chi,
                                          std::span<const double> block) {
  if (block.empty()) throw Error(ErrorCode::EmptyBlock, "empty block");
  const int d = theta.d;
  const long tau = static_cast<long>(block.size());
  if (std::pow(static_cast<double>(d), static_cast<double>(tau)) > 1e6) {
    throw Error(ErrorCode::TooLarge, "d^tau exceeds enumeration guard");
  }

  // Dense emissions per (t, state).
  Eigen::MatrixXd g(tau, d);
  for (long t = 0; t < tau; ++t) {
    for (int i = 0; i < d; ++i) g(t, i) = emission_density(theta, i, block[t]);
  }

  const long n_paths =
      static_cast<long>(std::llround(std::pow(double(d), double(tau + 1))));
  Eigen::VectorXd s0 = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd s2 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd spair = Eigen::MatrixXd::Zero(d, d);
  double total = 0.0;

  std::vector<int> path(tau + 1);
  for (long code = 0; code < n_paths; ++code) {
    long c = code;
    for (long t = 0; t <= tau; ++t) {
      path[t] = static_cast<int>(c % d);
      c /= d;
    }
    double w = chi.weights(path[0]);
    for (long t = 1; t <= tau; ++t) {
      w *= theta.trans(path[t - 1], path[t]) * g(t - 1, path[t]);
    }
    if (w == 0.0) continue;
    total += w;
    const double inv_tau = 1.0 / tau;
    for (long t = 1; t <= tau; ++t) {
      const int cur = path[t];
      const double y = block[t - 1];
      s0(cur) += w * inv_tau;
      s1(cur) += w * inv_tau * y;
      s2(cur) += w * inv_tau * y * y;
      spair(path[t - 1], cur) += w * inv_tau;
    }
  }
  if (!(total > 0.0)) {
    throw Error(ErrorCode::DegenerateLikelihood, "all paths have zero weight");
  }
  FiniteSuffStats out;
  out.s0 = s0 / total;
  out.s1 = s1 / total;
  out.s2 = s2 / total;
  out.spair = spair / total;
  return out;
}

LgssmBlockResult block_stats_lgssm(const LgssmParams& theta,
                                   const GaussianDist& chi,
                                   std::span<const double> block) {
  if (block.empty()) throw Error(ErrorCode::EmptyBlock, "empty block");
  const long tau = static_cast<long>(block.size());
  const double phi = theta.phi;

  // Index 0 is the unobserved block-initial state X_T ~ chi; indices 1..tau
  // carry one observation each.
  std::vector<double> fm(tau + 1), fp(tau + 1);   // filtered mean/var
  std::vector<double> pm(tau + 1), pp(tau + 1);   // predicted mean/var
  fm[0] = chi.mean;
  fp[0] = chi.var;
  double loglik = 0.0;
  for (long t = 1; t <= tau; ++t) {
    pm[t] = phi * fm[t - 1];
    pp[t] = phi * phi * fp[t - 1] + theta.var_u;
    const double s = pp[t] + theta.var_v;
    const double innov = block[t - 1] - pm[t];
    loglik += -0.5 * (std::log(kTwoPi * s) + innov * innov / s);
    const double gain = pp[t] / s;
    fm[t] = pm[t] + gain * innov;
    fp[t] = (1.0 - gain) * pp[t];
  }

  // Backward fixed-interval smoother; J[t] links X_t and X_{t+1}.
  std::vector<double> sm(tau + 1), sp(tau + 1), J(tau + 1, 0.0);
  sm[tau] = fm[tau];
  sp[tau] = fp[tau];
  for (long t = tau - 1; t >= 0; --t) {
    J[t] = fp[t] * phi / pp[t + 1];
    sm[t] = fm[t] + J[t] * (sm[t + 1] - pm[t + 1]);
    sp[t] = fp[t] + J[t] * J[t] * (sp[t + 1] - pp[t + 1]);
  }

  LgssmSuffStats s;
  for (long t = 1; t <= tau; ++t) {
    const double y = block[t - 1];
    const double cross = J[t - 1] * sp[t] + sm[t - 1] * sm[t];
    s.m_prev2 += sp[t - 1] + sm[t - 1] * sm[t - 1];
    s.m_cross += cross;
    s.m_cur2 += sp[t] + sm[t] * sm[t];
    s.m_xy += y * sm[t];
    s.m_y2 += y * y;
  }
  s.m_prev2 /= tau;
  s.m_cross /= tau;
  s.m_cur2 /= tau;
  s.m_xy /= tau;
  s.m_y2 /= tau;

  LgssmBlockResult out;
  out.stats = s;
  out.loglik = loglik;
  out.final_filter = GaussianDist{fm[tau], fp[tau]};
  return out;
}

LgssmSuffStats block_stats_lgssm_oracle(const LgssmParams& theta,
                                        const GaussianDist& chi,
                                        std::span<const double> block) {
  if (block.empty()) throw Error(ErrorCode::EmptyBlock, "empty block");
  const long tau = static_cast<long>(block.size());
  if (tau > 50) throw Error(ErrorCode::TooLarge, "oracle guard is tau <= 50");
  const double phi = theta.phi;
  const long nx = tau + 1;

  // Joint law of the states X_{T:T+tau}: mean by iteration, covariance from
  // Cov(X_s, X_t) = phi^{t-s} Var(X_s), s <= t.
  Eigen::VectorXd mu(nx);
  Eigen::VectorXd var(nx);
  mu(0) = chi.mean;
  var(0) = chi.var;
  for (long t = 1; t < nx; ++t) {
    mu(t) = phi * mu(t - 1);
    var(t) = phi * phi * var(t - 1) + theta.var_u;
  }
  Eigen::MatrixXd cxx(nx, nx);
  for (long s = 0; s < nx; ++s) {
    cxx(s, s) = var(s);
    double cov = var(s);
    for (long t = s + 1; t < nx; ++t) {
      cov *= phi;
      cxx(s, t) = cov;
      cxx(t, s) = cov;
    }
  }

  // Y_t = X_t + noise for t = 1..tau.
  Eigen::MatrixXd cyy = cxx.block(1, 1, tau, tau) +
                        theta.var_v * Eigen::MatrixXd::Identity(tau, tau);
  Eigen::MatrixXd cxy = cxx.block(0, 1, nx, tau);
  Eigen::VectorXd y(tau);
  for (long t = 0; t < tau; ++t) y(t) = block[t];

  Eigen::LDLT<Eigen::MatrixXd> ldlt(cyy);
  Eigen::VectorXd mean_post = mu + cxy * ldlt.solve(y - mu.segment(1, tau));
  Eigen::MatrixXd cov_post = cxx - cxy * ldlt.solve(cxy.transpose());

  LgssmSuffStats s;
  for (long t = 1; t <= tau; ++t) {
    s.m_prev2 += cov_post(t - 1, t - 1) + mean_post(t - 1) * mean_post(t - 1);
    s.m_cross += cov_post(t - 1, t) + mean_post(t - 1) * mean_post(t);
    s.m_cur2 += cov_post(t, t) + mean_post(t) * mean_post(t);
    s.m_xy += y(t - 1) * mean_post(t);
    s.m_y2 += y(t - 1) * y(t - 1);
  }
  s.m_prev2 /= tau;
  s.m_cross /= tau;
  s.m_cur2 /= tau;
  s.m_xy /= tau;
  s.m_y2 /= tau;
  return s;
}

std::vector<double> forgetting_gap(const FiniteGaussianHmm& theta,
                                   const DiscreteDist& chi1,
                                   const DiscreteDist& chi2,
                                   std::span<const double> observations,
                                   std::span<const int> prefix_lengths) {
  std::vector<double> gaps;
  gaps.reserve(prefix_lengths.size());
  for (int tau : prefix_lengths) {
    if (tau < 1 || tau > static_cast<int>(observations.size())) {
      throw Error(ErrorCode::InvalidLength,
                  "prefix length " + std::to_string(tau) + " out of range");
    }
    const auto prefix = observations.subspan(0, tau);
    const auto a = block_stats_finite(theta, chi1, prefix);
    const auto b = block_stats_finite(theta, chi2, prefix);
    gaps.push_back(max_abs_diff(a.stats, b.stats));
  }
  return gaps;
}

double max_abs_diff(const FiniteSuffStats& a, const FiniteSuffStats& b) {
  double m = (a.s0 - b.s0).lpNorm<Eigen::Infinity>();
  m = std::max(m, (a.s1 - b.s1).lpNorm<Eigen::Infinity>());
  m = std::max(m, (a.s2 - b.s2).lpNorm<Eigen::Infinity>());
  m = std::max(m, (a.spair - b.spair).lpNorm<Eigen::Infinity>());
  return m;
}

double max_abs_diff(const LgssmSuffStats& a, const LgssmSuffStats& b) {
  double m = std::abs(a.m_prev2 - b.m_prev2);
  m = std::max(m, std::abs(a.m_cross - b.m_cross));
  m = std::max(m, std::abs(a.m_cur2 - b.m_cur2));
  m = std::max(m, std::abs(a.m_xy - b.m_xy));
  m = std::max(m, std::abs(a.m_y2 - b.m_y2));
  return m;
}

}  // namespace boem
