#include "chase/cma_es.hpp"

#include <lapacke.h>
#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace chase {

namespace {

constexpr double kEigenvalueFloor = 1e-14;
// Below this dimension plain Eigen kernels beat the BLAS call overhead.
constexpr int kBlasDimThreshold = 192;

void validate_config(const CmaConfig& cfg) {
  if (cfg.dim < 1) throw std::invalid_argument("CmaConfig: dim must be >= 1");
  if (cfg.lambda < 4) throw std::invalid_argument("CmaConfig: lambda must be >= 4");
  if (!(cfg.sigma0 > 0.0)) throw std::invalid_argument("CmaConfig: sigma0 must be > 0");
  if (cfg.mean0.size() != cfg.dim)
    throw std::invalid_argument("CmaConfig: mean0 length != dim");
  if (!cfg.mean0.allFinite())
    throw std::invalid_argument("CmaConfig: mean0 must be finite");
}

// Symmetric eigendecomposition via LAPACK; returns eigenvectors in `vectors`
// (columns) and eigenvalues ascending in `values`.
void sym_eig(const Eigen::MatrixXd& m, Eigen::MatrixXd& vectors, Eigen::VectorXd& values) {
  const int n = static_cast<int>(m.rows());
  vectors = m;
  values.resize(n);
  const int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                  vectors.data(), n, values.data());
  if (info != 0) throw std::runtime_error("CmaEs: eigendecomposition failed");
}

}  // namespace

CmaEs::CmaEs(const CmaConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
  validate_config(cfg);
  const int n = cfg_.dim;
  const int lambda = cfg_.lambda;

  mu_ = lambda / 2;
  weights_.resize(mu_);
  for (int i = 0; i < mu_; ++i)
    weights_[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
  weights_ /= weights_.sum();
  mu_eff_ = 1.0 / weights_.squaredNorm();

  c_sigma_ = (mu_eff_ + 2.0) / (n + mu_eff_ + 5.0);
  d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (n + 1.0)) - 1.0) + c_sigma_;
  c_cov_ = (4.0 + mu_eff_ / n) / (n + 4.0 + 2.0 * mu_eff_ / n);
  c1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff_);
  c_mu_ = std::min(1.0 - c1_, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) /
                                  ((n + 2.0) * (n + 2.0) + mu_eff_));
  chi_n_ = std::sqrt(static_cast<double>(n)) *
           (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  factor_gap_ = std::max(1, static_cast<int>(std::ceil(1.0 / (10.0 * n * (c1_ + c_mu_)))));

  mean_ = cfg_.mean0;
  sigma_ = cfg_.sigma0;
  cov_ = Eigen::MatrixXd::Identity(n, n);
  p_sigma_ = Eigen::VectorXd::Zero(n);
  p_cov_ = Eigen::VectorXd::Zero(n);
  factor_ = Eigen::MatrixXd::Identity(n, n);
  if (cfg_.factorization == CovarianceUpdate::Eigendecomposition)
    factor_scale_ = Eigen::VectorXd::Ones(n);
  factor_fresh_ = true;
  last_factor_iteration_ = 0;
}

void CmaEs::factorize() {
  const int n = cfg_.dim;
  if (cfg_.factorization == CovarianceUpdate::Cholesky) {
    factor_ = cov_;
    int info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, factor_.data(), n);
    if (info != 0) {
      // Non-PD covariance: spectral repair by flooring eigenvalues.
      Eigen::MatrixXd basis;
      Eigen::VectorXd evals;
      sym_eig(cov_, basis, evals);
      evals = evals.cwiseMax(kEigenvalueFloor);
      cov_ = basis * evals.asDiagonal() * basis.transpose();
      cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
      diagnostics_.covariance_repairs++;
      factor_ = cov_;
      info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, factor_.data(), n);
      if (info != 0) throw std::runtime_error("CmaEs: covariance repair failed");
    }
    factor_.triangularView<Eigen::StrictlyUpper>().setZero();
  } else {
    Eigen::VectorXd evals;
    sym_eig(cov_, factor_, evals);
    if (evals.minCoeff() < kEigenvalueFloor) {
      evals = evals.cwiseMax(kEigenvalueFloor);
      cov_ = factor_ * evals.asDiagonal() * factor_.transpose();
      cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
      diagnostics_.covariance_repairs++;
    }
    factor_scale_ = evals.cwiseSqrt();
  }
  factor_fresh_ = true;
  last_factor_iteration_ = iteration_;
}

void CmaEs::refresh_factor_if_stale() {
  if (!factor_fresh_ && iteration_ - last_factor_iteration_ >= factor_gap_) factorize();
}

const Eigen::MatrixXd& CmaEs::ask() {
  const int n = cfg_.dim;
  const int lambda = cfg_.lambda;
  refresh_factor_if_stale();

  candidates_.resize(n, lambda);
  rng_.fill_normal(candidates_.data(), static_cast<std::size_t>(n) * lambda);

  if (cfg_.factorization == CovarianceUpdate::Cholesky) {
    if (n >= kBlasDimThreshold) {
      cblas_dtrmm(CblasColMajor, CblasLeft, CblasLower, CblasNoTrans, CblasNonUnit,
                  n, lambda, 1.0, factor_.data(), n, candidates_.data(), n);
    } else {
      candidates_ = factor_.triangularView<Eigen::Lower>() * candidates_;
    }
  } else {
    candidates_ = factor_scale_.asDiagonal() * candidates_;
    candidates_ = factor_ * candidates_.eval();
  }
  candidates_ *= sigma_;
  candidates_.colwise() += mean_;
  return candidates_;
}

Eigen::VectorXd CmaEs::whiten(const Eigen::VectorXd& y) const {
  if (cfg_.factorization == CovarianceUpdate::Cholesky)
    return factor_.triangularView<Eigen::Lower>().solve(y);
  return factor_ * (factor_.transpose() * y).cwiseQuotient(factor_scale_);
}

void CmaEs::tell(const Eigen::MatrixXd& candidates, const std::vector<double>& fitness) {
  const int n = cfg_.dim;
  const int lambda = cfg_.lambda;
  if (candidates.rows() != n || candidates.cols() != lambda)
    throw std::invalid_argument("CmaEs::tell: candidate matrix shape mismatch");
  if (static_cast<int>(fitness.size()) != lambda)
    throw std::invalid_argument("CmaEs::tell: fitness count != lambda");
  for (double f : fitness)
    if (!std::isfinite(f)) throw std::invalid_argument("CmaEs::tell: non-finite fitness");

  // Rank candidates: ties broken by index so the ordering is a deterministic
  // function of the fitness ranking alone.
  std::vector<int> order(lambda);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (fitness[a] != fitness[b]) return fitness[a] < fitness[b];
    return a < b;
  });

  const int best_idx = order.front();
  if (!has_best_ || fitness[best_idx] < best_fitness_) {
    has_best_ = true;
    best_fitness_ = fitness[best_idx];
    best_params_ = candidates.col(best_idx);
  }

  std::vector<double> sorted_fit(fitness);
  std::sort(sorted_fit.begin(), sorted_fit.end());
  const double median = (lambda % 2 == 1)
                            ? sorted_fit[lambda / 2]
                            : 0.5 * (sorted_fit[lambda / 2 - 1] + sorted_fit[lambda / 2]);

  // A generation with no fitness signal carries no ranking information;
  // leave the distribution untouched rather than recombining arbitrarily.
  if (sorted_fit.front() == sorted_fit.back()) {
    diagnostics_.flat_fitness_generations++;
    iteration_++;
    stats_ = {iteration_, sorted_fit.front(), median, sigma_};
    return;
  }

  // Selected steps in sampling space: y_i = (x_i - m_old) / sigma.
  Eigen::MatrixXd ysel(n, mu_);
  for (int i = 0; i < mu_; ++i)
    ysel.col(i) = (candidates.col(order[i]) - mean_) / sigma_;
  const Eigen::VectorXd y_w = ysel * weights_;

  mean_ += sigma_ * y_w;

  p_sigma_ = (1.0 - c_sigma_) * p_sigma_ +
             std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * whiten(y_w);
  const double ps_norm = p_sigma_.norm();
  const double gens = iteration_ + 1.0;
  const bool h_sigma =
      ps_norm / std::sqrt(1.0 - std::pow(1.0 - c_sigma_, 2.0 * gens)) <
      (1.4 + 2.0 / (n + 1.0)) * chi_n_;

  p_cov_ = (1.0 - c_cov_) * p_cov_;
  if (h_sigma) p_cov_ += std::sqrt(c_cov_ * (2.0 - c_cov_) * mu_eff_) * y_w;

  // Rank-one + rank-mu covariance update (positive weights sum to one).
  const double c1a = c1_ * (1.0 - (h_sigma ? 0.0 : 1.0) * c_cov_ * (2.0 - c_cov_));
  cov_ *= (1.0 - c1a - c_mu_);
  if (n >= kBlasDimThreshold) {
    cblas_dsyr(CblasColMajor, CblasLower, n, c1_, p_cov_.data(), 1, cov_.data(), n);
    Eigen::MatrixXd yscaled = ysel * weights_.cwiseSqrt().asDiagonal();
    cblas_dsyrk(CblasColMajor, CblasLower, CblasNoTrans, n, mu_, c_mu_,
                yscaled.data(), n, 1.0, cov_.data(), n);
    cov_.triangularView<Eigen::StrictlyUpper>() = cov_.transpose();
  } else {
    cov_ += c1_ * (p_cov_ * p_cov_.transpose());
    for (int i = 0; i < mu_; ++i)
      cov_ += (c_mu_ * weights_[i]) * (ysel.col(i) * ysel.col(i).transpose());
  }

  sigma_ *= std::exp(std::min(1.0, (c_sigma_ / d_sigma_) * (ps_norm / chi_n_ - 1.0)));

  iteration_++;
  factor_fresh_ = false;
  stats_ = {iteration_, sorted_fit.front(), median, sigma_};
}

std::optional<std::pair<ParamVector, double>> CmaEs::best() const {
  if (!has_best_) return std::nullopt;
  return std::make_pair(best_params_, best_fitness_);
}

CmaEs::Snapshot CmaEs::snapshot() const {
  Snapshot s;
  s.config = cfg_;
  s.mean = mean_;
  s.sigma = sigma_;
  s.covariance = cov_;
  s.p_sigma = p_sigma_;
  s.p_cov = p_cov_;
  s.factor = factor_;
  s.factor_scale = factor_scale_;
  s.iteration = iteration_;
  s.last_factor_iteration = last_factor_iteration_;
  s.factor_fresh = factor_fresh_;
  s.rng_state = rng_.state_string();
  s.has_best = has_best_;
  s.best_params = best_params_;
  s.best_fitness = best_fitness_;
  s.diagnostics = diagnostics_;
  return s;
}

CmaEs CmaEs::restore(const Snapshot& snap) {
  CmaEs es(snap.config);
  es.mean_ = snap.mean;
  es.sigma_ = snap.sigma;
  es.cov_ = snap.covariance;
  es.p_sigma_ = snap.p_sigma;
  es.p_cov_ = snap.p_cov;
  es.factor_ = snap.factor;
  es.factor_scale_ = snap.factor_scale;
  es.iteration_ = snap.iteration;
  es.last_factor_iteration_ = snap.last_factor_iteration;
  es.factor_fresh_ = snap.factor_fresh;
  es.rng_.set_state(snap.rng_state);
  es.has_best_ = snap.has_best;
  es.best_params_ = snap.best_params;
  es.best_fitness_ = snap.best_fitness;
  es.diagnostics_ = snap.diagnostics;
  return es;
}

}  // namespace chase
