#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chase/mlp.hpp"
#include "chase/rng.hpp"

namespace chase {

// How the covariance factor used for sampling/whitening is maintained.
// Eigendecomposition is the textbook route and enables spectral repair;
// the Cholesky factor is an order of magnitude cheaper to refresh at the
// policy dimensionalities used here and behaves equivalently in practice.
// Both are refreshed lazily on the standard 1/(10*n*(c1+cmu)) cadence.
enum class CovarianceUpdate { Cholesky, Eigendecomposition };

struct CmaConfig {
  int dim = 0;
  int lambda = 0;               // population size, >= 4
  double sigma0 = 0.0;          // initial step size, > 0
  Eigen::VectorXd mean0;        // initial mean, length dim
  std::uint64_t seed = 0;
  int max_iterations = 0;       // advisory; the driving loop owns the budget
  CovarianceUpdate factorization = CovarianceUpdate::Cholesky;
};

struct CmaDiagnostics {
  long covariance_repairs = 0;      // non-PD events fixed by eigenvalue floor
  long flat_fitness_generations = 0;

  bool operator==(const CmaDiagnostics&) const = default;
};

// Per-iteration trace record (minimization convention).
struct CmaIterationStats {
  int iteration = 0;
  double best = 0.0;
  double median = 0.0;
  double sigma = 0.0;
};

// Covariance Matrix Adaptation Evolution Strategy, minimization convention.
// Standard rank-one + rank-mu updates with positive log-decreasing
// recombination weights and cumulative step-size adaptation. Fully
// deterministic: (seed, fitness sequence) -> identical state trajectory.
class CmaEs {
 public:
  explicit CmaEs(const CmaConfig& cfg);

  // Draws lambda candidates ~ N(mean, sigma^2 C); columns are candidates.
  // Refreshes the covariance factor first if it is stale.
  const Eigen::MatrixXd& ask();

  // Consumes fitness (lower is better) for the given candidates. Candidates
  // must be the matrix returned by the preceding ask(). Non-finite fitness
  // is rejected. Invariant under strictly increasing fitness transforms.
  void tell(const Eigen::MatrixXd& candidates, const std::vector<double>& fitness);

  // Best-so-far across all told candidates; empty before the first tell.
  std::optional<std::pair<ParamVector, double>> best() const;

  int dim() const { return cfg_.dim; }
  int lambda() const { return cfg_.lambda; }
  int iteration() const { return iteration_; }
  double sigma() const { return sigma_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::VectorXd& path_sigma() const { return p_sigma_; }
  const Eigen::VectorXd& path_cov() const { return p_cov_; }
  const CmaDiagnostics& diagnostics() const { return diagnostics_; }
  const CmaIterationStats& last_stats() const { return stats_; }

  // Strategy constants, exposed for tests.
  int mu() const { return mu_; }
  double mu_eff() const { return mu_eff_; }
  double c_sigma() const { return c_sigma_; }
  double c_cov_rank1() const { return c1_; }
  double c_cov_rankmu() const { return c_mu_; }
  int factor_refresh_gap() const { return factor_gap_; }

  // Lossless state capture. Restoring a snapshot and continuing produces a
  // bit-identical trajectory to the uninterrupted run. Snapshots are taken
  // between tell() and the next ask().
  struct Snapshot {
    CmaConfig config;
    Eigen::VectorXd mean;
    double sigma = 0.0;
    Eigen::MatrixXd covariance;
    Eigen::VectorXd p_sigma;
    Eigen::VectorXd p_cov;
    Eigen::MatrixXd factor;       // Cholesky A, or eigenvector basis B
    Eigen::VectorXd factor_scale; // empty for Cholesky; sqrt eigenvalues for B
    int iteration = 0;
    int last_factor_iteration = 0;
    bool factor_fresh = false;
    std::string rng_state;
    bool has_best = false;
    ParamVector best_params;
    double best_fitness = 0.0;
    CmaDiagnostics diagnostics;
  };
  Snapshot snapshot() const;
  static CmaEs restore(const Snapshot& snap);

 private:
  void refresh_factor_if_stale();
  void factorize();
  // Solves factor * out = y (whitening transform C^{-1/2}-equivalent).
  Eigen::VectorXd whiten(const Eigen::VectorXd& y) const;

  CmaConfig cfg_;
  int mu_ = 0;
  Eigen::VectorXd weights_;
  double mu_eff_ = 0, c_sigma_ = 0, d_sigma_ = 0, c_cov_ = 0, c1_ = 0, c_mu_ = 0;
  double chi_n_ = 0;
  int factor_gap_ = 1;

  Eigen::VectorXd mean_;
  double sigma_ = 0;
  Eigen::MatrixXd cov_;
  Eigen::VectorXd p_sigma_, p_cov_;
  Eigen::MatrixXd factor_;        // A (lower triangular) or B (orthonormal)
  Eigen::VectorXd factor_scale_;  // sqrt eigenvalues when using B
  bool factor_fresh_ = false;
  int iteration_ = 0;
  int last_factor_iteration_ = 0;

  Rng rng_;

  Eigen::MatrixXd candidates_;
  bool has_best_ = false;
  ParamVector best_params_;
  double best_fitness_ = 0;
  CmaDiagnostics diagnostics_;
  CmaIterationStats stats_;
};

}  // namespace chase
