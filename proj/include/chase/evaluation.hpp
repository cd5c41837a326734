#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "chase/arena.hpp"
#include "chase/thread_pool.hpp"
#include "chase/training.hpp"

namespace chase {

// Aggregate episode metrics (per-episode means averaged over episodes).
struct ChaseMetrics {
  double fall_pct = 0;
  double catch_pct = 0;
  double escape_pct = 0;
  double mean_distance = 0;
  double mean_speed = 0;
  double mean_heading_error = 0;
  int episodes = 0;
};

ChaseMetrics aggregate_metrics(std::span<const EpisodeResult> episodes);

struct SineEpisode {
  double amplitude = 0;
  double frequency = 0;
  EpisodeResult result;
};

struct SineBenchmarkConfig {
  int episodes = 100;
  int max_steps = 10000;          // 20 s horizon
  double escape_distance = 3.0;
  double amplitude_lo = 2.0, amplitude_hi = 4.0;
  double frequency_lo = 0.1 * M_PI, frequency_hi = M_PI;
  bool record_trajectories = false;
};

struct SineBenchmarkResult {
  ChaseMetrics metrics;
  std::vector<SineEpisode> episodes;
};

// 100 sine-curve chases with random amplitude/frequency; the target moves at
// 2 m/s along the curve from (2, 0), the chaser starts at the origin. Curves
// and seeds depend only on (seed, episode index), so runs with different
// policies are paired.
SineBenchmarkResult run_sine_benchmark(const Policy& chaser, const ArenaConfig& base,
                                       const SineBenchmarkConfig& cfg, std::uint64_t seed,
                                       ThreadPool& pool);

struct UnseenEvalConfig {
  int episodes = 100;
  int max_steps = 2000;          // one training-length episode per attempt
  double escape_distance = 6.0;  // clearly-got-away cutoff for cone spawns
  bool record_trajectories = false;
};

struct UnseenEvalResult {
  ChaseMetrics metrics;
  std::vector<EpisodeResult> episodes;
  std::vector<std::string> adversary_ids;  // per episode
};

// Evaluation against held-out adversaries: each episode samples one test
// record and a cone spawn. Adversary picks and seeds depend only on
// (seed, episode index) for paired comparisons across policies.
UnseenEvalResult run_unseen_adversaries(const Policy& chaser,
                                        std::span<const AdversaryRecord> test_set,
                                        const ArenaConfig& base, const UnseenEvalConfig& cfg,
                                        std::uint64_t seed, ThreadPool& pool);

// Cross-environment reward matrix (training-environment semantics: 2000-step
// episodes with respawn on catch; entry = mean episode reward).
struct CrossPolicy {
  std::string id;
  const Policy* policy = nullptr;
  std::string home_environment;  // must name exactly one environment below
};

struct CrossEnvironment {
  std::string id;
  SpawnConfig spawn;
  const AdversaryEnsemble* ensemble = nullptr;  // null = static escapee
};

struct CrossMatrix {
  std::vector<std::string> policy_ids;
  std::vector<std::string> environment_ids;
  Eigen::MatrixXd raw;         // policies x environments, mean episode reward
  Eigen::MatrixXd normalized;  // each column divided by its owner's raw entry
  Eigen::VectorXd row_average; // mean of normalized entries per policy row
};

CrossMatrix run_cross_matrix(std::span<const CrossPolicy> policies,
                             std::span<const CrossEnvironment> environments,
                             const ArenaConfig& base, int episodes, std::uint64_t seed,
                             ThreadPool& pool);

// Baseline trainer (same spec surface as run_training for baseline modes).
TrainResult train_baseline(TrainMode mode, const TrainSchedule& schedule,
                           const ArenaConfig& arena, std::uint64_t master_seed,
                           const TrainOptions& options);

// Report writers.
void write_metrics_csv(const std::filesystem::path&, const std::string& row_label,
                       const ChaseMetrics&);
void write_cross_matrix_csv(const std::filesystem::path&, const CrossMatrix&);
void write_sine_episodes_json(const std::filesystem::path&, const SineBenchmarkResult&);
void write_unseen_episodes_json(const std::filesystem::path&, const UnseenEvalResult&);

}  // namespace chase
