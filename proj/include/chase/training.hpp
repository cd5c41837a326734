#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "chase/arena.hpp"
#include "chase/cma_es.hpp"
#include "chase/mlp.hpp"
#include "chase/thread_pool.hpp"

namespace chase {

// Shared two-hidden-layer topology for both agents.
MlpArch chaser_arch();   // 5 -> 64 -> 64 -> 2
MlpArch escapee_arch();  // 3 -> 64 -> 64 -> 2

struct TrainSchedule {
  int generations = 3;                               // N
  int adversaries_per_generation = 8;                // K
  std::vector<int> chaser_iterations{1000, 1000, 2000};  // N_p per generation
  int escapee_iterations = 200;                      // N_a
  int lambda = 256;
  double sigma0 = 0.1;
  int fitness_rollouts = 8;                          // rollouts averaged per chaser fitness
  CovarianceUpdate factorization = CovarianceUpdate::Cholesky;

  static TrainSchedule paper();
  // Reduced preset that keeps the full pipeline shape but fits on one
  // machine: lambda=64, N_p={200,200,400}, N_a=50, K=8.
  static TrainSchedule desk();

  void validate() const;
};

enum class TrainMode { Adversary, Cone, Circular, Zigzag, Single };
std::string to_string(TrainMode);
TrainMode train_mode_from_string(const std::string&);

struct AdversaryRecord {
  enum class Split { Train, Test };
  Policy policy;
  int generation = 0;
  double d_min_train = 0.5;  // catch radius used while this escapee trained
  Split split = Split::Train;
  std::string id;
};

// Append-only collection of escapee policies; existing records are never
// mutated or retrained.
struct AdversaryEnsemble {
  std::vector<AdversaryRecord> records;

  std::vector<int> train_indices() const;
  std::vector<int> test_indices() const;
  std::vector<AdversaryRecord> test_records() const;
};

// Zero policy: emits zero twist for every observation. Generation 0, Train.
AdversaryRecord static_initial_adversary();

// Random escapee weights for a fresh adversary: per-layer 1/sqrt(fan_in)
// normal weights, zero biases.
ParamVector random_escapee_init(std::uint64_t seed);

struct FitnessStats {
  double mean_return = 0;   // average chaser return over the rollouts
  double mean_catches = 0;  // average catches per rollout
};

// Average chaser return over `rollouts` episodes, each against an adversary
// sampled uniformly (with replacement) from the Train split. Adversary picks
// and episode seeds derive from (master, generation, iteration, candidate).
FitnessStats chaser_fitness(const Policy& candidate, const AdversaryEnsemble& ensemble,
                            const ArenaConfig& cfg, int rollouts,
                            std::uint64_t master_seed, int generation, int iteration,
                            int candidate_index);

// Assigns exactly half Train / half Test uniformly at random (even count).
void split_train_test(std::vector<AdversaryRecord>& records, Rng& rng);

struct TrainOptions {
  std::filesystem::path out_dir;
  int threads = 1;
  bool resume = false;
  int stop_after_generation = 0;  // 0 = run to completion
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  Policy chaser;
  AdversaryEnsemble ensemble;
  bool completed = true;  // false when stopped early via stop_after_generation
};

// Full training pipeline for any mode.
//   Adversary: generation 1 chases the static escapee on zigzag spawns, later
//     generations chase the growing ensemble on cone spawns; after every
//     generation but the last, K fresh adversaries are trained in independent
//     runs and the Train half joins the ensemble.
//   Cone/Circular/Zigzag: one continuous run against a static escapee with
//     the named spawn configuration and the same total iteration budget.
//   Single: the Adversary loop with K=1 and replacement instead of growth.
// Writes manifest-compatible checkpoints and per-phase metrics under
// options.out_dir; fully deterministic in master_seed.
TrainResult run_training(TrainMode mode, const TrainSchedule& schedule,
                         const ArenaConfig& arena, std::uint64_t master_seed,
                         const TrainOptions& options);

}  // namespace chase
