#include "chase/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "chase/experiment_io.hpp"

namespace chase {

namespace {

std::string fmt_int(long v) { return std::to_string(v); }

const std::vector<std::string> kMetricsHeader = {
    "generation", "iteration", "best_return", "median_return", "sigma", "mean_catches"};

struct PhaseLogger {
  io::MetricsLog log;
  int generation;
  void append(const CmaIterationStats& stats, double mean_catches) {
    // CMA minimizes the negated return; log the return view.
    log.append({fmt_int(generation), fmt_int(stats.iteration - 1),
                io::format_double(-stats.best), io::format_double(-stats.median),
                io::format_double(stats.sigma), io::format_double(mean_catches)});
  }
};

void progress(const TrainOptions& opt, const std::string& msg) {
  if (opt.log) opt.log(msg);
}

}  // namespace

MlpArch chaser_arch() { return {5, {64, 64}, 2}; }
MlpArch escapee_arch() { return {3, {64, 64}, 2}; }

TrainSchedule TrainSchedule::paper() { return TrainSchedule{}; }

TrainSchedule TrainSchedule::desk() {
  TrainSchedule s;
  s.chaser_iterations = {200, 200, 400};
  s.escapee_iterations = 50;
  s.lambda = 64;
  return s;
}

void TrainSchedule::validate() const {
  if (generations < 1) throw std::invalid_argument("TrainSchedule: generations must be >= 1");
  if (static_cast<int>(chaser_iterations.size()) != generations)
    throw std::invalid_argument("TrainSchedule: need one chaser iteration count per generation");
  for (int n : chaser_iterations)
    if (n < 0) throw std::invalid_argument("TrainSchedule: negative iteration count");
  if (adversaries_per_generation < 1)
    throw std::invalid_argument("TrainSchedule: adversaries_per_generation must be >= 1");
  if (escapee_iterations < 0)
    throw std::invalid_argument("TrainSchedule: escapee_iterations must be >= 0");
  if (lambda < 4) throw std::invalid_argument("TrainSchedule: lambda must be >= 4");
  if (!(sigma0 > 0)) throw std::invalid_argument("TrainSchedule: sigma0 must be > 0");
  if (fitness_rollouts < 1)
    throw std::invalid_argument("TrainSchedule: fitness_rollouts must be >= 1");
}

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Adversary: return "adversary";
    case TrainMode::Cone: return "cone";
    case TrainMode::Circular: return "circular";
    case TrainMode::Zigzag: return "zigzag";
    case TrainMode::Single: return "single";
  }
  return "unknown";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "adversary") return TrainMode::Adversary;
  if (s == "cone") return TrainMode::Cone;
  if (s == "circular") return TrainMode::Circular;
  if (s == "zigzag") return TrainMode::Zigzag;
  if (s == "single") return TrainMode::Single;
  throw std::invalid_argument("unknown train mode: " + s);
}

std::vector<int> AdversaryEnsemble::train_indices() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(records.size()); ++i)
    if (records[i].split == AdversaryRecord::Split::Train) out.push_back(i);
  return out;
}

std::vector<int> AdversaryEnsemble::test_indices() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(records.size()); ++i)
    if (records[i].split == AdversaryRecord::Split::Test) out.push_back(i);
  return out;
}

std::vector<AdversaryRecord> AdversaryEnsemble::test_records() const {
  std::vector<AdversaryRecord> out;
  for (const auto& r : records)
    if (r.split == AdversaryRecord::Split::Test) out.push_back(r);
  return out;
}

AdversaryRecord static_initial_adversary() {
  return {Policy::zero(escapee_arch()), 0, 0.5, AdversaryRecord::Split::Train, "static-0"};
}

ParamVector random_escapee_init(std::uint64_t seed) {
  Rng rng(seed);
  const MlpArch arch = escapee_arch();
  ParamVector params(static_cast<Eigen::Index>(param_count(arch)));
  Eigen::Index pos = 0;
  int in = arch.input_dim;
  std::vector<int> outs(arch.hidden_dims);
  outs.push_back(arch.output_dim);
  for (int out : outs) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < out * in; ++i) params[pos++] = scale * rng.normal();
    for (int i = 0; i < out; ++i) params[pos++] = 0.0;  // biases
    in = out;
  }
  return params;
}

FitnessStats chaser_fitness(const Policy& candidate, const AdversaryEnsemble& ensemble,
                            const ArenaConfig& cfg, int rollouts,
                            std::uint64_t master_seed, int generation, int iteration,
                            int candidate_index) {
  const std::vector<int> train = ensemble.train_indices();
  if (train.empty()) throw std::invalid_argument("chaser_fitness: empty Train split");
  FitnessStats stats;
  for (int r = 0; r < rollouts; ++r) {
    Rng rng(derive_seed(master_seed, Stream::ChaserFitness,
                        static_cast<std::uint64_t>(generation),
                        static_cast<std::uint64_t>(iteration),
                        static_cast<std::uint64_t>(candidate_index),
                        static_cast<std::uint64_t>(r)));
    const AdversaryRecord& adv = ensemble.records[train[rng.below(train.size())]];
    const std::uint64_t episode_seed = rng.next_u64();
    const bool moving = adv.generation > 0;
    const Escapee esc = moving ? Escapee::learned(adv.policy) : Escapee::statik();
    const EpisodeResult res =
        rollout(candidate, esc, cfg, RolloutMode::ChaseTraining, episode_seed);
    stats.mean_return += res.chaser_return;
    stats.mean_catches += res.catches;
  }
  stats.mean_return /= rollouts;
  stats.mean_catches /= rollouts;
  return stats;
}

void split_train_test(std::vector<AdversaryRecord>& records, Rng& rng) {
  const int n = static_cast<int>(records.size());
  if (n % 2 != 0) throw std::invalid_argument("split_train_test: record count must be even");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  // Fisher-Yates with the provided stream; first half becomes Train.
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  for (int i = 0; i < n; ++i)
    records[idx[i]].split =
        i < n / 2 ? AdversaryRecord::Split::Train : AdversaryRecord::Split::Test;
}

namespace {

// One CMA phase optimizing the chaser against the ensemble's Train split.
Policy learn_to_chase(const Policy& warm_start, const AdversaryEnsemble& ensemble,
                      const TrainSchedule& schedule, int generation, int iterations,
                      const ArenaConfig& cfg, std::uint64_t master_seed,
                      ThreadPool& pool, PhaseLogger& metrics) {
  if (iterations == 0) return warm_start;

  CmaConfig cc;
  cc.dim = static_cast<int>(param_count(chaser_arch()));
  cc.lambda = schedule.lambda;
  cc.sigma0 = schedule.sigma0;
  cc.mean0 = warm_start.encode();
  cc.seed = derive_seed(master_seed, Stream::ChaserCma, static_cast<std::uint64_t>(generation));
  cc.factorization = schedule.factorization;
  CmaEs cma(cc);

  std::vector<double> fitness(schedule.lambda);
  std::vector<double> catches(schedule.lambda);
  for (int iter = 0; iter < iterations; ++iter) {
    const Eigen::MatrixXd& candidates = cma.ask();
    pool.parallel_for(schedule.lambda, [&](int i) {
      const Policy policy(chaser_arch(), candidates.col(i));
      const FitnessStats fs = chaser_fitness(policy, ensemble, cfg, schedule.fitness_rollouts,
                                             master_seed, generation, iter, i);
      fitness[i] = -fs.mean_return;  // minimize
      catches[i] = fs.mean_catches;
    });
    cma.tell(candidates, fitness);
    double mean_catches = 0;
    for (double c : catches) mean_catches += c;
    metrics.append(cma.last_stats(), mean_catches / schedule.lambda);
  }
  return Policy(chaser_arch(), cma.best()->first);
}

// Trains one fresh adversary against the frozen chaser.
AdversaryRecord learn_one_escapee(const Policy& chaser, const TrainSchedule& schedule,
                                  int generation, int k, const ArenaConfig& cone_cfg,
                                  std::uint64_t master_seed, ThreadPool& pool,
                                  PhaseLogger& metrics) {
  const std::uint64_t g = static_cast<std::uint64_t>(generation);
  const std::uint64_t ku = static_cast<std::uint64_t>(k);
  // Perturbed catch radius, uniform in (0.5, 1.0].
  ArenaConfig cfg = cone_cfg;
  cfg.d_min = 1.0 - 0.5 * Rng(derive_seed(master_seed, Stream::EscapeeDmin, g, ku)).u01();

  CmaConfig cc;
  cc.dim = static_cast<int>(param_count(escapee_arch()));
  cc.lambda = schedule.lambda;
  cc.sigma0 = schedule.sigma0;
  cc.mean0 = random_escapee_init(derive_seed(master_seed, Stream::EscapeeInit, g, ku));
  cc.seed = derive_seed(master_seed, Stream::EscapeeCma, g, ku);
  cc.factorization = schedule.factorization;
  CmaEs cma(cc);

  std::vector<double> fitness(schedule.lambda);
  std::vector<double> catches(schedule.lambda);
  for (int iter = 0; iter < schedule.escapee_iterations; ++iter) {
    const Eigen::MatrixXd& candidates = cma.ask();
    pool.parallel_for(schedule.lambda, [&](int i) {
      const Policy policy(escapee_arch(), candidates.col(i));
      Rng rng(derive_seed(master_seed, Stream::EscapeeFitness, g, ku,
                          static_cast<std::uint64_t>(iter), static_cast<std::uint64_t>(i)));
      const EpisodeResult res = rollout(chaser, Escapee::learned(policy), cfg,
                                        RolloutMode::EscapeTraining, rng.next_u64());
      fitness[i] = -res.escapee_return;
      catches[i] = res.catches;
    });
    cma.tell(candidates, fitness);
    double mean_catches = 0;
    for (double c : catches) mean_catches += c;
    metrics.append(cma.last_stats(), mean_catches / schedule.lambda);
  }

  AdversaryRecord rec{Policy(escapee_arch(), cma.best()->first), generation, cfg.d_min,
                      AdversaryRecord::Split::Train,
                      "gen" + std::to_string(generation) + "-adv" + std::to_string(k)};
  return rec;
}

// The K per-generation escapee optimizations; runs are seeded independently
// so their results do not depend on execution order.
std::vector<AdversaryRecord> learn_to_escape(const Policy& chaser,
                                             const TrainSchedule& schedule, int generation,
                                             int count, const ArenaConfig& cone_cfg,
                                             std::uint64_t master_seed, ThreadPool& pool,
                                             const io::RunPaths& paths,
                                             const TrainOptions& opt) {
  std::vector<AdversaryRecord> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    PhaseLogger metrics{
        io::MetricsLog(paths.metrics() / ("gen-" + std::to_string(generation) + "-escapee-" +
                                          std::to_string(k) + ".csv"),
                       kMetricsHeader),
        generation};
    out.push_back(
        learn_one_escapee(chaser, schedule, generation, k, cone_cfg, master_seed, pool, metrics));
    progress(opt, "gen " + std::to_string(generation) + ": adversary " + std::to_string(k) +
                      " trained (d_min=" + io::format_double(out.back().d_min_train) + ")");
  }
  return out;
}

io::Checkpoint make_checkpoint(int generation, const std::string& phase, const Policy& chaser,
                               const AdversaryEnsemble& ensemble, std::uint64_t master_seed) {
  io::Checkpoint cp;
  cp.generation = generation;
  cp.phase = phase;
  cp.chaser_arch = chaser.arch();
  cp.chaser_params = chaser.encode();
  cp.ensemble = ensemble.records;
  cp.master_seed = master_seed;
  return cp;
}

}  // namespace

TrainResult run_training(TrainMode mode, const TrainSchedule& schedule,
                         const ArenaConfig& arena, std::uint64_t master_seed,
                         const TrainOptions& options) {
  schedule.validate();
  arena.validate();
  io::RunPaths paths{options.out_dir};
  paths.create_dirs();
  ThreadPool pool(options.threads);

  const bool static_baseline =
      mode == TrainMode::Cone || mode == TrainMode::Circular || mode == TrainMode::Zigzag;

  AdversaryEnsemble ensemble;
  ensemble.records.push_back(static_initial_adversary());
  Policy chaser = Policy::zero(chaser_arch());

  if (static_baseline) {
    if (options.resume && std::filesystem::exists(paths.checkpoint(1))) {
      const io::Checkpoint cp = io::load_checkpoint(paths.checkpoint(1));
      return {Policy(cp.chaser_arch, cp.chaser_params), AdversaryEnsemble{}, true};
    }
    // Single continuous run against the static escapee, same total budget.
    int total_iters = 0;
    for (int n : schedule.chaser_iterations) total_iters += n;
    ArenaConfig cfg = arena;
    cfg.spawn = mode == TrainMode::Cone       ? arena.spawn_cone
                : mode == TrainMode::Circular ? arena.spawn_circular
                                              : arena.spawn_zigzag;
    PhaseLogger metrics{io::MetricsLog(paths.metrics() / "gen-1-chaser.csv", kMetricsHeader), 1};
    chaser = learn_to_chase(chaser, ensemble, schedule, 1, total_iters, cfg, master_seed, pool,
                            metrics);
    AdversaryEnsemble empty;  // static baselines publish no adversaries
    io::save_checkpoint(paths.checkpoint(1, "chaser"),
                        make_checkpoint(1, "chaser", chaser, empty, master_seed));
    io::save_checkpoint(paths.checkpoint(1),
                        make_checkpoint(1, "generation", chaser, empty, master_seed));
    return {chaser, empty, true};
  }

  int start_generation = 1;
  bool chaser_phase_done = false;
  if (options.resume) {
    for (int g = schedule.generations; g >= 1 && start_generation == 1; --g) {
      if (std::filesystem::exists(paths.checkpoint(g))) {
        const io::Checkpoint cp = io::load_checkpoint(paths.checkpoint(g));
        chaser = Policy(cp.chaser_arch, cp.chaser_params);
        ensemble.records = cp.ensemble;
        start_generation = g + 1;
        chaser_phase_done = false;
        progress(options, "resumed after generation " + std::to_string(g));
      } else if (std::filesystem::exists(paths.checkpoint(g, "chaser"))) {
        const io::Checkpoint cp = io::load_checkpoint(paths.checkpoint(g, "chaser"));
        chaser = Policy(cp.chaser_arch, cp.chaser_params);
        ensemble.records = cp.ensemble;
        start_generation = g;
        chaser_phase_done = true;  // chaser phase finished; escapees pending
        progress(options, "resumed inside generation " + std::to_string(g));
      }
    }
    if (start_generation > schedule.generations)
      return {chaser, ensemble, true};
  }

  for (int g = start_generation; g <= schedule.generations; ++g) {
    ArenaConfig cfg = arena;
    cfg.spawn = g == 1 ? arena.spawn_zigzag : arena.spawn_cone;

    if (!chaser_phase_done) {
      PhaseLogger metrics{
          io::MetricsLog(paths.metrics() / ("gen-" + std::to_string(g) + "-chaser.csv"),
                         kMetricsHeader),
          g};
      chaser = learn_to_chase(chaser, ensemble, schedule, g, schedule.chaser_iterations[g - 1],
                              cfg, master_seed, pool, metrics);
      io::save_checkpoint(paths.checkpoint(g, "chaser"),
                          make_checkpoint(g, "chaser", chaser, ensemble, master_seed));
      progress(options, "gen " + std::to_string(g) + ": chaser phase done");
    }
    chaser_phase_done = false;

    // No escapees are trained in the final generation: the chaser would
    // never face them, and the collected count matches the reported total.
    if (g < schedule.generations) {
      ArenaConfig cone_cfg = arena;
      cone_cfg.spawn = arena.spawn_cone;
      const int count = mode == TrainMode::Single ? 1 : schedule.adversaries_per_generation;
      std::vector<AdversaryRecord> fresh = learn_to_escape(
          chaser, schedule, g, count, cone_cfg, master_seed, pool, paths, options);
      if (mode == TrainMode::Single) {
        fresh[0].split = AdversaryRecord::Split::Train;
        ensemble.records = {fresh[0]};  // replaces the previous adversary
      } else {
        Rng split_rng(derive_seed(master_seed, Stream::TrainTestSplit,
                                  static_cast<std::uint64_t>(g)));
        split_train_test(fresh, split_rng);
        for (auto& r : fresh) ensemble.records.push_back(std::move(r));
      }
    }

    io::save_checkpoint(paths.checkpoint(g),
                        make_checkpoint(g, "generation", chaser, ensemble, master_seed));
    progress(options, "gen " + std::to_string(g) + ": checkpoint written");

    if (options.stop_after_generation == g)
      return {chaser, ensemble, g == schedule.generations};
  }

  return {chaser, ensemble, true};
}

}  // namespace chase
