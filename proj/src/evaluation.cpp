#include "chase/evaluation.hpp"

#include <algorithm>
#include <stdexcept>

#include "chase/experiment_io.hpp"

namespace chase {

ChaseMetrics aggregate_metrics(std::span<const EpisodeResult> episodes) {
  ChaseMetrics m;
  m.episodes = static_cast<int>(episodes.size());
  if (episodes.empty()) return m;
  int falls = 0, catches = 0, escapes = 0;
  for (const auto& e : episodes) {
    switch (e.outcome) {
      case EpisodeOutcome::Fall: falls++; break;
      case EpisodeOutcome::Catch: catches++; break;
      case EpisodeOutcome::Escape: escapes++; break;
    }
    m.mean_distance += e.mean_distance;
    m.mean_speed += e.mean_speed;
    m.mean_heading_error += e.mean_heading_error;
  }
  const double n = m.episodes;
  m.fall_pct = 100.0 * falls / n;
  m.catch_pct = 100.0 * catches / n;
  m.escape_pct = 100.0 * escapes / n;
  m.mean_distance /= n;
  m.mean_speed /= n;
  m.mean_heading_error /= n;
  return m;
}

SineBenchmarkResult run_sine_benchmark(const Policy& chaser, const ArenaConfig& base,
                                       const SineBenchmarkConfig& cfg, std::uint64_t seed,
                                       ThreadPool& pool) {
  ArenaConfig arena = base;
  arena.max_steps = cfg.max_steps;
  arena.escape_distance = cfg.escape_distance;

  SineBenchmarkResult out;
  out.episodes.resize(cfg.episodes);
  pool.parallel_for(cfg.episodes, [&](int i) {
    Rng rng(derive_seed(seed, Stream::Evaluation, 0, static_cast<std::uint64_t>(i)));
    SineEpisode ep;
    ep.amplitude = rng.uniform(cfg.amplitude_lo, cfg.amplitude_hi);
    ep.frequency = rng.uniform(cfg.frequency_lo, cfg.frequency_hi);
    ep.result = rollout(chaser, Escapee::scripted_sine(ep.amplitude, ep.frequency), arena,
                        RolloutMode::Evaluation, rng.next_u64(), cfg.record_trajectories);
    out.episodes[i] = std::move(ep);
  });
  std::vector<EpisodeResult> results;
  results.reserve(out.episodes.size());
  for (const auto& e : out.episodes) results.push_back(e.result);
  out.metrics = aggregate_metrics(results);
  return out;
}

UnseenEvalResult run_unseen_adversaries(const Policy& chaser,
                                        std::span<const AdversaryRecord> test_set,
                                        const ArenaConfig& base, const UnseenEvalConfig& cfg,
                                        std::uint64_t seed, ThreadPool& pool) {
  if (test_set.empty())
    throw std::invalid_argument("run_unseen_adversaries: empty test set");
  ArenaConfig arena = base;
  arena.max_steps = cfg.max_steps;
  arena.escape_distance = cfg.escape_distance;
  arena.spawn = base.spawn_cone;

  UnseenEvalResult out;
  out.episodes.resize(cfg.episodes);
  out.adversary_ids.resize(cfg.episodes);
  pool.parallel_for(cfg.episodes, [&](int i) {
    Rng rng(derive_seed(seed, Stream::Evaluation, 1, static_cast<std::uint64_t>(i)));
    const AdversaryRecord& adv = test_set[rng.below(test_set.size())];
    out.adversary_ids[i] = adv.id;
    out.episodes[i] = rollout(chaser, Escapee::learned(adv.policy), arena,
                              RolloutMode::Evaluation, rng.next_u64(),
                              cfg.record_trajectories);
  });
  out.metrics = aggregate_metrics(out.episodes);
  return out;
}

CrossMatrix run_cross_matrix(std::span<const CrossPolicy> policies,
                             std::span<const CrossEnvironment> environments,
                             const ArenaConfig& base, int episodes, std::uint64_t seed,
                             ThreadPool& pool) {
  if (policies.empty() || environments.empty())
    throw std::invalid_argument("run_cross_matrix: empty inputs");

  // Every environment needs exactly one owner policy for normalization.
  std::vector<int> owner(environments.size(), -1);
  for (std::size_t e = 0; e < environments.size(); ++e) {
    for (std::size_t p = 0; p < policies.size(); ++p) {
      if (policies[p].home_environment == environments[e].id) {
        if (owner[e] >= 0)
          throw std::invalid_argument("run_cross_matrix: environment " + environments[e].id +
                                      " has two home policies");
        owner[e] = static_cast<int>(p);
      }
    }
    if (owner[e] < 0)
      throw std::invalid_argument("run_cross_matrix: environment " + environments[e].id +
                                  " has no home policy (missing diagonal)");
  }

  CrossMatrix out;
  for (const auto& p : policies) out.policy_ids.push_back(p.id);
  for (const auto& e : environments) out.environment_ids.push_back(e.id);
  out.raw.resize(static_cast<Eigen::Index>(policies.size()),
                 static_cast<Eigen::Index>(environments.size()));

  // Episode seeds and adversary picks depend on (environment, episode) only,
  // so all policies face identical conditions in each cell column.
  for (std::size_t e = 0; e < environments.size(); ++e) {
    const CrossEnvironment& env = environments[e];
    std::vector<int> train;
    if (env.ensemble != nullptr) {
      train = env.ensemble->train_indices();
      if (train.empty())
        throw std::invalid_argument("run_cross_matrix: environment " + env.id +
                                    " ensemble has no Train records");
    }
    ArenaConfig arena = base;
    arena.spawn = env.spawn;
    for (std::size_t p = 0; p < policies.size(); ++p) {
      std::vector<double> returns(episodes, 0.0);
      pool.parallel_for(episodes, [&](int i) {
        Rng rng(derive_seed(seed, Stream::Evaluation, 2 + e, static_cast<std::uint64_t>(i)));
        Escapee esc = Escapee::statik();
        if (env.ensemble != nullptr) {
          const AdversaryRecord& adv = env.ensemble->records[train[rng.below(train.size())]];
          esc = adv.generation > 0 ? Escapee::learned(adv.policy) : Escapee::statik();
        } else {
          rng.below(1);  // keep the stream layout identical across env kinds
        }
        returns[i] = rollout(*policies[p].policy, esc, arena, RolloutMode::ChaseTraining,
                             rng.next_u64())
                         .chaser_return;
      });
      double mean = 0;
      for (double r : returns) mean += r;
      out.raw(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(e)) = mean / episodes;
    }
  }

  out.normalized.resizeLike(out.raw);
  for (Eigen::Index e = 0; e < out.raw.cols(); ++e) {
    const double diag = out.raw(owner[static_cast<std::size_t>(e)], e);
    if (diag == 0.0)
      throw std::runtime_error("run_cross_matrix: zero diagonal in environment " +
                               out.environment_ids[static_cast<std::size_t>(e)]);
    out.normalized.col(e) = out.raw.col(e) / diag;
  }
  out.row_average = out.normalized.rowwise().mean();
  return out;
}

TrainResult train_baseline(TrainMode mode, const TrainSchedule& schedule,
                           const ArenaConfig& arena, std::uint64_t master_seed,
                           const TrainOptions& options) {
  if (mode == TrainMode::Adversary)
    throw std::invalid_argument("train_baseline: adversary mode is not a baseline");
  return run_training(mode, schedule, arena, master_seed, options);
}

void write_metrics_csv(const std::filesystem::path& path, const std::string& row_label,
                       const ChaseMetrics& m) {
  std::string out = "policy,fall_pct,catch_pct,escape_pct,distance,speed,theta,episodes\n";
  out += row_label + ',' + io::format_double(m.fall_pct) + ',' +
         io::format_double(m.catch_pct) + ',' + io::format_double(m.escape_pct) + ',' +
         io::format_double(m.mean_distance) + ',' + io::format_double(m.mean_speed) + ',' +
         io::format_double(m.mean_heading_error) + ',' + std::to_string(m.episodes) + '\n';
  io::write_text_atomic(path, out);
}

void write_cross_matrix_csv(const std::filesystem::path& path, const CrossMatrix& m) {
  std::string out = "policy";
  for (const auto& e : m.environment_ids) out += ',' + e;
  out += ",average\n";
  for (std::size_t p = 0; p < m.policy_ids.size(); ++p) {
    out += m.policy_ids[p];
    for (Eigen::Index e = 0; e < m.normalized.cols(); ++e)
      out += ',' + io::format_double(m.normalized(static_cast<Eigen::Index>(p), e));
    out += ',' + io::format_double(m.row_average[static_cast<Eigen::Index>(p)]);
    out += '\n';
  }
  out += "\nraw\n";
  for (std::size_t p = 0; p < m.policy_ids.size(); ++p) {
    out += m.policy_ids[p];
    for (Eigen::Index e = 0; e < m.raw.cols(); ++e)
      out += ',' + io::format_double(m.raw(static_cast<Eigen::Index>(p), e));
    out += '\n';
  }
  io::write_text_atomic(path, out);
}

namespace {

io::json episode_to_json(const EpisodeResult& r) {
  const char* outcome = r.outcome == EpisodeOutcome::Catch  ? "catch"
                        : r.outcome == EpisodeOutcome::Fall ? "fall"
                                                            : "escape";
  return {{"chaser_return", r.chaser_return},
          {"escapee_return", r.escapee_return},
          {"steps", r.steps},
          {"catches", r.catches},
          {"fell", r.fell},
          {"escaped", r.escapee_escaped},
          {"outcome", outcome},
          {"mean_distance", r.mean_distance},
          {"mean_speed", r.mean_speed},
          {"mean_heading_error", r.mean_heading_error}};
}

io::json metrics_to_json(const ChaseMetrics& m) {
  return {{"fall_pct", m.fall_pct},
          {"catch_pct", m.catch_pct},
          {"escape_pct", m.escape_pct},
          {"mean_distance", m.mean_distance},
          {"mean_speed", m.mean_speed},
          {"mean_heading_error", m.mean_heading_error},
          {"episodes", m.episodes}};
}

}  // namespace

void write_sine_episodes_json(const std::filesystem::path& path, const SineBenchmarkResult& r) {
  io::json eps = io::json::array();
  for (const auto& e : r.episodes) {
    io::json j = episode_to_json(e.result);
    j["amplitude"] = e.amplitude;
    j["frequency"] = e.frequency;
    eps.push_back(std::move(j));
  }
  io::json out{{"metrics", metrics_to_json(r.metrics)}, {"episodes", std::move(eps)}};
  io::write_text_atomic(path, out.dump(2) + "\n");
}

void write_unseen_episodes_json(const std::filesystem::path& path, const UnseenEvalResult& r) {
  io::json eps = io::json::array();
  for (std::size_t i = 0; i < r.episodes.size(); ++i) {
    io::json j = episode_to_json(r.episodes[i]);
    j["adversary"] = r.adversary_ids[i];
    eps.push_back(std::move(j));
  }
  io::json out{{"metrics", metrics_to_json(r.metrics)}, {"episodes", std::move(eps)}};
  io::write_text_atomic(path, out.dump(2) + "\n");
}

}  // namespace chase
