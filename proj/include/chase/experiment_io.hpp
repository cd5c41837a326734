#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chase/arena.hpp"
#include "chase/cma_es.hpp"
#include "chase/training.hpp"

#include <json.hpp>

namespace chase::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VersionError : IoError {
  using IoError::IoError;
};
struct CorruptionError : IoError {
  using IoError::IoError;
};

// Shortest representation that parses back to the identical double.
std::string format_double(double v);
double parse_double(const std::string& s);

std::uint64_t fnv1a64(std::string_view data);

using nlohmann::json;

json arch_to_json(const MlpArch&);
MlpArch arch_from_json(const json&);
json policy_to_json(const Policy&);
Policy policy_from_json(const json&);
json vector_to_json(const Eigen::VectorXd&);
Eigen::VectorXd vector_from_json(const json&);
json matrix_to_json(const Eigen::MatrixXd&);
Eigen::MatrixXd matrix_from_json(const json&);
json spawn_to_json(const SpawnConfig&);
SpawnConfig spawn_from_json(const json&);
json arena_to_json(const ArenaConfig&);
ArenaConfig arena_from_json(const json&);
json schedule_to_json(const TrainSchedule&);
TrainSchedule schedule_from_json(const json&);
json record_to_json(const AdversaryRecord&);
AdversaryRecord record_from_json(const json&);
json cma_snapshot_to_json(const CmaEs::Snapshot&);
CmaEs::Snapshot cma_snapshot_from_json(const json&);

// Standard layout of one run directory.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path metrics() const { return root / "metrics"; }
  std::filesystem::path trajectories() const { return root / "trajectories"; }
  // phase is "chaser" (after the chaser phase) or empty (generation end).
  std::filesystem::path checkpoint(int generation, const std::string& phase = "") const;

  void create_dirs() const;
};

// Everything needed to resume or audit a run.
struct RunManifest {
  std::string created_at;  // ISO 8601 UTC; informational only
  std::string mode;
  std::string scale;
  std::uint64_t master_seed = 0;
  int threads = 1;
  int blas_threads = 1;
  ArenaConfig arena;
  TrainSchedule schedule;
  std::string tool_version = kToolVersion;
};

void save_manifest(const std::filesystem::path&, const RunManifest&);
RunManifest load_manifest(const std::filesystem::path&);

// Self-contained training stage snapshot; loadable without the original
// process. The random-stream state is fully determined by (master_seed,
// stage) because every stream seed is derived, never advanced globally.
struct Checkpoint {
  int generation = 0;
  std::string phase;  // "chaser" or "generation"
  MlpArch chaser_arch;
  ParamVector chaser_params;  // best-so-far chaser policy
  std::vector<AdversaryRecord> ensemble;
  std::uint64_t master_seed = 0;
  std::optional<CmaEs::Snapshot> cma;  // in-progress optimization, if any
};

void save_checkpoint(const std::filesystem::path&, const Checkpoint&);
Checkpoint load_checkpoint(const std::filesystem::path&);

// Append-only CSV with a fixed header; every record is flushed as one write.
// Appends are serialized internally, so parallel evaluators can share a log.
class MetricsLog {
 public:
  MetricsLog(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~MetricsLog();
  MetricsLog(const MetricsLog&) = delete;
  MetricsLog& operator=(const MetricsLog&) = delete;

  void append(const std::vector<std::string>& fields);

 private:
  std::FILE* f_ = nullptr;
  std::size_t columns_ = 0;
  std::mutex m_;
};

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path&);

// Trajectory export: one row per step with a fixed documented header.
extern const char* const kTrajectoryHeader;
void export_trajectory_csv(const std::filesystem::path&, const EpisodeResult&);
std::vector<TrajectoryPoint> import_trajectory_csv(const std::filesystem::path&);

// Writes episode trajectory files plus an index listing outcomes.
void export_trajectories(const std::filesystem::path& dir,
                         std::span<const EpisodeResult> episodes);

std::string timestamp_utc();
void write_text_atomic(const std::filesystem::path&, const std::string&);
std::string read_text(const std::filesystem::path&);

}  // namespace chase::io
