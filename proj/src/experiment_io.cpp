#include "chase/experiment_io.hpp"

#include <charconv>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

namespace chase::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw IoError("format_double failed");
  return std::string(buf, end);
}

double parse_double(const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw CorruptionError("bad double: '" + s + "'");
  return v;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string timestamp_utc() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json arch_to_json(const MlpArch& a) {
  return {{"input_dim", a.input_dim}, {"hidden_dims", a.hidden_dims}, {"output_dim", a.output_dim}};
}

MlpArch arch_from_json(const json& j) {
  MlpArch a;
  a.input_dim = j.at("input_dim").get<int>();
  a.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
  a.output_dim = j.at("output_dim").get<int>();
  return a;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) v[i++] = x.get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json arr = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) arr.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(arr)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw CorruptionError("matrix payload size mismatch");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index i = 0;
  for (const auto& x : data) m.data()[i++] = x.get<double>();
  return m;
}

json policy_to_json(const Policy& p) {
  return {{"arch", arch_to_json(p.arch())}, {"params", vector_to_json(p.encode())}};
}

Policy policy_from_json(const json& j) {
  return Policy(arch_from_json(j.at("arch")), vector_from_json(j.at("params")));
}

json spawn_to_json(const SpawnConfig& s) {
  const char* kind = s.kind == SpawnConfig::Kind::Cone       ? "cone"
                     : s.kind == SpawnConfig::Kind::Circular ? "circular"
                                                             : "zigzag";
  return {{"kind", kind},          {"half_angle", s.half_angle}, {"r_in", s.r_in},
          {"r_out", s.r_out},      {"n_points", s.n_points},     {"advance", s.advance},
          {"lateral", s.lateral}};
}

SpawnConfig spawn_from_json(const json& j) {
  SpawnConfig s;
  const std::string kind = j.at("kind").get<std::string>();
  s.kind = kind == "cone"       ? SpawnConfig::Kind::Cone
           : kind == "circular" ? SpawnConfig::Kind::Circular
                                : SpawnConfig::Kind::Zigzag;
  s.half_angle = j.at("half_angle").get<double>();
  s.r_in = j.at("r_in").get<double>();
  s.r_out = j.at("r_out").get<double>();
  s.n_points = j.at("n_points").get<int>();
  s.advance = j.at("advance").get<double>();
  s.lateral = j.at("lateral").get<double>();
  return s;
}

json arena_to_json(const ArenaConfig& a) {
  return {{"dt", a.dt},
          {"max_steps", a.max_steps},
          {"d_min", a.d_min},
          {"v_max", a.v_max},
          {"omega_max", a.omega_max},
          {"a_max", a.a_max},
          {"a_lat_max", a.a_lat_max},
          {"tau_omega", a.tau_omega},
          {"escapee_v_max", a.escapee_v_max},
          {"escapee_omega_max", a.escapee_omega_max},
          {"w1", a.w1},
          {"w2", a.w2},
          {"w3", a.w3},
          {"q_bar", std::vector<double>{a.q_bar[0], a.q_bar[1]}},
          {"spawn_cone", spawn_to_json(a.spawn_cone)},
          {"spawn_circular", spawn_to_json(a.spawn_circular)},
          {"spawn_zigzag", spawn_to_json(a.spawn_zigzag)},
          {"spawn", spawn_to_json(a.spawn)},
          {"escape_distance", a.escape_distance}};
}

ArenaConfig arena_from_json(const json& j) {
  ArenaConfig a;
  a.dt = j.at("dt").get<double>();
  a.max_steps = j.at("max_steps").get<int>();
  a.d_min = j.at("d_min").get<double>();
  a.v_max = j.at("v_max").get<double>();
  a.omega_max = j.at("omega_max").get<double>();
  a.a_max = j.at("a_max").get<double>();
  a.a_lat_max = j.at("a_lat_max").get<double>();
  a.tau_omega = j.at("tau_omega").get<double>();
  a.escapee_v_max = j.at("escapee_v_max").get<double>();
  a.escapee_omega_max = j.at("escapee_omega_max").get<double>();
  a.w1 = j.at("w1").get<double>();
  a.w2 = j.at("w2").get<double>();
  a.w3 = j.at("w3").get<double>();
  const auto q = j.at("q_bar").get<std::vector<double>>();
  if (q.size() != 2) throw CorruptionError("q_bar must have 2 entries");
  a.q_bar = Eigen::Vector2d(q[0], q[1]);
  a.spawn_cone = spawn_from_json(j.at("spawn_cone"));
  a.spawn_circular = spawn_from_json(j.at("spawn_circular"));
  a.spawn_zigzag = spawn_from_json(j.at("spawn_zigzag"));
  a.spawn = spawn_from_json(j.at("spawn"));
  a.escape_distance = j.at("escape_distance").get<double>();
  return a;
}

json schedule_to_json(const TrainSchedule& s) {
  return {{"generations", s.generations},
          {"adversaries_per_generation", s.adversaries_per_generation},
          {"chaser_iterations", s.chaser_iterations},
          {"escapee_iterations", s.escapee_iterations},
          {"lambda", s.lambda},
          {"sigma0", s.sigma0},
          {"fitness_rollouts", s.fitness_rollouts},
          {"factorization",
           s.factorization == CovarianceUpdate::Cholesky ? "cholesky" : "eigen"}};
}

TrainSchedule schedule_from_json(const json& j) {
  TrainSchedule s;
  s.generations = j.at("generations").get<int>();
  s.adversaries_per_generation = j.at("adversaries_per_generation").get<int>();
  s.chaser_iterations = j.at("chaser_iterations").get<std::vector<int>>();
  s.escapee_iterations = j.at("escapee_iterations").get<int>();
  s.lambda = j.at("lambda").get<int>();
  s.sigma0 = j.at("sigma0").get<double>();
  s.fitness_rollouts = j.at("fitness_rollouts").get<int>();
  s.factorization = j.at("factorization").get<std::string>() == "eigen"
                        ? CovarianceUpdate::Eigendecomposition
                        : CovarianceUpdate::Cholesky;
  return s;
}

json record_to_json(const AdversaryRecord& r) {
  return {{"policy", policy_to_json(r.policy)},
          {"generation", r.generation},
          {"d_min_train", r.d_min_train},
          {"split", r.split == AdversaryRecord::Split::Train ? "train" : "test"},
          {"id", r.id}};
}

AdversaryRecord record_from_json(const json& j) {
  return {policy_from_json(j.at("policy")), j.at("generation").get<int>(),
          j.at("d_min_train").get<double>(),
          j.at("split").get<std::string>() == "train" ? AdversaryRecord::Split::Train
                                                      : AdversaryRecord::Split::Test,
          j.at("id").get<std::string>()};
}

json cma_snapshot_to_json(const CmaEs::Snapshot& s) {
  json cfg{{"dim", s.config.dim},
           {"lambda", s.config.lambda},
           {"sigma0", s.config.sigma0},
           {"mean0", vector_to_json(s.config.mean0)},
           {"seed", s.config.seed},
           {"max_iterations", s.config.max_iterations},
           {"factorization",
            s.config.factorization == CovarianceUpdate::Cholesky ? "cholesky" : "eigen"}};
  return {{"config", std::move(cfg)},
          {"mean", vector_to_json(s.mean)},
          {"sigma", s.sigma},
          {"covariance", matrix_to_json(s.covariance)},
          {"p_sigma", vector_to_json(s.p_sigma)},
          {"p_cov", vector_to_json(s.p_cov)},
          {"factor", matrix_to_json(s.factor)},
          {"factor_scale", vector_to_json(s.factor_scale)},
          {"iteration", s.iteration},
          {"last_factor_iteration", s.last_factor_iteration},
          {"factor_fresh", s.factor_fresh},
          {"rng_state", s.rng_state},
          {"has_best", s.has_best},
          {"best_params", vector_to_json(s.best_params)},
          {"best_fitness", s.best_fitness},
          {"covariance_repairs", s.diagnostics.covariance_repairs},
          {"flat_fitness_generations", s.diagnostics.flat_fitness_generations}};
}

CmaEs::Snapshot cma_snapshot_from_json(const json& j) {
  CmaEs::Snapshot s;
  const json& cfg = j.at("config");
  s.config.dim = cfg.at("dim").get<int>();
  s.config.lambda = cfg.at("lambda").get<int>();
  s.config.sigma0 = cfg.at("sigma0").get<double>();
  s.config.mean0 = vector_from_json(cfg.at("mean0"));
  s.config.seed = cfg.at("seed").get<std::uint64_t>();
  s.config.max_iterations = cfg.at("max_iterations").get<int>();
  s.config.factorization = cfg.at("factorization").get<std::string>() == "eigen"
                               ? CovarianceUpdate::Eigendecomposition
                               : CovarianceUpdate::Cholesky;
  s.mean = vector_from_json(j.at("mean"));
  s.sigma = j.at("sigma").get<double>();
  s.covariance = matrix_from_json(j.at("covariance"));
  s.p_sigma = vector_from_json(j.at("p_sigma"));
  s.p_cov = vector_from_json(j.at("p_cov"));
  s.factor = matrix_from_json(j.at("factor"));
  s.factor_scale = vector_from_json(j.at("factor_scale"));
  s.iteration = j.at("iteration").get<int>();
  s.last_factor_iteration = j.at("last_factor_iteration").get<int>();
  s.factor_fresh = j.at("factor_fresh").get<bool>();
  s.rng_state = j.at("rng_state").get<std::string>();
  s.has_best = j.at("has_best").get<bool>();
  s.best_params = vector_from_json(j.at("best_params"));
  s.best_fitness = j.at("best_fitness").get<double>();
  s.diagnostics.covariance_repairs = j.at("covariance_repairs").get<long>();
  s.diagnostics.flat_fitness_generations = j.at("flat_fitness_generations").get<long>();
  return s;
}

std::filesystem::path RunPaths::checkpoint(int generation, const std::string& phase) const {
  std::string name = "gen-" + std::to_string(generation);
  if (!phase.empty() && phase != "generation") name += "-" + phase;
  return checkpoints() / (name + ".json");
}

void RunPaths::create_dirs() const {
  fs::create_directories(checkpoints());
  fs::create_directories(metrics());
  fs::create_directories(trajectories());
}

namespace {

// Envelope shared by manifests and checkpoints: schema version plus a
// checksum over the canonical payload dump.
std::string wrap_payload(const json& payload) {
  const std::string body = payload.dump();
  char checksum[24];
  std::snprintf(checksum, sizeof(checksum), "%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  json file{{"schema_version", kSchemaVersion}, {"checksum", checksum}, {"payload", payload}};
  return file.dump(2) + "\n";
}

json unwrap_payload(const std::string& text, const std::string& what) {
  json file;
  try {
    file = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptionError(what + ": unparseable (" + e.what() + ")");
  }
  if (!file.contains("schema_version"))
    throw CorruptionError(what + ": missing schema_version");
  const int version = file.at("schema_version").get<int>();
  if (version != kSchemaVersion)
    throw VersionError(what + ": schema version " + std::to_string(version) +
                       " unsupported (expected " + std::to_string(kSchemaVersion) + ")");
  const std::string body = file.at("payload").dump();
  char checksum[24];
  std::snprintf(checksum, sizeof(checksum), "%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  if (file.at("checksum").get<std::string>() != checksum)
    throw CorruptionError(what + ": checksum mismatch");
  return file.at("payload");
}

}  // namespace

void save_manifest(const fs::path& path, const RunManifest& m) {
  json payload{{"created_at", m.created_at},
               {"mode", m.mode},
               {"scale", m.scale},
               {"master_seed", m.master_seed},
               {"threads", m.threads},
               {"blas_threads", m.blas_threads},
               {"arena", arena_to_json(m.arena)},
               {"schedule", schedule_to_json(m.schedule)},
               {"tool_version", m.tool_version}};
  write_text_atomic(path, wrap_payload(payload));
}

RunManifest load_manifest(const fs::path& path) {
  const json p = unwrap_payload(read_text(path), "manifest " + path.string());
  RunManifest m;
  m.created_at = p.at("created_at").get<std::string>();
  m.mode = p.at("mode").get<std::string>();
  m.scale = p.at("scale").get<std::string>();
  m.master_seed = p.at("master_seed").get<std::uint64_t>();
  m.threads = p.at("threads").get<int>();
  m.blas_threads = p.at("blas_threads").get<int>();
  m.arena = arena_from_json(p.at("arena"));
  m.schedule = schedule_from_json(p.at("schedule"));
  m.tool_version = p.at("tool_version").get<std::string>();
  return m;
}

void save_checkpoint(const fs::path& path, const Checkpoint& cp) {
  json ensemble = json::array();
  for (const auto& r : cp.ensemble) ensemble.push_back(record_to_json(r));
  json payload{{"generation", cp.generation},
               {"phase", cp.phase},
               {"chaser_arch", arch_to_json(cp.chaser_arch)},
               {"chaser_params", vector_to_json(cp.chaser_params)},
               {"ensemble", std::move(ensemble)},
               {"master_seed", cp.master_seed}};
  if (cp.cma) payload["cma"] = cma_snapshot_to_json(*cp.cma);
  write_text_atomic(path, wrap_payload(payload));
}

Checkpoint load_checkpoint(const fs::path& path) {
  const json p = unwrap_payload(read_text(path), "checkpoint " + path.string());
  Checkpoint cp;
  cp.generation = p.at("generation").get<int>();
  cp.phase = p.at("phase").get<std::string>();
  cp.chaser_arch = arch_from_json(p.at("chaser_arch"));
  cp.chaser_params = vector_from_json(p.at("chaser_params"));
  for (const auto& r : p.at("ensemble")) cp.ensemble.push_back(record_from_json(r));
  cp.master_seed = p.at("master_seed").get<std::uint64_t>();
  if (p.contains("cma")) cp.cma = cma_snapshot_from_json(p.at("cma"));
  return cp;
}

MetricsLog::MetricsLog(const fs::path& path, const std::vector<std::string>& header)
    : columns_(header.size()) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  f_ = std::fopen(path.string().c_str(), fresh ? "wb" : "ab");
  if (!f_) throw IoError("cannot open metrics log: " + path.string());
  if (fresh) {
    std::string line;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) line += ',';
      line += header[i];
    }
    line += '\n';
    std::fwrite(line.data(), 1, line.size(), f_);
    std::fflush(f_);
  }
}

MetricsLog::~MetricsLog() {
  if (f_) std::fclose(f_);
}

void MetricsLog::append(const std::vector<std::string>& fields) {
  if (fields.size() != columns_)
    throw IoError("metrics record has wrong number of fields");
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  line += '\n';
  std::lock_guard lock(m_);
  // One write + flush per record: a record is either fully on disk or absent.
  if (std::fwrite(line.data(), 1, line.size(), f_) != line.size())
    throw IoError("metrics append failed");
  if (std::fflush(f_) != 0) throw IoError("metrics flush failed");
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

const char* const kTrajectoryHeader =
    "t,chaser_x,chaser_y,chaser_heading,chaser_speed,chaser_turn_rate,"
    "escapee_x,escapee_y,escapee_theta,distance,chaser_reward,escapee_reward,caught,fell";

void export_trajectory_csv(const fs::path& path, const EpisodeResult& episode) {
  std::string out = std::string(kTrajectoryHeader) + "\n";
  for (const auto& p : episode.trajectory) {
    out += format_double(p.t);
    out += ',';
    out += format_double(p.chaser.x);
    out += ',';
    out += format_double(p.chaser.y);
    out += ',';
    out += format_double(p.chaser.heading);
    out += ',';
    out += format_double(p.chaser.speed);
    out += ',';
    out += format_double(p.chaser.turn_rate);
    out += ',';
    out += format_double(p.escapee.x);
    out += ',';
    out += format_double(p.escapee.y);
    out += ',';
    out += format_double(p.escapee.theta);
    out += ',';
    out += format_double(p.distance);
    out += ',';
    out += format_double(p.chaser_reward);
    out += ',';
    out += format_double(p.escapee_reward);
    out += ',';
    out += p.caught ? '1' : '0';
    out += ',';
    out += p.fell ? '1' : '0';
    out += '\n';
  }
  write_text_atomic(path, out);
}

std::vector<TrajectoryPoint> import_trajectory_csv(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows[0].size() != 14)
    throw CorruptionError("trajectory csv: bad header in " + path.string());
  std::vector<TrajectoryPoint> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 14) throw CorruptionError("trajectory csv: bad row");
    TrajectoryPoint p;
    p.t = parse_double(r[0]);
    p.chaser.x = parse_double(r[1]);
    p.chaser.y = parse_double(r[2]);
    p.chaser.heading = parse_double(r[3]);
    p.chaser.speed = parse_double(r[4]);
    p.chaser.turn_rate = parse_double(r[5]);
    p.escapee.x = parse_double(r[6]);
    p.escapee.y = parse_double(r[7]);
    p.escapee.theta = parse_double(r[8]);
    p.distance = parse_double(r[9]);
    p.chaser_reward = parse_double(r[10]);
    p.escapee_reward = parse_double(r[11]);
    p.caught = r[12] == "1";
    p.fell = r[13] == "1";
    out.push_back(p);
  }
  return out;
}

void export_trajectories(const fs::path& dir, std::span<const EpisodeResult> episodes) {
  fs::create_directories(dir);
  std::string index = "episode,file,steps,catches,fell,escaped,chaser_return,escapee_return\n";
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const std::string name = "episode-" + std::to_string(i) + ".csv";
    export_trajectory_csv(dir / name, episodes[i]);
    index += std::to_string(i) + ',' + name + ',' + std::to_string(episodes[i].steps) + ',' +
             std::to_string(episodes[i].catches) + ',' + (episodes[i].fell ? "1" : "0") + ',' +
             (episodes[i].escapee_escaped ? "1" : "0") + ',' +
             format_double(episodes[i].chaser_return) + ',' +
             format_double(episodes[i].escapee_return) + '\n';
  }
  write_text_atomic(dir / "index.csv", index);
}

}  // namespace chase::io
