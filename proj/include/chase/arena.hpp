#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "chase/mlp.hpp"
#include "chase/rng.hpp"

namespace chase {

// Planar pursuit-evasion world. The chaser is a legged-surrogate unicycle
// with longitudinal acceleration limits, first-order turn-rate lag and a
// lateral-acceleration fall threshold; the escapee is a kinematic dot-bot
// driven by twist commands.

struct ChaserState {
  double x = 0, y = 0;      // meters
  double heading = 0;       // radians
  double speed = 0;         // m/s, in [0, v_max]
  double turn_rate = 0;     // rad/s, in [-w_max, w_max]
};

struct DotBotState {
  double x = 0, y = 0;  // meters
  double theta = 0;     // radians
};

struct SpawnConfig {
  enum class Kind { Cone, Circular, Zigzag };
  Kind kind = Kind::Cone;
  // Cone / Circular: annular (sector) sampling.
  double half_angle = M_PI / 3.0;  // Cone only; Circular spans the full circle
  double r_in = 2.0;
  double r_out = 4.0;
  // Zigzag: pre-sampled vertex pattern, consumed in order on each respawn.
  int n_points = 8;
  double advance = 3.0;  // forward spacing between vertices
  double lateral = 2.0;  // alternating lateral offset

  static SpawnConfig cone(double half_angle = M_PI / 3.0, double r_in = 2.0,
                          double r_out = 4.0);
  static SpawnConfig circular(double r_in = 2.0, double r_out = 4.0);
  static SpawnConfig zigzag(int n_points = 8, double advance = 3.0,
                            double lateral = 2.0);
};

struct ArenaConfig {
  double dt = 0.002;          // seconds; 2000 steps = 4 s episodes
  int max_steps = 2000;
  double d_min = 0.5;         // catch radius (chase tasks)
  double v_max = 2.5;         // chaser speed limit
  double omega_max = 2.5;     // chaser turn-rate limit
  double a_max = 4.0;         // chaser longitudinal acceleration limit
  double a_lat_max = 4.0;     // |v*omega| above this is a fall
  double tau_omega = 0.1;     // turn-rate first-order lag constant
  double escapee_v_max = 2.0;
  double escapee_omega_max = 2.0;
  double w1 = 10.0;           // catch bonus
  double w2 = 0.01;           // action-reference penalty
  double w3 = 0.05;           // mirror-symmetry penalty
  Eigen::Vector2d q_bar = Eigen::Vector2d::Zero();  // reference action
  // Spawn geometry presets; training and evaluation pick the active one.
  SpawnConfig spawn_cone = SpawnConfig::cone();
  SpawnConfig spawn_circular = SpawnConfig::circular();
  SpawnConfig spawn_zigzag = SpawnConfig::zigzag();
  SpawnConfig spawn;  // active configuration used by rollout()
  // Evaluation-mode episode ends as an escape once distance exceeds this
  // (0 disables the distance cutoff; timeout still counts as escape).
  double escape_distance = 0.0;

  void validate() const;
};

// One step of the kinematic dot-bot. The commanded twist is clipped to
// [0, escapee_v_max] x [-escapee_omega_max, escapee_omega_max]; position
// integrates with the pre-step heading.
DotBotState dotbot_step(const DotBotState& s, double v_cmd, double omega_cmd,
                        const ArenaConfig& cfg);

// One step of the surrogate chaser from a normalized action in [-1,1]^2.
// Returns the new state and whether the step ended in a fall.
std::pair<ChaserState, bool> chaser_step(const ChaserState& s, double accel_cmd,
                                         double turn_cmd, const ArenaConfig& cfg);

// 5-D chaser observation: (v/v_max, w/w_max, dx_body, dy_body, d).
Eigen::Matrix<double, 5, 1> chaser_observe(const ChaserState& chaser,
                                           const DotBotState& escapee,
                                           const ArenaConfig& cfg);

// 3-D escapee observation: chaser position in the escapee frame plus the
// relative heading wrapped to (-pi, pi].
Eigen::Vector3d escapee_observe(const ChaserState& chaser, const DotBotState& escapee);

// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

// Chaser reward, all four terms. theta is the unsigned angle between the
// chaser heading and the direction to the escapee.
double chaser_reward(double prev_d, double d, double theta, bool caught,
                     const Eigen::Vector2d& action, const Eigen::Vector2d& mirrored_action,
                     const ArenaConfig& cfg);

inline double escapee_reward(double prev_d, double d) { return d - prev_d; }

// Per-episode spawn sampler. Cone/Circular draw relative to the chaser's
// current pose on every call; Zigzag fixes its vertex list (in the frame of
// the chaser's pose at episode start) and returns vertices in order.
class SpawnState {
 public:
  SpawnState(const SpawnConfig& cfg, const ChaserState& initial_chaser, Rng& rng);
  DotBotState next(const ChaserState& current_chaser, Rng& rng);

 private:
  const SpawnConfig cfg_;
  std::vector<DotBotState> vertices_;  // Zigzag only
  std::size_t cursor_ = 0;
};

// Scripted evaluation target: moves along y = A sin(w (x - 2)) at constant
// speed. Each step advances to the point on the curve exactly speed*dt away
// (Newton solve seeded with the arc-length first-order step).
class SineTarget {
 public:
  SineTarget(double amplitude, double frequency, double speed = 2.0);
  const DotBotState& state() const { return state_; }
  void advance(double dt);

 private:
  double curve_y(double x) const;
  double curve_slope(double x) const;
  double amplitude_, frequency_, speed_;
  DotBotState state_;
};

// Escapee controller used by a rollout.
struct Escapee {
  enum class Kind { Static, Learned, ScriptedSine };
  Kind kind = Kind::Static;
  const Policy* policy = nullptr;  // Learned only; not owned
  double sine_amplitude = 0.0;     // ScriptedSine only
  double sine_frequency = 0.0;

  static Escapee statik() { return {}; }
  static Escapee learned(const Policy& p) {
    return {Kind::Learned, &p, 0.0, 0.0};
  }
  static Escapee scripted_sine(double amplitude, double frequency) {
    return {Kind::ScriptedSine, nullptr, amplitude, frequency};
  }
};

enum class RolloutMode { ChaseTraining, EscapeTraining, Evaluation };

// How an evaluation episode ended. Training modes classify escapes as
// "episode ran out with no catch and no fall".
enum class EpisodeOutcome { Catch, Fall, Escape };

struct TrajectoryPoint {
  double t = 0;
  ChaserState chaser;
  DotBotState escapee;
  double distance = 0;
  double chaser_reward = 0;
  double escapee_reward = 0;
  bool caught = false;
  bool fell = false;
};

struct EpisodeResult {
  double chaser_return = 0;
  double escapee_return = 0;
  int steps = 0;
  int catches = 0;
  bool fell = false;
  bool escapee_escaped = false;
  EpisodeOutcome outcome = EpisodeOutcome::Escape;
  // Per-step means over the episode (Table-style aggregates).
  double mean_distance = 0;
  double mean_speed = 0;
  double mean_heading_error = 0;
  std::vector<TrajectoryPoint> trajectory;  // filled only when recorded
};

// Runs one seeded episode. Deterministic: identical (policies, cfg, mode,
// seed) give an identical EpisodeResult bit for bit.
//
//  ChaseTraining / Evaluation: ends on chaser fall or max_steps. On a catch,
//    ChaseTraining respawns the escapee from cfg.spawn and the episode
//    continues; Evaluation ends the episode (and also ends it as an escape
//    once distance exceeds cfg.escape_distance, when set).
//  EscapeTraining: runs exactly max_steps; a fallen chaser freezes in place
//    for the remainder; no respawn on catch.
EpisodeResult rollout(const Policy& chaser, const Escapee& escapee,
                      const ArenaConfig& cfg, RolloutMode mode,
                      std::uint64_t seed, bool record = false);

}  // namespace chase
