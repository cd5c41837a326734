#include "chase/arena.hpp"

#include <cmath>
#include <stdexcept>

namespace chase {

SpawnConfig SpawnConfig::cone(double half_angle, double r_in, double r_out) {
  SpawnConfig c;
  c.kind = Kind::Cone;
  c.half_angle = half_angle;
  c.r_in = r_in;
  c.r_out = r_out;
  return c;
}

SpawnConfig SpawnConfig::circular(double r_in, double r_out) {
  SpawnConfig c;
  c.kind = Kind::Circular;
  c.r_in = r_in;
  c.r_out = r_out;
  return c;
}

SpawnConfig SpawnConfig::zigzag(int n_points, double advance, double lateral) {
  SpawnConfig c;
  c.kind = Kind::Zigzag;
  c.n_points = n_points;
  c.advance = advance;
  c.lateral = lateral;
  return c;
}

void ArenaConfig::validate() const {
  if (!(dt > 0)) throw std::invalid_argument("ArenaConfig: dt must be > 0");
  if (max_steps < 1) throw std::invalid_argument("ArenaConfig: max_steps must be >= 1");
  if (!(d_min > 0)) throw std::invalid_argument("ArenaConfig: d_min must be > 0");
  if (!(v_max > escapee_v_max))
    throw std::invalid_argument("ArenaConfig: chaser v_max must exceed escapee v_max");
  if (!(a_max > 0) || !(a_lat_max > 0) || !(omega_max > 0) ||
      !(escapee_v_max > 0) || !(escapee_omega_max > 0))
    throw std::invalid_argument("ArenaConfig: limits must be positive");
  if (tau_omega < 0) throw std::invalid_argument("ArenaConfig: tau_omega must be >= 0");
  if (!(spawn.r_in > 0) || spawn.r_in > spawn.r_out)
    throw std::invalid_argument("ArenaConfig: spawn radii must satisfy 0 < r_in <= r_out");
  if (spawn.kind == SpawnConfig::Kind::Zigzag && spawn.n_points < 2)
    throw std::invalid_argument("ArenaConfig: zigzag needs at least 2 points");
}

double wrap_angle(double a) {
  double r = std::fmod(a + M_PI, 2.0 * M_PI);
  if (r <= 0.0) r += 2.0 * M_PI;
  return r - M_PI;
}

DotBotState dotbot_step(const DotBotState& s, double v_cmd, double omega_cmd,
                        const ArenaConfig& cfg) {
  const double v = std::clamp(v_cmd, 0.0, cfg.escapee_v_max);
  const double w = std::clamp(omega_cmd, -cfg.escapee_omega_max, cfg.escapee_omega_max);
  DotBotState out;
  out.theta = s.theta + w * cfg.dt;
  out.x = s.x + v * std::cos(s.theta) * cfg.dt;  // pre-step heading
  out.y = s.y + v * std::sin(s.theta) * cfg.dt;
  return out;
}

std::pair<ChaserState, bool> chaser_step(const ChaserState& s, double accel_cmd,
                                         double turn_cmd, const ArenaConfig& cfg) {
  const double a = std::clamp(accel_cmd, -1.0, 1.0);
  const double t = std::clamp(turn_cmd, -1.0, 1.0);
  ChaserState out;
  out.speed = std::clamp(s.speed + a * cfg.a_max * cfg.dt, 0.0, cfg.v_max);
  const double lag = cfg.tau_omega > 0.0 ? std::min(1.0, cfg.dt / cfg.tau_omega) : 1.0;
  out.turn_rate = s.turn_rate + (t * cfg.omega_max - s.turn_rate) * lag;
  out.heading = s.heading + out.turn_rate * cfg.dt;
  out.x = s.x + out.speed * std::cos(s.heading) * cfg.dt;  // pre-step heading
  out.y = s.y + out.speed * std::sin(s.heading) * cfg.dt;
  const bool fell = std::abs(out.speed * out.turn_rate) > cfg.a_lat_max;
  return {out, fell};
}

Eigen::Matrix<double, 5, 1> chaser_observe(const ChaserState& chaser,
                                           const DotBotState& escapee,
                                           const ArenaConfig& cfg) {
  const double dxw = escapee.x - chaser.x;
  const double dyw = escapee.y - chaser.y;
  const double c = std::cos(chaser.heading);
  const double s = std::sin(chaser.heading);
  const double dx = c * dxw + s * dyw;
  const double dy = -s * dxw + c * dyw;
  Eigen::Matrix<double, 5, 1> obs;
  obs << chaser.speed / cfg.v_max, chaser.turn_rate / cfg.omega_max, dx, dy,
      std::sqrt(dx * dx + dy * dy);
  return obs;
}

Eigen::Vector3d escapee_observe(const ChaserState& chaser, const DotBotState& escapee) {
  const double dxw = chaser.x - escapee.x;
  const double dyw = chaser.y - escapee.y;
  const double c = std::cos(escapee.theta);
  const double s = std::sin(escapee.theta);
  return {c * dxw + s * dyw, -s * dxw + c * dyw, wrap_angle(chaser.heading - escapee.theta)};
}

double chaser_reward(double prev_d, double d, double theta, bool caught,
                     const Eigen::Vector2d& action, const Eigen::Vector2d& mirrored_action,
                     const ArenaConfig& cfg) {
  double r = std::exp(-std::abs(theta)) * (prev_d - d);
  if (caught) r += cfg.w1;
  r -= cfg.w2 * (action - cfg.q_bar).norm();
  r -= cfg.w3 * (action - mirrored_action).norm();
  return r;
}

SpawnState::SpawnState(const SpawnConfig& cfg, const ChaserState& initial_chaser, Rng& rng)
    : cfg_(cfg) {
  if (cfg_.kind == SpawnConfig::Kind::Zigzag) {
    // Vertex list is fixed in the frame of the chaser's pose at episode
    // start; the starting side is sampled, then sides alternate.
    const double side = rng.u01() < 0.5 ? 1.0 : -1.0;
    const double c = std::cos(initial_chaser.heading);
    const double s = std::sin(initial_chaser.heading);
    vertices_.reserve(cfg_.n_points);
    for (int k = 1; k <= cfg_.n_points; ++k) {
      const double fx = k * cfg_.advance;
      const double fy = (k % 2 == 1 ? side : -side) * cfg_.lateral;
      DotBotState v;
      v.x = initial_chaser.x + c * fx - s * fy;
      v.y = initial_chaser.y + s * fx + c * fy;
      v.theta = rng.angle();
      vertices_.push_back(v);
    }
  }
}

DotBotState SpawnState::next(const ChaserState& current_chaser, Rng& rng) {
  if (cfg_.kind == SpawnConfig::Kind::Zigzag) {
    // Consumed in order; cycles if every vertex has been used.
    const DotBotState v = vertices_[cursor_ % vertices_.size()];
    cursor_++;
    return v;
  }
  const double half = cfg_.kind == SpawnConfig::Kind::Circular ? M_PI : cfg_.half_angle;
  const double bearing = current_chaser.heading + rng.uniform(-half, half);
  // Area-uniform over the annular sector.
  const double r = std::sqrt(rng.uniform(cfg_.r_in * cfg_.r_in, cfg_.r_out * cfg_.r_out));
  DotBotState out;
  out.x = current_chaser.x + r * std::cos(bearing);
  out.y = current_chaser.y + r * std::sin(bearing);
  out.theta = rng.angle();
  return out;
}

SineTarget::SineTarget(double amplitude, double frequency, double speed)
    : amplitude_(amplitude), frequency_(frequency), speed_(speed) {
  state_.x = 2.0;
  state_.y = 0.0;
  state_.theta = std::atan(curve_slope(2.0));
}

double SineTarget::curve_y(double x) const {
  return amplitude_ * std::sin(frequency_ * (x - 2.0));
}

double SineTarget::curve_slope(double x) const {
  return amplitude_ * frequency_ * std::cos(frequency_ * (x - 2.0));
}

void SineTarget::advance(double dt) {
  const double ds = speed_ * dt;
  const double x0 = state_.x;
  const double y0 = curve_y(x0);
  // Find the point on the curve exactly ds away (chord). The arc-length
  // first-order step seeds a Newton iteration on
  //   g(h) = h^2 + (f(x0+h) - y0)^2 - ds^2.
  double h = ds / std::sqrt(1.0 + curve_slope(x0) * curve_slope(x0));
  for (int it = 0; it < 12; ++it) {
    const double fy = curve_y(x0 + h) - y0;
    const double g = h * h + fy * fy - ds * ds;
    const double dg = 2.0 * h + 2.0 * fy * curve_slope(x0 + h);
    if (dg == 0.0) break;
    const double step = g / dg;
    h -= step;
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(h))) break;
  }
  const double y1 = curve_y(x0 + h);
  state_.theta = std::atan2(y1 - y0, h);
  state_.x = x0 + h;
  state_.y = y1;
}

namespace {

struct StepObs {
  Eigen::Matrix<double, 5, 1> values;
  double distance() const { return values[4]; }
  double heading_error() const { return std::abs(std::atan2(values[3], values[2])); }
};

}  // namespace

EpisodeResult rollout(const Policy& chaser, const Escapee& escapee,
                      const ArenaConfig& cfg, RolloutMode mode,
                      std::uint64_t seed, bool record) {
  cfg.validate();
  if (chaser.arch().input_dim != 5 || chaser.arch().output_dim != 2)
    throw std::invalid_argument("rollout: chaser policy must be 5 -> 2");
  if (escapee.kind == Escapee::Kind::Learned) {
    if (escapee.policy == nullptr)
      throw std::invalid_argument("rollout: learned escapee without policy");
    if (escapee.policy->arch().input_dim != 3 || escapee.policy->arch().output_dim != 2)
      throw std::invalid_argument("rollout: escapee policy must be 3 -> 2");
  }

  Rng rng(seed);
  ChaserState cs;  // origin, at rest
  DotBotState es;
  std::optional<SpawnState> spawner;
  std::optional<SineTarget> target;
  if (escapee.kind == Escapee::Kind::ScriptedSine) {
    target.emplace(escapee.sine_amplitude, escapee.sine_frequency);
    es = target->state();
  } else {
    spawner.emplace(cfg.spawn, cs, rng);
    es = spawner->next(cs, rng);
  }

  const MirrorMap mirror = MirrorMap::chaser();
  Policy::Workspace ws, ws_escapee;
  Eigen::Matrix<double, 5, 2> chaser_in;
  Eigen::MatrixXd chaser_out, escapee_out;
  Eigen::Matrix<double, 3, 1> escapee_in;

  EpisodeResult result;
  StepObs obs{chaser_observe(cs, es, cfg)};
  double prev_d = obs.distance();
  bool frozen = false;      // EscapeTraining: chaser stays down after a fall
  bool was_caught = false;  // for catch-event counting without respawn
  bool terminal = false;

  if (record) result.trajectory.reserve(cfg.max_steps);

  for (int step = 1; step <= cfg.max_steps && !terminal; ++step) {
    Eigen::Vector2d action = Eigen::Vector2d::Zero();
    Eigen::Vector2d mirrored_action = Eigen::Vector2d::Zero();
    bool fell_now = false;

    if (!frozen) {
      chaser_in.col(0) = obs.values;
      chaser_in.col(1) = obs.values.cwiseProduct(mirror.state_signs);
      chaser.forward_batch(chaser_in, chaser_out, ws);
      action = chaser_out.col(0);
      mirrored_action = chaser_out.col(1).cwiseProduct(mirror.action_signs);
    }

    // Both agents act on the same pre-step world state.
    double esc_v = 0.0, esc_w = 0.0;
    if (escapee.kind == Escapee::Kind::Learned) {
      escapee_in = escapee_observe(cs, es);
      escapee.policy->forward_batch(escapee_in, escapee_out, ws_escapee);
      esc_v = escapee_out(0, 0) * cfg.escapee_v_max;
      esc_w = escapee_out(1, 0) * cfg.escapee_omega_max;
    }

    if (!frozen) {
      auto [next, fell] = chaser_step(cs, action[0], action[1], cfg);
      cs = next;
      fell_now = fell;
    }
    switch (escapee.kind) {
      case Escapee::Kind::Static:
        break;
      case Escapee::Kind::Learned:
        es = dotbot_step(es, esc_v, esc_w, cfg);
        break;
      case Escapee::Kind::ScriptedSine:
        target->advance(cfg.dt);
        es = target->state();
        break;
    }

    obs.values = chaser_observe(cs, es, cfg);
    const double d = obs.distance();
    const double theta = obs.heading_error();
    const bool caught = d <= cfg.d_min;

    const double r_chaser =
        frozen ? 0.0 : chaser_reward(prev_d, d, theta, caught, action, mirrored_action, cfg);
    const double r_escapee = escapee_reward(prev_d, d);
    result.chaser_return += r_chaser;
    result.escapee_return += r_escapee;
    result.mean_distance += d;
    result.mean_speed += cs.speed;
    result.mean_heading_error += theta;
    result.steps = step;

    if (record) {
      result.trajectory.push_back({step * cfg.dt, cs, es, d, r_chaser, r_escapee, caught, fell_now});
    }

    prev_d = d;

    if (caught) {
      switch (mode) {
        case RolloutMode::ChaseTraining:
          result.catches++;
          es = spawner->next(cs, rng);
          obs.values = chaser_observe(cs, es, cfg);
          prev_d = obs.distance();
          break;
        case RolloutMode::Evaluation:
          result.catches++;
          terminal = true;
          break;
        case RolloutMode::EscapeTraining:
          if (!was_caught) result.catches++;
          break;
      }
    }
    was_caught = caught;

    if (fell_now) {
      result.fell = true;
      if (mode == RolloutMode::EscapeTraining) {
        frozen = true;
      } else {
        terminal = true;
      }
    }

    if (!terminal && mode == RolloutMode::Evaluation && cfg.escape_distance > 0.0 &&
        !caught && d > cfg.escape_distance) {
      result.escapee_escaped = true;
      terminal = true;
    }
  }

  if (result.steps > 0) {
    result.mean_distance /= result.steps;
    result.mean_speed /= result.steps;
    result.mean_heading_error /= result.steps;
  }
  // Outcome partition. In Evaluation a terminal catch wins over a fall on
  // the same step; in the training modes a fall is what ends the episode.
  if (mode == RolloutMode::Evaluation) {
    if (result.catches > 0) result.outcome = EpisodeOutcome::Catch;
    else if (result.fell) result.outcome = EpisodeOutcome::Fall;
    else result.outcome = EpisodeOutcome::Escape;
    result.escapee_escaped = result.outcome == EpisodeOutcome::Escape;
  } else {
    if (result.fell) result.outcome = EpisodeOutcome::Fall;
    else if (result.catches > 0) result.outcome = EpisodeOutcome::Catch;
    else result.outcome = EpisodeOutcome::Escape;
    result.escapee_escaped = !result.fell && result.catches == 0;
  }

  return result;
}

}  // namespace chase
