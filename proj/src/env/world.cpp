#include "tem/env/world.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace tem::env {

namespace {

constexpr double kWallEps = 1e-9;

Eigen::Vector2d action_dir(int a) {
  switch (a) {
    case 0: return {0, 0};
    case 1: return {1, 0};
    case 2: return {-1, 0};
    case 3: return {0, 1};
    case 4: return {0, -1};
  }
  throw std::out_of_range("step: action index " + std::to_string(a) + " out of range [0,5)");
}

Eigen::Vector2d clamp_pos(const Eigen::Vector2d& p, double h) {
  return {std::clamp(p.x(), -h, h), std::clamp(p.y(), -h, h)};
}

Eigen::Vector2d clamp_speed(const Eigen::Vector2d& v, double cap) {
  const double n = v.norm();
  return n > cap ? Eigen::Vector2d(v * (cap / n)) : v;
}

// Slots ordered by (distance, index); only entities within obs_radius count.
std::vector<int> nearest_within(const std::vector<Eigen::Vector2d>& pos,
                                const Eigen::Vector2d& from, double radius, int skip) {
  std::vector<std::pair<double, int>> within;
  for (int i = 0; i < static_cast<int>(pos.size()); ++i) {
    if (i == skip) continue;
    const double d = (pos[i] - from).norm();
    if (d <= radius) within.emplace_back(d, i);
  }
  std::sort(within.begin(), within.end());
  std::vector<int> ids;
  ids.reserve(within.size());
  for (auto& [d, i] : within) ids.push_back(i);
  return ids;
}

}  // namespace

ScenarioConfig ScenarioConfig::parse(const std::string& tag) {
  const auto colon = tag.find(':');
  const auto dash = tag.find('-', colon == std::string::npos ? 0 : colon);
  if (colon == std::string::npos || dash == std::string::npos)
    throw std::invalid_argument("scenario tag must look like pp:7-3 or cn:3-3, got '" + tag + "'");
  ScenarioConfig cfg;
  const std::string kind = tag.substr(0, colon);
  if (kind == "pp")
    cfg.kind = ScenarioKind::PredatorPrey;
  else if (kind == "cn")
    cfg.kind = ScenarioKind::CooperativeNavigation;
  else
    throw std::invalid_argument("unknown scenario kind '" + kind + "'");
  cfg.n_agents = std::stoi(tag.substr(colon + 1, dash - colon - 1));
  cfg.n_targets = std::stoi(tag.substr(dash + 1));
  cfg.validate();
  return cfg;
}

std::string ScenarioConfig::tag() const {
  return std::string(is_pp() ? "pp" : "cn") + ":" + std::to_string(n_agents) + "-" +
         std::to_string(n_targets);
}

void ScenarioConfig::validate() const {
  if (n_agents < 1) throw std::invalid_argument("scenario: n_agents must be >= 1");
  if (n_targets < 1) throw std::invalid_argument("scenario: n_targets must be >= 1");
  if (episode_len < 1) throw std::invalid_argument("scenario: episode_len must be >= 1");
  if (k_neighbors < 1 || l_targets < 1)
    throw std::invalid_argument("scenario: slot counts must be >= 1");
  if (obs_radius <= 0 || capture_radius <= 0 || occupy_radius <= 0 || collision_dist <= 0)
    throw std::invalid_argument("scenario: radii must be > 0");
  if (damping < 0 || damping >= 1) throw std::invalid_argument("scenario: damping in [0,1)");
  if (prey_speed_factor <= 1) throw std::invalid_argument("scenario: prey_speed_factor > 1");
}

WorldState reset(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  WorldState s;
  s.rng = Rng(seed);
  const double h = cfg.world_half_extent;
  s.agent_pos.resize(cfg.n_agents);
  s.agent_vel.assign(cfg.n_agents, Eigen::Vector2d::Zero());
  for (auto& p : s.agent_pos) p = {s.rng.uniform(-h, h), s.rng.uniform(-h, h)};
  s.target_pos.resize(cfg.n_targets);
  s.target_vel.assign(cfg.n_targets, Eigen::Vector2d::Zero());
  for (auto& p : s.target_pos) p = {s.rng.uniform(-h, h), s.rng.uniform(-h, h)};
  return s;
}

Eigen::Vector2d prey_policy(const ScenarioConfig& cfg, const WorldState& state, int prey_index) {
  const Eigen::Vector2d& prey = state.target_pos[prey_index];
  int nearest = 0;
  double best = (state.agent_pos[0] - prey).norm();
  for (int i = 1; i < static_cast<int>(state.agent_pos.size()); ++i) {
    const double d = (state.agent_pos[i] - prey).norm();
    if (d < best) {  // strict: ties keep the lower index
      best = d;
      nearest = i;
    }
  }
  Eigen::Vector2d dir = prey - state.agent_pos[nearest];
  const double n = dir.norm();
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  if (n > 1e-12) v = dir * (cfg.prey_speed_factor * cfg.agent_max_speed / n);
  const double h = cfg.world_half_extent;
  for (int c = 0; c < 2; ++c) {
    if ((prey[c] >= h - kWallEps && v[c] > 0) || (prey[c] <= -h + kWallEps && v[c] < 0)) v[c] = 0;
  }
  return v;
}

Eigen::VectorXd compute_reward(const ScenarioConfig& cfg, const WorldState& state) {
  const int n = static_cast<int>(state.agent_pos.size());
  const int m = static_cast<int>(state.target_pos.size());
  double team = 0.0;
  if (cfg.is_pp()) {
    for (int i = 0; i < n; ++i) {
      double best = (state.target_pos[0] - state.agent_pos[i]).norm();
      for (int j = 1; j < m; ++j)
        best = std::min(best, (state.target_pos[j] - state.agent_pos[i]).norm());
      team += -best;
    }
  } else {
    for (int j = 0; j < m; ++j) {
      double best = (state.target_pos[j] - state.agent_pos[0]).norm();
      for (int i = 1; i < n; ++i)
        best = std::min(best, (state.target_pos[j] - state.agent_pos[i]).norm());
      team += -best;
    }
  }
  Eigen::VectorXd r = Eigen::VectorXd::Constant(n, team);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((state.agent_pos[i] - state.agent_pos[j]).norm() < cfg.collision_dist) {
        r[i] -= cfg.collision_penalty;
        r[j] -= cfg.collision_penalty;
      }
  return r;
}

Events detect_events(const ScenarioConfig& cfg, const WorldState& state) {
  Events ev;
  const int n = static_cast<int>(state.agent_pos.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((state.agent_pos[i] - state.agent_pos[j]).norm() < cfg.collision_dist) ++ev.collisions;
  if (cfg.is_pp()) {
    for (const auto& prey : state.target_pos) {
      int close = 0;
      for (const auto& a : state.agent_pos)
        if ((a - prey).norm() < cfg.capture_radius) ++close;
      if (close >= 3) ++ev.captures;
    }
  } else {
    for (const auto& lm : state.target_pos) {
      for (const auto& a : state.agent_pos)
        if ((a - lm).norm() < cfg.occupy_radius) {
          ++ev.occupied;
          break;
        }
    }
  }
  return ev;
}

StepResult step(const ScenarioConfig& cfg, WorldState& state, const std::vector<int>& actions) {
  if (static_cast<int>(actions.size()) != cfg.n_agents)
    throw std::invalid_argument("step: expected " + std::to_string(cfg.n_agents) +
                                " actions, got " + std::to_string(actions.size()));
  // Prey react to pre-step predator positions; everything moves together.
  std::vector<Eigen::Vector2d> prey_v;
  if (cfg.is_pp()) {
    prey_v.resize(state.target_pos.size());
    for (int j = 0; j < static_cast<int>(state.target_pos.size()); ++j)
      prey_v[j] = prey_policy(cfg, state, j);
  }
  const double h = cfg.world_half_extent;
  for (int i = 0; i < cfg.n_agents; ++i) {
    const Eigen::Vector2d dir = action_dir(actions[i]);
    Eigen::Vector2d v = state.agent_vel[i] * (1.0 - cfg.damping) + cfg.accel * dir * cfg.dt;
    v = clamp_speed(v, cfg.agent_max_speed);
    state.agent_vel[i] = v;
    state.agent_pos[i] = clamp_pos(state.agent_pos[i] + v * cfg.dt, h);
  }
  if (cfg.is_pp()) {
    for (int j = 0; j < static_cast<int>(state.target_pos.size()); ++j) {
      state.target_vel[j] = prey_v[j];
      state.target_pos[j] = clamp_pos(state.target_pos[j] + prey_v[j] * cfg.dt, h);
    }
  }
  ++state.step_index;
  StepResult res;
  res.rewards = compute_reward(cfg, state);
  res.events = detect_events(cfg, state);
  res.done = state.step_index >= cfg.episode_len;
  return res;
}

Observation observe(const ScenarioConfig& cfg, const WorldState& state, int agent) {
  Observation obs;
  obs.vec = Eigen::VectorXd::Zero(cfg.obs_len());
  obs.neighbor_ids.assign(cfg.k_neighbors, -1);
  obs.neighbor_valid.assign(cfg.k_neighbors, false);
  const Eigen::Vector2d& p = state.agent_pos[agent];
  const Eigen::Vector2d& v = state.agent_vel[agent];
  obs.vec.segment<2>(0) = p;
  obs.vec.segment<2>(2) = v;

  int off = 4;
  const auto neighbors = nearest_within(state.agent_pos, p, cfg.obs_radius, agent);
  for (int slot = 0; slot < cfg.k_neighbors; ++slot, off += 5) {
    if (slot >= static_cast<int>(neighbors.size())) continue;
    const int j = neighbors[slot];
    obs.neighbor_ids[slot] = j;
    obs.neighbor_valid[slot] = true;
    obs.vec[off] = 1.0;
    obs.vec.segment<2>(off + 1) = state.agent_pos[j] - p;
    obs.vec.segment<2>(off + 3) = state.agent_vel[j] - v;
  }

  const auto targets = nearest_within(state.target_pos, p, cfg.obs_radius, -1);
  const int tlen = cfg.target_slot_len();
  for (int slot = 0; slot < cfg.l_targets; ++slot, off += tlen) {
    if (slot >= static_cast<int>(targets.size())) continue;
    const int j = targets[slot];
    obs.vec[off] = 1.0;
    obs.vec.segment<2>(off + 1) = state.target_pos[j] - p;
    if (cfg.is_pp()) obs.vec.segment<2>(off + 3) = state.target_vel[j] - v;
  }
  return obs;
}

Eigen::VectorXd global_state(const ScenarioConfig& cfg, const WorldState& state) {
  Eigen::VectorXd s(cfg.state_len());
  int off = 0;
  for (int i = 0; i < cfg.n_agents; ++i) {
    s.segment<2>(off) = state.agent_pos[i];
    s.segment<2>(off + 2) = state.agent_vel[i];
    off += 4;
  }
  for (int j = 0; j < cfg.n_targets; ++j) {
    s.segment<2>(off) = state.target_pos[j];
    off += 2;
    if (cfg.is_pp()) {
      s.segment<2>(off) = state.target_vel[j];
      off += 2;
    }
  }
  return s;
}

void write_trajectory_header(std::ostream& os) { os << "step,entity_id,kind,x,y,vx,vy\n"; }

void write_trajectory_rows(std::ostream& os, const ScenarioConfig& cfg, const WorldState& state) {
  const char* target_kind = cfg.is_pp() ? "prey" : "landmark";
  for (int i = 0; i < cfg.n_agents; ++i)
    os << state.step_index << ',' << i << ",agent," << state.agent_pos[i].x() << ','
       << state.agent_pos[i].y() << ',' << state.agent_vel[i].x() << ','
       << state.agent_vel[i].y() << '\n';
  for (int j = 0; j < cfg.n_targets; ++j)
    os << state.step_index << ',' << cfg.n_agents + j << ',' << target_kind << ','
       << state.target_pos[j].x() << ',' << state.target_pos[j].y() << ','
       << state.target_vel[j].x() << ',' << state.target_vel[j].y() << '\n';
}

}  // namespace tem::env
