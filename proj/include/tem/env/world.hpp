#pragma once

#include "tem/env/scenario.hpp"
#include "tem/rng.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace tem::env {

// Full simulator state. Positions stay inside the world square; agent and
// prey speeds respect their respective caps.
struct WorldState {
  std::vector<Eigen::Vector2d> agent_pos, agent_vel;
  std::vector<Eigen::Vector2d> target_pos, target_vel;  // target_vel used by PP only
  int step_index = 0;
  Rng rng{0};
};

// Fixed-size scale-invariant observation. The flat vector feeds the
// networks; slot ids are simulator-side metadata used for message delivery.
struct Observation {
  Eigen::VectorXd vec;
  std::vector<int> neighbor_ids;     // k_neighbors entries, -1 when the slot is empty
  std::vector<bool> neighbor_valid;  // k_neighbors entries
};

struct Events {
  int captures = 0;
  int collisions = 0;
  int occupied = 0;
};

struct StepResult {
  Eigen::VectorXd rewards;  // per agent
  Events events;
  bool done = false;
};

// Actions: 0 noop, 1 +x, 2 -x, 3 +y, 4 -y.
inline constexpr int kNumActions = 5;

WorldState reset(const ScenarioConfig& cfg, std::uint64_t seed);

// Damped point-mass integration for agents, scripted prey motion, then
// rewards and event counts on the new state.
StepResult step(const ScenarioConfig& cfg, WorldState& state, const std::vector<int>& actions);

// Unit vector away from the nearest predator, scaled to the prey speed cap;
// wall-facing components are zeroed when the prey sits at the boundary.
Eigen::Vector2d prey_policy(const ScenarioConfig& cfg, const WorldState& state, int prey_index);

// Shared team term (negative distances) minus per-agent collision penalties.
Eigen::VectorXd compute_reward(const ScenarioConfig& cfg, const WorldState& state);

Events detect_events(const ScenarioConfig& cfg, const WorldState& state);

Observation observe(const ScenarioConfig& cfg, const WorldState& state, int agent);

Eigen::VectorXd global_state(const ScenarioConfig& cfg, const WorldState& state);

// One CSV row per entity per recorded step: step,entity_id,kind,x,y,vx,vy
void write_trajectory_header(std::ostream& os);
void write_trajectory_rows(std::ostream& os, const ScenarioConfig& cfg, const WorldState& state);

}  // namespace tem::env
