#pragma once

#include <string>

namespace tem::env {

enum class ScenarioKind { PredatorPrey, CooperativeNavigation };

// Tunable description of a particle-world task. Observation and state
// layouts depend only on (kind, k_neighbors, l_targets), never on the
// entity counts, which is what makes agent-count transfer possible.
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::CooperativeNavigation;
  int n_agents = 3;
  int n_targets = 3;  // preys for PP, landmarks for CN
  int episode_len = 50;
  double world_half_extent = 1.0;
  double obs_radius = 0.6;
  int k_neighbors = 3;
  int l_targets = 2;
  double dt = 0.1;
  double damping = 0.25;
  double accel = 3.0;
  double agent_max_speed = 1.0;
  double prey_speed_factor = 1.3;
  double capture_radius = 0.3;
  double occupy_radius = 0.1;
  double collision_dist = 0.1;
  double collision_penalty = 1.0;

  bool is_pp() const { return kind == ScenarioKind::PredatorPrey; }

  // Per-target slot width: valid flag + rel pos (+ rel vel for PP).
  int target_slot_len() const { return is_pp() ? 5 : 3; }
  int obs_len() const { return 4 + k_neighbors * 5 + l_targets * target_slot_len(); }

  // Global critic input: agent pos/vel, target pos (+ vel for PP).
  int state_len() const { return 4 * n_agents + (is_pp() ? 4 : 2) * n_targets; }

  // "pp:7-3" / "cn:3-3"
  static ScenarioConfig parse(const std::string& tag);
  std::string tag() const;

  void validate() const;  // throws on out-of-range fields
};

}  // namespace tem::env
