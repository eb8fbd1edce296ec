#pragma once

#include "tem/learn/update.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tem::run {

inline constexpr const char* kMetricsHeader =
    "iteration,env_steps,mean_episode_reward,capture_events,collision_events,"
    "occupied_landmarks,comm_rate,mean_chain_len,actor_ppo_loss,comm_effect,"
    "comm_silence,entropy,critic_loss";

// One training-iteration row. Event columns are per-episode means across the
// iteration's rollout episodes.
struct IterationStats {
  std::int64_t iteration = 0;
  std::int64_t env_steps = 0;
  double mean_episode_reward = 0.0;
  double capture_events = 0.0;
  double collision_events = 0.0;
  double occupied_landmarks = 0.0;
  double comm_rate = 0.0;
  double mean_chain_len = 0.0;
  learn::LossReport losses;

  std::string csv_row() const;
};

// Greedy-evaluation outcome over a fixed set of seeded episodes. Event
// metrics are reported both per-episode and summed, matching how the
// aggregator is asked about them.
struct EvalReport {
  std::string scenario_tag;
  std::vector<double> ep_rewards;  // per episode, averaged over agents
  std::vector<int> ep_captures;
  std::vector<int> ep_collisions;
  std::vector<int> ep_occupied;
  double comm_rate = 0.0;  // sends per agent-step
  std::map<int, int> chain_len_hist;

  int episodes() const { return static_cast<int>(ep_rewards.size()); }
  double mean_reward() const;
  double std_reward() const;
  double mean_of(const std::vector<int>& v) const;
  long sum_of(const std::vector<int>& v) const;

  std::string to_text() const;
};

}  // namespace tem::run
