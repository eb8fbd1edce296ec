#pragma once

#include "tem/env/scenario.hpp"
#include "tem/learn/update.hpp"
#include "tem/net/config.hpp"

#include <cstdint>
#include <string>

namespace tem::run {

enum class Algo { TEM, MAPPO, FC, RC };

std::string algo_name(Algo a);
Algo parse_algo(const std::string& s);

struct TrainSchedule {
  std::int64_t total_env_steps = 200000;
  int n_envs = 16;
  int eval_every = 20;    // update iterations between evaluations
  int eval_episodes = 10;
};

// Full run description. Serializes to flat key=value text (UTF-8, '#'
// comments); keys are the dotted field paths below and unknown keys are
// errors.
struct RunConfig {
  env::ScenarioConfig scenario;
  Algo algo = Algo::TEM;
  double rc_stop_prob = 0.5;
  std::size_t buffer_capacity = 8;
  learn::Hyperparams hyper;
  net::NetConfig net;
  TrainSchedule train;
  std::uint64_t seed = 1;

  void validate() const;
  std::string serialize() const;
  static RunConfig parse_text(const std::string& text);
  static RunConfig load_file(const std::string& path);
};

}  // namespace tem::run
