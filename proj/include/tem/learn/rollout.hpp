#pragma once

#include "tem/comm/protocol.hpp"

#include <Eigen/Dense>

#include <vector>

namespace tem::learn {

// Everything the learner needs about one (step, env): inputs the policies
// saw, what they did, and what came back.
struct StepRecord {
  std::vector<Eigen::VectorXd> obs;                    // per agent
  std::vector<std::vector<Eigen::VectorXd>> buffers;   // post-comm contents per agent
  std::vector<Eigen::VectorXd> hidden;                 // RNN state fed to the actor
  std::vector<int> actions;
  std::vector<double> log_probs;                       // frozen at collection
  std::vector<Eigen::VectorXd> dists;
  Eigen::VectorXd rewards;
  double value = 0.0;                                  // V(s_t)
  Eigen::VectorXd state;                               // global state s_t
  bool done = false;
  std::vector<comm::CommDecision> decisions;
};

// Time-major trajectory storage plus the advantage/return views computed
// before any gradient step.
struct RolloutBatch {
  int n_envs = 0;
  int horizon = 0;
  int n_agents = 0;
  std::vector<std::vector<StepRecord>> steps;  // [t][env]
  std::vector<double> bootstrap;               // per env, V(s_T)

  // filled by gae_advantages / normalize_advantages: [t][env](agent)
  std::vector<std::vector<Eigen::VectorXd>> adv_raw;
  std::vector<std::vector<Eigen::VectorXd>> advantages;
  std::vector<std::vector<Eigen::VectorXd>> returns;

  std::size_t sample_count() const {
    return static_cast<std::size_t>(n_envs) * horizon * n_agents;
  }
};

// Standard generalized advantage estimation per (env, agent); returns are
// raw advantages plus values.
void gae_advantages(RolloutBatch& batch, double gamma, double gae_lambda);

// Mean-0 / std-1 rescale of the raw advantages across the whole batch.
void normalize_advantages(RolloutBatch& batch);

}  // namespace tem::learn
