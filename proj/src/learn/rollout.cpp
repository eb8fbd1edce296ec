#include "tem/learn/rollout.hpp"

#include <cmath>
#include <stdexcept>

namespace tem::learn {

void gae_advantages(RolloutBatch& batch, double gamma, double gae_lambda) {
  const int T = batch.horizon, E = batch.n_envs, N = batch.n_agents;
  if (static_cast<int>(batch.steps.size()) != T)
    throw std::invalid_argument("gae_advantages: batch horizon mismatch");
  batch.adv_raw.assign(T, std::vector<Eigen::VectorXd>(E, Eigen::VectorXd::Zero(N)));
  batch.returns.assign(T, std::vector<Eigen::VectorXd>(E, Eigen::VectorXd::Zero(N)));
  for (int e = 0; e < E; ++e) {
    for (int i = 0; i < N; ++i) {
      double carry = 0.0;
      for (int t = T - 1; t >= 0; --t) {
        const StepRecord& rec = batch.steps[t][e];
        const double mask = rec.done ? 0.0 : 1.0;
        const double v_next = t + 1 < T ? batch.steps[t + 1][e].value : batch.bootstrap[e];
        const double delta = rec.rewards[i] + gamma * v_next * mask - rec.value;
        carry = delta + gamma * gae_lambda * mask * carry;
        batch.adv_raw[t][e][i] = carry;
        batch.returns[t][e][i] = carry + rec.value;
      }
    }
  }
}

void normalize_advantages(RolloutBatch& batch) {
  if (batch.adv_raw.empty()) throw std::logic_error("normalize_advantages: run gae first");
  double sum = 0.0, count = 0.0;
  for (const auto& row : batch.adv_raw)
    for (const auto& v : row) {
      sum += v.sum();
      count += static_cast<double>(v.size());
    }
  const double mean = sum / count;
  double sq = 0.0;
  for (const auto& row : batch.adv_raw)
    for (const auto& v : row) sq += (v.array() - mean).square().sum();
  const double std_dev = std::sqrt(sq / count) + 1e-8;
  batch.advantages.assign(batch.horizon, std::vector<Eigen::VectorXd>(batch.n_envs));
  for (int t = 0; t < batch.horizon; ++t)
    for (int e = 0; e < batch.n_envs; ++e)
      batch.advantages[t][e] = (batch.adv_raw[t][e].array() - mean) / std_dev;
}

}  // namespace tem::learn
