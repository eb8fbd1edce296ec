#pragma once

#include "tem/autodiff/adam.hpp"
#include "tem/learn/losses.hpp"
#include "tem/learn/rollout.hpp"

#include <stdexcept>

namespace tem::learn {

struct Hyperparams {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  // The value-regression clip follows the same max-of-clipped form but needs
  // its own scale: returns are raw (no value normalization), so a 0.2 band
  // would freeze the critic a fraction of a reward unit per update.
  double value_clip_eps = 10.0;
  double lambda_m = 0.01;
  double lambda_e = 0.01;
  double delta = 0.1;
  double actor_lr = 7e-4;
  double critic_lr = 7e-4;
  int epochs = 5;
  int minibatches = 2;
  double max_grad_norm = 0.5;

  void validate() const {
    if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("hyper: gamma in (0,1]");
    if (clip_eps <= 0.0) throw std::invalid_argument("hyper: clip_eps > 0");
    if (epochs < 1 || minibatches < 1)
      throw std::invalid_argument("hyper: epochs and minibatches >= 1");
  }
};

// Paper-convention values (the maximized quantities), averaged over the
// minibatch evaluations of one update.
struct LossReport {
  double actor_ppo = 0.0;
  double comm_expected_effect = 0.0;
  double comm_silence = 0.0;
  double entropy = 0.0;
  double critic = 0.0;
  double total_actor = 0.0;
};

struct TrainingAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One PPO update: multiple epochs over shuffled step minibatches, actor
// ascending PPO + comm + entropy (as a descended negation), critic
// descending the clipped regression loss. Throws TrainingAbort on any
// non-finite loss or parameter.
LossReport update_step(RolloutBatch& batch, net::ActorParams& actor,
                       net::CriticParams& critic, ad::Adam& actor_opt, ad::Adam& critic_opt,
                       const Hyperparams& hp, Rng& shuffle_rng, bool train_comm);

}  // namespace tem::learn
