#pragma once

#include "tem/comm/protocol.hpp"
#include "tem/net/forward.hpp"

#include <vector>

namespace tem::learn {

struct PpoSample {
  ad::Tensor new_logp;  // scalar, graph-connected
  double old_logp = 0.0;
  double advantage = 0.0;
};

// Mean over samples of min(ratio A, clip(ratio, 1-eps, 1+eps) A); a value to
// maximize.
ad::Tensor ppo_actor_loss(const std::vector<PpoSample>& samples, double clip_eps);

// KL between the receiver's action distribution with and without the
// sender's composed payload appended to its buffer snapshot. Pure value, no
// gradient path (the loss treats it as a coefficient).
double causal_effect(const comm::CommDecision& decision, int valid_index,
                     const net::ActorParams& actor);

// Computes causal effects for every valid slot into decision.gammas.
void fill_gammas(comm::CommDecision& decision, const net::ActorParams& actor);

// sum_j P(m_a = j) Gamma_j with gradient flowing through the communication
// distribution only; requires gammas to be filled.
ad::Tensor expected_causal_effect(const comm::CommDecision& decision,
                                  const net::ActorParams& actor);

struct CommLossOut {
  ad::Tensor total;            // mean of (E[Gamma] + delta P(no-send)); maximize
  double mean_effect = 0.0;    // mean E[Gamma] value
  double mean_silence = 0.0;   // mean P(no-send) value
};

CommLossOut comm_loss(const std::vector<const comm::CommDecision*>& decisions,
                      const net::ActorParams& actor, double delta);

// Mean Shannon entropy of the given action distributions; maximize.
ad::Tensor entropy_loss(const std::vector<ad::Tensor>& action_dists);

struct CriticSample {
  ad::Tensor v_new;  // scalar, graph-connected (shared across agents of a step)
  double v_old = 0.0;
  double ret = 0.0;
};

// Mean over samples of max((V-R)^2, (clip(V, V_old +- eps) - R)^2); minimize.
ad::Tensor critic_loss(const std::vector<CriticSample>& samples, double clip_eps);

}  // namespace tem::learn
