#pragma once

#include "tem/net/params.hpp"

#include <Eigen/Dense>

#include <vector>

namespace tem::net {

// Attention weight rows, captured as values for inspection.
struct AttnTrace {
  std::vector<Eigen::VectorXd> rows;
};

// Embeds the buffered messages and runs the encoder stack; an empty buffer
// becomes the learned null token, so m_f always has at least one row.
ad::Tensor encode_messages(const ActorParams& p, const std::vector<Eigen::VectorXd>& buffer,
                           AttnTrace* trace = nullptr);

// Observation features o_f.
ad::Tensor obs_features(const ActorParams& p, const Eigen::VectorXd& obs);

// Decoder stack: m_dec^0 is the projected o_f, each block cross-attends
// over m_f.
ad::Tensor decode(const ActorParams& p, const ad::Tensor& o_f, const ad::Tensor& m_f,
                  AttnTrace* trace = nullptr);

// Communication categorical over {no-send} + neighbor slots. Invalid slots
// carry exactly zero probability.
ad::Tensor comm_head(const ActorParams& p, const ad::Tensor& m_dec,
                     const std::vector<bool>& neighbor_valid);

// Full message-network pass for one decision. o_f enters detached so the
// communication losses cannot reach action-network parameters.
ad::Tensor comm_forward(const ActorParams& p, const Eigen::VectorXd& obs,
                        const std::vector<Eigen::VectorXd>& buffer,
                        const std::vector<bool>& neighbor_valid, AttnTrace* trace = nullptr);

struct ActorForward {
  ad::Tensor dist;    // 5 action probabilities
  ad::Tensor h_next;  // updated hidden state
};

// Action-network pass: GRU over o_f concatenated with pooled m_f, then the
// action head.
ActorForward action_forward(const ActorParams& p, const Eigen::VectorXd& obs,
                            const std::vector<Eigen::VectorXd>& buffer,
                            const Eigen::VectorXd& hidden, AttnTrace* trace = nullptr);

enum class Mode { Sample, Greedy };

struct ActResult {
  int action = 0;
  double log_prob = 0.0;
  Eigen::VectorXd dist;
  Eigen::VectorXd h_next;
};

// Value-only actor step for rollouts; sampling uses the provided stream.
ActResult act(const ActorParams& p, const Eigen::VectorXd& obs,
              const std::vector<Eigen::VectorXd>& buffer, const Eigen::VectorXd& hidden,
              Mode mode, Rng* rng);

// Scalar V(s).
ad::Tensor critic_value(const CriticParams& p, const Eigen::VectorXd& state);

}  // namespace tem::net
