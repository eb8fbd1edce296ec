#pragma once

#include "tem/autodiff/ops.hpp"
#include "tem/net/config.hpp"
#include "tem/rng.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace tem::net {

// Ordered (name, tensor) registry shared by the actor and critic parameter
// sets; the order fixes the manifest and checkpoint layout.
class ParamRegistry {
 public:
  ad::Tensor add(const std::string& name, ad::Tensor t) {
    entries_.emplace_back(name, t);
    return t;
  }
  const std::vector<std::pair<std::string, ad::Tensor>>& entries() const { return entries_; }

  std::vector<ad::Tensor> tensors() const;
  std::vector<ad::Tensor> tensors_with_prefix(const std::string& prefix) const;
  ad::Tensor find(const std::string& name) const;  // throws if absent

  // One line per parameter: "<name> [dims] <count>".
  std::string manifest() const;
  std::uint64_t manifest_hash() const;  // over the manifest text
  std::uint64_t content_hash() const;   // over the raw f64 storage
  std::int64_t param_count() const;

 private:
  std::vector<std::pair<std::string, ad::Tensor>> entries_;
};

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 1469598103934665603ULL);

struct AttentionBlock {
  ad::Tensor wq, wk, wv, wo, bo;
  ad::Tensor ln1_g, ln1_b;
  ad::Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  ad::Tensor ln2_g, ln2_b;
};

// Shared actor: action network (obs MLP, GRU, action head) plus message
// network (embedding, encoder/decoder stacks, comm head). Shapes depend only
// on (obs_len, net dims, k_neighbors), never on the agent count.
class ActorParams {
 public:
  ActorParams(const NetConfig& cfg, int obs_len, int k_neighbors, Rng& rng);

  const ParamRegistry& registry() const { return reg_; }
  std::vector<ad::Tensor> all() const { return reg_.tensors(); }
  std::vector<ad::Tensor> message_group() const { return reg_.tensors_with_prefix("msg/"); }
  std::vector<ad::Tensor> action_group() const { return reg_.tensors_with_prefix("act/"); }

  NetConfig cfg;
  int obs_len = 0;
  int k_neighbors = 0;

  // action network
  ad::Tensor obs_w1, obs_b1, obs_w2, obs_b2;
  ad::GruParams gru;
  ad::Tensor act_w1, act_b1, act_w2, act_b2;

  // message network
  ad::Tensor emb_w, emb_b;
  ad::Tensor null_token;
  std::vector<AttentionBlock> encoders, decoders;
  ad::Tensor proj_w, proj_b;  // o_f -> m_dec^0
  ad::Tensor comm_w1, comm_b1, comm_w2, comm_b2;

 private:
  ParamRegistry reg_;
};

// Centralized value network over the flat global state.
class CriticParams {
 public:
  CriticParams(int state_len, int d_h, Rng& rng);

  const ParamRegistry& registry() const { return reg_; }
  std::vector<ad::Tensor> all() const { return reg_.tensors(); }

  int state_len = 0;
  ad::Tensor w1, b1, w2, b2, w3, b3;

 private:
  ParamRegistry reg_;
};

}  // namespace tem::net
