#pragma once

#include "tem/run/checkpoint.hpp"
#include "tem/run/config.hpp"
#include "tem/run/metrics.hpp"

#include <string>
#include <utility>
#include <vector>

namespace tem::run {

struct TrainOutcome {
  std::string checkpoint_path;
  std::string metrics_path;
  std::uint64_t env_steps = 0;
};

// Full training run: rollout collection, PPO updates, periodic greedy
// evaluation, metrics CSV, final checkpoint. Fully determined by (cfg, seed).
TrainOutcome train(const RunConfig& cfg, const std::string& out_dir);

net::ActorParams build_actor(const RunConfig& cfg, Rng& rng);
net::CriticParams build_critic(const RunConfig& cfg, Rng& rng);

Checkpoint make_checkpoint(const RunConfig& cfg, const net::ActorParams& actor,
                           const net::CriticParams& critic, ad::Adam& actor_opt,
                           ad::Adam& critic_opt, std::uint64_t env_steps,
                           const std::string& rng_state);

// Copies actor tensors by name; shapes must match exactly.
void load_actor(const Checkpoint& ck, net::ActorParams& actor);
// Returns false (leaving the critic fresh) when the stored critic has a
// different global-state dimension.
bool load_critic(const Checkpoint& ck, net::CriticParams& critic);
void load_optimizer(const Checkpoint& ck, const std::string& prefix,
                    const net::ParamRegistry& reg, ad::Adam& opt);

// Seeded greedy episodes with the actor as-is; dump_dir (optional) receives
// trajectory_ep<k>.csv files and a chains.csv.
EvalReport evaluate_actor(const RunConfig& cfg, const net::ActorParams& actor, int episodes,
                          std::uint64_t seed, net::Mode action_mode = net::Mode::Greedy,
                          const std::string& dump_dir = "");

// Rebuilds the actor from the checkpoint for the target scenario (the critic
// is not used) and evaluates. The target must keep the training slot layout.
EvalReport evaluate_checkpoint(const Checkpoint& ck, const env::ScenarioConfig& target,
                               int episodes, std::uint64_t seed,
                               const std::string& dump_dir = "");

// Zero-shot transfer: actor-only loads onto each target; parameters are
// never reshaped or mutated (verified by manifest and content hashes).
std::vector<std::pair<std::string, EvalReport>> transfer_eval(
    const Checkpoint& ck, const std::vector<env::ScenarioConfig>& targets, int episodes,
    std::uint64_t seed);

// Warm-starts the actor (and its optimizer moments) from the checkpoint,
// re-initializes the critic for the new scenario, and trains `steps` more.
Checkpoint finetune(const Checkpoint& ck, const env::ScenarioConfig& target,
                    std::int64_t steps, std::uint64_t seed, const std::string& out_dir);

// Applies a target tag (kind + entity counts) onto a training config,
// keeping slot layout and physics.
RunConfig retarget(const RunConfig& base, const env::ScenarioConfig& target);

// Per-algo communication chooser. TEM runs the message network; FC always
// forwards to a random valid neighbor that has not sent this step; RC stops
// with probability rc_stop_prob and otherwise behaves like FC. MAPPO yields
// no chooser (the comm phase is skipped).
comm::CommChooser make_comm_chooser(const RunConfig& cfg, const net::ActorParams& actor,
                                    net::Mode mode, Rng* comm_rng);

}  // namespace tem::run
