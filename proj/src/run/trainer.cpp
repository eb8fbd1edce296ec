#include "tem/run/trainer.hpp"

#include "tem/comm/protocol.hpp"
#include "tem/env/world.hpp"
#include "tem/net/forward.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tem::run {

namespace fs = std::filesystem;

namespace {

// Independent derived streams; all run randomness descends from cfg.seed.
enum Stream : std::uint64_t {
  kParamInit = 0,
  kEnvSeeds = 1,
  kActionSample = 2,
  kShuffle = 3,
  kEvalSeeds = 4,
  kCommSample = 5,
  kCriticInit = 6,
};

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

comm::CommChooser make_comm_chooser(const RunConfig& cfg, const net::ActorParams& actor,
                                    net::Mode mode, Rng* comm_rng) {
  const int k = cfg.scenario.k_neighbors;
  switch (cfg.algo) {
    case Algo::TEM:
      return [&actor, mode, comm_rng](int, int, const env::Observation& obs,
                                      const std::vector<Eigen::VectorXd>& buffer,
                                      const std::vector<bool>&) {
        ad::NoRecording guard;
        Eigen::VectorXd dist =
            net::comm_forward(actor, obs.vec, buffer, obs.neighbor_valid).vec();
        const int choice =
            mode == net::Mode::Sample ? comm_rng->categorical(dist) : argmax(dist);
        return std::make_pair(choice, dist);
      };
    case Algo::FC:
    case Algo::RC: {
      const bool rc = cfg.algo == Algo::RC;
      const double p = cfg.rc_stop_prob;
      return [k, rc, p, comm_rng](int, int, const env::Observation&,
                                  const std::vector<Eigen::VectorXd>&,
                                  const std::vector<bool>& fresh) {
        std::vector<int> options;
        for (int s = 0; s < k; ++s)
          if (fresh[s]) options.push_back(s);
        Eigen::VectorXd dist = Eigen::VectorXd::Zero(k + 1);
        if (options.empty()) {
          dist[0] = 1.0;
          return std::make_pair(0, dist);
        }
        const double stop = rc ? p : 0.0;
        dist[0] = stop;
        for (int s : options) dist[s + 1] = (1.0 - stop) / options.size();
        if (rc && p >= 1.0) return std::make_pair(0, dist);
        if (rc && p > 0.0 && comm_rng->uniform01() < p) return std::make_pair(0, dist);
        const int pick = options[comm_rng->uniform_int(static_cast<int>(options.size()))];
        return std::make_pair(pick + 1, dist);
      };
    }
    case Algo::MAPPO: break;
  }
  return {};
}

namespace {

struct RolloutStats {
  double mean_episode_reward = 0.0;
  double capture_events = 0.0;
  double collision_events = 0.0;
  double occupied_landmarks = 0.0;
  double comm_rate = 0.0;
  double mean_chain_len = 0.0;
};

learn::RolloutBatch collect_rollout(const RunConfig& cfg, const net::ActorParams& actor,
                                    const net::CriticParams& critic, std::int64_t iteration,
                                    RolloutStats& stats) {
  const int E = cfg.train.n_envs;
  const int T = cfg.scenario.episode_len;
  const int N = cfg.scenario.n_agents;
  const bool comm_enabled = cfg.algo != Algo::MAPPO;
  const bool snapshots = cfg.algo == Algo::TEM;

  learn::RolloutBatch batch;
  batch.n_envs = E;
  batch.horizon = T;
  batch.n_agents = N;
  batch.steps.assign(T, std::vector<learn::StepRecord>(E));
  batch.bootstrap.assign(E, 0.0);

  struct EnvSlot {
    env::WorldState world;
    std::vector<comm::MessageBuffer> buffers;
    std::vector<Eigen::VectorXd> hidden;
    Rng action_rng{0};
    Rng comm_rng{0};
  };
  std::vector<EnvSlot> slots(E);
  for (int e = 0; e < E; ++e) {
    const std::uint64_t tag = static_cast<std::uint64_t>(iteration) * E + e;
    slots[e].world = env::reset(cfg.scenario, mix_seed(mix_seed(cfg.seed, kEnvSeeds), tag));
    slots[e].buffers.assign(N, comm::MessageBuffer(cfg.buffer_capacity, cfg.scenario.obs_len()));
    slots[e].hidden.assign(N, Eigen::VectorXd::Zero(cfg.net.d_h));
    slots[e].action_rng = Rng(mix_seed(mix_seed(cfg.seed, kActionSample), tag));
    slots[e].comm_rng = Rng(mix_seed(mix_seed(cfg.seed, kCommSample), tag));
  }

  Eigen::VectorXd ep_reward_sum = Eigen::VectorXd::Zero(E);
  double captures = 0, collisions = 0, occupied = 0;
  long sends = 0, chains = 0, deliveries = 0;

  for (int t = 0; t < T; ++t) {
    for (int e = 0; e < E; ++e) {
      EnvSlot& slot = slots[e];
      std::vector<env::Observation> obs(N);
      for (int i = 0; i < N; ++i) obs[i] = env::observe(cfg.scenario, slot.world, i);

      comm::begin_step(slot.buffers);
      comm::CommPhaseResult phase;
      if (comm_enabled) {
        auto chooser = make_comm_chooser(cfg, actor, net::Mode::Sample, &slot.comm_rng);
        phase = comm::run_comm_phase(obs, slot.buffers, slot.hidden, chooser, snapshots);
        sends += static_cast<long>(phase.chain_log.size());
        const auto lens = comm::chain_lengths(phase.chain_log);
        chains += static_cast<long>(lens.size());
        for (int len : lens) deliveries += len;
      }

      learn::StepRecord rec;
      rec.obs.resize(N);
      rec.buffers.resize(N);
      rec.hidden = slot.hidden;
      rec.actions.resize(N);
      rec.log_probs.resize(N);
      rec.dists.resize(N);
      std::vector<Eigen::VectorXd> new_hidden(N);
      for (int i = 0; i < N; ++i) {
        rec.obs[i] = obs[i].vec;
        rec.buffers[i] = slot.buffers[i].contents();
        net::ActResult a = net::act(actor, rec.obs[i], rec.buffers[i], slot.hidden[i],
                                    net::Mode::Sample, &slot.action_rng);
        rec.actions[i] = a.action;
        rec.log_probs[i] = a.log_prob;
        rec.dists[i] = a.dist;
        new_hidden[i] = a.h_next;
      }
      rec.state = env::global_state(cfg.scenario, slot.world);
      {
        ad::NoRecording guard;
        rec.value = net::critic_value(critic, rec.state).item();
      }
      env::StepResult sr = env::step(cfg.scenario, slot.world, rec.actions);
      rec.rewards = sr.rewards;
      rec.done = sr.done;
      if (snapshots) rec.decisions = std::move(phase.decisions);

      ep_reward_sum[e] += sr.rewards.mean();
      captures += sr.events.captures;
      collisions += sr.events.collisions;
      occupied += sr.events.occupied;

      slot.hidden = std::move(new_hidden);
      if (t == T - 1 && !sr.done) {
        ad::NoRecording guard;
        batch.bootstrap[e] =
            net::critic_value(critic, env::global_state(cfg.scenario, slot.world)).item();
      }
      batch.steps[t][e] = std::move(rec);
    }
  }

  stats.mean_episode_reward = ep_reward_sum.mean();
  stats.capture_events = captures / E;
  stats.collision_events = collisions / E;
  stats.occupied_landmarks = occupied / E;
  stats.comm_rate = static_cast<double>(sends) / (static_cast<double>(E) * T * N);
  stats.mean_chain_len = chains > 0 ? static_cast<double>(deliveries) / chains : 0.0;
  return batch;
}

void append_eval_row(std::ostream& os, std::uint64_t env_steps, const EvalReport& ev) {
  os << env_steps << ',' << fmt_double(ev.mean_reward()) << ',' << fmt_double(ev.std_reward())
     << ',' << ev.sum_of(ev.ep_captures) << ',' << ev.sum_of(ev.ep_collisions) << ','
     << ev.sum_of(ev.ep_occupied) << ',' << fmt_double(ev.comm_rate) << '\n';
}

TrainOutcome train_impl(const RunConfig& cfg, const std::string& out_dir,
                        net::ActorParams& actor, net::CriticParams& critic,
                        ad::Adam& actor_opt, ad::Adam& critic_opt,
                        std::uint64_t start_steps) {
  fs::create_directories(out_dir);
  {
    std::ofstream cf(fs::path(out_dir) / "config.txt", std::ios::trunc);
    cf << cfg.serialize();
  }
  const std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  std::ofstream metrics(metrics_path, std::ios::trunc);
  metrics << kMetricsHeader << '\n';
  std::ofstream evals(fs::path(out_dir) / "eval.csv", std::ios::trunc);
  evals << "env_steps,mean_reward,std_reward,capture_events,collision_events,"
           "occupied_landmarks,comm_rate\n";

  Rng shuffle_rng(mix_seed(cfg.seed, kShuffle));
  const std::int64_t per_iter =
      static_cast<std::int64_t>(cfg.train.n_envs) * cfg.scenario.episode_len;
  const std::int64_t iters = (cfg.train.total_env_steps + per_iter - 1) / per_iter;
  std::uint64_t env_steps = start_steps;

  for (std::int64_t it = 0; it < iters; ++it) {
    RolloutStats stats;
    learn::RolloutBatch batch = collect_rollout(cfg, actor, critic, it, stats);
    learn::LossReport report;
    try {
      report = learn::update_step(batch, actor, critic, actor_opt, critic_opt, cfg.hyper,
                                  shuffle_rng, cfg.algo == Algo::TEM);
    } catch (const learn::TrainingAbort& e) {
      throw learn::TrainingAbort("iteration " + std::to_string(it) + ": " + e.what());
    }
    env_steps += static_cast<std::uint64_t>(per_iter);

    IterationStats row;
    row.iteration = it;
    row.env_steps = static_cast<std::int64_t>(env_steps);
    row.mean_episode_reward = stats.mean_episode_reward;
    row.capture_events = stats.capture_events;
    row.collision_events = stats.collision_events;
    row.occupied_landmarks = stats.occupied_landmarks;
    row.comm_rate = stats.comm_rate;
    row.mean_chain_len = stats.mean_chain_len;
    row.losses = report;
    metrics << row.csv_row() << '\n';
    metrics.flush();

    if ((it + 1) % cfg.train.eval_every == 0) {
      EvalReport ev = evaluate_actor(cfg, actor, cfg.train.eval_episodes,
                                     mix_seed(cfg.seed, kEvalSeeds));
      append_eval_row(evals, env_steps, ev);
      evals.flush();
    }
  }

  Checkpoint ck = make_checkpoint(cfg, actor, critic, actor_opt, critic_opt, env_steps,
                                  shuffle_rng.serialize());
  const std::string ck_path = (fs::path(out_dir) / "checkpoint.bin").string();
  save_checkpoint(ck, ck_path);
  return {ck_path, metrics_path, env_steps};
}

}  // namespace

std::string IterationStats::csv_row() const {
  std::ostringstream os;
  os << iteration << ',' << env_steps << ',' << fmt_double(mean_episode_reward) << ','
     << fmt_double(capture_events) << ',' << fmt_double(collision_events) << ','
     << fmt_double(occupied_landmarks) << ',' << fmt_double(comm_rate) << ','
     << fmt_double(mean_chain_len) << ',' << fmt_double(losses.actor_ppo) << ','
     << fmt_double(losses.comm_expected_effect) << ',' << fmt_double(losses.comm_silence) << ','
     << fmt_double(losses.entropy) << ',' << fmt_double(losses.critic);
  return os.str();
}

double EvalReport::mean_reward() const {
  if (ep_rewards.empty()) return 0.0;
  double s = 0.0;
  for (double r : ep_rewards) s += r;
  return s / ep_rewards.size();
}

double EvalReport::std_reward() const {
  if (ep_rewards.size() < 2) return 0.0;
  const double m = mean_reward();
  double sq = 0.0;
  for (double r : ep_rewards) sq += (r - m) * (r - m);
  return std::sqrt(sq / ep_rewards.size());
}

double EvalReport::mean_of(const std::vector<int>& v) const {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (int x : v) s += x;
  return s / v.size();
}

long EvalReport::sum_of(const std::vector<int>& v) const {
  long s = 0;
  for (int x : v) s += x;
  return s;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "scenario " << scenario_tag << " episodes " << episodes() << "\n";
  os << "R mean " << fmt_double(mean_reward()) << " std " << fmt_double(std_reward()) << "\n";
  os << "S (captures) mean " << fmt_double(mean_of(ep_captures)) << " sum "
     << sum_of(ep_captures) << "\n";
  os << "C (collisions) mean " << fmt_double(mean_of(ep_collisions)) << " sum "
     << sum_of(ep_collisions) << "\n";
  os << "occupied mean " << fmt_double(mean_of(ep_occupied)) << " sum " << sum_of(ep_occupied)
     << "\n";
  os << "comm_rate " << fmt_double(comm_rate) << "\n";
  os << "chain_len_hist";
  for (const auto& [len, count] : chain_len_hist) os << ' ' << len << ':' << count;
  os << "\n";
  return os.str();
}

net::ActorParams build_actor(const RunConfig& cfg, Rng& rng) {
  return net::ActorParams(cfg.net, cfg.scenario.obs_len(), cfg.scenario.k_neighbors, rng);
}

net::CriticParams build_critic(const RunConfig& cfg, Rng& rng) {
  return net::CriticParams(cfg.scenario.state_len(), cfg.net.d_h, rng);
}

TrainOutcome train(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  Rng actor_rng(mix_seed(cfg.seed, kParamInit));
  Rng critic_rng(mix_seed(cfg.seed, kCriticInit));
  net::ActorParams actor = build_actor(cfg, actor_rng);
  net::CriticParams critic = build_critic(cfg, critic_rng);
  ad::Adam actor_opt(actor.all(), cfg.hyper.actor_lr);
  ad::Adam critic_opt(critic.all(), cfg.hyper.critic_lr);
  return train_impl(cfg, out_dir, actor, critic, actor_opt, critic_opt, 0);
}

Checkpoint make_checkpoint(const RunConfig& cfg, const net::ActorParams& actor,
                           const net::CriticParams& critic, ad::Adam& actor_opt,
                           ad::Adam& critic_opt, std::uint64_t env_steps,
                           const std::string& rng_state) {
  Checkpoint ck;
  ck.config_text = cfg.serialize();
  ck.rng_state = rng_state;
  ck.env_steps = env_steps;
  auto add_params = [&ck](const net::ParamRegistry& reg) {
    for (const auto& [name, t] : reg.entries()) ck.tensors.push_back({name, t.shape(), t.value()});
  };
  auto add_opt = [&ck](const std::string& prefix, const net::ParamRegistry& reg, ad::Adam& opt) {
    const auto& entries = reg.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& [name, t] = entries[i];
      ck.tensors.push_back({prefix + name + "/m", t.shape(), opt.moment1(i)});
      ck.tensors.push_back({prefix + name + "/v", t.shape(), opt.moment2(i)});
    }
    ad::Mat steps(1, 1);
    steps(0, 0) = static_cast<double>(opt.steps());
    ck.tensors.push_back({prefix + "t", ad::Shape{}, steps});
  };
  add_params(actor.registry());
  add_params(critic.registry());
  add_opt("opt/actor/", actor.registry(), actor_opt);
  add_opt("opt/critic/", critic.registry(), critic_opt);
  return ck;
}

void load_actor(const Checkpoint& ck, net::ActorParams& actor) {
  for (const auto& [name, t] : actor.registry().entries()) {
    const NamedTensor* src = ck.find(name);
    if (!src) throw std::runtime_error("checkpoint: missing actor tensor '" + name + "'");
    if (src->shape != t.shape())
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': stored " +
                               ad::shape_str(src->shape) + ", expected " +
                               ad::shape_str(t.shape()));
    ad::Tensor dst = t;
    dst.raw() = src->data;
  }
}

bool load_critic(const Checkpoint& ck, net::CriticParams& critic) {
  for (const auto& [name, t] : critic.registry().entries()) {
    const NamedTensor* src = ck.find(name);
    if (!src || src->shape != t.shape()) return false;
  }
  for (const auto& [name, t] : critic.registry().entries()) {
    ad::Tensor dst = t;
    dst.raw() = ck.find(name)->data;
  }
  return true;
}

void load_optimizer(const Checkpoint& ck, const std::string& prefix,
                    const net::ParamRegistry& reg, ad::Adam& opt) {
  const auto& entries = reg.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& name = entries[i].first;
    const NamedTensor* m = ck.find(prefix + name + "/m");
    const NamedTensor* v = ck.find(prefix + name + "/v");
    if (!m || !v)
      throw std::runtime_error("checkpoint: missing optimizer state for '" + name + "'");
    opt.moment1(i) = m->data;
    opt.moment2(i) = v->data;
  }
  const NamedTensor* t = ck.find(prefix + "t");
  if (t) opt.set_steps(static_cast<std::int64_t>(t->data(0, 0)));
}

EvalReport evaluate_actor(const RunConfig& cfg, const net::ActorParams& actor, int episodes,
                          std::uint64_t seed, net::Mode action_mode,
                          const std::string& dump_dir) {
  const int N = cfg.scenario.n_agents;
  const int T = cfg.scenario.episode_len;
  const bool comm_enabled = cfg.algo != Algo::MAPPO;

  EvalReport rep;
  rep.scenario_tag = cfg.scenario.tag();
  long sends = 0;

  std::ofstream chains_csv;
  if (!dump_dir.empty()) {
    fs::create_directories(dump_dir);
    chains_csv.open(fs::path(dump_dir) / "chains.csv", std::ios::trunc);
    comm::write_chain_header(chains_csv);
  }

  for (int ep = 0; ep < episodes; ++ep) {
    env::WorldState world = env::reset(cfg.scenario, mix_seed(seed, static_cast<std::uint64_t>(ep)));
    std::vector<comm::MessageBuffer> buffers(
        N, comm::MessageBuffer(cfg.buffer_capacity, cfg.scenario.obs_len()));
    std::vector<Eigen::VectorXd> hidden(N, Eigen::VectorXd::Zero(cfg.net.d_h));
    Rng comm_rng(mix_seed(mix_seed(seed, 77), static_cast<std::uint64_t>(ep)));
    Rng action_rng(mix_seed(mix_seed(seed, 78), static_cast<std::uint64_t>(ep)));

    std::ofstream traj;
    if (!dump_dir.empty()) {
      traj.open(fs::path(dump_dir) / ("trajectory_ep" + std::to_string(ep) + ".csv"),
                std::ios::trunc);
      env::write_trajectory_header(traj);
      env::write_trajectory_rows(traj, cfg.scenario, world);
    }

    double reward_sum = 0.0;
    int captures = 0, collisions = 0, occupied = 0;
    for (int t = 0; t < T; ++t) {
      std::vector<env::Observation> obs(N);
      for (int i = 0; i < N; ++i) obs[i] = env::observe(cfg.scenario, world, i);
      comm::begin_step(buffers);
      if (comm_enabled) {
        auto chooser = make_comm_chooser(cfg, actor, net::Mode::Greedy, &comm_rng);
        comm::CommPhaseResult phase =
            comm::run_comm_phase(obs, buffers, hidden, chooser, false);
        sends += static_cast<long>(phase.chain_log.size());
        for (int len : comm::chain_lengths(phase.chain_log)) ++rep.chain_len_hist[len];
        if (chains_csv.is_open()) comm::write_chain_rows(chains_csv, ep, t, phase.chain_log);
      }
      std::vector<int> actions(N);
      for (int i = 0; i < N; ++i) {
        net::ActResult a = net::act(actor, obs[i].vec, buffers[i].contents(), hidden[i],
                                    action_mode, &action_rng);
        actions[i] = a.action;
        hidden[i] = a.h_next;
      }
      env::StepResult sr = env::step(cfg.scenario, world, actions);
      reward_sum += sr.rewards.mean();
      captures += sr.events.captures;
      collisions += sr.events.collisions;
      occupied += sr.events.occupied;
      if (traj.is_open()) env::write_trajectory_rows(traj, cfg.scenario, world);
    }
    rep.ep_rewards.push_back(reward_sum);
    rep.ep_captures.push_back(captures);
    rep.ep_collisions.push_back(collisions);
    rep.ep_occupied.push_back(occupied);
  }
  rep.comm_rate =
      static_cast<double>(sends) / (static_cast<double>(episodes) * T * N);
  return rep;
}

RunConfig retarget(const RunConfig& base, const env::ScenarioConfig& target) {
  RunConfig cfg = base;
  cfg.scenario.kind = target.kind;
  cfg.scenario.n_agents = target.n_agents;
  cfg.scenario.n_targets = target.n_targets;
  cfg.validate();
  return cfg;
}

EvalReport evaluate_checkpoint(const Checkpoint& ck, const env::ScenarioConfig& target,
                               int episodes, std::uint64_t seed, const std::string& dump_dir) {
  RunConfig cfg = retarget(RunConfig::parse_text(ck.config_text), target);
  Rng rng(mix_seed(cfg.seed, kParamInit));
  net::ActorParams actor = build_actor(cfg, rng);
  load_actor(ck, actor);
  return evaluate_actor(cfg, actor, episodes, seed, net::Mode::Greedy, dump_dir);
}

std::vector<std::pair<std::string, EvalReport>> transfer_eval(
    const Checkpoint& ck, const std::vector<env::ScenarioConfig>& targets, int episodes,
    std::uint64_t seed) {
  const RunConfig base = RunConfig::parse_text(ck.config_text);
  Rng base_rng(mix_seed(base.seed, kParamInit));
  RunConfig base_copy = base;
  const std::uint64_t train_manifest = build_actor(base_copy, base_rng).registry().manifest_hash();

  std::vector<std::pair<std::string, EvalReport>> out;
  for (const env::ScenarioConfig& target : targets) {
    RunConfig cfg = retarget(base, target);
    Rng rng(mix_seed(cfg.seed, kParamInit));
    net::ActorParams actor = build_actor(cfg, rng);
    if (actor.registry().manifest_hash() != train_manifest)
      throw std::logic_error("transfer: parameter manifest changed for " + target.tag());
    load_actor(ck, actor);
    const std::uint64_t before = actor.registry().content_hash();
    EvalReport rep = evaluate_actor(cfg, actor, episodes, seed);
    if (actor.registry().content_hash() != before)
      throw std::logic_error("transfer: actor parameters mutated during evaluation");
    if (actor.registry().manifest_hash() != train_manifest)
      throw std::logic_error("transfer: manifest hash changed during evaluation");
    out.emplace_back(target.tag(), std::move(rep));
  }
  return out;
}

Checkpoint finetune(const Checkpoint& ck, const env::ScenarioConfig& target,
                    std::int64_t steps, std::uint64_t seed, const std::string& out_dir) {
  RunConfig cfg = retarget(RunConfig::parse_text(ck.config_text), target);
  cfg.seed = seed;
  Rng actor_rng(mix_seed(cfg.seed, kParamInit));
  Rng critic_rng(mix_seed(cfg.seed, kCriticInit));
  net::ActorParams actor = build_actor(cfg, actor_rng);
  load_actor(ck, actor);
  net::CriticParams critic = build_critic(cfg, critic_rng);  // fresh for the new state dim
  ad::Adam actor_opt(actor.all(), cfg.hyper.actor_lr);
  load_optimizer(ck, "opt/actor/", actor.registry(), actor_opt);
  ad::Adam critic_opt(critic.all(), cfg.hyper.critic_lr);

  fs::create_directories(out_dir);
  if (steps <= 0) {
    Checkpoint out = make_checkpoint(cfg, actor, critic, actor_opt, critic_opt, ck.env_steps,
                                     ck.rng_state);
    save_checkpoint(out, (fs::path(out_dir) / "checkpoint.bin").string());
    return out;
  }
  cfg.train.total_env_steps = steps;
  TrainOutcome outcome =
      train_impl(cfg, out_dir, actor, critic, actor_opt, critic_opt, ck.env_steps);
  return load_checkpoint(outcome.checkpoint_path);
}

}  // namespace tem::run
