#include "tem/learn/update.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tem::learn {

using namespace ad;

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw TrainingAbort(std::string("update_step: non-finite ") + what + " (" +
                        std::to_string(v) + ")");
}

void require_finite_params(const std::vector<Tensor>& params, const char* what) {
  for (const Tensor& p : params)
    if (!p.value().allFinite())
      throw TrainingAbort(std::string("update_step: non-finite values in ") + what);
}

}  // namespace

LossReport update_step(RolloutBatch& batch, net::ActorParams& actor, net::CriticParams& critic,
                       ad::Adam& actor_opt, ad::Adam& critic_opt, const Hyperparams& hp,
                       Rng& shuffle_rng, bool train_comm) {
  hp.validate();
  gae_advantages(batch, hp.gamma, hp.gae_lambda);
  normalize_advantages(batch);

  const bool comm_on = train_comm && hp.lambda_m != 0.0;
  if (comm_on) {
    for (auto& row : batch.steps)
      for (auto& rec : row)
        for (auto& d : rec.decisions) fill_gammas(d, actor);
  }

  // Minibatches partition the (step, env) grid.
  std::vector<std::pair<int, int>> cells;
  cells.reserve(static_cast<std::size_t>(batch.horizon) * batch.n_envs);
  for (int t = 0; t < batch.horizon; ++t)
    for (int e = 0; e < batch.n_envs; ++e) cells.emplace_back(t, e);

  const std::vector<Tensor> actor_params = actor.all();
  const std::vector<Tensor> critic_params = critic.all();
  LossReport report;
  int evals = 0;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    // Fisher-Yates with the dedicated stream.
    for (std::size_t i = cells.size(); i > 1; --i)
      std::swap(cells[i - 1], cells[shuffle_rng.uniform_int(static_cast<int>(i))]);

    const std::size_t per = (cells.size() + hp.minibatches - 1) / hp.minibatches;
    for (int mb = 0; mb < hp.minibatches; ++mb) {
      const std::size_t begin = mb * per;
      const std::size_t end = std::min(cells.size(), begin + per);
      if (begin >= end) continue;

      // actor pass
      {
        Graph g;
        Recording rec(g);
        std::vector<PpoSample> ppo_samples;
        std::vector<Tensor> dists;
        std::vector<const comm::CommDecision*> decisions;
        for (std::size_t c = begin; c < end; ++c) {
          const auto [t, e] = cells[c];
          const StepRecord& step = batch.steps[t][e];
          for (int i = 0; i < batch.n_agents; ++i) {
            net::ActorForward fwd =
                net::action_forward(actor, step.obs[i], step.buffers[i], step.hidden[i]);
            PpoSample s;
            s.new_logp = log(gather(fwd.dist, step.actions[i]));
            s.old_logp = step.log_probs[i];
            s.advantage = batch.advantages[t][e][i];
            ppo_samples.push_back(std::move(s));
            dists.push_back(fwd.dist);
          }
          if (comm_on)
            for (const auto& d : step.decisions) decisions.push_back(&d);
        }
        Tensor ppo = ppo_actor_loss(ppo_samples, hp.clip_eps);
        Tensor ent = entropy_loss(dists);
        CommLossOut cl = comm_loss(decisions, actor, hp.delta);
        require_finite(ppo.item(), "ppo loss");
        require_finite(ent.item(), "entropy loss");
        require_finite(cl.total.item(), "comm loss");
        Tensor objective = add(add(ppo, scale(cl.total, hp.lambda_m)), scale(ent, hp.lambda_e));
        Tensor loss = neg(objective);
        actor_opt.zero_grad();
        g.backward(loss);
        clip_grad_norm(actor_params, hp.max_grad_norm);
        actor_opt.step();

        report.actor_ppo += ppo.item();
        report.entropy += ent.item();
        report.comm_expected_effect += cl.mean_effect;
        report.comm_silence += cl.mean_silence;
      }

      // critic pass
      {
        Graph g;
        Recording rec(g);
        std::vector<CriticSample> samples;
        for (std::size_t c = begin; c < end; ++c) {
          const auto [t, e] = cells[c];
          const StepRecord& step = batch.steps[t][e];
          Tensor v_new = net::critic_value(critic, step.state);
          for (int i = 0; i < batch.n_agents; ++i)
            samples.push_back({v_new, step.value, batch.returns[t][e][i]});
        }
        Tensor closs = critic_loss(samples, hp.value_clip_eps);
        require_finite(closs.item(), "critic loss");
        critic_opt.zero_grad();
        g.backward(closs);
        clip_grad_norm(critic_params, hp.max_grad_norm);
        critic_opt.step();
        report.critic += closs.item();
      }
      ++evals;
    }
  }

  require_finite_params(actor_params, "actor parameters");
  require_finite_params(critic_params, "critic parameters");

  if (evals > 0) {
    report.actor_ppo /= evals;
    report.entropy /= evals;
    report.comm_expected_effect /= evals;
    report.comm_silence /= evals;
    report.critic /= evals;
  }
  report.total_actor = report.actor_ppo +
                       hp.lambda_m * (report.comm_expected_effect + hp.delta * report.comm_silence) +
                       hp.lambda_e * report.entropy;
  return report;
}

}  // namespace tem::learn
