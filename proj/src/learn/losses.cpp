#include "tem/learn/losses.hpp"

#include <stdexcept>

namespace tem::learn {

using namespace ad;

namespace {

// Left-associated mean so the value matches a plain accumulation loop.
Tensor mean_of(const std::vector<Tensor>& terms) {
  if (terms.empty()) return Tensor::scalar(0.0);
  Tensor acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return scale(acc, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

Tensor ppo_actor_loss(const std::vector<PpoSample>& samples, double clip_eps) {
  std::vector<Tensor> terms;
  terms.reserve(samples.size());
  for (const PpoSample& s : samples) {
    Tensor ratio = exp(sub(s.new_logp, Tensor::scalar(s.old_logp)));
    Tensor plain = scale(ratio, s.advantage);
    Tensor clipped = scale(clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps), s.advantage);
    terms.push_back(minimum(plain, clipped));
  }
  return mean_of(terms);
}

double causal_effect(const comm::CommDecision& decision, int valid_index,
                     const net::ActorParams& actor) {
  if (valid_index < 0 || valid_index >= static_cast<int>(decision.neighbors.size()))
    throw std::out_of_range("causal_effect: no snapshot for valid slot " +
                            std::to_string(valid_index));
  NoRecording guard;
  const comm::NeighborSnapshot& nb = decision.neighbors[valid_index];

  Tensor p0 = net::action_forward(actor, nb.obs, nb.buffer, nb.hidden).dist;

  comm::MessageBuffer with(decision.buffer_capacity);
  for (const auto& m : nb.buffer) with.push(m);
  comm::MessageBuffer sender(decision.buffer_capacity);
  for (const auto& m : decision.sender_buffer) sender.push(m);
  comm::deliver(comm::compose_outgoing(sender, decision.sender_obs), with);

  Tensor p1 = net::action_forward(actor, nb.obs, with.contents(), nb.hidden).dist;
  return kl_categorical(p1, p0).item();
}

void fill_gammas(comm::CommDecision& decision, const net::ActorParams& actor) {
  decision.gammas.resize(decision.neighbors.size());
  for (int j = 0; j < static_cast<int>(decision.neighbors.size()); ++j)
    decision.gammas[j] = causal_effect(decision, j, actor);
}

ad::Tensor expected_causal_effect(const comm::CommDecision& decision,
                                  const net::ActorParams& actor) {
  if (decision.neighbors.empty()) return Tensor::scalar(0.0);
  if (decision.gammas.size() != decision.neighbors.size())
    throw std::logic_error("expected_causal_effect: gammas not filled");
  Tensor dist =
      net::comm_forward(actor, decision.sender_obs, decision.sender_buffer, decision.valid_mask);
  Tensor acc;
  int v = 0;
  for (int s = 0; s < static_cast<int>(decision.valid_mask.size()); ++s) {
    if (!decision.valid_mask[s]) continue;
    Tensor term = scale(gather(dist, s + 1), decision.gammas[v]);
    acc = acc.defined() ? add(acc, term) : term;
    ++v;
  }
  return acc;
}

CommLossOut comm_loss(const std::vector<const comm::CommDecision*>& decisions,
                      const net::ActorParams& actor, double delta) {
  CommLossOut out;
  if (decisions.empty()) {
    out.total = Tensor::scalar(0.0);
    return out;
  }
  std::vector<Tensor> terms;
  terms.reserve(decisions.size());
  for (const comm::CommDecision* d : decisions) {
    Tensor dist = net::comm_forward(actor, d->sender_obs, d->sender_buffer, d->valid_mask);
    Tensor effect;
    int v = 0;
    for (int s = 0; s < static_cast<int>(d->valid_mask.size()); ++s) {
      if (!d->valid_mask[s]) continue;
      if (d->gammas.size() != d->neighbors.size())
        throw std::logic_error("comm_loss: gammas not filled");
      Tensor term = scale(gather(dist, s + 1), d->gammas[v]);
      effect = effect.defined() ? add(effect, term) : term;
      ++v;
    }
    if (!effect.defined()) effect = Tensor::scalar(0.0);
    Tensor silence = gather(dist, 0);
    out.mean_effect += effect.item();
    out.mean_silence += silence.item();
    terms.push_back(add(effect, scale(silence, delta)));
  }
  out.mean_effect /= static_cast<double>(decisions.size());
  out.mean_silence /= static_cast<double>(decisions.size());
  out.total = mean_of(terms);
  return out;
}

Tensor entropy_loss(const std::vector<Tensor>& action_dists) {
  std::vector<Tensor> terms;
  terms.reserve(action_dists.size());
  for (const Tensor& dist : action_dists) {
    // clamp keeps 0 ln 0 at exactly 0 for degenerate distributions
    terms.push_back(neg(sum(mul(dist, log(clamp(dist, 1e-10, 1.0))))));
  }
  return mean_of(terms);
}

Tensor critic_loss(const std::vector<CriticSample>& samples, double clip_eps) {
  std::vector<Tensor> terms;
  terms.reserve(samples.size());
  for (const CriticSample& s : samples) {
    Tensor err = sub(s.v_new, Tensor::scalar(s.ret));
    Tensor sq = mul(err, err);
    Tensor cerr = sub(clamp(s.v_new, s.v_old - clip_eps, s.v_old + clip_eps),
                      Tensor::scalar(s.ret));
    terms.push_back(maximum(sq, mul(cerr, cerr)));
  }
  return mean_of(terms);
}

}  // namespace tem::learn
