#include "tem/comm/protocol.hpp"

#include <algorithm>
#include <ostream>

namespace tem::comm {

void begin_step(std::vector<MessageBuffer>& buffers) {
  for (auto& b : buffers) b.clear();
}

std::vector<Eigen::VectorXd> compose_outgoing(const MessageBuffer& sender_buffer,
                                              const Eigen::VectorXd& sender_obs) {
  std::vector<Eigen::VectorXd> out = sender_buffer.contents();
  out.push_back(sender_obs);
  return out;
}

void deliver(const std::vector<Eigen::VectorXd>& payloads, MessageBuffer& receiver) {
  for (const auto& p : payloads) receiver.push(p);
}

CommPhaseResult run_comm_phase(const std::vector<env::Observation>& observations,
                               std::vector<MessageBuffer>& buffers,
                               const std::vector<Eigen::VectorXd>& hidden,
                               const CommChooser& chooser, bool record_snapshots) {
  const int n = static_cast<int>(observations.size());
  CommPhaseResult res;
  std::vector<bool> sent(n, false);
  std::vector<bool> active(n, true);  // round 0: everyone decides

  for (int round = 0; round < n; ++round) {
    bool any_active = std::any_of(active.begin(), active.end(), [](bool a) { return a; });
    if (!any_active) break;
    res.rounds = round + 1;

    struct Delivery {
      int sender, target;
      std::vector<Eigen::VectorXd> payload;
    };
    std::vector<Delivery> deliveries;
    const std::vector<bool> sent_at_round_start = sent;

    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      const env::Observation& obs = observations[i];
      const int k = static_cast<int>(obs.neighbor_valid.size());
      std::vector<bool> fresh(k, false);
      for (int s = 0; s < k; ++s)
        fresh[s] = obs.neighbor_valid[s] && !sent_at_round_start[obs.neighbor_ids[s]];

      auto [choice, dist] = chooser(i, round, obs, buffers[i].contents(), fresh);

      CommDecision d;
      d.sender = i;
      d.round = round;
      d.choice = choice;
      d.dist = std::move(dist);
      d.valid_mask = obs.neighbor_valid;
      d.buffer_capacity = buffers[i].capacity();
      if (record_snapshots) {
        d.sender_obs = obs.vec;
        d.sender_buffer = buffers[i].contents();
        for (int s = 0; s < k; ++s) {
          if (!obs.neighbor_valid[s]) continue;
          NeighborSnapshot nb;
          nb.agent_id = obs.neighbor_ids[s];
          nb.obs = observations[nb.agent_id].vec;
          nb.buffer = buffers[nb.agent_id].contents();
          nb.hidden = hidden[nb.agent_id];
          d.neighbors.push_back(std::move(nb));
        }
      }

      if (choice > 0) {
        const int slot = choice - 1;
        if (slot >= k || !obs.neighbor_valid[slot])
          throw std::logic_error("run_comm_phase: chooser picked an invalid slot");
        const int target = obs.neighbor_ids[slot];
        d.target = target;
        deliveries.push_back({i, target, compose_outgoing(buffers[i], obs.vec)});
        sent[i] = true;
        res.chain_log.push_back({round, i, target});
      }
      res.decisions.push_back(std::move(d));
    }

    // Simultaneous round: all payloads composed above, applied here in
    // ascending sender order (that is the merge order inside a buffer).
    std::vector<bool> received(n, false);
    for (auto& del : deliveries) {
      deliver(del.payload, buffers[del.target]);
      received[del.target] = true;
    }
    if (deliveries.empty()) break;
    for (int i = 0; i < n; ++i) active[i] = received[i] && !sent[i];
  }
  return res;
}

void write_chain_header(std::ostream& os) { os << "episode,step,round,sender,target\n"; }

void write_chain_rows(std::ostream& os, int episode, int step, const ChainLog& log) {
  for (const auto& rec : log)
    os << episode << ',' << step << ',' << rec.round << ',' << rec.sender << ',' << rec.target
       << '\n';
}

std::vector<int> chain_lengths(const ChainLog& log) {
  // A record extends the earliest chain that reached its sender in the
  // previous round; everything else starts a chain.
  struct Chain {
    int tail_agent;
    int tail_round;
    int len;
  };
  std::vector<Chain> chains;
  for (const auto& rec : log) {
    bool extended = false;
    if (rec.round > 0) {
      for (auto& c : chains) {
        if (c.tail_agent == rec.sender && c.tail_round == rec.round - 1) {
          c.tail_agent = rec.target;
          c.tail_round = rec.round;
          ++c.len;
          extended = true;
          break;
        }
      }
    }
    if (!extended) chains.push_back({rec.target, rec.round, 1});
  }
  std::vector<int> lens;
  lens.reserve(chains.size());
  for (const auto& c : chains) lens.push_back(c.len);
  return lens;
}

}  // namespace tem::comm
