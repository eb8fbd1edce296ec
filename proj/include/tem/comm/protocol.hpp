#pragma once

#include "tem/comm/buffer.hpp"
#include "tem/env/world.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace tem::comm {

// Inputs a receiver needs for the with/without-message counterfactual.
struct NeighborSnapshot {
  int agent_id = -1;
  Eigen::VectorXd obs;
  std::vector<Eigen::VectorXd> buffer;  // receiver buffer at decision time
  Eigen::VectorXd hidden;               // receiver RNN state at decision time
};

// One communication decision: the categorical pick over {no-send} + slots,
// plus the snapshots the communication losses replay later.
struct CommDecision {
  int sender = -1;
  int round = 0;
  int choice = 0;   // categorical index: 0 = no send, i >= 1 = neighbor slot i-1
  int target = -1;  // resolved agent id, -1 when choice == 0
  Eigen::VectorXd dist;  // k_neighbors + 1 probabilities, invalid slots exactly 0
  Eigen::VectorXd sender_obs;
  std::vector<Eigen::VectorXd> sender_buffer;  // at decision time
  std::vector<bool> valid_mask;                // k_neighbors entries
  std::vector<NeighborSnapshot> neighbors;     // one entry per valid slot, slot order
  std::vector<double> gammas;                  // causal effects, filled by the learner
  std::size_t buffer_capacity = 8;
};

struct ChainRecord {
  int round;
  int sender;
  int target;
};
using ChainLog = std::vector<ChainRecord>;

struct CommPhaseResult {
  std::vector<CommDecision> decisions;
  ChainLog chain_log;
  int rounds = 0;
};

// Picks (choice, distribution) for an active agent. `fresh` marks valid
// neighbor slots whose agent has not sent yet this step.
using CommChooser = std::function<std::pair<int, Eigen::VectorXd>(
    int agent, int round, const env::Observation& obs,
    const std::vector<Eigen::VectorXd>& buffer, const std::vector<bool>& fresh)>;

// Empties every buffer; capacities are untouched.
void begin_step(std::vector<MessageBuffer>& buffers);

// Buffer contents in FIFO order with the sender's observation appended as
// the newest element.
std::vector<Eigen::VectorXd> compose_outgoing(const MessageBuffer& sender_buffer,
                                              const Eigen::VectorXd& sender_obs);

// Pushes payload elements in order; FIFO eviction applies past capacity.
void deliver(const std::vector<Eigen::VectorXd>& payloads, MessageBuffer& receiver);

// Multi-round chain execution. Round 0 activates everyone; a round r >= 1
// activates agents that received in round r-1 and have not sent this step.
// Deliveries within a round are simultaneous: every sender composes from the
// round-start buffers, and payloads land in ascending sender order. Ends on
// a delivery-free round or after n_agents rounds.
CommPhaseResult run_comm_phase(const std::vector<env::Observation>& observations,
                               std::vector<MessageBuffer>& buffers,
                               const std::vector<Eigen::VectorXd>& hidden,
                               const CommChooser& chooser, bool record_snapshots);

// episode,step,round,sender,target
void write_chain_header(std::ostream& os);
void write_chain_rows(std::ostream& os, int episode, int step, const ChainLog& log);

// Chain statistics: deliveries group into chains (a round-0 send starts one;
// a later send extends the chain that reached its sender last round).
std::vector<int> chain_lengths(const ChainLog& log);

}  // namespace tem::comm
