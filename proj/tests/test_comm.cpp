#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tem/comm/protocol.hpp"

#include <map>

using namespace tem;
using namespace tem::comm;

namespace {

Eigen::VectorXd tagged(double v, int len = 3) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(len);
  x[0] = v;
  return x;
}

// Synthetic observation wiring: slot s of agent i points at neighbors[s].
env::Observation make_obs(int self, const std::vector<int>& neighbors, int k_slots) {
  env::Observation o;
  o.vec = tagged(self + 1.0);
  o.neighbor_ids.assign(k_slots, -1);
  o.neighbor_valid.assign(k_slots, false);
  for (int s = 0; s < static_cast<int>(neighbors.size()) && s < k_slots; ++s) {
    o.neighbor_ids[s] = neighbors[s];
    o.neighbor_valid[s] = true;
  }
  return o;
}

Eigen::VectorXd uniform_dist(int k_slots) {
  return Eigen::VectorXd::Constant(k_slots + 1, 1.0 / (k_slots + 1));
}

// Replays a chain log against fresh buffers, mirroring the round-start
// compose semantics; the independent model for the reconstruction check.
std::vector<std::vector<Eigen::VectorXd>> replay(const ChainLog& log,
                                                 const std::vector<env::Observation>& obs,
                                                 std::size_t capacity) {
  const int n = static_cast<int>(obs.size());
  std::vector<MessageBuffer> bufs(n, MessageBuffer(capacity));
  std::size_t idx = 0;
  while (idx < log.size()) {
    const int round = log[idx].round;
    std::vector<std::vector<Eigen::VectorXd>> snapshot;
    for (const auto& b : bufs) snapshot.push_back(b.contents());
    while (idx < log.size() && log[idx].round == round) {
      const auto& rec = log[idx];
      std::vector<Eigen::VectorXd> payload = snapshot[rec.sender];
      payload.push_back(obs[rec.sender].vec);
      deliver(payload, bufs[rec.target]);
      ++idx;
    }
  }
  std::vector<std::vector<Eigen::VectorXd>> out;
  for (const auto& b : bufs) out.push_back(b.contents());
  return out;
}

}  // namespace

TEST_CASE("begin_step empties buffers and keeps capacity") {
  std::vector<MessageBuffer> bufs(2, MessageBuffer(5));
  for (int i = 0; i < 3; ++i) bufs[0].push(tagged(i));
  bufs[1].push(tagged(9));
  begin_step(bufs);
  CHECK(bufs[0].empty());
  CHECK(bufs[1].empty());
  CHECK(bufs[0].capacity() == 5);
  begin_step(bufs);  // idempotent on empty buffers
  CHECK(bufs[0].empty());
}

TEST_CASE("compose_outgoing appends the observation as the newest element") {
  MessageBuffer b(8);
  Eigen::VectorXd o = tagged(42);
  auto out = compose_outgoing(b, o);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == o);

  b.push(tagged(1));
  out = compose_outgoing(b, o);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == tagged(1));
  CHECK(out[1] == o);

  MessageBuffer full(3);
  for (int i = 0; i < 3; ++i) full.push(tagged(i));
  CHECK(compose_outgoing(full, o).size() == 4);
}

TEST_CASE("deliver follows queue semantics against a naive list model") {
  MessageBuffer b(8);
  deliver({tagged(0)}, b);
  CHECK(b.size() == 1);

  // model: plain vector with front eviction
  std::vector<double> model;
  MessageBuffer q(8);
  Rng rng(5);
  for (int i = 0; i < 40; ++i) {
    const double v = rng.uniform(-5, 5);
    q.push(tagged(v));
    model.push_back(v);
    while (model.size() > 8) model.erase(model.begin());
    REQUIRE(q.size() == model.size());
    for (std::size_t j = 0; j < model.size(); ++j) CHECK(q.at(j)[0] == model[j]);
  }

  MessageBuffer full(8);
  for (int i = 0; i < 8; ++i) full.push(tagged(i));
  deliver({tagged(100), tagged(101), tagged(102)}, full);
  CHECK(full.size() == 8);
  CHECK(full.at(0)[0] == 3.0);  // three oldest evicted
  CHECK(full.at(7)[0] == 102.0);
}

TEST_CASE("deliveries from two chains merge in arrival order") {
  // agents 0 and 1 both send to agent 2 in round 0
  std::vector<env::Observation> obs = {make_obs(0, {2}, 2), make_obs(1, {2}, 2),
                                       make_obs(2, {0, 1}, 2)};
  std::vector<MessageBuffer> bufs(3, MessageBuffer(8));
  std::vector<Eigen::VectorXd> hidden(3, Eigen::VectorXd::Zero(2));
  auto chooser = [](int agent, int round, const env::Observation&,
                    const std::vector<Eigen::VectorXd>&, const std::vector<bool>&) {
    const int choice = (round == 0 && agent != 2) ? 1 : 0;
    return std::make_pair(choice, uniform_dist(2));
  };
  CommPhaseResult res = run_comm_phase(obs, bufs, hidden, chooser, false);
  REQUIRE(bufs[2].size() == 2);
  CHECK(bufs[2].at(0)[0] == 1.0);  // sender 0's observation first
  CHECK(bufs[2].at(1)[0] == 2.0);
  CHECK(res.chain_log.size() == 2);
}

TEST_CASE("wrong payload length is rejected") {
  MessageBuffer b(4, 3);
  CHECK_THROWS_AS(b.push(Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

TEST_CASE("all-silent round ends the phase immediately") {
  std::vector<env::Observation> obs = {make_obs(0, {1}, 1), make_obs(1, {0}, 1)};
  std::vector<MessageBuffer> bufs(2, MessageBuffer(8));
  std::vector<Eigen::VectorXd> hidden(2, Eigen::VectorXd::Zero(2));
  auto silent = [](int, int, const env::Observation&, const std::vector<Eigen::VectorXd>&,
                   const std::vector<bool>&) { return std::make_pair(0, uniform_dist(1)); };
  CommPhaseResult res = run_comm_phase(obs, bufs, hidden, silent, false);
  CHECK(res.rounds == 1);
  CHECK(res.chain_log.empty());
  CHECK(res.decisions.size() == 2);
}

TEST_CASE("a forwards to b forwards to c across rounds") {
  // 0 -> 1 -> 2, each forwarding once
  std::vector<env::Observation> obs = {make_obs(0, {1}, 2), make_obs(1, {2, 0}, 2),
                                       make_obs(2, {1}, 2)};
  std::vector<MessageBuffer> bufs(3, MessageBuffer(8));
  std::vector<Eigen::VectorXd> hidden(3, Eigen::VectorXd::Zero(2));
  auto chooser = [](int agent, int round, const env::Observation&,
                    const std::vector<Eigen::VectorXd>& buffer,
                    const std::vector<bool>&) {
    if (agent == 0 && round == 0) return std::make_pair(1, uniform_dist(2));
    if (agent == 1 && round == 1 && !buffer.empty()) return std::make_pair(1, uniform_dist(2));
    return std::make_pair(0, uniform_dist(2));
  };
  CommPhaseResult res = run_comm_phase(obs, bufs, hidden, chooser, false);
  REQUIRE(res.chain_log.size() == 2);
  CHECK(res.chain_log[0].round == 0);
  CHECK(res.chain_log[0].sender == 0);
  CHECK(res.chain_log[0].target == 1);
  CHECK(res.chain_log[1].round == 1);
  CHECK(res.chain_log[1].sender == 1);
  CHECK(res.chain_log[1].target == 2);
  // c holds the chain <o_0, o_1>
  REQUIRE(bufs[2].size() == 2);
  CHECK(bufs[2].at(0)[0] == 1.0);
  CHECK(bufs[2].at(1)[0] == 2.0);
  auto lens = chain_lengths(res.chain_log);
  REQUIRE(lens.size() == 1);
  CHECK(lens[0] == 2);
}

TEST_CASE("adversarial always-send policies terminate within n rounds") {
  // complete graphs, exhaustive over small agent counts
  for (int n = 2; n <= 6; ++n) {
    std::vector<env::Observation> obs;
    for (int i = 0; i < n; ++i) {
      std::vector<int> others;
      for (int j = 0; j < n; ++j)
        if (j != i) others.push_back(j);
      obs.push_back(make_obs(i, others, n - 1));
    }
    std::vector<MessageBuffer> bufs(n, MessageBuffer(8));
    std::vector<Eigen::VectorXd> hidden(n, Eigen::VectorXd::Zero(2));
    Rng rng(1000 + n);
    auto greedy_send = [&](int, int, const env::Observation& o,
                           const std::vector<Eigen::VectorXd>&, const std::vector<bool>&) {
      std::vector<int> valid;
      for (int s = 0; s < static_cast<int>(o.neighbor_valid.size()); ++s)
        if (o.neighbor_valid[s]) valid.push_back(s);
      const int pick = valid[rng.uniform_int(static_cast<int>(valid.size()))];
      return std::make_pair(pick + 1, uniform_dist(n - 1));
    };
    CommPhaseResult res = run_comm_phase(obs, bufs, hidden, greedy_send, false);
    CHECK(res.rounds <= n);
    CHECK(static_cast<int>(res.chain_log.size()) <= n);
    std::map<int, int> sends;
    for (const auto& rec : res.chain_log) CHECK(++sends[rec.sender] == 1);
  }
}

TEST_CASE("randomized phases: budget, capacity, and replay reconstruction") {
  Rng rng(777);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + rng.uniform_int(7);
    const std::size_t cap = 1 + rng.uniform_int(8);
    std::vector<env::Observation> obs;
    for (int i = 0; i < n; ++i) {
      std::vector<int> others;
      for (int j = 0; j < n; ++j)
        if (j != i && rng.uniform01() < 0.8) others.push_back(j);
      obs.push_back(make_obs(i, others, std::max(1, n - 1)));
    }
    std::vector<MessageBuffer> bufs(n, MessageBuffer(cap));
    std::vector<Eigen::VectorXd> hidden(n, Eigen::VectorXd::Zero(2));
    auto chooser = [&](int, int, const env::Observation& o,
                       const std::vector<Eigen::VectorXd>&, const std::vector<bool>&) {
      std::vector<int> valid;
      for (int s = 0; s < static_cast<int>(o.neighbor_valid.size()); ++s)
        if (o.neighbor_valid[s]) valid.push_back(s);
      if (valid.empty() || rng.uniform01() < 0.3)
        return std::make_pair(0, uniform_dist(static_cast<int>(o.neighbor_valid.size())));
      const int pick = valid[rng.uniform_int(static_cast<int>(valid.size()))];
      return std::make_pair(pick + 1, uniform_dist(static_cast<int>(o.neighbor_valid.size())));
    };
    CommPhaseResult res = run_comm_phase(obs, bufs, hidden, chooser, false);

    CHECK(res.rounds <= n);
    std::map<int, int> sends;
    for (const auto& rec : res.chain_log) CHECK(++sends[rec.sender] == 1);
    for (const auto& b : bufs) CHECK(b.size() <= cap);

    const auto rebuilt = replay(res.chain_log, obs, cap);
    for (int i = 0; i < n; ++i) {
      const auto got = bufs[i].contents();
      REQUIRE(got.size() == rebuilt[i].size());
      for (std::size_t m = 0; m < got.size(); ++m) CHECK(got[m] == rebuilt[i][m]);
    }
    int total_len = 0;
    for (int len : chain_lengths(res.chain_log)) total_len += len;
    CHECK(total_len == static_cast<int>(res.chain_log.size()));
  }
}

TEST_CASE("chain csv export columns") {
  std::ostringstream os;
  write_chain_header(os);
  write_chain_rows(os, 2, 7, {{0, 1, 2}, {1, 2, 0}});
  CHECK(os.str() == "episode,step,round,sender,target\n2,7,0,1,2\n2,7,1,2,0\n");
}
