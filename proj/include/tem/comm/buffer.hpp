#pragma once

#include <Eigen/Dense>

#include <deque>
#include <stdexcept>
#include <vector>

namespace tem::comm {

// One chain element: an agent's observation vector.
struct Message {
  Eigen::VectorXd payload;
};

// Bounded FIFO queue of message vectors. Pushing past capacity evicts the
// oldest element. Cleared at the start of every environment step.
class MessageBuffer {
 public:
  explicit MessageBuffer(std::size_t capacity = 8, Eigen::Index payload_len = -1)
      : capacity_(capacity), payload_len_(payload_len) {
    if (capacity == 0) throw std::invalid_argument("MessageBuffer: capacity must be >= 1");
  }

  void push(const Eigen::VectorXd& payload) {
    if (payload_len_ >= 0 && payload.size() != payload_len_)
      throw std::invalid_argument("MessageBuffer: payload length " +
                                  std::to_string(payload.size()) + ", expected " +
                                  std::to_string(payload_len_));
    q_.push_back(payload);
    while (q_.size() > capacity_) q_.pop_front();
  }

  void clear() { q_.clear(); }

  std::size_t size() const { return q_.size(); }
  bool empty() const { return q_.empty(); }
  std::size_t capacity() const { return capacity_; }

  // Oldest first.
  std::vector<Eigen::VectorXd> contents() const { return {q_.begin(), q_.end()}; }

  const Eigen::VectorXd& at(std::size_t i) const { return q_.at(i); }

 private:
  std::deque<Eigen::VectorXd> q_;
  std::size_t capacity_;
  Eigen::Index payload_len_;  // -1: unconstrained
};

}  // namespace tem::comm
