#pragma once

#include "tem/autodiff/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tem::run {

struct NamedTensor {
  std::string name;
  ad::Shape shape;
  ad::Mat data;  // row-major f64
};

// Little-endian binary container: magic "TEMCKPT1", format version, the
// run-config echo, the named parameter tensors (actor, critic, optimizer
// moments), RNG state text, and the env-step counter.
struct Checkpoint {
  static constexpr char kMagic[9] = "TEMCKPT1";
  std::uint32_t version = 1;
  std::string config_text;
  std::vector<NamedTensor> tensors;
  std::string rng_state;
  std::uint64_t env_steps = 0;

  const NamedTensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tem::run
