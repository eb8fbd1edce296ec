#include "tem/run/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tem::run {

namespace {

// The serialized layout is little-endian by contract; these helpers write
// native integers, which matches on every platform this builds for.
static_assert(sizeof(double) == 8);

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto len = get<std::uint64_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
  os.write(Checkpoint::kMagic, 8);
  put<std::uint32_t>(os, ck.version);
  put_string(os, ck.config_text);
  put<std::uint64_t>(os, ck.tensors.size());
  for (const auto& t : ck.tensors) {
    put_string(os, t.name);
    put<std::uint64_t>(os, t.shape.size());
    for (auto d : t.shape) put<std::uint64_t>(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(sizeof(double) * t.data.size()));
  }
  put_string(os, ck.rng_state);
  put<std::uint64_t>(os, ck.env_steps);
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, Checkpoint::kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  Checkpoint ck;
  ck.version = get<std::uint32_t>(is);
  if (ck.version != 1)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(ck.version));
  ck.config_text = get_string(is);
  const auto count = get<std::uint64_t>(is);
  ck.tensors.resize(count);
  for (auto& t : ck.tensors) {
    t.name = get_string(is);
    const auto rank = get<std::uint64_t>(is);
    if (rank > 2) throw std::runtime_error("checkpoint: tensor rank > 2");
    t.shape.resize(rank);
    Eigen::Index rows = 1, cols = 1;
    for (std::uint64_t i = 0; i < rank; ++i)
      t.shape[i] = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    if (rank == 1) cols = t.shape[0];
    if (rank == 2) {
      rows = t.shape[0];
      cols = t.shape[1];
    }
    t.data.resize(rows, cols);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor '" + t.name + "'");
  }
  ck.rng_state = get_string(is);
  ck.env_steps = get<std::uint64_t>(is);
  return ck;
}

}  // namespace tem::run
