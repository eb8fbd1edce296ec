#include "tem/net/params.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tem::net {

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<ad::Tensor> ParamRegistry::tensors() const {
  std::vector<ad::Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(t);
  return out;
}

std::vector<ad::Tensor> ParamRegistry::tensors_with_prefix(const std::string& prefix) const {
  std::vector<ad::Tensor> out;
  for (const auto& [name, t] : entries_)
    if (name.rfind(prefix, 0) == 0) out.push_back(t);
  return out;
}

ad::Tensor ParamRegistry::find(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw std::invalid_argument("ParamRegistry: no parameter named '" + name + "'");
}

std::string ParamRegistry::manifest() const {
  std::ostringstream os;
  for (const auto& [name, t] : entries_)
    os << name << ' ' << ad::shape_str(t.shape()) << ' ' << t.size() << '\n';
  return os.str();
}

std::uint64_t ParamRegistry::manifest_hash() const {
  const std::string m = manifest();
  return fnv1a(m.data(), m.size());
}

std::uint64_t ParamRegistry::content_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, t] : entries_) {
    h = fnv1a(name.data(), name.size(), h);
    h = fnv1a(t.value().data(), sizeof(double) * t.value().size(), h);
  }
  return h;
}

std::int64_t ParamRegistry::param_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

namespace {

ad::Tensor xavier(Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out, double gain = 1.0) {
  const double s = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  ad::Mat m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < fan_in; ++i)
    for (Eigen::Index j = 0; j < fan_out; ++j) m(i, j) = rng.uniform(-s, s);
  return ad::Tensor::matrix(std::move(m), true);
}

// Output heads start near zero: policies open uniform and values near 0,
// which keeps early updates from overcommitting.
constexpr double kHeadGain = 0.01;

ad::Tensor zeros_vec(Eigen::Index n) { return ad::Tensor::zeros({n}, true); }

ad::Tensor ones_vec(Eigen::Index n) {
  ad::Tensor t = ad::Tensor::zeros({n}, true);
  t.raw().setOnes();
  return t;
}

AttentionBlock make_block(ParamRegistry& reg, const std::string& prefix, int d_model, Rng& rng) {
  AttentionBlock b;
  b.wq = reg.add(prefix + "/wq", xavier(rng, d_model, d_model));
  b.wk = reg.add(prefix + "/wk", xavier(rng, d_model, d_model));
  b.wv = reg.add(prefix + "/wv", xavier(rng, d_model, d_model));
  b.wo = reg.add(prefix + "/wo", xavier(rng, d_model, d_model));
  b.bo = reg.add(prefix + "/bo", zeros_vec(d_model));
  b.ln1_g = reg.add(prefix + "/ln1_g", ones_vec(d_model));
  b.ln1_b = reg.add(prefix + "/ln1_b", zeros_vec(d_model));
  b.mlp_w1 = reg.add(prefix + "/mlp_w1", xavier(rng, d_model, d_model));
  b.mlp_b1 = reg.add(prefix + "/mlp_b1", zeros_vec(d_model));
  b.mlp_w2 = reg.add(prefix + "/mlp_w2", xavier(rng, d_model, d_model));
  b.mlp_b2 = reg.add(prefix + "/mlp_b2", zeros_vec(d_model));
  b.ln2_g = reg.add(prefix + "/ln2_g", ones_vec(d_model));
  b.ln2_b = reg.add(prefix + "/ln2_b", zeros_vec(d_model));
  return b;
}

}  // namespace

ActorParams::ActorParams(const NetConfig& c, int obs_len_, int k_neighbors_, Rng& rng)
    : cfg(c), obs_len(obs_len_), k_neighbors(k_neighbors_) {
  const int dh = cfg.d_h, dm = cfg.d_model;

  obs_w1 = reg_.add("act/obs_mlp/w1", xavier(rng, obs_len, dh));
  obs_b1 = reg_.add("act/obs_mlp/b1", zeros_vec(dh));
  obs_w2 = reg_.add("act/obs_mlp/w2", xavier(rng, dh, dh));
  obs_b2 = reg_.add("act/obs_mlp/b2", zeros_vec(dh));

  const int din = dh + dm;  // o_f concatenated with pooled m_f
  gru.wxz = reg_.add("act/gru/wxz", xavier(rng, din, dh));
  gru.whz = reg_.add("act/gru/whz", xavier(rng, dh, dh));
  gru.bz = reg_.add("act/gru/bz", zeros_vec(dh));
  gru.wxr = reg_.add("act/gru/wxr", xavier(rng, din, dh));
  gru.whr = reg_.add("act/gru/whr", xavier(rng, dh, dh));
  gru.br = reg_.add("act/gru/br", zeros_vec(dh));
  gru.wxn = reg_.add("act/gru/wxn", xavier(rng, din, dh));
  gru.whn = reg_.add("act/gru/whn", xavier(rng, dh, dh));
  gru.bn = reg_.add("act/gru/bn", zeros_vec(dh));

  act_w1 = reg_.add("act/head/w1", xavier(rng, dh, dh));
  act_b1 = reg_.add("act/head/b1", zeros_vec(dh));
  act_w2 = reg_.add("act/head/w2", xavier(rng, dh, 5, kHeadGain));
  act_b2 = reg_.add("act/head/b2", zeros_vec(5));

  emb_w = reg_.add("msg/emb/w", xavier(rng, obs_len, dm));
  emb_b = reg_.add("msg/emb/b", zeros_vec(dm));
  null_token = reg_.add("msg/null_token", [&] {
    ad::Mat m(1, dm);
    for (int j = 0; j < dm; ++j) m(0, j) = rng.uniform(-0.1, 0.1);
    return ad::make_tensor(std::move(m), {dm}, true);
  }());

  for (int e = 0; e < cfg.n_encoders; ++e)
    encoders.push_back(make_block(reg_, "msg/enc" + std::to_string(e), dm, rng));

  proj_w = reg_.add("msg/proj/w", xavier(rng, dh, dm));
  proj_b = reg_.add("msg/proj/b", zeros_vec(dm));

  for (int d = 0; d < cfg.n_decoders; ++d)
    decoders.push_back(make_block(reg_, "msg/dec" + std::to_string(d), dm, rng));

  comm_w1 = reg_.add("msg/comm_head/w1", xavier(rng, dm, dm));
  comm_b1 = reg_.add("msg/comm_head/b1", zeros_vec(dm));
  comm_w2 = reg_.add("msg/comm_head/w2", xavier(rng, dm, k_neighbors + 1, kHeadGain));
  comm_b2 = reg_.add("msg/comm_head/b2", zeros_vec(k_neighbors + 1));
}

CriticParams::CriticParams(int state_len_, int d_h, Rng& rng) : state_len(state_len_) {
  w1 = reg_.add("critic/w1", xavier(rng, state_len, d_h));
  b1 = reg_.add("critic/b1", zeros_vec(d_h));
  w2 = reg_.add("critic/w2", xavier(rng, d_h, d_h));
  b2 = reg_.add("critic/b2", zeros_vec(d_h));
  w3 = reg_.add("critic/w3", xavier(rng, d_h, 1, kHeadGain));
  b3 = reg_.add("critic/b3", zeros_vec(1));
}

}  // namespace tem::net
