#include "tem/net/forward.hpp"

#include <cmath>
#include <stdexcept>

namespace tem::net {

using namespace ad;

namespace {

void trace_rows(AttnTrace* trace, const Tensor& alpha) {
  if (!trace) return;
  const Mat& v = alpha.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) trace->rows.push_back(v.row(i).transpose());
}

Tensor block_tail(const AttentionBlock& b, const Tensor& input, const Tensor& attended_out) {
  Tensor res1 = layer_norm(add(input, attended_out), b.ln1_g, b.ln1_b);
  Tensor mlp = linear(relu(linear(res1, b.mlp_w1, b.mlp_b1)), b.mlp_w2, b.mlp_b2);
  return layer_norm(add(res1, mlp), b.ln2_g, b.ln2_b);
}

Tensor encoder_block(const NetConfig& cfg, const AttentionBlock& b, const Tensor& e,
                     AttnTrace* trace) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  Tensor q = matmul(e, b.wq);
  Tensor k = matmul(e, b.wk);
  Tensor v = matmul(e, b.wv);
  Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_dk);
  if (cfg.attention_double_exp) scores = exp(scores);
  Tensor alpha = softmax(scores);
  trace_rows(trace, alpha);
  Tensor out = linear(matmul(alpha, v), b.wo, b.bo);
  return block_tail(b, e, out);
}

Tensor decoder_block(const NetConfig& cfg, const AttentionBlock& b, const Tensor& dec,
                     const Tensor& m_f, AttnTrace* trace) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  Tensor attended;
  if (!cfg.literal_fig2_kqv) {
    Tensor q = matmul(dec, b.wq);
    Tensor k = matmul(m_f, b.wk);
    Tensor v = matmul(m_f, b.wv);
    Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_dk);
    if (cfg.attention_double_exp) scores = exp(scores);
    Tensor alpha = softmax(scores);
    trace_rows(trace, alpha);
    attended = matmul(alpha, v);
  } else {
    // Printed wiring: k, v from the decoder state, q from the messages.
    // The alpha-weighted sum of a single value row collapses onto v.
    Tensor k = matmul(dec, b.wk);
    Tensor q = matmul(m_f, b.wq);
    Tensor v = matmul(dec, b.wv);
    Tensor scores = reshape(scale(matmul(q, transpose(k)), inv_sqrt_dk),
                            {m_f.value().rows()});
    if (cfg.attention_double_exp) scores = exp(scores);
    Tensor alpha = softmax(scores);
    trace_rows(trace, alpha);
    attended = mul(v, sum(alpha));
  }
  Tensor out = linear(attended, b.wo, b.bo);
  return block_tail(b, dec, out);
}

}  // namespace

Tensor encode_messages(const ActorParams& p, const std::vector<Eigen::VectorXd>& buffer,
                       AttnTrace* trace) {
  Tensor e;
  if (buffer.empty()) {
    e = reshape(p.null_token, {1, p.cfg.d_model});
  } else {
    Mat chain(static_cast<Eigen::Index>(buffer.size()), p.obs_len);
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      if (buffer[i].size() != p.obs_len)
        throw std::invalid_argument("encode_messages: message length " +
                                    std::to_string(buffer[i].size()) + ", expected " +
                                    std::to_string(p.obs_len));
      chain.row(static_cast<Eigen::Index>(i)) = buffer[i].transpose();
    }
    e = linear(Tensor::matrix(std::move(chain)), p.emb_w, p.emb_b);
  }
  for (const auto& block : p.encoders) e = encoder_block(p.cfg, block, e, trace);
  return e;
}

Tensor obs_features(const ActorParams& p, const Eigen::VectorXd& obs) {
  if (obs.size() != p.obs_len)
    throw std::invalid_argument("obs_features: observation length " +
                                std::to_string(obs.size()) + ", expected " +
                                std::to_string(p.obs_len));
  Tensor x = Tensor::vector(obs);
  return relu(linear(relu(linear(x, p.obs_w1, p.obs_b1)), p.obs_w2, p.obs_b2));
}

Tensor decode(const ActorParams& p, const Tensor& o_f, const Tensor& m_f, AttnTrace* trace) {
  Tensor dec = linear(o_f, p.proj_w, p.proj_b);
  for (const auto& block : p.decoders) dec = decoder_block(p.cfg, block, dec, m_f, trace);
  return dec;
}

Tensor comm_head(const ActorParams& p, const Tensor& m_dec,
                 const std::vector<bool>& neighbor_valid) {
  if (static_cast<int>(neighbor_valid.size()) != p.k_neighbors)
    throw std::invalid_argument("comm_head: expected " + std::to_string(p.k_neighbors) +
                                " neighbor flags");
  Tensor logits = linear(relu(linear(m_dec, p.comm_w1, p.comm_b1)), p.comm_w2, p.comm_b2);
  std::vector<bool> valid(p.k_neighbors + 1);
  valid[0] = true;  // no-send stays available
  for (int s = 0; s < p.k_neighbors; ++s) valid[s + 1] = neighbor_valid[s];
  return masked_softmax(logits, valid);
}

Tensor comm_forward(const ActorParams& p, const Eigen::VectorXd& obs,
                    const std::vector<Eigen::VectorXd>& buffer,
                    const std::vector<bool>& neighbor_valid, AttnTrace* trace) {
  Tensor m_f = encode_messages(p, buffer, trace);
  Tensor o_f = stop_gradient(obs_features(p, obs));
  Tensor m_dec = decode(p, o_f, m_f, trace);
  return comm_head(p, m_dec, neighbor_valid);
}

ActorForward action_forward(const ActorParams& p, const Eigen::VectorXd& obs,
                            const std::vector<Eigen::VectorXd>& buffer,
                            const Eigen::VectorXd& hidden, AttnTrace* trace) {
  Tensor o_f = obs_features(p, obs);
  Tensor m_f = encode_messages(p, buffer, trace);
  Tensor x = concat(o_f, mean_rows(m_f));
  Tensor h_next = gru_cell(x, Tensor::vector(hidden), p.gru);
  Tensor logits = linear(relu(linear(h_next, p.act_w1, p.act_b1)), p.act_w2, p.act_b2);
  return {softmax(logits), h_next};
}

ActResult act(const ActorParams& p, const Eigen::VectorXd& obs,
              const std::vector<Eigen::VectorXd>& buffer, const Eigen::VectorXd& hidden,
              Mode mode, Rng* rng) {
  NoRecording guard;
  ActorForward fwd = action_forward(p, obs, buffer, hidden);
  ActResult out;
  out.dist = fwd.dist.vec();
  out.h_next = fwd.h_next.vec();
  if (mode == Mode::Sample) {
    if (!rng) throw std::invalid_argument("act: sampling requires an rng");
    out.action = rng->categorical(out.dist);
  } else {
    out.action = argmax(out.dist);
  }
  out.log_prob = std::log(out.dist[out.action]);
  return out;
}

Tensor critic_value(const CriticParams& p, const Eigen::VectorXd& state) {
  if (state.size() != p.state_len)
    throw std::invalid_argument("critic_value: state length " + std::to_string(state.size()) +
                                ", expected " + std::to_string(p.state_len));
  Tensor x = Tensor::vector(state);
  Tensor h1 = tanh(linear(x, p.w1, p.b1));
  Tensor h2 = tanh(linear(h1, p.w2, p.b2));
  return gather(linear(h2, p.w3, p.b3), 0);
}

}  // namespace tem::net
