#pragma once

namespace tem::net {

// Network dimensions and the two attention wiring switches. Single head,
// d_k = d_model.
struct NetConfig {
  int d_h = 64;
  int d_model = 32;
  int n_encoders = 1;
  int n_decoders = 1;
  // Applies the extra elementwise exp to attention scores before softmax.
  bool attention_double_exp = false;
  // Swaps the cross-attention wiring: k and v from the decoder state, q from
  // the encoded messages. The weighted value then collapses onto v; kept
  // only for comparison runs.
  bool literal_fig2_kqv = false;
};

}  // namespace tem::net
