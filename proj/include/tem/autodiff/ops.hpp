#pragma once

#include "tem/autodiff/tensor.hpp"

namespace tem::ad {

// Elementwise on equal shapes; also matrix + vector (broadcast over rows)
// and anything + scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);

// Elementwise on equal shapes; either side may be a scalar tensor.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor neg(const Tensor& a);

// a: [m,k] matrix or [k] vector (treated as a row); b: [k,n] matrix.
// Gradients: da = g b^T, db = a^T g.
Tensor matmul(const Tensor& a, const Tensor& b);

// Vector [n] -> column matrix [n,1]; matrix [m,n] -> [n,m].
Tensor transpose(const Tensor& a);

// x W + b with x a vector or matrix of rows, W [k,n], b [n].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Max-subtracted, per row for matrices; slices sum to 1.
Tensor softmax(const Tensor& a);

// Vector softmax over the valid entries only; invalid entries are exactly 0.
Tensor masked_softmax(const Tensor& a, const std::vector<bool>& valid);

// Vector concatenation.
Tensor concat(const Tensor& a, const Tensor& b);

// Scalar element of a vector.
Tensor gather(const Tensor& v, Eigen::Index index);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Column means of a matrix -> vector [n].
Tensor mean_rows(const Tensor& a);

// Per-row normalization with learned gain/bias vectors.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// sum p ln(p/q) over probability vectors, with 0 ln(0/q) := 0 and q clamped
// to >= 1e-10 before division. Nonnegative; zero iff p == q.
Tensor kl_categorical(const Tensor& p, const Tensor& q);

Tensor clamp(const Tensor& x, double lo, double hi);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

// Same elements in row-major order, new shape.
Tensor reshape(const Tensor& a, const Shape& shape);

// Detached copy: same value, no gradient path.
Tensor stop_gradient(const Tensor& a);

struct GruParams {
  Tensor wxz, whz, bz;  // update gate
  Tensor wxr, whr, br;  // reset gate
  Tensor wxn, whn, bn;  // candidate
};

// z = sig(x wxz + h whz + bz), r = sig(x wxr + h whr + br),
// n = tanh(x wxn + r.(h whn) + bn), h' = (1-z).n + z.h
Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace tem::ad
