#pragma once

#include "tem/autodiff/tensor.hpp"

#include <cstdint>
#include <vector>

namespace tem::ad {

// Adam with bias correction. Parameters that accumulated no gradient since
// the last step are left untouched (their moments stay put as well).
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step();
  void zero_grad();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  std::size_t size() const { return params_.size(); }
  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  Mat& moment1(std::size_t i) { return m_[i]; }
  Mat& moment2(std::size_t i) { return v_[i]; }

 private:
  std::vector<Tensor> params_;
  std::vector<Mat> m_, v_;
  double lr_, b1_, b2_, eps_;
  std::int64_t t_ = 0;
};

// Scales accumulated gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

}  // namespace tem::ad
