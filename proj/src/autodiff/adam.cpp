#include "tem/autodiff/adam.hpp"

#include <cmath>

namespace tem::ad {

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.push_back(Mat::Zero(p.value().rows(), p.value().cols()));
    v_.push_back(Mat::Zero(p.value().rows(), p.value().cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    const Mat& g = p.grad();
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseProduct(g);
    p.raw() -= (lr_ * (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + eps_)).matrix();
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params)
    if (p.has_grad()) sq += p.grad().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (const Tensor& p : params)
      if (p.has_grad()) p.data()->grad *= s;
  }
  return norm;
}

}  // namespace tem::ad
