#pragma once

// Central finite-difference gradient oracle for the test suites. Lives in
// test code only; independent of the backward implementation it checks.

#include "tem/autodiff/ops.hpp"
#include "tem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace fd {

struct Result {
  double max_rel_err = 0.0;
  std::string where;
};

// Compares analytic gradients of loss_fn w.r.t. params against central
// differences. loss_fn must be a pure function of the param values.
inline Result check(std::vector<tem::ad::Tensor> params,
                    const std::function<tem::ad::Tensor()>& loss_fn, double h = 1e-5) {
  using namespace tem::ad;
  for (auto& p : params) p.zero_grad();
  {
    Graph g;
    Recording rec(g);
    Tensor loss = loss_fn();
    g.backward(loss);
  }
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (auto& p : params)
    analytic.push_back(p.has_grad() ? p.grad() : Mat::Zero(p.value().rows(), p.value().cols()));

  Result res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Mat& val = params[k].raw();
    for (Eigen::Index i = 0; i < val.rows(); ++i) {
      for (Eigen::Index j = 0; j < val.cols(); ++j) {
        const double orig = val(i, j);
        val(i, j) = orig + h;
        const double fp = loss_fn().item();
        val(i, j) = orig - h;
        const double fm = loss_fn().item();
        val(i, j) = orig;
        const double num = (fp - fm) / (2.0 * h);
        const double ana = analytic[k](i, j);
        const double err =
            std::abs(num - ana) / std::max({1.0, std::abs(num), std::abs(ana)});
        if (err > res.max_rel_err) {
          std::ostringstream os;
          os << "param " << k << " (" << i << "," << j << "): analytic " << ana
             << " vs numeric " << num;
          res.max_rel_err = err;
          res.where = os.str();
        }
      }
    }
  }
  return res;
}

inline tem::ad::Mat rand_mat(tem::Rng& rng, Eigen::Index rows, Eigen::Index cols,
                             double lo = -1.0, double hi = 1.0) {
  tem::ad::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Entries bounded away from zero, for kinked ops (relu and friends).
inline tem::ad::Mat rand_mat_away_from(tem::Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                       double margin) {
  tem::ad::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double mag = rng.uniform(margin, 1.0);
      m(i, j) = rng.uniform01() < 0.5 ? -mag : mag;
    }
  return m;
}

inline Eigen::VectorXd rand_prob(tem::Rng& rng, int n, double floor = 0.05) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = floor + rng.uniform01();
  v /= v.sum();
  return v;
}

}  // namespace fd
