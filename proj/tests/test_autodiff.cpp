#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fd_check.hpp"
#include "grad_suite.hpp"
#include "tem/autodiff/adam.hpp"
#include "tem/autodiff/ops.hpp"

#include <cmath>

using namespace tem::ad;
using tem::Rng;

namespace {

Tensor vec(std::initializer_list<double> xs, bool rg = false) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return Tensor::vector(v, rg);
}

}  // namespace

TEST_CASE("matmul identity and hand-computed cases") {
  Mat id = Mat::Identity(2, 2);
  Mat a(2, 2);
  a << 1, 2, 3, 4;
  Tensor r = matmul(Tensor::matrix(id), Tensor::matrix(a));
  CHECK(r.value() == a);

  Mat row(1, 2), col(2, 1);
  row << 1, 2;
  col << 3, 4;
  Tensor s = matmul(Tensor::matrix(row), Tensor::matrix(col));
  CHECK(s.value()(0, 0) == doctest::Approx(11.0).epsilon(1e-12));
}

TEST_CASE("matmul rejects mismatched inner dimensions with both shapes reported") {
  Tensor a = Tensor::matrix(Mat::Zero(2, 3));
  Tensor b = Tensor::matrix(Mat::Zero(4, 2));
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), std::invalid_argument);
}

TEST_CASE("softmax hand cases") {
  Tensor a = softmax(vec({0.0, 0.0}));
  CHECK(a.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(a.value()(0, 1) == doctest::Approx(0.5).epsilon(1e-12));

  Tensor big = softmax(vec({1000.0, 1000.0, 1000.0}));
  for (int i = 0; i < 3; ++i) {
    CHECK(std::isfinite(big.value()(0, i)));
    CHECK(big.value()(0, i) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  Tensor logs = softmax(vec({std::log(1.0), std::log(2.0), std::log(3.0)}));
  CHECK(logs.value()(0, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(logs.value()(0, 1) == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
  CHECK(logs.value()(0, 2) == doctest::Approx(3.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and lie in (0,1)") {
  Rng rng(7);
  for (int k = 0; k < 25; ++k) {
    Tensor m = Tensor::matrix(fd::rand_mat(rng, 4, 6, -10, 10));
    Tensor y = softmax(m);
    for (Eigen::Index i = 0; i < 4; ++i) {
      CHECK(std::abs(y.value().row(i).sum() - 1.0) < 1e-9);
      for (Eigen::Index j = 0; j < 6; ++j) {
        CHECK(y.value()(i, j) > 0.0);
        CHECK(y.value()(i, j) < 1.0);
      }
    }
  }
}

TEST_CASE("kl_categorical values and naive-loop oracle") {
  CHECK(kl_categorical(vec({0.3, 0.7}), vec({0.3, 0.7})).item() == doctest::Approx(0.0));
  CHECK(kl_categorical(vec({1.0, 0.0}), vec({0.5, 0.5})).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(11);
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd p = fd::rand_prob(rng, 6), q = fd::rand_prob(rng, 6);
    const double got = kl_categorical(Tensor::vector(p), Tensor::vector(q)).item();
    double want = 0.0;
    for (int i = 0; i < 6; ++i) {
      if (p[i] == 0.0) continue;
      want += p[i] * std::log(p[i] / std::max(q[i], 1e-10));
    }
    CHECK(got == want);
    CHECK(got >= 0.0);
  }
}

TEST_CASE("kl_categorical is zero iff p equals q") {
  Rng rng(13);
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd p = fd::rand_prob(rng, 4);
    CHECK(kl_categorical(Tensor::vector(p), Tensor::vector(p)).item() < 1e-9);
    Eigen::VectorXd q = fd::rand_prob(rng, 4);
    if ((p - q).lpNorm<Eigen::Infinity>() > 1e-6)
      CHECK(kl_categorical(Tensor::vector(p), Tensor::vector(q)).item() > 1e-9);
  }
  CHECK_THROWS_AS(kl_categorical(vec({0.5, 0.5}), vec({1.0, 0.0, 0.0})), std::invalid_argument);
}

TEST_CASE("gru_cell zero parameters give zero output") {
  const int din = 3, dh = 4;
  GruParams p;
  p.wxz = Tensor::zeros({din, dh}); p.whz = Tensor::zeros({dh, dh}); p.bz = Tensor::zeros({dh});
  p.wxr = Tensor::zeros({din, dh}); p.whr = Tensor::zeros({dh, dh}); p.br = Tensor::zeros({dh});
  p.wxn = Tensor::zeros({din, dh}); p.whn = Tensor::zeros({dh, dh}); p.bn = Tensor::zeros({dh});
  Tensor x = vec({0.4, -0.2, 0.9});
  Tensor h = Tensor::zeros({dh});
  Tensor out = gru_cell(x, h, p);
  CHECK(out.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gru_cell converges to a fixed point on constant input") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const int din = 3, dh = 4;
    GruParams p;
    auto mk = [&](int r, int c) { return Tensor::matrix(fd::rand_mat(rng, r, c, -0.3, 0.3)); };
    p.wxz = mk(din, dh); p.whz = mk(dh, dh); p.bz = Tensor::zeros({dh});
    p.wxr = mk(din, dh); p.whr = mk(dh, dh); p.br = Tensor::zeros({dh});
    p.wxn = mk(din, dh); p.whn = mk(dh, dh); p.bn = Tensor::zeros({dh});
    Tensor x = Tensor::vector(fd::rand_mat(rng, 1, din).row(0).transpose());
    Eigen::VectorXd h = Eigen::VectorXd::Zero(dh);
    double prev_delta = 1e9;
    for (int t = 0; t < 60; ++t) {
      Eigen::VectorXd next = gru_cell(x, Tensor::vector(h), p).vec();
      const double delta = (next - h).norm();
      if (t > 10) CHECK(delta <= prev_delta + 1e-12);
      prev_delta = delta;
      h = next;
    }
    CHECK(prev_delta < 1e-3);
  }
}

TEST_CASE("backward of sum(W x) fills grad(W) with x broadcast over rows") {
  Mat w(3, 2);
  w << 1, 2, 3, 4, 5, 6;
  Mat x(2, 1);
  x << 0.5, -1.5;
  Tensor W = Tensor::matrix(w, true);
  Graph g;
  {
    Recording rec(g);
    Tensor loss = sum(matmul(W, Tensor::matrix(x)));
    g.backward(loss);
  }
  for (int i = 0; i < 3; ++i) {
    CHECK(W.grad()(i, 0) == doctest::Approx(0.5));
    CHECK(W.grad()(i, 1) == doctest::Approx(-1.5));
  }
}

TEST_CASE("composite mlp + softmax + kl matches finite differences") {
  Rng rng(23);
  for (int k = 0; k < 20; ++k) {
    Tensor w1 = Tensor::matrix(fd::rand_mat(rng, 4, 5), true);
    Tensor b1 = Tensor::vector(fd::rand_mat(rng, 1, 5).row(0).transpose(), true);
    Tensor w2 = Tensor::matrix(fd::rand_mat(rng, 5, 3), true);
    Tensor b2 = Tensor::vector(fd::rand_mat(rng, 1, 3).row(0).transpose(), true);
    Tensor x = Tensor::vector(fd::rand_mat(rng, 1, 4).row(0).transpose(), false);
    Tensor target = Tensor::vector(fd::rand_prob(rng, 3), false);
    auto loss = [&] {
      Tensor hid = tanh(linear(x, w1, b1));
      Tensor dist = softmax(linear(hid, w2, b2));
      return kl_categorical(target, dist);
    };
    fd::Result r = fd::check({w1, b1, w2, b2}, loss);
    CHECK_MESSAGE(r.max_rel_err < 1e-4, r.where);
  }
}

TEST_CASE("stop_gradient blocks flow into its producers") {
  Tensor a = vec({0.8, -0.4}, true);   // producers of the detached path
  Tensor p = vec({0.2, 0.3}, true);
  Graph g;
  {
    Recording rec(g);
    Tensor gamma = sum(mul(a, a));
    Tensor coeff = stop_gradient(gamma);
    Tensor loss = mul(coeff, sum(log(exp(p))));
    g.backward(loss);
  }
  CHECK_FALSE(a.has_grad());
  CHECK(p.has_grad());
  CHECK(p.grad().cwiseAbs().minCoeff() > 0.0);
}

TEST_CASE("backward requires a scalar loss") {
  Tensor a = vec({1.0, 2.0}, true);
  Graph g;
  Recording rec(g);
  Tensor y = mul(a, a);
  CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
}

TEST_CASE("identical graph and inputs give bit-identical outputs and gradients") {
  auto run = [](Mat& grad_out) {
    Rng rng(31);
    Tensor w = Tensor::matrix(fd::rand_mat(rng, 4, 4), true);
    Tensor x = Tensor::vector(fd::rand_mat(rng, 1, 4).row(0).transpose());
    Graph g;
    double loss_val;
    {
      Recording rec(g);
      Tensor y = softmax(linear(tanh(linear(x, w, Tensor::zeros({4}))), w, Tensor::zeros({4})));
      Tensor loss = sum(mul(y, y));
      g.backward(loss);
      loss_val = loss.item();
    }
    grad_out = w.grad();
    return loss_val;
  };
  Mat g1, g2;
  const double l1 = run(g1), l2 = run(g2);
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("tape order is topological: inputs precede outputs") {
  Rng rng(37);
  Tensor w = Tensor::matrix(fd::rand_mat(rng, 3, 3), true);
  Tensor x = Tensor::vector(fd::rand_mat(rng, 1, 3).row(0).transpose());
  Graph g;
  {
    Recording rec(g);
    Tensor y = sum(softmax(linear(tanh(matmul(x, w)), w, Tensor::zeros({3}))));
    g.backward(y);
  }
  REQUIRE(g.size() > 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Node& n = g.node(i);
    for (const Tensor& in : n.inputs) CHECK(in.id() < n.output.id());
  }
}

TEST_CASE("no recording happens without an active graph") {
  Tensor a = vec({1.0, -1.0}, true);
  Tensor y = mul(a, a);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("finite-difference sweep across every op kind") {
  for (const auto& chk : fd::op_gradient_checks()) {
    fd::Result r = chk.run(20, 0x5eed);
    CHECK_MESSAGE(r.max_rel_err < 1e-4, chk.name << ": " << r.where);
  }
}

TEST_CASE("masked_softmax zeros invalid slots exactly") {
  Rng rng(41);
  for (int k = 0; k < 50; ++k) {
    Tensor a = Tensor::vector(fd::rand_mat(rng, 1, 5, -40, 40).row(0).transpose());
    std::vector<bool> valid{true, false, true, rng.uniform01() < 0.5, false};
    Tensor y = masked_softmax(a, valid);
    double total = 0.0;
    for (int i = 0; i < 5; ++i) {
      if (!valid[i]) CHECK(y.value()(0, i) == 0.0);
      total += y.value()(0, i);
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("adam leaves parameters untouched when no gradient accumulated") {
  Tensor p = vec({1.0, 2.0}, true);
  Mat before = p.value();
  Adam opt({p}, 1e-2);
  opt.step();
  CHECK(p.value() == before);
}

TEST_CASE("clip_grad_norm caps the global gradient norm") {
  Tensor a = vec({1.0, 1.0}, true);
  Tensor b = vec({1.0, 1.0, 1.0}, true);
  a.accumulate_grad(Mat::Constant(1, 2, 3.0));
  b.accumulate_grad(Mat::Constant(1, 3, 4.0));
  const double pre = clip_grad_norm({a, b}, 1.0);
  CHECK(pre == doctest::Approx(std::sqrt(9.0 * 2 + 16.0 * 3)));
  double sq = a.grad().squaredNorm() + b.grad().squaredNorm();
  CHECK(std::sqrt(sq) == doctest::Approx(1.0));
}
