#include "tem/autodiff/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace tem::ad {

namespace {

using detail::TensorData;
using DataPtr = std::shared_ptr<TensorData>;

bool tracking(std::initializer_list<const Tensor*> ins) {
  if (!active_graph()) return false;
  for (const Tensor* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

void accum(const DataPtr& d, const Mat& g) {
  if (d->grad.size() == 0)
    d->grad = g;
  else
    d->grad += g;
}

void record(OpKind kind, std::vector<Tensor> ins, Tensor out, std::function<void()> bw) {
  active_graph()->record(Node{kind, std::move(ins), std::move(out), std::move(bw)});
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

enum class BcMode { Same, RowVec, ScalarRight };

BcMode additive_mode(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return BcMode::Same;
  if (a.rank() == 2 && b.rank() == 1 && b.size() == a.value().cols()) return BcMode::RowVec;
  if (b.rank() == 0) return BcMode::ScalarRight;
  shape_error(op, a, b);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const BcMode mode = additive_mode("add", a, b);
  Mat out;
  switch (mode) {
    case BcMode::Same: out = a.value() + b.value(); break;
    case BcMode::RowVec: out = a.value().rowwise() + b.value().row(0); break;
    case BcMode::ScalarRight: out = a.value().array() + b.item(); break;
  }
  const bool track = tracking({&a, &b});
  Tensor r = make_tensor(std::move(out), a.shape(), track);
  if (track) {
    record(OpKind::Add, {a, b}, r, [ad = a.data(), bd = b.data(), rd = r.data(), mode] {
      const Mat& g = rd->grad;
      if (ad->requires_grad) accum(ad, g);
      if (bd->requires_grad) {
        if (mode == BcMode::Same) {
          accum(bd, g);
        } else if (mode == BcMode::RowVec) {
          accum(bd, g.colwise().sum());
        } else {
          Mat s(1, 1);
          s(0, 0) = g.sum();
          accum(bd, s);
        }
      }
    });
  }
  return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const BcMode mode = additive_mode("sub", a, b);
  Mat out;
  switch (mode) {
    case BcMode::Same: out = a.value() - b.value(); break;
    case BcMode::RowVec: out = a.value().rowwise() - b.value().row(0); break;
    case BcMode::ScalarRight: out = a.value().array() - b.item(); break;
  }
  const bool track = tracking({&a, &b});
  Tensor r = make_tensor(std::move(out), a.shape(), track);
  if (track) {
    record(OpKind::Sub, {a, b}, r, [ad = a.data(), bd = b.data(), rd = r.data(), mode] {
      const Mat& g = rd->grad;
      if (ad->requires_grad) accum(ad, g);
      if (bd->requires_grad) {
        if (mode == BcMode::Same) {
          accum(bd, -g);
        } else if (mode == BcMode::RowVec) {
          accum(bd, Mat(-g.colwise().sum()));
        } else {
          Mat s(1, 1);
          s(0, 0) = -g.sum();
          accum(bd, s);
        }
      }
    });
  }
  return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  enum class M { Same, ScalarRight, ScalarLeft };
  M mode;
  Mat out;
  Shape shape;
  if (a.shape() == b.shape()) {
    mode = M::Same;
    out = a.value().cwiseProduct(b.value());
    shape = a.shape();
  } else if (b.rank() == 0) {
    mode = M::ScalarRight;
    out = a.value() * b.item();
    shape = a.shape();
  } else if (a.rank() == 0) {
    mode = M::ScalarLeft;
    out = b.value() * a.item();
    shape = b.shape();
  } else {
    shape_error("mul", a, b);
  }
  const bool track = tracking({&a, &b});
  Tensor r = make_tensor(std::move(out), shape, track);
  if (track) {
    record(OpKind::Mul, {a, b}, r, [ad = a.data(), bd = b.data(), rd = r.data(), mode] {
      const Mat& g = rd->grad;
      if (mode == M::Same) {
        if (ad->requires_grad) accum(ad, g.cwiseProduct(bd->value));
        if (bd->requires_grad) accum(bd, g.cwiseProduct(ad->value));
      } else if (mode == M::ScalarRight) {
        if (ad->requires_grad) accum(ad, Mat(g * bd->value(0, 0)));
        if (bd->requires_grad) {
          Mat s(1, 1);
          s(0, 0) = g.cwiseProduct(ad->value).sum();
          accum(bd, s);
        }
      } else {
        if (bd->requires_grad) accum(bd, Mat(g * ad->value(0, 0)));
        if (ad->requires_grad) {
          Mat s(1, 1);
          s(0, 0) = g.cwiseProduct(bd->value).sum();
          accum(ad, s);
        }
      }
    });
  }
  return r;
}

Tensor scale(const Tensor& a, double c) {
  const bool track = tracking({&a});
  Tensor r = make_tensor(Mat(a.value() * c), a.shape(), track);
  if (track) {
    record(OpKind::Scale, {a}, r, [ad = a.data(), rd = r.data(), c] {
      accum(ad, Mat(rd->grad * c));
    });
  }
  return r;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || b.rank() != 2) shape_error("matmul", a, b);
  if (a.value().cols() != b.value().rows()) shape_error("matmul", a, b);
  Mat out = a.value() * b.value();
  Shape shape = a.rank() == 1 ? Shape{b.value().cols()} : Shape{a.value().rows(), b.value().cols()};
  const bool track = tracking({&a, &b});
  Tensor r = make_tensor(std::move(out), std::move(shape), track);
  if (track) {
    record(OpKind::MatMul, {a, b}, r, [ad = a.data(), bd = b.data(), rd = r.data()] {
      const Mat& g = rd->grad;
      if (ad->requires_grad) accum(ad, Mat(g * bd->value.transpose()));
      if (bd->requires_grad) accum(bd, Mat(ad->value.transpose() * g));
    });
  }
  return r;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() == 0) throw std::invalid_argument("transpose: scalar input");
  Mat out = a.value().transpose();
  Shape shape{out.rows(), out.cols()};
  const bool track = tracking({&a});
  Tensor r = make_tensor(std::move(out), std::move(shape), track);
  if (track) {
    record(OpKind::Transpose, {a}, r, [ad = a.data(), rd = r.data()] {
      accum(ad, Mat(rd->grad.transpose()));
    });
  }
  return r;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() < 1 || w.rank() != 2 || b.rank() != 1) shape_error("linear", x, w);
  if (x.value().cols() != w.value().rows() || b.size() != w.value().cols())
    shape_error("linear", x, w);
  Mat out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  Shape shape = x.rank() == 1 ? Shape{w.value().cols()} : Shape{x.value().rows(), w.value().cols()};
  const bool track = tracking({&x, &w, &b});
  Tensor r = make_tensor(std::move(out), std::move(shape), track);
  if (track) {
    record(OpKind::Linear, {x, w, b}, r,
           [xd = x.data(), wd = w.data(), bd = b.data(), rd = r.data()] {
             const Mat& g = rd->grad;
             if (xd->requires_grad) accum(xd, Mat(g * wd->value.transpose()));
             if (wd->requires_grad) accum(wd, Mat(xd->value.transpose() * g));
             if (bd->requires_grad) accum(bd, Mat(g.colwise().sum()));
           });
  }
  return r;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor elementwise(OpKind kind, const Tensor& a, Fwd fwd, Bwd bwd) {
  Mat out = fwd(a.value());
  const bool track = tracking({&a});
  Tensor r = make_tensor(std::move(out), a.shape(), track);
  if (track) {
    record(kind, {a}, r, [ad = a.data(), rd = r.data(), bwd] {
      accum(ad, bwd(rd->grad, ad->value, rd->value));
    });
  }
  return r;
}

}  // namespace

Tensor exp(const Tensor& a) {
  return elementwise(
      OpKind::Exp, a, [](const Mat& v) { return Mat(v.array().exp()); },
      [](const Mat& g, const Mat&, const Mat& y) { return Mat(g.cwiseProduct(y)); });
}

Tensor log(const Tensor& a) {
  return elementwise(
      OpKind::Log, a, [](const Mat& v) { return Mat(v.array().log()); },
      [](const Mat& g, const Mat& x, const Mat&) { return Mat(g.array() / x.array()); });
}

Tensor relu(const Tensor& a) {
  return elementwise(
      OpKind::Relu, a, [](const Mat& v) { return Mat(v.cwiseMax(0.0)); },
      [](const Mat& g, const Mat& x, const Mat&) {
        return Mat(g.cwiseProduct((x.array() > 0.0).cast<double>().matrix()));
      });
}

Tensor tanh(const Tensor& a) {
  return elementwise(
      OpKind::Tanh, a, [](const Mat& v) { return Mat(v.array().tanh()); },
      [](const Mat& g, const Mat&, const Mat& y) {
        return Mat(g.array() * (1.0 - y.array().square()));
      });
}

Tensor sigmoid(const Tensor& a) {
  return elementwise(
      OpKind::Sigmoid, a,
      [](const Mat& v) { return Mat(1.0 / (1.0 + (-v.array()).exp())); },
      [](const Mat& g, const Mat&, const Mat& y) {
        return Mat(g.array() * y.array() * (1.0 - y.array()));
      });
}

Tensor softmax(const Tensor& a) {
  if (a.rank() == 0) throw std::invalid_argument("softmax: scalar input");
  const Mat& v = a.value();
  Mat y(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    Eigen::ArrayXd e = (v.row(i).array() - m).exp();
    y.row(i) = e / e.sum();
  }
  const bool track = tracking({&a});
  Tensor r = make_tensor(std::move(y), a.shape(), track);
  if (track) {
    record(OpKind::Softmax, {a}, r, [ad = a.data(), rd = r.data()] {
      const Mat& g = rd->grad;
      const Mat& y = rd->value;
      Mat dx(g.rows(), g.cols());
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const double dot = g.row(i).cwiseProduct(y.row(i)).sum();
        dx.row(i) = (g.row(i).array() - dot) * y.row(i).array();
      }
      accum(ad, dx);
    });
  }
  return r;
}

Tensor masked_softmax(const Tensor& a, const std::vector<bool>& valid) {
  if (a.rank() != 1) throw std::invalid_argument("masked_softmax: vector input required");
  if (static_cast<Eigen::Index>(valid.size()) != a.size())
    throw std::invalid_argument("masked_softmax: mask length mismatch");
  const Mat& v = a.value();
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.cols(); ++i)
    if (valid[i]) m = std::max(m, v(0, i));
  if (!std::isfinite(m)) throw std::invalid_argument("masked_softmax: no valid entry");
  Mat y = Mat::Zero(1, v.cols());
  double z = 0.0;
  for (Eigen::Index i = 0; i < v.cols(); ++i) {
    if (!valid[i]) continue;
    y(0, i) = std::exp(v(0, i) - m);
    z += y(0, i);
  }
  y /= z;
  const bool track = tracking({&a});
  Tensor r = make_tensor(std::move(y), a.shape(), track);
  if (track) {
    record(OpKind::MaskedSoftmax, {a}, r, [ad = a.data(), rd = r.data(), valid] {
      const Mat& g = rd->grad;
      const Mat& y = rd->value;
      double dot = 0.0;
      for (Eigen::Index i = 0; i < g.cols(); ++i)
        if (valid[i]) dot += g(0, i) * y(0, i);
      Mat dx = Mat::Zero(1, g.cols());
      for (Eigen::Index i = 0; i < g.cols(); ++i)
        if (valid[i]) dx(0, i) = (g(0, i) - dot) * y(0, i);
      accum(ad, dx);
    });
  }
  return r;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1) shape_error("concat", a, b);
  const Eigen::Index n = a.size(), m = b.size();
  Mat out(1, n + m);
  out.leftCols(n) = a.value();
  out.rightCols(m) = b.value();
  const bool track = tracking({&a, &b});
  Tensor r = make_tensor(std::move(out), {n + m}, track);
  if (track) {
    record(OpKind::Concat, {a, b}, r, [ad = a.data(), bd = b.data(), rd = r.data(), n, m] {
      const Mat& g = rd->grad;
      if (ad->requires_grad) accum(ad, Mat(g.leftCols(n)));
      if (bd->requires_grad) accum(bd, Mat(g.rightCols(m)));
    });
  }
  return r;
}

Tensor gather(const Tensor& v, Eigen::Index index) {
  if (v.rank() != 1) throw std::invalid_argument("gather: vector input required");
  if (index < 0 || index >= v.size())
    throw std::out_of_range("gather: index " + std::to_string(index) + " out of range for " +
                            shape_str(v.shape()));
  const bool track = tracking({&v});
  Tensor r = Tensor::scalar(v.value()(0, index), track);
  if (track) {
    record(OpKind::Gather, {v}, r, [vd = v.data(), rd = r.data(), index] {
      Mat g = Mat::Zero(1, vd->value.cols());
      g(0, index) = rd->grad(0, 0);
      accum(vd, g);
    });
  }
  return r;
}

Tensor sum(const Tensor& a) {
  const bool track = tracking({&a});
  Tensor r = Tensor::scalar(a.value().sum(), track);
  if (track) {
    record(OpKind::Sum, {a}, r, [ad = a.data(), rd = r.data()] {
      accum(ad, Mat(Mat::Constant(ad->value.rows(), ad->value.cols(), rd->grad(0, 0))));
    });
  }
  return r;
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.size());
  const bool track = tracking({&a});
  Tensor r = Tensor::scalar(a.value().sum() / n, track);
  if (track) {
    record(OpKind::Mean, {a}, r, [ad = a.data(), rd = r.data(), n] {
      accum(ad, Mat(Mat::Constant(ad->value.rows(), ad->value.cols(), rd->grad(0, 0) / n)));
    });
  }
  return r;
}

Tensor mean_rows(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("mean_rows: matrix input required");
  const Eigen::Index rows = a.value().rows();
  Mat out = a.value().colwise().mean();
  const bool track = tracking({&a});
  Tensor r = make_tensor(std::move(out), {a.value().cols()}, track);
  if (track) {
    record(OpKind::MeanRows, {a}, r, [ad = a.data(), rd = r.data(), rows] {
      accum(ad, Mat(rd->grad.replicate(rows, 1) / static_cast<double>(rows)));
    });
  }
  return r;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() == 0 || gain.rank() != 1 || bias.rank() != 1)
    throw std::invalid_argument("layer_norm: bad ranks");
  const Eigen::Index n = x.value().cols();
  if (gain.size() != n || bias.size() != n)
    throw std::invalid_argument("layer_norm: gain/bias length " + std::to_string(gain.size()) +
                                " vs feature dim " + std::to_string(n));
  const Mat& v = x.value();
  Mat xhat(v.rows(), n);
  Eigen::VectorXd s(v.rows());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double mu = v.row(i).mean();
    const double var = (v.row(i).array() - mu).square().mean();
    s[i] = std::sqrt(var + eps);
    xhat.row(i) = (v.row(i).array() - mu) / s[i];
  }
  Mat out(v.rows(), n);
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    out.row(i) = xhat.row(i).cwiseProduct(gain.value().row(0)) + bias.value().row(0);
  const bool track = tracking({&x, &gain, &bias});
  Tensor r = make_tensor(std::move(out), x.shape(), track);
  if (track) {
    record(OpKind::LayerNorm, {x, gain, bias}, r,
           [xd = x.data(), gd = gain.data(), bd = bias.data(), rd = r.data(), xhat, s] {
             const Mat& g = rd->grad;
             if (xd->requires_grad) {
               Mat dx(g.rows(), g.cols());
               for (Eigen::Index i = 0; i < g.rows(); ++i) {
                 Eigen::ArrayXd t = g.row(i).array() * gd->value.row(0).array();
                 const double mt = t.mean();
                 const double mtx = (t * xhat.row(i).transpose().array()).mean();
                 dx.row(i) = (t - mt - xhat.row(i).transpose().array() * mtx) / s[i];
               }
               accum(xd, dx);
             }
             if (gd->requires_grad) accum(gd, Mat(g.cwiseProduct(xhat).colwise().sum()));
             if (bd->requires_grad) accum(bd, Mat(g.colwise().sum()));
           });
  }
  return r;
}

namespace {
constexpr double kQFloor = 1e-10;
}

Tensor kl_categorical(const Tensor& p, const Tensor& q) {
  if (p.rank() != 1 || q.rank() != 1 || p.size() != q.size())
    throw std::invalid_argument("kl_categorical: length mismatch " + shape_str(p.shape()) +
                                " vs " + shape_str(q.shape()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p.value()(0, i);
    if (pi == 0.0) continue;
    const double qi = std::max(q.value()(0, i), kQFloor);
    acc += pi * std::log(pi / qi);
  }
  const bool track = tracking({&p, &q});
  Tensor r = Tensor::scalar(acc, track);
  if (track) {
    record(OpKind::KlCategorical, {p, q}, r, [pd = p.data(), qd = q.data(), rd = r.data()] {
      const double g = rd->grad(0, 0);
      const Eigen::Index n = pd->value.cols();
      if (pd->requires_grad) {
        Mat dp = Mat::Zero(1, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double pi = pd->value(0, i);
          if (pi <= 0.0) continue;
          const double qi = std::max(qd->value(0, i), kQFloor);
          dp(0, i) = g * (std::log(pi / qi) + 1.0);
        }
        accum(pd, dp);
      }
      if (qd->requires_grad) {
        Mat dq = Mat::Zero(1, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double pi = pd->value(0, i);
          const double qi = qd->value(0, i);
          if (pi > 0.0 && qi >= kQFloor) dq(0, i) = -g * pi / qi;
        }
        accum(qd, dq);
      }
    });
  }
  return r;
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  const bool track = tracking({&x});
  Tensor r = make_tensor(Mat(x.value().cwiseMax(lo).cwiseMin(hi)), x.shape(), track);
  if (track) {
    record(OpKind::Clamp, {x}, r, [xd = x.data(), rd = r.data(), lo, hi] {
      Mat mask = ((xd->value.array() >= lo) && (xd->value.array() <= hi)).cast<double>();
      accum(xd, Mat(rd->grad.cwiseProduct(mask)));
    });
  }
  return r;
}

namespace {

Tensor extremum(OpKind kind, const Tensor& a, const Tensor& b, bool take_min) {
  if (a.shape() != b.shape()) shape_error(take_min ? "minimum" : "maximum", a, b);
  Mat pick_a = take_min ? (a.value().array() <= b.value().array()).cast<double>().matrix()
                        : (a.value().array() >= b.value().array()).cast<double>().matrix();
  Mat out = pick_a.cwiseProduct(a.value()) + (1.0 - pick_a.array()).matrix().cwiseProduct(b.value());
  const bool track = tracking({&a, &b});
  Tensor r = make_tensor(std::move(out), a.shape(), track);
  if (track) {
    record(kind, {a, b}, r, [ad = a.data(), bd = b.data(), rd = r.data(), pick_a] {
      const Mat& g = rd->grad;
      if (ad->requires_grad) accum(ad, Mat(g.cwiseProduct(pick_a)));
      if (bd->requires_grad)
        accum(bd, Mat(g.cwiseProduct(Mat((1.0 - pick_a.array()).matrix()))));
    });
  }
  return r;
}

}  // namespace

Tensor minimum(const Tensor& a, const Tensor& b) { return extremum(OpKind::Minimum, a, b, true); }

Tensor maximum(const Tensor& a, const Tensor& b) { return extremum(OpKind::Maximum, a, b, false); }

Tensor reshape(const Tensor& a, const Shape& shape) {
  Eigen::Index rows = 1, cols = 1;
  if (shape.size() == 1) {
    cols = shape[0];
  } else if (shape.size() == 2) {
    rows = shape[0];
    cols = shape[1];
  }
  if (rows * cols != a.size())
    throw std::invalid_argument("reshape: element count mismatch " + shape_str(a.shape()) +
                                " -> " + shape_str(shape));
  Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  const bool track = tracking({&a});
  Tensor r = make_tensor(std::move(out), shape, track);
  if (track) {
    record(OpKind::Reshape, {a}, r, [ad = a.data(), rd = r.data()] {
      accum(ad, Mat(Eigen::Map<const Mat>(rd->grad.data(), ad->value.rows(), ad->value.cols())));
    });
  }
  return r;
}

Tensor stop_gradient(const Tensor& a) {
  return make_tensor(Mat(a.value()), a.shape(), false);
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p) {
  if (x.rank() != 1 || h.rank() != 1) throw std::invalid_argument("gru_cell: x, h must be vectors");
  const Eigen::Index din = x.size(), dh = h.size();
  auto check = [&](const Tensor& w, Eigen::Index r, Eigen::Index c, const char* name) {
    if (w.rank() != 2 || w.value().rows() != r || w.value().cols() != c)
      throw std::invalid_argument(std::string("gru_cell: ") + name + " expected [" +
                                  std::to_string(r) + "," + std::to_string(c) + "], got " +
                                  shape_str(w.shape()));
  };
  check(p.wxz, din, dh, "wxz"); check(p.whz, dh, dh, "whz");
  check(p.wxr, din, dh, "wxr"); check(p.whr, dh, dh, "whr");
  check(p.wxn, din, dh, "wxn"); check(p.whn, dh, dh, "whn");
  if (p.bz.size() != dh || p.br.size() != dh || p.bn.size() != dh)
    throw std::invalid_argument("gru_cell: bias length mismatch");

  const Mat& xv = x.value();
  const Mat& hv = h.value();
  Mat z = 1.0 / (1.0 + (-(xv * p.wxz.value() + hv * p.whz.value() + p.bz.value()).array()).exp());
  Mat r = 1.0 / (1.0 + (-(xv * p.wxr.value() + hv * p.whr.value() + p.br.value()).array()).exp());
  Mat c = hv * p.whn.value();
  Mat n = (xv * p.wxn.value() + r.cwiseProduct(c) + p.bn.value()).array().tanh();
  Mat out = (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(hv);

  const bool track =
      tracking({&x, &h, &p.wxz, &p.whz, &p.bz, &p.wxr, &p.whr, &p.br, &p.wxn, &p.whn, &p.bn});
  Tensor res = make_tensor(std::move(out), {dh}, track);
  if (track) {
    record(OpKind::GruCell,
           {x, h, p.wxz, p.whz, p.bz, p.wxr, p.whr, p.br, p.wxn, p.whn, p.bn}, res,
           [xd = x.data(), hd = h.data(), wxz = p.wxz.data(), whz = p.whz.data(),
            bz = p.bz.data(), wxr = p.wxr.data(), whr = p.whr.data(), br = p.br.data(),
            wxn = p.wxn.data(), whn = p.whn.data(), bn = p.bn.data(), rd = res.data(),
            z, r, c, n] {
             const Mat& g = rd->grad;
             const Mat& xv = xd->value;
             const Mat& hv = hd->value;
             Mat dz = g.cwiseProduct(hv - n);
             Mat dn = g.cwiseProduct(Mat((1.0 - z.array()).matrix()));
             Mat dh = g.cwiseProduct(z);

             Mat du = dn.cwiseProduct(Mat((1.0 - n.array().square()).matrix()));
             Mat dr = du.cwiseProduct(c);
             Mat dc = du.cwiseProduct(r);
             dh += dc * whn->value.transpose();

             Mat dv = dr.cwiseProduct(r).cwiseProduct(Mat((1.0 - r.array()).matrix()));
             dh += dv * whr->value.transpose();

             Mat dw = dz.cwiseProduct(z).cwiseProduct(Mat((1.0 - z.array()).matrix()));
             dh += dw * whz->value.transpose();

             if (xd->requires_grad)
               accum(xd, Mat(du * wxn->value.transpose() + dv * wxr->value.transpose() +
                             dw * wxz->value.transpose()));
             if (hd->requires_grad) accum(hd, dh);
             if (wxn->requires_grad) accum(wxn, Mat(xv.transpose() * du));
             if (whn->requires_grad) accum(whn, Mat(hv.transpose() * dc));
             if (bn->requires_grad) accum(bn, du);
             if (wxr->requires_grad) accum(wxr, Mat(xv.transpose() * dv));
             if (whr->requires_grad) accum(whr, Mat(hv.transpose() * dv));
             if (br->requires_grad) accum(br, dv);
             if (wxz->requires_grad) accum(wxz, Mat(xv.transpose() * dw));
             if (whz->requires_grad) accum(whz, Mat(hv.transpose() * dw));
             if (bz->requires_grad) accum(bz, dw);
           });
  }
  return res;
}

}  // namespace tem::ad
