#include "tem/autodiff/tensor.hpp"

#include <atomic>
#include <sstream>
#include <stdexcept>

namespace tem::ad {

namespace {
std::atomic<std::uint64_t> g_next_id{1};
thread_local Graph* g_active = nullptr;
}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

detail::TensorData::TensorData() : id(g_next_id.fetch_add(1)) {}

Tensor Tensor::scalar(double v, bool requires_grad) {
  Mat m(1, 1);
  m(0, 0) = v;
  return make_tensor(std::move(m), {}, requires_grad);
}

Tensor Tensor::vector(const Eigen::VectorXd& v, bool requires_grad) {
  Mat m(1, v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) m(0, i) = v[i];
  return make_tensor(std::move(m), {v.size()}, requires_grad);
}

Tensor Tensor::matrix(Mat m, bool requires_grad) {
  Shape s{m.rows(), m.cols()};
  return make_tensor(std::move(m), std::move(s), requires_grad);
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  Eigen::Index rows = 1, cols = 1;
  if (shape.size() == 1) {
    cols = shape[0];
  } else if (shape.size() == 2) {
    rows = shape[0];
    cols = shape[1];
  } else if (shape.size() > 2) {
    throw std::invalid_argument("zeros: rank > 2 unsupported " + shape_str(shape));
  }
  return make_tensor(Mat::Zero(rows, cols), shape, requires_grad);
}

double Tensor::item() const {
  if (d_->value.size() != 1)
    throw std::invalid_argument("item: tensor is not scalar, shape " + shape_str(d_->shape));
  return d_->value(0, 0);
}

Eigen::VectorXd Tensor::vec() const {
  if (rank() != 1)
    throw std::invalid_argument("vec: tensor is not rank 1, shape " + shape_str(d_->shape));
  return d_->value.row(0).transpose();
}

const Mat& Tensor::grad() const {
  if (!has_grad()) throw std::runtime_error("grad: no gradient accumulated");
  return d_->grad;
}

void Tensor::accumulate_grad(const Mat& g) {
  if (d_->grad.size() == 0)
    d_->grad = g;
  else
    d_->grad += g;
}

Tensor make_tensor(Mat storage, Shape shape, bool requires_grad) {
  Eigen::Index expect = 1;
  for (auto d : shape) expect *= d;
  if (storage.size() != expect)
    throw std::invalid_argument("make_tensor: storage size " + std::to_string(storage.size()) +
                                " does not match shape " + shape_str(shape));
  auto d = std::make_shared<detail::TensorData>();
  d->value = std::move(storage);
  d->shape = std::move(shape);
  d->requires_grad = requires_grad;
  Tensor t;
  t = Tensor(std::move(d));
  return t;
}

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::MatMul: return "matmul";
    case OpKind::Transpose: return "transpose";
    case OpKind::Linear: return "linear";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Relu: return "relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Softmax: return "softmax";
    case OpKind::MaskedSoftmax: return "masked_softmax";
    case OpKind::Concat: return "concat";
    case OpKind::Gather: return "gather";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::MeanRows: return "mean_rows";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::KlCategorical: return "kl_categorical";
    case OpKind::Clamp: return "clamp";
    case OpKind::Minimum: return "minimum";
    case OpKind::Maximum: return "maximum";
    case OpKind::GruCell: return "gru_cell";
    case OpKind::Reshape: return "reshape";
  }
  return "?";
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1 || loss.rank() != 0)
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  if (!loss.requires_grad()) return;  // loss not connected to any parameter
  loss.data()->grad = Mat::Ones(1, 1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output.has_grad()) it->backward();
  }
}

Graph* active_graph() { return g_active; }

Recording::Recording(Graph& g) : prev_(g_active) { g_active = &g; }

Recording::~Recording() { g_active = prev_; }

NoRecording::NoRecording() : prev_(g_active) { g_active = nullptr; }

NoRecording::~NoRecording() { g_active = prev_; }

}  // namespace tem::ad
