#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tem::ad {

// Row-major dense storage. Scalars are held as 1x1, vectors as 1xN rows.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Logical shape: rank 0 (scalar), 1 (vector) or 2 (matrix).
using Shape = std::vector<Eigen::Index>;

std::string shape_str(const Shape& s);

namespace detail {
struct TensorData {
  Mat value;
  Mat grad;  // empty until a backward pass reaches this tensor
  Shape shape;
  bool requires_grad = false;
  std::uint64_t id = 0;  // creation serial, used for topological checks
  TensorData();
};
}  // namespace detail

// Shared handle to a value participating in differentiable computation.
class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor vector(const Eigen::VectorXd& v, bool requires_grad = false);
  static Tensor matrix(Mat m, bool requires_grad = false);
  static Tensor zeros(const Shape& shape, bool requires_grad = false);

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  int rank() const { return static_cast<int>(d_->shape.size()); }
  Eigen::Index size() const { return d_->value.size(); }

  const Mat& value() const { return d_->value; }
  Mat& raw() { return d_->value; }
  double item() const;
  Eigen::VectorXd vec() const;  // rank-1 contents as a column vector copy

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool rg) { d_->requires_grad = rg; }
  bool has_grad() const { return d_->grad.size() != 0; }
  const Mat& grad() const;
  void zero_grad() { d_->grad.resize(0, 0); }
  void accumulate_grad(const Mat& g);

  std::shared_ptr<detail::TensorData> data() const { return d_; }
  std::uint64_t id() const { return d_->id; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorData> d) : d_(std::move(d)) {}
  std::shared_ptr<detail::TensorData> d_;
  friend Tensor make_tensor(Mat, Shape, bool);
};

// Builds a tensor around prepared storage; shape product must match.
Tensor make_tensor(Mat storage, Shape shape, bool requires_grad);

enum class OpKind {
  Add, Sub, Mul, Scale, MatMul, Transpose, Linear, Exp, Log, Relu, Tanh,
  Sigmoid, Softmax, MaskedSoftmax, Concat, Gather, Sum, Mean, MeanRows,
  LayerNorm, KlCategorical, Clamp, Minimum, Maximum, GruCell, Reshape,
};
const char* op_name(OpKind k);

struct Node {
  OpKind kind;
  std::vector<Tensor> inputs;
  Tensor output;
  std::function<void()> backward;
};

// Append-only tape. Nodes are recorded in execution order, which is a
// topological order of the computation; backward walks it once in reverse,
// accumulating gradients into every reachable tensor that requires them.
class Graph {
 public:
  void record(Node n) { nodes_.push_back(std::move(n)); }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  void backward(const Tensor& loss);
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

// Tape active on the current thread, or nullptr when not recording.
Graph* active_graph();

// Makes a graph the active tape for the current thread while alive.
class Recording {
 public:
  explicit Recording(Graph& g);
  ~Recording();
  Recording(const Recording&) = delete;
  Recording& operator=(const Recording&) = delete;

 private:
  Graph* prev_;
};

// Suspends recording while alive; forwards run value-only.
class NoRecording {
 public:
  NoRecording();
  ~NoRecording();
  NoRecording(const NoRecording&) = delete;
  NoRecording& operator=(const NoRecording&) = delete;

 private:
  Graph* prev_;
};

}  // namespace tem::ad
