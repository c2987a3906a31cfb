#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spiralmesh/mesh.hpp"
#include "spiralmesh/random.hpp"
#include "spiralmesh/sparse.hpp"
#include "spiralmesh/spiral.hpp"

namespace spiralmesh {

/// Dense row-major real matrix; every tensor in the engine is 2-D.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable tensor plus its Adam state.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  std::int64_t step_count = 0;

  Parameter() = default;
  Parameter(std::string name, Matrix init);

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

/// A recorded tensor: value, gradient buffer and the backward rule that
/// pushes its gradient to its parents.
struct Tensor {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<int> parents;
  std::function<void(const Matrix& grad_out, std::span<Tensor*> parents)> backward;
  Parameter* parameter = nullptr;

  std::vector<Eigen::Index> shape() const { return {value.rows(), value.cols()}; }
};

class Graph;

/// Handle to a tensor recorded in a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  int id() const { return id_; }
  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Tape of tensors in creation (topological) order.
///
/// backward() walks the tape in exact reverse order; gradients of a tensor
/// used several times accumulate additively. Parameter leaves add their
/// gradient into Parameter::grad, so a graph may be rebuilt per step while
/// gradients are summed across graphs until zero_grad().
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  Var parameter(Parameter& p);

  /// Records an op result. `backward` receives d(loss)/d(result) and the
  /// parent tensors, and adds into the grad of each parent that requires it.
  Var record(Matrix value, std::vector<Var> parents,
             std::function<void(const Matrix&, std::span<Tensor*>)> backward);

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and back-propagates.
  /// Gradients of recorded ops are released once pushed to their parents;
  /// constants and variables keep theirs.
  void backward(Var out);

  Tensor& tensor(int id) { return tensors_[id]; }
  const Tensor& tensor(int id) const { return tensors_[id]; }
  std::size_t size() const { return tensors_.size(); }

 private:
  std::vector<Tensor> tensors_;
};

// --- primitives -----------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// x (n x F) plus the 1 x F row `bias` on every row.
Var add_bias(Var x, Var bias);
Var scale(Var x, double factor);
Var sum(Var x);
Var reshape(Var x, Eigen::Index rows, Eigen::Index cols);

/// Spiral gather over a batch of `batch` stacked meshes.
///
/// x is (batch*n) x F and indices is n x l. Row (b*n + i) of the result is
/// the concatenation of rows b*n + indices(i, j) for j = 0..l-1; kSentinel
/// entries contribute a zero block. `indices` must outlive the graph.
Var gather_rows(Var x, const IndexMatrix& indices, Eigen::Index batch = 1);

enum class Activation { Identity, Elu };

/// add_bias(matmul(gather_rows(x, indices, batch), weight), bias) as one op,
/// optionally followed by elu(). The gathered matrix is built a block of rows
/// at a time and rebuilt in backward instead of being stored. `indices` must
/// outlive the graph.
Var gather_affine(Var x, const IndexMatrix& indices, Var weight, Var bias, Eigen::Index batch = 1,
                  Activation activation = Activation::Identity);

/// Column-wise concatenation of tensors with equal row counts.
Var concat_cols(std::span<const Var> parts);

/// Exponential linear unit with alpha = 1.
Var elu(Var x);

/// Inverted dropout; identity when !training or p == 0.
Var dropout(Var x, double p, bool training, Rng& rng);

/// Block-diagonal S * x: x is (batch * S.cols()) x F. `s` must outlive the graph.
Var sparse_apply(const SparseMatrix& s, Var x);

/// Mean over rows of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, std::span<const Index> labels);

Var mean_squared_error(Var prediction, const Matrix& target);

/// Mean over rows of the Euclidean distance between prediction and target
/// rows. The subgradient at a zero residual is taken as 0.
Var mean_euclidean_distance(Var prediction, const Matrix& target);

double elu_value(double x);

}  // namespace spiralmesh
