#include "spiralmesh/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "spiralmesh/error.hpp"

namespace spiralmesh {

Parameter::Parameter(std::string name_, Matrix init)
    : name(std::move(name_)),
      value(std::move(init)),
      grad(Matrix::Zero(value.rows(), value.cols())),
      adam_m(Matrix::Zero(value.rows(), value.cols())),
      adam_v(Matrix::Zero(value.rows(), value.cols())) {}

const Matrix& Var::value() const { return graph_->tensor(id_).value; }
const Matrix& Var::grad() const { return graph_->tensor(id_).grad; }
bool Var::requires_grad() const { return graph_->tensor(id_).requires_grad; }

namespace {

template <typename Expr>
void accumulate(Tensor& t, const Expr& g) {
  if (!t.requires_grad) return;
  if (t.grad.size() == 0)
    t.grad = g;
  else
    t.grad += g;
}

void accumulate(Tensor& t, Matrix&& g) {
  if (!t.requires_grad) return;
  if (t.grad.size() == 0)
    t.grad = std::move(g);
  else
    t.grad += g;
}

// t.grad (+)= a * b without a temporary.
template <typename A, typename B>
void accumulate_product(Tensor& t, const A& a, const B& b) {
  if (!t.requires_grad) return;
  if (t.grad.size() == 0) {
    t.grad.resize(a.rows(), b.cols());
    t.grad.noalias() = a * b;
  } else {
    t.grad.noalias() += a * b;
  }
}

// Ensures t.grad exists (zero-filled) so that sparse scatters can add into it.
Matrix& grad_buffer(Tensor& t) {
  if (t.grad.size() == 0) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
  return t.grad;
}

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw Error("tensors belong to different graphs");
}

}  // namespace

Var Graph::constant(Matrix value) {
  Tensor t;
  t.value = std::move(value);
  tensors_.push_back(std::move(t));
  return Var(this, static_cast<int>(tensors_.size()) - 1);
}

Var Graph::variable(Matrix value) {
  Var v = constant(std::move(value));
  tensors_.back().requires_grad = true;
  return v;
}

Var Graph::parameter(Parameter& p) {
  Var v = constant(p.value);
  tensors_.back().requires_grad = true;
  tensors_.back().parameter = &p;
  return v;
}

Var Graph::record(Matrix value, std::vector<Var> parents,
                  std::function<void(const Matrix&, std::span<Tensor*>)> backward) {
  Tensor t;
  t.value = std::move(value);
  for (const Var& p : parents) {
    if (&p.graph() != this) throw Error("tensors belong to different graphs");
    t.parents.push_back(p.id());
    t.requires_grad = t.requires_grad || tensors_[p.id()].requires_grad;
  }
  if (t.requires_grad) t.backward = std::move(backward);
  tensors_.push_back(std::move(t));
  return Var(this, static_cast<int>(tensors_.size()) - 1);
}

void Graph::backward(Var out) {
  Tensor& root = tensors_[out.id()];
  if (root.value.rows() != 1 || root.value.cols() != 1)
    throw ShapeError("backward() needs a 1x1 output, got " + dims(root.value));
  if (!root.requires_grad) return;
  root.grad = Matrix::Constant(1, 1, 1.0);
  std::vector<Tensor*> parents;
  for (int id = out.id(); id >= 0; --id) {
    Tensor& t = tensors_[id];
    if (!t.requires_grad || t.grad.size() == 0) continue;
    if (t.parameter) {
      t.parameter->grad += t.grad;
      continue;
    }
    if (!t.backward) continue;
    parents.clear();
    for (int p : t.parents) parents.push_back(&tensors_[p]);
    t.backward(t.grad, parents);
    t.grad = Matrix();
  }
}

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + dims(a.value()) + " * " + dims(b.value()));
  Matrix out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  return a.graph().record(std::move(out), {a, b}, [](const Matrix& g, std::span<Tensor*> p) {
    accumulate_product(*p[0], g, p[1]->value.transpose());
    accumulate_product(*p[1], p[0]->value.transpose(), g);
  });
}

Var add(Var a, Var b) {
  require_same_graph(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("add: " + dims(a.value()) + " + " + dims(b.value()));
  return a.graph().record(a.value() + b.value(), {a, b},
                          [](const Matrix& g, std::span<Tensor*> p) {
                            accumulate(*p[0], g);
                            accumulate(*p[1], g);
                          });
}

Var add_bias(Var x, Var bias) {
  require_same_graph(x, bias);
  if (bias.rows() != 1 || bias.cols() != x.cols())
    throw ShapeError("add_bias: " + dims(x.value()) + " + " + dims(bias.value()));
  Matrix out = x.value();
  out.rowwise() += bias.value().row(0);
  return x.graph().record(std::move(out), {x, bias}, [](const Matrix& g, std::span<Tensor*> p) {
    accumulate(*p[0], g);
    if (p[1]->requires_grad) accumulate(*p[1], g.colwise().sum());
  });
}

Var scale(Var x, double factor) {
  return x.graph().record(x.value() * factor, {x},
                          [factor](const Matrix& g, std::span<Tensor*> p) {
                            accumulate(*p[0], g * factor);
                          });
}

Var sum(Var x) {
  return x.graph().record(Matrix::Constant(1, 1, x.value().sum()), {x},
                          [](const Matrix& g, std::span<Tensor*> p) {
                            accumulate(*p[0], Matrix::Constant(p[0]->value.rows(),
                                                               p[0]->value.cols(), g(0, 0)));
                          });
}

Var reshape(Var x, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != x.value().size())
    throw ShapeError("reshape: " + dims(x.value()) + " to " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  Matrix out = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  return x.graph().record(std::move(out), {x}, [](const Matrix& g, std::span<Tensor*> p) {
    accumulate(*p[0], Eigen::Map<const Matrix>(g.data(), p[0]->value.rows(), p[0]->value.cols()));
  });
}

Var gather_rows(Var x, const IndexMatrix& indices, Eigen::Index batch) {
  const Eigen::Index n = indices.rows(), l = indices.cols(), f = x.cols();
  if (batch < 1 || x.rows() != n * batch)
    throw ShapeError("gather_rows: features " + dims(x.value()) + " for " + std::to_string(batch) +
                     " x " + std::to_string(n) + " vertices");
  for (Eigen::Index i = 0; i < indices.size(); ++i) {
    const Index idx = indices.data()[i];
    if (idx != kSentinel && (idx < 0 || idx >= n))
      throw ShapeError("gather_rows: index " + std::to_string(idx) + " out of range for " +
                       std::to_string(n) + " rows");
  }
  Matrix out(x.rows(), l * f);
  const Matrix& xv = x.value();
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double* dst = out.data() + (b * n + i) * l * f;
      for (Eigen::Index j = 0; j < l; ++j) {
        const Index idx = indices(i, j);
        if (idx == kSentinel)
          std::fill_n(dst + j * f, f, 0.0);
        else
          std::memcpy(dst + j * f, xv.data() + (b * n + idx) * f, sizeof(double) * f);
      }
    }
  }
  return x.graph().record(std::move(out), {x},
                          [&indices, n, l, f, batch](const Matrix& g, std::span<Tensor*> p) {
                            if (!p[0]->requires_grad) return;
                            Matrix& dx = grad_buffer(*p[0]);
                            for (Eigen::Index b = 0; b < batch; ++b) {
                              for (Eigen::Index i = 0; i < n; ++i) {
                                const double* src = g.data() + (b * n + i) * l * f;
                                for (Eigen::Index j = 0; j < l; ++j) {
                                  const Index idx = indices(i, j);
                                  if (idx == kSentinel) continue;
                                  double* dst = dx.data() + (b * n + idx) * f;
                                  for (Eigen::Index k = 0; k < f; ++k) dst[k] += src[j * f + k];
                                }
                              }
                            }
                          });
}

namespace {

constexpr Eigen::Index kGatherBlockRows = 256;

// Rows [begin, begin + out.rows()) of gather_rows(x, indices, batch).
void gather_block(const Matrix& x, const IndexMatrix& indices, Eigen::Index begin, Matrix& out) {
  const Eigen::Index n = indices.rows(), l = indices.cols(), f = x.cols();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Eigen::Index row = begin + r, base = row - row % n, i = row % n;
    double* dst = out.data() + r * l * f;
    for (Eigen::Index j = 0; j < l; ++j) {
      const Index idx = indices(i, j);
      if (idx == kSentinel)
        std::fill_n(dst + j * f, f, 0.0);
      else
        std::memcpy(dst + j * f, x.data() + (base + idx) * f, sizeof(double) * f);
    }
  }
}

// Adds row r of `blocks` (l chunks of width w) into rows base + indices(i, j)
// of `target`, for the rows begin + r of the gathered layout.
void scatter_add_block(const Matrix& blocks, const IndexMatrix& indices, Eigen::Index begin,
                       Eigen::Index w, Matrix& target) {
  const Eigen::Index n = indices.rows(), l = indices.cols();
  for (Eigen::Index r = 0; r < blocks.rows(); ++r) {
    const Eigen::Index row = begin + r, base = row - row % n, i = row % n;
    const double* src = blocks.data() + r * l * w;
    for (Eigen::Index j = 0; j < l; ++j) {
      const Index idx = indices(i, j);
      if (idx == kSentinel) continue;
      double* dst = target.data() + (base + idx) * w;
      for (Eigen::Index k = 0; k < w; ++k) dst[k] += src[j * w + k];
    }
  }
}

// Narrow outputs: z = x * [W_0 | ... | W_{l-1}] has l*c < l*f columns, and
// output row i sums block j of z at row indices(i, j). z is formed one sample
// at a time so that it stays in cache.
Var transform_then_gather(Var x, const IndexMatrix& indices, Var weight, Var bias) {
  const Eigen::Index n = indices.rows(), l = indices.cols(), f = x.cols(), c = weight.cols();
  const Eigen::Index batch = x.rows() / n;
  Matrix stacked(f, l * c);
  for (Eigen::Index j = 0; j < l; ++j)
    stacked.middleCols(j * c, c) = weight.value().middleRows(j * f, f);
  Matrix out(x.rows(), c);
  out.rowwise() = bias.value().row(0);
  Matrix z(n, l * c);
  for (Eigen::Index b = 0; b < batch; ++b) {
    z.noalias() = x.value().middleRows(b * n, n) * stacked;
    for (Eigen::Index i = 0; i < n; ++i) {
      double* dst = out.data() + (b * n + i) * c;
      for (Eigen::Index j = 0; j < l; ++j) {
        const Index idx = indices(i, j);
        if (idx == kSentinel) continue;
        const double* src = z.data() + idx * l * c + j * c;
        for (Eigen::Index k = 0; k < c; ++k) dst[k] += src[k];
      }
    }
  }
  return x.graph().record(
      std::move(out), {x, weight, bias},
      [&indices, n, l, f, c, batch, stacked = std::move(stacked)](const Matrix& g,
                                                                   std::span<Tensor*> p) {
        Tensor &tx = *p[0], &tw = *p[1], &tb = *p[2];
        if (tb.requires_grad) accumulate(tb, g.colwise().sum());
        if (!tx.requires_grad && !tw.requires_grad) return;
        Matrix dstacked;
        if (tw.requires_grad) dstacked = Matrix::Zero(f, l * c);
        if (tx.requires_grad) grad_buffer(tx);
        Matrix dz(n, l * c);
        for (Eigen::Index b = 0; b < batch; ++b) {
          dz.setZero();
          for (Eigen::Index i = 0; i < n; ++i) {
            const double* src = g.data() + (b * n + i) * c;
            for (Eigen::Index j = 0; j < l; ++j) {
              const Index idx = indices(i, j);
              if (idx == kSentinel) continue;
              double* dst = dz.data() + idx * l * c + j * c;
              for (Eigen::Index k = 0; k < c; ++k) dst[k] += src[k];
            }
          }
          const auto xb = tx.value.middleRows(b * n, n);
          if (tw.requires_grad) dstacked.noalias() += xb.transpose() * dz;
          if (tx.requires_grad) tx.grad.middleRows(b * n, n).noalias() += dz * stacked.transpose();
        }
        if (tw.requires_grad) {
          Matrix& dw = grad_buffer(tw);
          for (Eigen::Index j = 0; j < l; ++j) dw.middleRows(j * f, f) += dstacked.middleCols(j * c, c);
        }
      });
}

}  // namespace

Var gather_affine(Var x, const IndexMatrix& indices, Var weight, Var bias, Eigen::Index batch,
                  Activation activation) {
  require_same_graph(x, weight);
  require_same_graph(x, bias);
  const Eigen::Index n = indices.rows(), l = indices.cols(), f = x.cols(), c = weight.cols();
  if (batch < 1 || x.rows() != n * batch)
    throw ShapeError("gather_affine: features " + dims(x.value()) + " for " + std::to_string(batch) +
                     " x " + std::to_string(n) + " vertices");
  if (weight.rows() != l * f || bias.rows() != 1 || bias.cols() != c)
    throw ShapeError("gather_affine: weight " + dims(weight.value()) + ", bias " + dims(bias.value()) +
                     " for " + std::to_string(l) + " x " + std::to_string(f) + " gathered features");
  for (Eigen::Index i = 0; i < indices.size(); ++i) {
    const Index idx = indices.data()[i];
    if (idx != kSentinel && (idx < 0 || idx >= n))
      throw ShapeError("gather_affine: index " + std::to_string(idx) + " out of range for " +
                       std::to_string(n) + " rows");
  }
  const Eigen::Index rows = x.rows();
  if (c < f) {
    Var y = transform_then_gather(x, indices, weight, bias);
    return activation == Activation::Elu ? elu(y) : y;
  }
  const bool with_elu = activation == Activation::Elu;
  Matrix out(rows, c), slope;
  if (with_elu) slope.resize(rows, c);
  Matrix block;
  for (Eigen::Index begin = 0; begin < rows; begin += kGatherBlockRows) {
    const Eigen::Index count = std::min(kGatherBlockRows, rows - begin);
    block.resize(count, l * f);
    gather_block(x.value(), indices, begin, block);
    auto rows_out = out.middleRows(begin, count);
    rows_out.noalias() = block * weight.value();
    rows_out.rowwise() += bias.value().row(0);
    if (with_elu) {
      auto rows_slope = slope.middleRows(begin, count);
      rows_slope = rows_out.array().min(0.0).exp().matrix();
      rows_out = (rows_out.array().max(0.0) + (rows_slope.array() - 1.0)).matrix();
    }
  }
  return x.graph().record(
      std::move(out), {x, weight, bias},
      [&indices, n, l, f, rows, slope = std::move(slope)](const Matrix& g, std::span<Tensor*> p) {
        Tensor &tx = *p[0], &tw = *p[1], &tb = *p[2];
        if (tb.requires_grad) grad_buffer(tb);
        if (tw.requires_grad) grad_buffer(tw);
        if (tx.requires_grad) grad_buffer(tx);
        Matrix block, dblock, pre;
        for (Eigen::Index begin = 0; begin < rows; begin += kGatherBlockRows) {
          const Eigen::Index count = std::min(kGatherBlockRows, rows - begin);
          if (slope.size() != 0)
            pre = g.middleRows(begin, count).cwiseProduct(slope.middleRows(begin, count));
          else
            pre = g.middleRows(begin, count);
          if (tb.requires_grad) tb.grad += pre.colwise().sum();
          if (tw.requires_grad) {
            block.resize(count, l * f);
            gather_block(tx.value, indices, begin, block);
            tw.grad.noalias() += block.transpose() * pre;
          }
          if (!tx.requires_grad) continue;
          dblock.resize(count, l * f);
          dblock.noalias() = pre * tw.value.transpose();
          scatter_add_block(dblock, indices, begin, f, tx.grad);
        }
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Graph& graph = parts.front().graph();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<Eigen::Index> widths;
  for (const Var& v : parts) {
    if (&v.graph() != &graph) throw Error("tensors belong to different graphs");
    if (v.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    widths.push_back(v.cols());
    cols += v.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (const Var& v : parts) {
    out.middleCols(offset, v.cols()) = v.value();
    offset += v.cols();
  }
  return graph.record(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                      [widths](const Matrix& g, std::span<Tensor*> p) {
                        Eigen::Index off = 0;
                        for (std::size_t k = 0; k < p.size(); ++k) {
                          accumulate(*p[k], g.middleCols(off, widths[k]));
                          off += widths[k];
                        }
                      });
}

double elu_value(double x) { return x >= 0.0 ? x : std::expm1(x); }

// max(x, 0) + exp(min(x, 0)) - 1 is x for x >= 0 and e^x - 1 otherwise, and
// unlike a select it vectorizes. exp(x) - 1 loses relative precision only
// for tiny negative x, where its absolute error stays at one ulp of 1.
// exp(min(x, 0)) is also the derivative, so it is kept for the backward pass.
Var elu(Var x) {
  const auto xa = x.value().array();
  Matrix slope = xa.min(0.0).exp().matrix();
  Matrix out = (xa.max(0.0) + (slope.array() - 1.0)).matrix();
  return x.graph().record(std::move(out), {x},
                          [slope = std::move(slope)](const Matrix& g, std::span<Tensor*> p) {
                            accumulate(*p[0], Matrix(g.cwiseProduct(slope)));
                          });
}

Var dropout(Var x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw Error("dropout probability must be in [0, 1)");
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng.uniform() < p ? 0.0 : keep_scale;
  Matrix out = x.value().cwiseProduct(mask);
  return x.graph().record(std::move(out), {x},
                          [mask = std::move(mask)](const Matrix& g, std::span<Tensor*> p) {
                            accumulate(*p[0], g.cwiseProduct(mask));
                          });
}

Var sparse_apply(const SparseMatrix& s, Var x) {
  const Eigen::Index n = s.cols(), m = s.rows();
  if (n == 0 || x.rows() % n != 0)
    throw ShapeError("sparse_apply: " + std::to_string(m) + "x" + std::to_string(n) + " times " +
                     dims(x.value()));
  const Eigen::Index batch = x.rows() / n;
  Matrix out(batch * m, x.cols());
  for (Eigen::Index b = 0; b < batch; ++b)
    out.middleRows(b * m, m).noalias() = s.matrix() * x.value().middleRows(b * n, n);
  return x.graph().record(std::move(out), {x},
                          [&s, n, m, batch](const Matrix& g, std::span<Tensor*> p) {
                            if (!p[0]->requires_grad) return;
                            Matrix& dx = grad_buffer(*p[0]);
                            for (Eigen::Index b = 0; b < batch; ++b)
                              dx.middleRows(b * n, n).noalias() +=
                                  s.matrix().transpose() * g.middleRows(b * m, m);
                          });
}

Var softmax_cross_entropy(Var logits, std::span<const Index> labels) {
  const Eigen::Index n = logits.rows(), c = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  Matrix prob(n, c);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Index y = labels[i];
    if (y < 0 || y >= c)
      throw Error("softmax_cross_entropy: label " + std::to_string(y) + " outside [0, " +
                  std::to_string(c) + ")");
    const auto row = logits.value().row(i);
    const double mx = row.maxCoeff();
    prob.row(i) = (row.array() - mx).exp().matrix();
    const double z = prob.row(i).sum();
    prob.row(i) /= z;
    loss += std::log(z) - (row(y) - mx);
  }
  std::vector<Index> y(labels.begin(), labels.end());
  return logits.graph().record(
      Matrix::Constant(1, 1, loss / static_cast<double>(n)), {logits},
      [prob = std::move(prob), y = std::move(y)](const Matrix& g, std::span<Tensor*> p) {
        Matrix d = prob;
        for (std::size_t i = 0; i < y.size(); ++i) d(static_cast<Eigen::Index>(i), y[i]) -= 1.0;
        accumulate(*p[0], d * (g(0, 0) / static_cast<double>(y.size())));
      });
}

Var mean_squared_error(Var prediction, const Matrix& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
    throw ShapeError("mean_squared_error: " + dims(prediction.value()) + " vs " + dims(target));
  Matrix diff = prediction.value() - target;
  const double count = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / count;
  return prediction.graph().record(Matrix::Constant(1, 1, loss), {prediction},
                                   [diff = std::move(diff), count](const Matrix& g,
                                                                    std::span<Tensor*> p) {
                                     accumulate(*p[0], diff * (2.0 * g(0, 0) / count));
                                   });
}

Var mean_euclidean_distance(Var prediction, const Matrix& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
    throw ShapeError("mean_euclidean_distance: " + dims(prediction.value()) + " vs " + dims(target));
  Matrix diff = prediction.value() - target;
  const Eigen::VectorXd norms = diff.rowwise().norm();
  const double rows = static_cast<double>(diff.rows());
  const double loss = norms.sum() / rows;
  for (Eigen::Index i = 0; i < diff.rows(); ++i) {
    if (norms[i] > 0.0)
      diff.row(i) /= norms[i];
    else
      diff.row(i).setZero();
  }
  return prediction.graph().record(Matrix::Constant(1, 1, loss), {prediction},
                                   [unit = std::move(diff), rows](const Matrix& g,
                                                                   std::span<Tensor*> p) {
                                     accumulate(*p[0], unit * (g(0, 0) / rows));
                                   });
}

}  // namespace spiralmesh
