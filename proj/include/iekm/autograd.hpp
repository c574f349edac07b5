#pragma once

// Reverse-mode differentiation over dense matrices. A Tape records every
// operation of one forward pass; backward() replays it in reverse and adds the
// resulting gradients into the sinks registered for each parameter.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iekm/numerics.hpp"

namespace iekm::ad {

template <typename Scalar>
class Tape;

template <typename Scalar>
class Var {
 public:
  Var() = default;

  const Matrix2D<Scalar>& value() const { return tape_->value(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape<Scalar>* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape<Scalar>;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix2D<Scalar>;
  using Backward = std::function<void(Tape&, const Mat& upstream)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Mat value) { return push(std::move(value), false, {}, nullptr); }

  // A leaf that refers to caller-owned storage, which must outlive the tape.
  // Its gradient is added into *grad_sink by backward(); a null sink makes the
  // leaf a constant.
  Var<Scalar> parameter(const Mat& value, Mat* grad_sink) {
    if (grad_sink != nullptr) {
      require_same_shape(value, *grad_sink, "tape parameter sink");
    }
    Var<Scalar> v = push(Mat{}, grad_sink != nullptr, {}, grad_sink);
    nodes_.back().external = &value;
    return v;
  }

  // Records an operation result. The backward closure runs only when at least
  // one input needs a gradient.
  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) {
      check_owner(in);
      needs = needs || nodes_[in.id_].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{}, nullptr);
  }

  Var<Scalar> record(Mat value, std::span<const Var<Scalar>> inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) {
      check_owner(in);
      needs = needs || nodes_[in.id_].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{}, nullptr);
  }

  const Mat& value(const Var<Scalar>& v) const {
    check_owner(v);
    const Node& n = nodes_[v.id_];
    return n.external != nullptr ? *n.external : n.value;
  }

  bool requires_grad(const Var<Scalar>& v) const { return nodes_[v.id_].requires_grad; }

  template <typename Derived>
  void accumulate(const Var<Scalar>& v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id_];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  // Adds g's rows into rows `rows` of v's gradient. Parameter leaves receive
  // the rows straight into their sink, which keeps embedding lookups from
  // materialising a dense table-sized gradient.
  template <typename Derived>
  void accumulate_rows(const Var<Scalar>& v, std::span<const int> rows,
                       const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id_];
    if (!n.requires_grad) return;
    if (n.sink != nullptr && !n.backward) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        n.sink->row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
      }
      return;
    }
    const Mat& value = n.external != nullptr ? *n.external : n.value;
    Mat dense = Mat::Zero(value.rows(), value.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      dense.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
    }
    accumulate(v, dense);
  }

  // Seeds d(loss)/d(loss) = 1 and propagates to every parameter sink.
  void backward(const Var<Scalar>& loss) {
    check_owner(loss);
    if (loss.rows() != 1 || loss.cols() != 1) {
      throw ShapeError("backward: loss must be 1x1, got " + shape_string(loss.rows(), loss.cols()));
    }
    accumulate(loss, Mat::Constant(1, 1, Scalar(1)));
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.sink != nullptr) *n.sink += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
    Mat* sink = nullptr;
    const Mat* external = nullptr;
  };

  Var<Scalar> push(Mat value, bool requires_grad, Backward backward, Mat* sink) {
    nodes_.push_back(
        Node{std::move(value), Mat{}, requires_grad, false, std::move(backward), sink, nullptr});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  void check_owner(const Var<Scalar>& v) const {
    if (v.tape_ != this || v.id_ >= nodes_.size()) {
      throw std::logic_error("variable does not belong to this tape");
    }
  }

  std::vector<Node> nodes_;
};

template <typename Scalar>
using Mat = Matrix2D<Scalar>;

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  Tape<Scalar>& t = *a.tape();
  Mat<Scalar> out = iekm::matmul(a.value(), b.value());
  return t.record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(a, g * b.value().transpose());
    t.accumulate(b, a.value().transpose() * g);
  });
}

// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(const Var<Scalar>& a, const Var<Scalar>& b) {
  Tape<Scalar>& t = *a.tape();
  Mat<Scalar> out = iekm::matmul(a.value(), b.value().transpose());
  return t.record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(a, g * b.value());
    t.accumulate(b, g.transpose() * a.value());
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.value(), b.value(), "add");
  return a.tape()->record(a.value() + b.value(), {a, b},
                          [a, b](Tape<Scalar>& t, const Mat<Scalar>& g) {
                            t.accumulate(a, g);
                            t.accumulate(b, g);
                          });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  return add(a, b);
}

// Adds a 1 x n row to every row of a.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: " + shape_string(a.rows(), a.cols()) + " + " +
                     shape_string(row.rows(), row.cols()));
  }
  Mat<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(std::move(out), {a, row},
                          [a, row](Tape<Scalar>& t, const Mat<Scalar>& g) {
                            t.accumulate(a, g);
                            t.accumulate(row, g.colwise().sum());
                          });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  return a.tape()->record(a.value() * s, {a}, [a, s](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(a, g * s);
  });
}

template <typename Scalar>
Var<Scalar> add_const(const Var<Scalar>& a, const Mat<Scalar>& c) {
  require_same_shape(a.value(), c, "add_const");
  return a.tape()->record(a.value() + c, {a}, [a](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(a, g);
  });
}

template <typename Scalar>
Var<Scalar> hadamard(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.value(), b.value(), "hadamard");
  Mat<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

// out(i, j) = a(i, j) * col(i) for a column vector col.
template <typename Scalar>
Var<Scalar> scale_rows(const Var<Scalar>& a, const Var<Scalar>& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw ShapeError("scale_rows: " + shape_string(a.rows(), a.cols()) + " by " +
                     shape_string(col.rows(), col.cols()));
  }
  Mat<Scalar> out = a.value().array().colwise() * col.value().col(0).array();
  return a.tape()->record(std::move(out), {a, col},
                          [a, col](Tape<Scalar>& t, const Mat<Scalar>& g) {
                            Mat<Scalar> ga = g.array().colwise() * col.value().col(0).array();
                            t.accumulate(a, ga);
                            Mat<Scalar> gc = g.cwiseProduct(a.value()).rowwise().sum();
                            t.accumulate(col, gc);
                          });
}

// B(i, j) = 1 + g(i) * M(i, j) + (1 - g(i)) * Mr(i, j), with one gate value
// per query row broadcast across the key axis.
template <typename Scalar>
Mat<Scalar> gated_multiplier_value(const Mat<Scalar>& gate, const Mat<Scalar>& sim,
                                   const Mat<Scalar>& dissim) {
  if (gate.cols() != 1 || gate.rows() != sim.rows()) {
    throw ShapeError("gated_multiplier: gate must be " + shape_string(sim.rows(), 1));
  }
  require_same_shape(sim, dissim, "gated_multiplier");
  Mat<Scalar> out(sim.rows(), sim.cols());
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    const Scalar g = gate(i, 0);
    for (Eigen::Index j = 0; j < sim.cols(); ++j) {
      out(i, j) = Scalar(1) + g * sim(i, j) + (Scalar(1) - g) * dissim(i, j);
    }
  }
  return out;
}

template <typename Scalar>
Var<Scalar> gated_multiplier(const Var<Scalar>& gate, const Mat<Scalar>& sim,
                             const Mat<Scalar>& dissim) {
  Mat<Scalar> out = gated_multiplier_value(gate.value(), sim, dissim);
  return gate.tape()->record(std::move(out), {gate},
                             [gate, sim, dissim](Tape<Scalar>& t, const Mat<Scalar>& g) {
                               Mat<Scalar> gg = g.cwiseProduct(sim - dissim).rowwise().sum();
                               t.accumulate(gate, gg);
                             });
}

template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& a, const Mat<Scalar>& mask) {
  Mat<Scalar> y = softmax_masked(a.value(), mask);
  Mat<Scalar> probs = y;
  return a.tape()->record(std::move(y), {a}, [a, p = std::move(probs)](Tape<Scalar>& t,
                                                                        const Mat<Scalar>& g) {
    Mat<Scalar> gp = g.cwiseProduct(p);
    Mat<Scalar> ga = gp - (p.array().colwise() * gp.rowwise().sum().array()).matrix();
    t.accumulate(a, ga);
  });
}

template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& table, std::span<const int> ids) {
  Mat<Scalar> out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= table.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[r]) + " outside table of " +
                       std::to_string(table.rows()) + " rows");
    }
    out.row(static_cast<Eigen::Index>(r)) = table.value().row(ids[r]);
  }
  std::vector<int> rows(ids.begin(), ids.end());
  return table.tape()->record(std::move(out), {table},
                              [table, rows](Tape<Scalar>& t, const Mat<Scalar>& g) {
                                t.accumulate_rows(table, rows, g);
                              });
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) +
                     ") outside " + std::to_string(a.rows()) + " rows");
  }
  Mat<Scalar> out = a.value().middleRows(start, count);
  return a.tape()->record(std::move(out), {a},
                          [a, start, count](Tape<Scalar>& t, const Mat<Scalar>& g) {
                            Mat<Scalar> ga = Mat<Scalar>::Zero(a.rows(), a.cols());
                            ga.middleRows(start, count) = g;
                            t.accumulate(a, ga);
                          });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                     ") outside " + std::to_string(a.cols()) + " cols");
  }
  Mat<Scalar> out = a.value().middleCols(start, count);
  return a.tape()->record(std::move(out), {a},
                          [a, start, count](Tape<Scalar>& t, const Mat<Scalar>& g) {
                            Mat<Scalar> ga = Mat<Scalar>::Zero(a.rows(), a.cols());
                            ga.middleCols(start, count) = g;
                            t.accumulate(a, ga);
                          });
}

template <typename Scalar>
Var<Scalar> concat_cols(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Mat<Scalar> out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
  return parts.front().tape()->record(
      std::move(out), std::span<const Var<Scalar>>(inputs),
      [inputs](Tape<Scalar>& t, const Mat<Scalar>& g) {
        Eigen::Index at = 0;
        for (const auto& p : inputs) {
          t.accumulate(p, g.middleCols(at, p.cols()));
          at += p.cols();
        }
      });
}

// Row-wise layer normalisation with a learned 1 x d scale and shift.
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       Scalar eps) {
  const Eigen::Index d = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
    throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(d));
  }
  const Mat<Scalar>& xv = x.value();
  Mat<Scalar> xhat(xv.rows(), d);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const Scalar mean = xv.row(r).mean();
    const Scalar var = (xv.row(r).array() - mean).square().mean();
    inv_std(r) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std(r);
  }
  Mat<Scalar> out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
                    beta.value().row(0).array();
  return x.tape()->record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std](Tape<Scalar>& t, const Mat<Scalar>& g) {
        const Eigen::Index d = xhat.cols();
        t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
        t.accumulate(beta, g.colwise().sum());
        if (!t.requires_grad(x)) return;
        Mat<Scalar> gx(xhat.rows(), d);
        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
          const auto dxhat = (g.row(r).array() * gamma.value().row(0).array()).eval();
          const Scalar mean_d = dxhat.mean();
          const Scalar mean_dx = (dxhat * xhat.row(r).array()).mean();
          gx.row(r) = inv_std(r) * (dxhat - mean_d - xhat.row(r).array() * mean_dx);
        }
        t.accumulate(x, gx);
      });
}

template <typename Scalar, typename Fn, typename DFn>
Var<Scalar> unary(const Var<Scalar>& a, Fn fn, DFn dfn) {
  Mat<Scalar> out = a.value().unaryExpr(fn);
  return a.tape()->record(std::move(out), {a}, [a, dfn](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(a, g.cwiseProduct(a.value().unaryExpr(dfn)));
  });
}

template <typename Scalar>
Scalar gelu_value(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
}

template <typename Scalar>
Var<Scalar> gelu(const Var<Scalar>& a) {
  return unary(a, [](Scalar x) { return gelu_value(x); },
               [](Scalar x) {
                 const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
                 const Scalar pdf = std::exp(Scalar(-0.5) * x * x) /
                                    std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
                 return cdf + x * pdf;
               });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  return unary(a, [](Scalar x) { return std::tanh(x); },
               [](Scalar x) {
                 const Scalar y = std::tanh(x);
                 return Scalar(1) - y * y;
               });
}

template <typename Scalar>
Scalar logistic(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  return unary(a, [](Scalar x) { return logistic(x); },
               [](Scalar x) {
                 const Scalar y = logistic(x);
                 return y * (Scalar(1) - y);
               });
}

// Binary cross-entropy of logistic(logit) against a target in [0, 1].
template <typename Scalar>
Var<Scalar> bce_with_logits(const Var<Scalar>& logit, Scalar target) {
  if (logit.rows() != 1 || logit.cols() != 1) throw ShapeError("bce_with_logits: logit must be 1x1");
  const Scalar z = logit.value()(0, 0);
  const Scalar loss = std::max(z, Scalar(0)) - z * target + std::log1p(std::exp(-std::abs(z)));
  return logit.tape()->record(Mat<Scalar>::Constant(1, 1, loss), {logit},
                              [logit, target](Tape<Scalar>& t, const Mat<Scalar>& g) {
                                const Scalar z = logit.value()(0, 0);
                                t.accumulate(logit, g * (logistic(z) - target));
                              });
}

template <typename Scalar>
Var<Scalar> squared_error(const Var<Scalar>& prediction, Scalar target) {
  if (prediction.rows() != 1 || prediction.cols() != 1) {
    throw ShapeError("squared_error: prediction must be 1x1");
  }
  const Scalar diff = prediction.value()(0, 0) - target;
  return prediction.tape()->record(Mat<Scalar>::Constant(1, 1, diff * diff), {prediction},
                                   [prediction, diff](Tape<Scalar>& t, const Mat<Scalar>& g) {
                                     t.accumulate(prediction, g * (Scalar(2) * diff));
                                   });
}

}  // namespace iekm::ad
