#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sutat::ad {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

// Reverse-mode tape over matrix-valued nodes. Creation order is the
// topological order; backward() walks it in reverse. Parameters are bound as
// external leaves so no weight matrices are copied per graph build.
template <typename S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int leaf(Mat<S> v) {
    nodes_.push_back(Node{std::move(v), nullptr, {}, nullptr});
    return last();
  }

  int param(const Mat<S>* v) {
    nodes_.push_back(Node{{}, v, {}, nullptr});
    return last();
  }

  const Mat<S>& val(int id) const {
    const Node& n = nodes_[id];
    return n.ext ? *n.ext : n.value;
  }

  Mat<S>& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Mat<S>::Zero(val(id).rows(), val(id).cols());
    return n.grad;
  }

  bool has_grad(int id) const { return nodes_[id].grad.size() != 0; }

  size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

  // Seeds d(root)/d(root) = 1 and accumulates into every reachable node.
  void backward(int root) {
    check(val(root).rows() == 1 && val(root).cols() == 1,
          "backward root must be a scalar node");
    grad(root)(0, 0) = S(1);
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.back && n.grad.size() != 0) n.back(*this, i);
    }
  }

  // ---- elementwise and scalar ops ----

  int add(int a, int b) {
    check_same_shape(a, b, "add");
    return make(val(a) + val(b), [a, b](Tape& t, int self) {
      t.grad(a) += t.grad(self);
      t.grad(b) += t.grad(self);
    });
  }

  int sub(int a, int b) {
    check_same_shape(a, b, "sub");
    return make(val(a) - val(b), [a, b](Tape& t, int self) {
      t.grad(a) += t.grad(self);
      t.grad(b) -= t.grad(self);
    });
  }

  int mul(int a, int b) {
    check_same_shape(a, b, "mul");
    return make(val(a).cwiseProduct(val(b)), [a, b](Tape& t, int self) {
      t.grad(a) += t.grad(self).cwiseProduct(t.val(b));
      t.grad(b) += t.grad(self).cwiseProduct(t.val(a));
    });
  }

  int div(int a, int b) {
    check_same_shape(a, b, "div");
    return make(val(a).cwiseQuotient(val(b)), [a, b](Tape& t, int self) {
      t.grad(a) += t.grad(self).cwiseQuotient(t.val(b));
      t.grad(b) -= t.grad(self)
                       .cwiseProduct(t.val(a))
                       .cwiseQuotient(t.val(b).cwiseProduct(t.val(b)));
    });
  }

  int scale(int a, S c) {
    return make(val(a) * c,
                [a, c](Tape& t, int self) { t.grad(a) += t.grad(self) * c; });
  }

  int add_scalar(int a, S c) {
    return make(val(a).array() + c,
                [a](Tape& t, int self) { t.grad(a) += t.grad(self); });
  }

  int neg(int a) { return scale(a, S(-1)); }

  int tanh_(int a) {
    Mat<S> v = val(a).array().tanh();
    return make(v, [a, v](Tape& t, int self) {
      t.grad(a).array() +=
          t.grad(self).array() * (S(1) - v.array() * v.array());
    });
  }

  int sigmoid_(int a) {
    Mat<S> v = (S(1) / (S(1) + (-val(a).array()).exp())).matrix();
    return make(v, [a, v](Tape& t, int self) {
      t.grad(a).array() +=
          t.grad(self).array() * v.array() * (S(1) - v.array());
    });
  }

  int exp_(int a) {
    Mat<S> v = val(a).array().exp();
    return make(v, [a, v](Tape& t, int self) {
      t.grad(a).array() += t.grad(self).array() * v.array();
    });
  }

  int log_(int a) {
    return make(val(a).array().log(), [a](Tape& t, int self) {
      t.grad(a).array() += t.grad(self).array() / t.val(a).array();
    });
  }

  int sqrt_(int a) {
    Mat<S> v = val(a).array().sqrt();
    return make(v, [a, v](Tape& t, int self) {
      t.grad(a).array() += t.grad(self).array() * (S(0.5) / v.array());
    });
  }

  int relu_(int a) {
    return make(val(a).cwiseMax(S(0)), [a](Tape& t, int self) {
      t.grad(a).array() +=
          t.grad(self).array() * (t.val(a).array() > S(0)).template cast<S>();
    });
  }

  // ---- linear algebra ----

  int matmul(int a, int b) {
    check(val(a).cols() == val(b).rows(), "matmul: inner dimensions differ");
    return make(val(a) * val(b), [a, b](Tape& t, int self) {
      t.grad(a) += t.grad(self) * t.val(b).transpose();
      t.grad(b) += t.val(a).transpose() * t.grad(self);
    });
  }

  // a * b^T
  int matmul_nt(int a, int b) {
    check(val(a).cols() == val(b).cols(), "matmul_nt: inner dimensions differ");
    return make(val(a) * val(b).transpose(), [a, b](Tape& t, int self) {
      t.grad(a) += t.grad(self) * t.val(b);
      t.grad(b) += t.grad(self).transpose() * t.val(a);
    });
  }

  // ---- shape ops ----

  int gather_rows(int m, std::vector<int> ids) {
    const Mat<S>& src = val(m);
    for (int id : ids)
      check(id >= 0 && id < src.rows(), "gather_rows: row index out of range");
    Mat<S> v(static_cast<int>(ids.size()), src.cols());
    for (int r = 0; r < v.rows(); ++r) v.row(r) = src.row(ids[r]);
    return make(std::move(v), [m, ids = std::move(ids)](Tape& t, int self) {
      auto& gm = t.grad(m);
      const auto& g = t.grad(self);
      for (int r = 0; r < static_cast<int>(ids.size()); ++r)
        gm.row(ids[r]) += g.row(r);
    });
  }

  int vstack(std::vector<int> rows) {
    check(!rows.empty(), "vstack: empty row list");
    int cols = static_cast<int>(val(rows[0]).cols());
    Mat<S> v(static_cast<int>(rows.size()), cols);
    for (int r = 0; r < v.rows(); ++r) {
      check(val(rows[r]).rows() == 1 && val(rows[r]).cols() == cols,
            "vstack: rows must be 1 x d with matching d");
      v.row(r) = val(rows[r]);
    }
    return make(std::move(v), [rows = std::move(rows)](Tape& t, int self) {
      const auto& g = t.grad(self);
      for (int r = 0; r < static_cast<int>(rows.size()); ++r)
        t.grad(rows[r]) += g.row(r);
    });
  }

  int slice_rows(int a, int start, int len) {
    check(start >= 0 && len >= 1 && start + len <= val(a).rows(),
          "slice_rows: range out of bounds");
    return make(val(a).middleRows(start, len), [a, start, len](Tape& t, int self) {
      t.grad(a).middleRows(start, len) += t.grad(self);
    });
  }

  int slice_cols(int a, int start, int len) {
    check(start >= 0 && len >= 1 && start + len <= val(a).cols(),
          "slice_cols: range out of bounds");
    return make(val(a).middleCols(start, len), [a, start, len](Tape& t, int self) {
      t.grad(a).middleCols(start, len) += t.grad(self);
    });
  }

  int concat_cols(int a, int b) {
    check(val(a).rows() == val(b).rows(), "concat_cols: row counts differ");
    Mat<S> v(val(a).rows(), val(a).cols() + val(b).cols());
    v << val(a), val(b);
    int ac = static_cast<int>(val(a).cols());
    return make(std::move(v), [a, b, ac](Tape& t, int self) {
      const auto& g = t.grad(self);
      t.grad(a) += g.leftCols(ac);
      t.grad(b) += g.rightCols(g.cols() - ac);
    });
  }

  int repeat_rows(int row, int n) {
    check(val(row).rows() == 1, "repeat_rows: input must be 1 x d");
    return make(val(row).replicate(n, 1), [row](Tape& t, int self) {
      t.grad(row) += t.grad(self).colwise().sum();
    });
  }

  int add_rowwise(int m, int row) {
    check(val(row).rows() == 1 && val(row).cols() == val(m).cols(),
          "add_rowwise: bias must be 1 x cols(m)");
    Mat<S> v = val(m);
    v.rowwise() += val(row).row(0);
    return make(std::move(v), [m, row](Tape& t, int self) {
      t.grad(m) += t.grad(self);
      t.grad(row) += t.grad(self).colwise().sum();
    });
  }

  // ---- reductions ----

  int sum_all(int a) {
    Mat<S> v(1, 1);
    v(0, 0) = val(a).sum();
    return make(std::move(v), [a](Tape& t, int self) {
      t.grad(a).array() += t.grad(self)(0, 0);
    });
  }

  int mean_rows(int a) {
    int r = static_cast<int>(val(a).rows());
    Mat<S> v = val(a).colwise().mean();
    return make(std::move(v), [a, r](Tape& t, int self) {
      t.grad(a) += t.grad(self).replicate(r, 1) / S(r);
    });
  }

  // ---- softmax family ----

  // Stable row softmax. Columns where valid[c] == 0 get exactly zero weight
  // and receive no gradient. valid empty means every column is valid.
  int softmax_rows(int a, const std::vector<uint8_t>& valid = {}) {
    const Mat<S>& x = val(a);
    check(valid.empty() || static_cast<int>(valid.size()) == x.cols(),
          "softmax_rows: mask length must equal column count");
    Mat<S> p = Mat<S>::Zero(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r)
      softmax_into(x, valid, r, [](int) { return true; }, p);
    return make(p, [a, p](Tape& t, int self) {
      const auto& g = t.grad(self);
      Mat<S> pg = p.cwiseProduct(g);
      Mat<S> rowdot = pg.rowwise().sum();
      t.grad(a) += pg - p.cwiseProduct(rowdot.replicate(1, p.cols()));
    });
  }

  // Row r attends only to columns <= r (square score matrices).
  int softmax_rows_causal(int a) {
    const Mat<S>& x = val(a);
    check(x.rows() == x.cols(), "softmax_rows_causal: matrix must be square");
    Mat<S> p = Mat<S>::Zero(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r)
      softmax_into(x, {}, r, [r](int c) { return c <= r; }, p);
    return make(p, [a, p](Tape& t, int self) {
      const auto& g = t.grad(self);
      Mat<S> pg = p.cwiseProduct(g);
      Mat<S> rowdot = pg.rowwise().sum();
      t.grad(a) += pg - p.cwiseProduct(rowdot.replicate(1, p.cols()));
    });
  }

  // Sum over rows of -log softmax(logits_row)[target_row]; scalar output.
  int cross_entropy_rows(int logits, std::vector<int> targets) {
    const Mat<S>& x = val(logits);
    check(static_cast<int>(targets.size()) == x.rows(),
          "cross_entropy_rows: one target per row required");
    Mat<S> p(x.rows(), x.cols());
    S total = S(0);
    for (int r = 0; r < x.rows(); ++r) {
      check(targets[r] >= 0 && targets[r] < x.cols(),
            "cross_entropy_rows: target id out of range");
      S m = x.row(r).maxCoeff();
      Eigen::Array<S, 1, Eigen::Dynamic> e = (x.row(r).array() - m).exp();
      S z = e.sum();
      p.row(r) = (e / z).matrix();
      total += std::log(z) + m - x(r, targets[r]);
    }
    Mat<S> v(1, 1);
    v(0, 0) = total;
    return make(std::move(v),
                [logits, p, targets = std::move(targets)](Tape& t, int self) {
                  S g = t.grad(self)(0, 0);
                  Mat<S> d = p;
                  for (int r = 0; r < d.rows(); ++r) d(r, targets[r]) -= S(1);
                  t.grad(logits) += g * d;
                });
  }

  // Elementwise sigmoid cross-entropy against fixed 0/1 targets, summed to a
  // scalar. Computed as max(o,0) - t*o + log1p(exp(-|o|)) for stability.
  int sigmoid_cross_entropy(int logits, Mat<S> targets) {
    const Mat<S>& x = val(logits);
    check(x.rows() == targets.rows() && x.cols() == targets.cols(),
          "sigmoid_cross_entropy: target shape must match logits");
    Mat<S> sig(x.rows(), x.cols());
    S total = S(0);
    for (int r = 0; r < x.rows(); ++r)
      for (int c = 0; c < x.cols(); ++c) {
        S o = x(r, c);
        sig(r, c) = S(1) / (S(1) + std::exp(-o));
        total += std::max(o, S(0)) - targets(r, c) * o +
                 std::log1p(std::exp(-std::abs(o)));
      }
    Mat<S> v(1, 1);
    v(0, 0) = total;
    return make(std::move(v),
                [logits, sig, targets = std::move(targets)](Tape& t, int self) {
                  S g = t.grad(self)(0, 0);
                  t.grad(logits) += g * (sig - targets);
                });
  }

  // Row-wise layer normalization with learned gain and bias (1 x cols each).
  int layer_norm_rows(int a, int gain, int bias, S eps) {
    const Mat<S>& x = val(a);
    check(val(gain).rows() == 1 && val(gain).cols() == x.cols() &&
              val(bias).rows() == 1 && val(bias).cols() == x.cols(),
          "layer_norm_rows: gain/bias must be 1 x cols");
    Mat<S> xhat(x.rows(), x.cols());
    Mat<S> inv_std(x.rows(), 1);
    for (int r = 0; r < x.rows(); ++r) {
      S mu = x.row(r).mean();
      S var = (x.row(r).array() - mu).square().mean();
      S is = S(1) / std::sqrt(var + eps);
      inv_std(r, 0) = is;
      xhat.row(r) = ((x.row(r).array() - mu) * is).matrix();
    }
    Mat<S> v = xhat;
    for (int r = 0; r < v.rows(); ++r)
      v.row(r) = (xhat.row(r).array() * val(gain).row(0).array() +
                  val(bias).row(0).array())
                     .matrix();
    return make(std::move(v),
                [a, gain, bias, xhat, inv_std](Tape& t, int self) {
                  const auto& g = t.grad(self);
                  const auto& gn = t.val(gain);
                  t.grad(bias) += g.colwise().sum();
                  t.grad(gain) += g.cwiseProduct(xhat).colwise().sum();
                  auto& ga = t.grad(a);
                  for (int r = 0; r < g.rows(); ++r) {
                    Eigen::Array<S, 1, Eigen::Dynamic> gx =
                        g.row(r).array() * gn.row(0).array();
                    S mean_gx = gx.mean();
                    S mean_gx_xhat = (gx * xhat.row(r).array()).mean();
                    ga.row(r).array() +=
                        inv_std(r, 0) *
                        (gx - mean_gx - xhat.row(r).array() * mean_gx_xhat);
                  }
                });
  }

 private:
  struct Node {
    Mat<S> value;
    const Mat<S>* ext = nullptr;
    Mat<S> grad;
    std::function<void(Tape&, int)> back;
  };

  int last() const { return static_cast<int>(nodes_.size()) - 1; }

  template <typename V, typename F>
  int make(V&& v, F&& back) {
    nodes_.push_back(Node{Mat<S>(std::forward<V>(v)), nullptr, {},
                          std::function<void(Tape&, int)>(std::forward<F>(back))});
    return last();
  }

  static void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(std::string("tape: ") + msg);
  }

  void check_same_shape(int a, int b, const char* op) const {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw std::invalid_argument(std::string("tape: ") + op +
                                  ": operand shapes differ");
  }

  template <typename Pred>
  static void softmax_into(const Mat<S>& x, const std::vector<uint8_t>& valid,
                           int r, Pred pred, Mat<S>& p) {
    S m = std::numeric_limits<S>::lowest();
    bool any = false;
    for (int c = 0; c < x.cols(); ++c) {
      if (!pred(c) || (!valid.empty() && !valid[c])) continue;
      any = true;
      m = std::max(m, x(r, c));
    }
    check(any, "softmax: row with no valid positions");
    S z = S(0);
    for (int c = 0; c < x.cols(); ++c) {
      if (!pred(c) || (!valid.empty() && !valid[c])) continue;
      S e = std::exp(x(r, c) - m);
      p(r, c) = e;
      z += e;
    }
    for (int c = 0; c < x.cols(); ++c) p(r, c) /= z;
  }

  std::vector<Node> nodes_;
};

}  // namespace sutat::ad
