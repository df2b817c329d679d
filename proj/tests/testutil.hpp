#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "sutat/model.hpp"
#include "sutat/tape.hpp"

namespace sutat::testutil {

using DMat = ad::Mat<double>;

// Builds the scalar loss from freshly registered leaves for the given inputs.
using GraphBuilder =
    std::function<int(ad::Tape<double>&, const std::vector<int>&)>;

struct FdReport {
  double max_rel_err = 0.0;  // entries with scale >= kFdScaleCutoff
  double max_abs_err = 0.0;  // entries below the cutoff, absolute difference
  double max_abs_grad = 0.0;

  void account(double analytic, double numeric) {
    double diff = std::abs(analytic - numeric);
    double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale >= 1e-3)
      max_rel_err = std::max(max_rel_err, diff / scale);
    else
      max_abs_err = std::max(max_abs_err, diff);
    max_abs_grad = std::max(max_abs_grad, std::abs(analytic));
  }
};

inline double eval_loss(const std::vector<DMat>& inputs,
                        const GraphBuilder& build) {
  ad::Tape<double> tape;
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (const auto& m : inputs) ids.push_back(tape.leaf(m));
  return tape.val(build(tape, ids))(0, 0);
}

// Central finite differences against the tape's analytic gradients. Entries
// whose gradient scale is measurable are compared relatively; near-zero
// entries absolutely, since finite-difference noise there would otherwise
// dominate any ratio.
inline FdReport fd_check(std::vector<DMat> inputs, const GraphBuilder& build,
                         double h = 1e-6) {
  std::vector<DMat> analytic;
  {
    ad::Tape<double> tape;
    std::vector<int> ids;
    for (const auto& m : inputs) ids.push_back(tape.leaf(m));
    int root = build(tape, ids);
    tape.backward(root);
    for (int id : ids) analytic.push_back(tape.grad(id));
  }
  FdReport rep;
  for (size_t k = 0; k < inputs.size(); ++k) {
    for (int r = 0; r < inputs[k].rows(); ++r)
      for (int c = 0; c < inputs[k].cols(); ++c) {
        double orig = inputs[k](r, c);
        double step = h * std::max(1.0, std::abs(orig));
        inputs[k](r, c) = orig + step;
        double fp = eval_loss(inputs, build);
        inputs[k](r, c) = orig - step;
        double fm = eval_loss(inputs, build);
        inputs[k](r, c) = orig;
        rep.account(analytic[k](r, c), (fp - fm) / (2.0 * step));
      }
  }
  return rep;
}

inline DMat random_mat(int rows, int cols, std::mt19937_64& rng,
                       double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  DMat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

// Finite-difference check of named model parameters. The builder must produce
// the same scalar graph on every call (no fresh randomness inside).
inline FdReport fd_check_params(
    seq::Model<double>& model, const std::vector<std::string>& names,
    const std::function<int(seq::Graph<double>&)>& build, double h = 1e-6) {
  std::vector<DMat> analytic;
  {
    seq::Graph<double> g(model.params());
    int root = build(g);
    g.tape.backward(root);
    for (const auto& name : names) analytic.push_back(g.grad(name));
  }
  auto eval = [&]() {
    seq::Graph<double> g(model.params());
    return g.tape.val(build(g))(0, 0);
  };
  FdReport rep;
  for (size_t k = 0; k < names.size(); ++k) {
    DMat& theta = model.params().at(names[k]);
    for (int r = 0; r < theta.rows(); ++r)
      for (int c = 0; c < theta.cols(); ++c) {
        double orig = theta(r, c);
        double step = h * std::max(1.0, std::abs(orig));
        theta(r, c) = orig + step;
        double fp = eval();
        theta(r, c) = orig - step;
        double fm = eval();
        theta(r, c) = orig;
        rep.account(analytic[k](r, c), (fp - fm) / (2.0 * step));
      }
  }
  return rep;
}

}  // namespace sutat::testutil
