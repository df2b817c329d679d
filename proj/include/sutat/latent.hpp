#pragma once

#include <cmath>

#include "sutat/model.hpp"

namespace sutat::latent {

// Mean and log-variance nodes of a diagonal Gaussian, each 1 x dim.
struct GaussianNodes {
  int mean;
  int logvar;
};

template <typename S>
GaussianNodes standard_normal(seq::Graph<S>& g, int dim) {
  return {g.tape.leaf(ad::Mat<S>::Zero(1, dim)),
          g.tape.leaf(ad::Mat<S>::Zero(1, dim))};
}

template <typename S>
GaussianNodes posterior_customer(seq::Graph<S>& g, int e_x) {
  auto& t = g.tape;
  return {t.add_rowwise(t.matmul(e_x, g.p("latent/customer_mean/w")),
                        g.p("latent/customer_mean/b")),
          t.add_rowwise(t.matmul(e_x, g.p("latent/customer_logvar/w")),
                        g.p("latent/customer_logvar/b"))};
}

// Projections of [e_y; z_x], in that order.
template <typename S>
GaussianNodes posterior_agent(seq::Graph<S>& g, int e_y, int z_x) {
  auto& t = g.tape;
  int in = t.concat_cols(e_y, z_x);
  return {t.add_rowwise(t.matmul(in, g.p("latent/agent_mean/w")),
                        g.p("latent/agent_mean/b")),
          t.add_rowwise(t.matmul(in, g.p("latent/agent_logvar/w")),
                        g.p("latent/agent_logvar/b"))};
}

// Conditional prior p(z_y | z_x): two single-hidden-layer tanh MLPs.
template <typename S>
GaussianNodes prior_agent(seq::Graph<S>& g, int z_x) {
  auto& t = g.tape;
  auto mlp = [&](const std::string& head) {
    int h = t.tanh_(t.add_rowwise(t.matmul(z_x, g.p(head + "/w1")),
                                  g.p(head + "/b1")));
    return t.add_rowwise(t.matmul(h, g.p(head + "/w2")), g.p(head + "/b2"));
  };
  return {mlp("latent/prior_mean"), mlp("latent/prior_logvar")};
}

// z = mean + exp(log_variance / 2) * noise.
template <typename S>
int reparameterize(seq::Graph<S>& g, const GaussianNodes& q,
                   const ad::Mat<S>& noise) {
  auto& t = g.tape;
  if (noise.rows() != 1 || noise.cols() != t.val(q.mean).cols())
    throw UsageError("noise dimension must match the latent dimension");
  int n = t.leaf(noise);
  return t.add(q.mean, t.mul(t.exp_(t.scale(q.logvar, S(0.5))), n));
}

// Closed-form KL between diagonal Gaussians, summed over dimensions:
// 1/2 sum[ log s2_p - log s2_q + (s2_q + (mu_q - mu_p)^2) / s2_p - 1 ].
template <typename S>
int kl_divergence(seq::Graph<S>& g, const GaussianNodes& q,
                  const GaussianNodes& p) {
  auto& t = g.tape;
  int diff = t.sub(q.mean, p.mean);
  int ratio = t.div(t.add(t.exp_(q.logvar), t.mul(diff, diff)),
                    t.exp_(p.logvar));
  int term = t.add(t.sub(p.logvar, q.logvar), t.add_scalar(ratio, S(-1)));
  return t.scale(t.sum_all(term), S(0.5));
}

// Non-graph evaluation of the same closed form, for reports and oracles.
inline double kl_closed_form(const Eigen::VectorXd& mean_q,
                             const Eigen::VectorXd& logvar_q,
                             const Eigen::VectorXd& mean_p,
                             const Eigen::VectorXd& logvar_p) {
  if (mean_q.size() != logvar_q.size() || mean_q.size() != mean_p.size() ||
      mean_q.size() != logvar_p.size())
    throw UsageError("KL requires matching dimensions");
  double total = 0.0;
  for (Eigen::Index i = 0; i < mean_q.size(); ++i) {
    double vq = std::exp(logvar_q[i]), vp = std::exp(logvar_p[i]);
    double d = mean_q[i] - mean_p[i];
    total += logvar_p[i] - logvar_q[i] + (vq + d * d) / vp - 1.0;
  }
  return 0.5 * total;
}

}  // namespace sutat::latent
