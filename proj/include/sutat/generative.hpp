#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "sutat/latent.hpp"
#include "sutat/model.hpp"

namespace sutat::gen {

using ad::Mat;

enum class Mode { train, eval };

// Rowwise softmax(logits / tau); tau << 1 approximates argmax differentiably.
template <typename S>
int soft_argmax(seq::Graph<S>& g, int logits, double tau) {
  if (!(tau > 0)) throw UsageError("soft-argmax temperature must be positive");
  return g.tape.softmax_rows(g.tape.scale(logits, S(1.0 / tau)));
}

// Decoder-input corruption: each non-special token independently becomes UNK.
inline std::vector<int> word_dropout(std::vector<int> ids, double rate,
                                     std::mt19937_64& rng) {
  if (rate < 0.0 || rate > 1.0)
    throw UsageError("word dropout rate must be in [0, 1]");
  if (rate == 0.0) return ids;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int& id : ids)
    if (id >= kNumSpecials && u(rng) < rate) id = kUnkId;
  return ids;
}

struct ReconstructOpts {
  Mode mode = Mode::train;
  double tau = 0.01;
  double word_dropout_rate = 0.4;
  bool mean_latent = false;  // posterior means instead of sampled latents
};

// Graph nodes produced by one pair reconstruction. Loss nodes are scalars.
struct PairNodes {
  int e_x, e_y;            // pooled utterance embeddings, 1 x encoder_dim
  int z_x, z_y;            // latent draws
  int nll_x, nll_y;        // teacher-forced reconstruction NLL sums, nats
  int kl_x, kl_y;
  int agent_soft;          // (len(y)+1 x agent vocab) soft decode rows
  int x_tokens, y_tokens;  // target token counts incl. EOS
};

// Joint reconstruction of one utterance pair: the agent utterance is decoded
// from z_y, its soft decode is re-embedded and pooled, and the customer
// utterance is decoded from z_x joined with that pooled vector.
template <typename S>
PairNodes reconstruct_pair(seq::Graph<S>& g, const seq::Model<S>& m,
                           const std::vector<int>& x, const std::vector<int>& y,
                           const ReconstructOpts& opts, std::mt19937_64& rng) {
  if (x.empty() || y.empty())
    throw DataError("cannot reconstruct an empty utterance");
  auto& t = g.tape;
  const auto& cfg = m.config();
  auto noise = [&]() {
    Mat<S> n = Mat<S>::Zero(1, cfg.latent_dim);
    if (!opts.mean_latent) {
      std::normal_distribution<double> nd(0.0, 1.0);
      for (int c = 0; c < cfg.latent_dim; ++c) n(0, c) = S(nd(rng));
    }
    return n;
  };
  auto teacher_inputs = [&](const std::vector<int>& tokens) {
    std::vector<int> in;
    in.reserve(tokens.size() + 1);
    in.push_back(kBosId);
    in.insert(in.end(), tokens.begin(), tokens.end());
    if (opts.mode == Mode::train)
      in = word_dropout(std::move(in), opts.word_dropout_rate, rng);
    return in;
  };
  auto targets = [](const std::vector<int>& tokens) {
    std::vector<int> tgt = tokens;
    tgt.push_back(kEosId);
    return tgt;
  };

  PairNodes out;
  out.e_x = m.pool_mean(g, m.encode_tokens(g, Role::customer, x));
  out.e_y = m.pool_mean(g, m.encode_tokens(g, Role::agent, y));

  auto qx = latent::posterior_customer(g, out.e_x);
  out.z_x = latent::reparameterize(g, qx, noise());
  auto qy = latent::posterior_agent(g, out.e_y, out.z_x);
  out.z_y = latent::reparameterize(g, qy, noise());

  std::vector<int> y_tgt = targets(y);
  int vy = m.decode_all(g, Role::agent,
                        m.embed_hard(g, Role::agent, teacher_inputs(y)),
                        out.z_y);
  int logits_y = m.vocab_logits(g, Role::agent, vy);
  out.nll_y = t.cross_entropy_rows(logits_y, y_tgt);

  out.agent_soft = soft_argmax(g, logits_y, opts.tau);
  int y_tilde = m.pool_mean(g, m.embed_soft(g, Role::agent, out.agent_soft));

  std::vector<int> x_tgt = targets(x);
  int cond_x = t.concat_cols(out.z_x, y_tilde);
  int vx = m.decode_all(g, Role::customer,
                        m.embed_hard(g, Role::customer, teacher_inputs(x)),
                        cond_x);
  out.nll_x = t.cross_entropy_rows(m.vocab_logits(g, Role::customer, vx), x_tgt);

  out.kl_x = latent::kl_divergence(
      g, qx, latent::standard_normal(g, cfg.latent_dim));
  out.kl_y = latent::kl_divergence(g, qy, latent::prior_agent(g, out.z_x));
  out.x_tokens = static_cast<int>(x_tgt.size());
  out.y_tokens = static_cast<int>(y_tgt.size());
  return out;
}

// ELBO node: -(NLL_x + NLL_y) - kl_weight * (KL_x + KL_y).
template <typename S>
int elbo(seq::Graph<S>& g, const PairNodes& p, double kl_weight) {
  if (kl_weight < 0.0) throw UsageError("KL weight must be nonnegative");
  auto& t = g.tape;
  int rec = t.add(p.nll_x, p.nll_y);
  int kl = t.add(p.kl_x, p.kl_y);
  return t.neg(t.add(rec, t.scale(kl, S(kl_weight))));
}

struct PairLossBreakdown {
  double nll_x = 0, nll_y = 0, kl_x = 0, kl_y = 0;
  int x_tokens = 0, y_tokens = 0;
};

template <typename S>
PairLossBreakdown breakdown(seq::Graph<S>& g, const PairNodes& p) {
  auto scalar = [&](int id) { return double(g.tape.val(id)(0, 0)); };
  return {scalar(p.nll_x), scalar(p.nll_y), scalar(p.kl_x), scalar(p.kl_y),
          p.x_tokens, p.y_tokens};
}

// Incremental free-running decoder working for both architectures. Inputs are
// embedding rows (hard or soft); next_v() returns the decoder output for the
// latest input.
template <typename S>
class FreeDecoder {
 public:
  FreeDecoder(seq::Graph<S>& g, const seq::Model<S>& m, Role role, int cond)
      : g_(g), m_(m), role_(role), cond_(cond) {
    if (m_.config().arch == seq::Arch::recurrent) st_ = m_.decoder_init(g_);
    push_embed(m_.embed_row(g_, role_, kBosId));
  }

  void push_embed(int row) { inputs_.push_back(row); }

  int next_v() {
    if (m_.config().arch == seq::Arch::recurrent) {
      int v = -1;
      while (consumed_ < inputs_.size()) {
        auto [vv, st] = m_.decode_step_recurrent(g_, role_, inputs_[consumed_],
                                                 cond_, st_);
        v = vv;
        st_ = st;
        ++consumed_;
      }
      return v;
    }
    int x = inputs_.size() == 1 ? inputs_[0] : g_.tape.vstack(inputs_);
    int all = m_.decode_all(g_, role_, x, cond_);
    return g_.tape.slice_rows(all, static_cast<int>(inputs_.size()) - 1, 1);
  }

 private:
  seq::Graph<S>& g_;
  const seq::Model<S>& m_;
  Role role_;
  int cond_;
  std::vector<int> inputs_;
  size_t consumed_ = 0;
  typename seq::Model<S>::RecState st_{};
};

struct GreedyResult {
  std::vector<int> tokens;                 // emitted ids; no PAD/BOS/EOS
  std::vector<std::vector<double>> probs;  // full-vocab distribution per step
};

// Greedy decode from a conditioning vector. PAD and BOS are never emitted and
// EOS is suppressed on the first step, so the result is non-empty.
template <typename S>
GreedyResult decode_greedy(seq::Graph<S>& g, const seq::Model<S>& m, Role role,
                           int cond, int max_len) {
  if (max_len < 1) throw UsageError("max_len must be at least 1");
  GreedyResult res;
  FreeDecoder<S> dec(g, m, role, cond);
  for (int step = 0; step < max_len; ++step) {
    int logits = m.vocab_logits(g, role, dec.next_v());
    const Mat<S>& row = g.tape.val(logits);
    int best = -1;
    for (int c = 0; c < row.cols(); ++c) {
      if (c == kPadId || c == kBosId) continue;
      if (c == kEosId && step == 0) continue;
      if (best < 0 || row(0, c) > row(0, best)) best = c;
    }
    if (best == kEosId) break;
    double mx = row.maxCoeff(), z = 0.0;
    std::vector<double> p(row.cols());
    for (int c = 0; c < row.cols(); ++c) {
      p[c] = std::exp(double(row(0, c)) - mx);
      z += p[c];
    }
    for (double& v : p) v /= z;
    res.tokens.push_back(best);
    res.probs.push_back(std::move(p));
    dec.push_embed(m.embed_row(g, role, best));
  }
  return res;
}

// Fixed-length soft decode: each step emits softmax(logits/tau) and feeds its
// expected embedding forward. Returns the (len x vocab) stack of soft rows.
template <typename S>
int decode_soft(seq::Graph<S>& g, const seq::Model<S>& m, Role role, int cond,
                int len, double tau) {
  if (len < 1) throw UsageError("soft decode length must be at least 1");
  FreeDecoder<S> dec(g, m, role, cond);
  std::vector<int> rows;
  for (int i = 0; i < len; ++i) {
    int soft = soft_argmax(g, m.vocab_logits(g, role, dec.next_v()), tau);
    rows.push_back(soft);
    dec.push_embed(m.embed_soft(g, role, soft));
  }
  return rows.size() == 1 ? rows[0] : g.tape.vstack(rows);
}

struct GeneratedPair {
  std::vector<int> customer;
  std::vector<int> agent;
};

// Novel single-turn conversation: z_x from the standard normal, z_y from the
// conditional prior, agent decoded first, customer conditioned on the pooled
// embedding of the generated agent tokens.
template <typename S>
GeneratedPair generate_pair(const seq::Model<S>& m, std::mt19937_64& rng,
                            int max_len) {
  if (max_len < 1) throw UsageError("max_len must be at least 1");
  seq::Graph<S> g(m.params());
  auto& t = g.tape;
  int L = m.config().latent_dim;
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat<S> zx(1, L), ny(1, L);
  for (int c = 0; c < L; ++c) zx(0, c) = S(nd(rng));
  for (int c = 0; c < L; ++c) ny(0, c) = S(nd(rng));
  int z_x = t.leaf(zx);
  int z_y = latent::reparameterize(g, latent::prior_agent(g, z_x), ny);
  GreedyResult agent = decode_greedy(g, m, Role::agent, z_y, max_len);
  int y_tilde = m.pool_mean(g, m.embed_hard(g, Role::agent, agent.tokens));
  int cond = t.concat_cols(z_x, y_tilde);
  GreedyResult customer = decode_greedy(g, m, Role::customer, cond, max_len);
  return {std::move(customer.tokens), std::move(agent.tokens)};
}

}  // namespace sutat::gen
