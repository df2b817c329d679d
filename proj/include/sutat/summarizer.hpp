#pragma once

#include <map>
#include <string>
#include <vector>

#include "sutat/corpus.hpp"
#include "sutat/generative.hpp"

namespace sutat::summ {

// ---- graph builders ----

struct SentencePooled {
  int pooled;  // 1 x encoder_dim
  std::vector<int> head_weights;
};

// Self-attention where queries, keys and values are all the n utterance
// embeddings of one role; the n attended vectors are mean-pooled into one.
template <typename S>
SentencePooled sentence_self_attention(seq::Graph<S>& g,
                                       const seq::Model<S>& m, Role role,
                                       int stacked) {
  std::string prefix = "summary_attention/" + std::string(role_name(role));
  auto att = m.attention(g, prefix, stacked, stacked, stacked, false);
  return {m.pool_mean(g, att.out), std::move(att.head_weights)};
}

struct SummaryLatentNodes {
  int s_x;
  int s_y;
};

// Zero-variance summary representations: posterior means only, the agent one
// conditioned on the customer one.
template <typename S>
SummaryLatentNodes summary_latent(seq::Graph<S>& g, int e_X, int e_Y) {
  auto qx = latent::posterior_customer(g, e_X);
  auto qy = latent::posterior_agent(g, e_Y, qx.mean);
  return {qx.mean, qy.mean};
}

struct DecodedSummaries {
  gen::GreedyResult agent;
  gen::GreedyResult customer;
};

// Greedy summary decoding with the shared decoders; agent first, customer
// conditioned on the pooled embedding of the (pre-copy) agent summary.
template <typename S>
DecodedSummaries decode_summaries(seq::Graph<S>& g, const seq::Model<S>& m,
                                  int s_x, int s_y, int max_len) {
  DecodedSummaries out;
  out.agent = gen::decode_greedy(g, m, Role::agent, s_y, max_len);
  int y_tilde = m.pool_mean(g, m.embed_hard(g, Role::agent, out.agent.tokens));
  out.customer = gen::decode_greedy(g, m, Role::customer,
                                    g.tape.concat_cols(s_x, y_tilde), max_len);
  return out;
}

// Cosine similarity of two rows with an epsilon-guarded denominator.
template <typename S>
int cosine_node(seq::Graph<S>& g, int a, int b) {
  auto& t = g.tape;
  int dot = t.sum_all(t.mul(a, b));
  int na = t.sqrt_(t.sum_all(t.mul(a, a)));
  int nb = t.sqrt_(t.sum_all(t.mul(b, b)));
  return t.div(dot, t.add_scalar(t.mul(na, nb), S(1e-8)));
}

// Average over pairs of the two per-role cosine similarities between summary
// embeddings and utterance embeddings; maximized during training.
template <typename S>
int similarity_of(seq::Graph<S>& g, int e_X, int e_Y,
                  const std::vector<int>& e_x_utts,
                  const std::vector<int>& e_y_utts) {
  if (e_x_utts.empty() || e_x_utts.size() != e_y_utts.size())
    throw UsageError("similarity needs matching non-empty embedding lists");
  auto& t = g.tape;
  int total = -1;
  for (size_t i = 0; i < e_x_utts.size(); ++i) {
    int term = t.add(cosine_node(g, e_X, e_x_utts[i]),
                     cosine_node(g, e_Y, e_y_utts[i]));
    total = i == 0 ? term : t.add(total, term);
  }
  return t.scale(total, S(1.0 / double(e_x_utts.size())));
}

// Re-encodes soft-decoded summaries with the matching role encoders, then
// scores them against the utterance embeddings.
template <typename S>
int similarity_loss(seq::Graph<S>& g, const seq::Model<S>& m,
                    const std::vector<int>& e_x_utts,
                    const std::vector<int>& e_y_utts, int soft_customer,
                    int soft_agent) {
  int e_X = m.pool_mean(
      g, m.encode(g, Role::customer,
                  m.embed_soft(g, Role::customer, soft_customer)));
  int e_Y = m.pool_mean(
      g, m.encode(g, Role::agent, m.embed_soft(g, Role::agent, soft_agent)));
  return similarity_of(g, e_X, e_Y, e_x_utts, e_y_utts);
}

// Training-time summary objective for one dialogue: attention-pool the
// utterance embeddings, take near-zero-variance latents, soft-decode both
// summaries, and score their re-encodings. Copy is never active here.
template <typename S>
int summary_objective(seq::Graph<S>& g, const seq::Model<S>& m,
                      const std::vector<int>& e_x_utts,
                      const std::vector<int>& e_y_utts, int max_len, double tau,
                      SummaryLatentNodes* latents_out = nullptr) {
  auto& t = g.tape;
  int sx = e_x_utts.size() == 1 ? e_x_utts[0] : t.vstack(e_x_utts);
  int sy = e_y_utts.size() == 1 ? e_y_utts[0] : t.vstack(e_y_utts);
  auto ax = sentence_self_attention(g, m, Role::customer, sx);
  auto ay = sentence_self_attention(g, m, Role::agent, sy);
  auto lat = summary_latent(g, ax.pooled, ay.pooled);
  if (latents_out) *latents_out = lat;
  int soft_agent = gen::decode_soft(g, m, Role::agent, lat.s_y, max_len, tau);
  int y_tilde = m.pool_mean(g, m.embed_soft(g, Role::agent, soft_agent));
  int soft_customer = gen::decode_soft(
      g, m, Role::customer, t.concat_cols(lat.s_x, y_tilde), max_len, tau);
  return similarity_loss(g, m, e_x_utts, e_y_utts, soft_customer, soft_agent);
}

// ---- factual copy (inference only) ----

struct CopyEvent {
  Role role;
  int position;
  std::string predicted;
  std::string substituted;
};

struct CopyResult {
  std::vector<std::string> tokens;
  std::vector<CopyEvent> log;
};

// Replaces each decoded lexicon token with the source-dialogue lexicon token
// of highest decoder probability at that step. Same-role source utterances are
// preferred; ties go to the earliest source occurrence.
CopyResult partial_copy(const std::vector<std::string>& decoded,
                        const std::vector<std::vector<double>>& probs,
                        Role role, const FactualLexicon& lexicon,
                        const Dialogue& source, const Vocabulary& vocab);

// ---- full inference pipeline ----

struct SummaryResult {
  std::string id;
  std::vector<std::string> customer_summary;
  std::vector<std::string> agent_summary;
  std::map<Role, std::vector<double>> attention;  // per-utterance, head-averaged
  std::vector<CopyEvent> copy_log;
};

template <typename S>
SummaryResult summarize_dialogue(const seq::Model<S>& m, const Dialogue& d,
                                 const Vocabulary& customer_vocab,
                                 const Vocabulary& agent_vocab,
                                 const FactualLexicon& lexicon, int max_len,
                                 bool use_copy) {
  auto pairs = pair_utterances(d);
  if (pairs.empty())
    throw DataError("dialogue has no utterance pairs: " + d.id);
  seq::Graph<S> g(m.params());
  auto& t = g.tape;
  std::vector<int> e_x, e_y;
  for (const auto& p : pairs) {
    e_x.push_back(m.pool_mean(
        g, m.encode(g, Role::customer,
                    m.embed_hard(g, Role::customer,
                                 customer_vocab.encode_sequence(p.x)))));
    e_y.push_back(m.pool_mean(
        g, m.encode(g, Role::agent,
                    m.embed_hard(g, Role::agent,
                                 agent_vocab.encode_sequence(p.y)))));
  }
  int sx = e_x.size() == 1 ? e_x[0] : t.vstack(e_x);
  int sy = e_y.size() == 1 ? e_y[0] : t.vstack(e_y);
  auto ax = sentence_self_attention(g, m, Role::customer, sx);
  auto ay = sentence_self_attention(g, m, Role::agent, sy);
  auto lat = summary_latent(g, ax.pooled, ay.pooled);
  auto dec = decode_summaries(g, m, lat.s_x, lat.s_y, max_len);

  SummaryResult res;
  res.id = d.id;
  auto head_average = [&](const std::vector<int>& heads) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(pairs.size());
    for (int h : heads)
      acc += t.val(h).template cast<double>().colwise().mean();
    acc /= double(heads.size());
    return std::vector<double>(acc.data(), acc.data() + acc.size());
  };
  res.attention[Role::customer] = head_average(ax.head_weights);
  res.attention[Role::agent] = head_average(ay.head_weights);

  auto finalize = [&](Role r, const gen::GreedyResult& raw,
                      const Vocabulary& vocab) {
    std::vector<std::string> tokens = vocab.decode_sequence(raw.tokens);
    if (!use_copy) return tokens;
    CopyResult copied = partial_copy(tokens, raw.probs, r, lexicon, d, vocab);
    res.copy_log.insert(res.copy_log.end(), copied.log.begin(),
                        copied.log.end());
    return copied.tokens;
  };
  res.agent_summary = finalize(Role::agent, dec.agent, agent_vocab);
  res.customer_summary = finalize(Role::customer, dec.customer, customer_vocab);
  return res;
}

}  // namespace sutat::summ
