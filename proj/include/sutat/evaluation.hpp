#pragma once

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sutat/summarizer.hpp"
#include "sutat/training.hpp"

namespace sutat::eval {

struct RougeScore {
  double precision = 0, recall = 0, f1 = 0;
  bool degenerate = false;  // a side had no n-grams to compare
};

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n);

RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference);

int lcs_length(const std::vector<std::string>& a,
               const std::vector<std::string>& b);

struct ReferenceSummary {
  std::vector<std::string> customer;
  std::vector<std::string> agent;
};

// Keyed by dialogue id; file format is JSONL records with "id",
// "customer_summary" and "agent_summary" (plain strings or token arrays).
using ReferenceMap = std::map<std::string, ReferenceSummary>;

ReferenceMap load_references(const std::string& path);

struct RougeTable {
  // role -> metric name ("rouge1" | "rouge2" | "rougeL") -> mean score
  std::map<Role, std::map<std::string, RougeScore>> scores;
  int scored = 0;
  int skipped = 0;  // summaries with no matching reference
};

RougeTable score_summaries(const std::vector<summ::SummaryResult>& summaries,
                           const ReferenceMap& references);

struct PerplexityReport {
  double customer_ppl = 0, agent_ppl = 0;
  double kl_customer_mean = 0, kl_agent_mean = 0;
  int64_t customer_tokens = 0, agent_tokens = 0;
  int pairs = 0;
};

// Teacher-forced reconstruction perplexity, eval mode with posterior means,
// so repeated calls are identical.
template <typename S>
PerplexityReport perplexity(const seq::Model<S>& m,
                            const std::vector<Dialogue>& dialogues,
                            const Vocabulary& cv, const Vocabulary& av) {
  PerplexityReport rep;
  double nll_x = 0, nll_y = 0, kl_x = 0, kl_y = 0;
  gen::ReconstructOpts opts;
  opts.mode = gen::Mode::eval;
  opts.mean_latent = true;
  std::mt19937_64 rng(0);  // unused under mean latents
  for (const auto& d : dialogues) {
    for (const auto& p : pair_utterances(d)) {
      seq::Graph<S> g(m.params());
      auto nodes = gen::reconstruct_pair(g, m, cv.encode_sequence(p.x),
                                         av.encode_sequence(p.y), opts, rng);
      auto b = gen::breakdown(g, nodes);
      nll_x += b.nll_x;
      nll_y += b.nll_y;
      kl_x += b.kl_x;
      kl_y += b.kl_y;
      rep.customer_tokens += b.x_tokens;
      rep.agent_tokens += b.y_tokens;
      ++rep.pairs;
    }
  }
  if (rep.pairs == 0) throw DataError("no utterance pairs to evaluate");
  rep.customer_ppl = std::exp(nll_x / double(rep.customer_tokens));
  rep.agent_ppl = std::exp(nll_y / double(rep.agent_tokens));
  rep.kl_customer_mean = kl_x / rep.pairs;
  rep.kl_agent_mean = kl_y / rep.pairs;
  return rep;
}

// Trapezoidal ROC area with tie handling; a constant scorer gives exactly 0.5.
double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels);

struct LinearClassifier {
  Eigen::MatrixXd w;  // feature_dim x n_labels
  Eigen::RowVectorXd b;
  bool multi_label = false;
  std::vector<std::string> labels;

  Eigen::MatrixXd logits(const Eigen::MatrixXd& feats) const {
    return (feats * w).rowwise() + b;
  }
};

// Full-batch Adam on cross-entropy (softmax single-label, per-label sigmoid
// multi-label); targets are label-index sets per row.
LinearClassifier train_linear_classifier(
    const Eigen::MatrixXd& features, const std::vector<std::set<int>>& targets,
    const train::LabelMap& labels, int epochs = 200, double lr = 0.0005);

struct AucReport {
  double macro_auc = 0;
  std::map<std::string, double> per_label;
  bool multi_label = false;
  int train_count = 0, eval_count = 0;
};

// Macro one-vs-rest AUC of per-label scores; labels lacking both classes in
// the evaluation set are skipped.
AucReport macro_auc(const Eigen::MatrixXd& scores,
                    const std::vector<std::set<int>>& targets,
                    const train::LabelMap& labels);

// Classification features: summaries are hard-decoded without copy, then each
// role's summary is re-encoded and pooled; rows are [e_X ; e_Y].
template <typename S>
Eigen::MatrixXd summary_features(const seq::Model<S>& m,
                                 const std::vector<Dialogue>& dialogues,
                                 const Vocabulary& cv, const Vocabulary& av) {
  int enc = m.config().encoder_dim();
  Eigen::MatrixXd feats(dialogues.size(), 2 * enc);
  FactualLexicon no_lexicon;
  for (size_t i = 0; i < dialogues.size(); ++i) {
    auto res = summ::summarize_dialogue(m, dialogues[i], cv, av, no_lexicon,
                                        30, /*use_copy=*/false);
    seq::Graph<S> g(m.params());
    int e_X = m.pool_mean(
        g, m.encode_tokens(g, Role::customer,
                           cv.encode_sequence(res.customer_summary)));
    int e_Y = m.pool_mean(
        g, m.encode_tokens(g, Role::agent,
                           av.encode_sequence(res.agent_summary)));
    const auto& vx = g.tape.val(e_X);
    const auto& vy = g.tape.val(e_Y);
    for (int c = 0; c < enc; ++c) {
      feats(i, c) = double(vx(0, c));
      feats(i, enc + c) = double(vy(0, c));
    }
  }
  return feats;
}

std::vector<std::set<int>> label_targets(const std::vector<Dialogue>& dialogues,
                                         const train::LabelMap& labels);

// Frozen-model protocol: fit a separate linear classifier on training-split
// summary features, report macro AUC on the evaluation split.
template <typename S>
AucReport classify_unsupervised(const seq::Model<S>& m,
                                const std::vector<Dialogue>& train_split,
                                const std::vector<Dialogue>& eval_split,
                                const Vocabulary& cv, const Vocabulary& av,
                                int epochs = 200, double lr = 0.0005) {
  if (train_split.empty() || eval_split.empty())
    throw DataError("classification needs non-empty train and eval splits");
  train::LabelMap lm = train::LabelMap::build(train_split);
  if (lm.size() < 2)
    throw DataError("classification needs at least two domain labels");
  for (const auto& d : eval_split)
    for (const auto& dom : d.domains)
      if (!lm.index.count(dom))
        throw DataError("label absent from the training split: " + dom);

  auto clf = train_linear_classifier(summary_features(m, train_split, cv, av),
                                     label_targets(train_split, lm), lm,
                                     epochs, lr);
  Eigen::MatrixXd eval_scores =
      clf.logits(summary_features(m, eval_split, cv, av));
  AucReport rep = macro_auc(eval_scores, label_targets(eval_split, lm), lm);
  rep.train_count = int(train_split.size());
  rep.eval_count = int(eval_split.size());
  return rep;
}

// Joint-model protocol: score held-out dialogues with the model's own
// classifier head over the summary latents.
template <typename S>
AucReport classify_supervised_eval(const seq::Model<S>& m,
                                   const train::LabelMap& lm,
                                   const std::vector<Dialogue>& eval_split,
                                   const Vocabulary& cv, const Vocabulary& av) {
  if (!m.has_classifier())
    throw UsageError("model has no classifier head");
  if (eval_split.empty()) throw DataError("empty evaluation split");
  for (const auto& d : eval_split)
    for (const auto& dom : d.domains)
      if (!lm.index.count(dom))
        throw DataError("label absent from the training split: " + dom);
  Eigen::MatrixXd scores(eval_split.size(), lm.size());
  for (size_t i = 0; i < eval_split.size(); ++i) {
    auto pairs = pair_utterances(eval_split[i]);
    if (pairs.empty())
      throw DataError("dialogue has no utterance pairs: " + eval_split[i].id);
    seq::Graph<S> g(m.params());
    std::vector<int> e_x, e_y;
    for (const auto& p : pairs) {
      e_x.push_back(m.pool_mean(
          g, m.encode_tokens(g, Role::customer, cv.encode_sequence(p.x))));
      e_y.push_back(m.pool_mean(
          g, m.encode_tokens(g, Role::agent, av.encode_sequence(p.y))));
    }
    auto ax = summ::sentence_self_attention(
        g, m, Role::customer,
        e_x.size() == 1 ? e_x[0] : g.tape.vstack(e_x));
    auto ay = summ::sentence_self_attention(
        g, m, Role::agent, e_y.size() == 1 ? e_y[0] : g.tape.vstack(e_y));
    auto lat = summ::summary_latent(g, ax.pooled, ay.pooled);
    int logits = g.tape.add_rowwise(
        g.tape.matmul(g.tape.concat_cols(lat.s_x, lat.s_y),
                      g.p("classifier/w")),
        g.p("classifier/b"));
    for (int c = 0; c < lm.size(); ++c)
      scores(i, c) = double(g.tape.val(logits)(0, c));
  }
  AucReport rep = macro_auc(scores, label_targets(eval_split, lm), lm);
  rep.eval_count = int(eval_split.size());
  return rep;
}

}  // namespace sutat::eval
