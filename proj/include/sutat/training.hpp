#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sutat/generative.hpp"
#include "sutat/summarizer.hpp"

namespace sutat::train {

using ad::Mat;

struct TrainConfig {
  // objective
  double alpha = 0.4;
  double tau = 0.01;
  double kl_threshold = 0.8;
  double kl_anneal_fraction = 0.5;
  double word_dropout = 0.4;
  double lambda = 1.0;  // supervised classification weight

  // optimization
  double learning_rate = 0.0005;
  int batch_size = 16;
  int max_epochs = 10;
  int max_steps = 0;  // overrides max_epochs when positive
  double grad_clip = 5.0;

  // model
  std::string arch = "recurrent";
  int embed_dim = 300;
  int hidden = 600;
  int latent_dim = 300;
  int heads = 10;
  int layers = 1;
  int prior_hidden = 600;

  int summary_max_len = 30;
  uint64_t seed = 1;

  void validate() const;
  // Accepts "key=value" lines or a JSON object; keys mirror the field names.
  static TrainConfig from_file(const std::string& path);
  void apply(const std::string& key, const std::string& value);

  seq::ModelConfig model_config(int customer_vocab, int agent_vocab) const;
};

// Linear ramp from 0 that reaches `threshold` after `fraction` of all steps
// and stays there.
inline double kl_weight_schedule(int64_t step, int64_t total_steps,
                                 double threshold, double fraction) {
  if (total_steps <= 0) throw UsageError("total step count must be positive");
  if (step < 0 || step > total_steps)
    throw UsageError("step outside [0, total_steps]");
  double ramp = fraction * static_cast<double>(total_steps);
  if (ramp <= 0.0 || static_cast<double>(step) >= ramp) return threshold;
  return threshold * static_cast<double>(step) / ramp;
}

struct AdamConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of a single tensor; t is the 1-based step.
template <typename S>
void adam_update(Mat<S>& param, Mat<S>& m, Mat<S>& v, const Mat<S>& grad,
                 int64_t t, const AdamConfig& cfg) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw UsageError("adam: gradient shape does not match parameter");
  m.array() = S(cfg.beta1) * m.array() + S(1.0 - cfg.beta1) * grad.array();
  v.array() =
      S(cfg.beta2) * v.array() + S(1.0 - cfg.beta2) * grad.array().square();
  S bc1 = S(1.0 - std::pow(cfg.beta1, double(t)));
  S bc2 = S(1.0 - std::pow(cfg.beta2, double(t)));
  param.array() -=
      S(cfg.lr) * (m.array() / bc1) / ((v.array() / bc2).sqrt() + S(cfg.eps));
}

using NamedGrads = std::vector<std::pair<std::string, Mat<float>>>;

template <typename S>
using NamedGradsT = std::vector<std::pair<std::string, Mat<S>>>;

// Gradients of every parameter that participated in the graph, in the
// store's registration order.
template <typename S>
NamedGradsT<S> collect_grads(const seq::ParamStore<S>& params,
                             seq::Graph<S>& g) {
  NamedGradsT<S> out;
  for (const auto& name : params.names())
    if (g.bound(name)) out.emplace_back(name, g.grad(name));
  return out;
}

template <typename S>
double global_grad_norm(const NamedGradsT<S>& grads) {
  double sq = 0.0;
  for (const auto& [name, gmat] : grads)
    sq += gmat.template cast<double>().array().square().sum();
  return std::sqrt(sq);
}

// Scales all gradients by max_norm/norm when the global norm exceeds it.
template <typename S>
double clip_global_norm(NamedGradsT<S>& grads, double max_norm) {
  double norm = global_grad_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    S f = S(max_norm / norm);
    for (auto& [name, gmat] : grads) gmat *= f;
  }
  return norm;
}

template <typename S>
class Adam {
 public:
  explicit Adam(const AdamConfig& cfg = {}) : cfg_(cfg) {}

  int64_t steps() const { return t_; }

  void step(seq::ParamStore<S>& params, const NamedGradsT<S>& grads) {
    ++t_;
    for (const auto& [name, gmat] : grads) {
      auto& slot = state_[name];
      if (slot.m.size() == 0) {
        slot.m = Mat<S>::Zero(gmat.rows(), gmat.cols());
        slot.v = Mat<S>::Zero(gmat.rows(), gmat.cols());
      }
      adam_update(params.at(name), slot.m, slot.v, gmat, t_, cfg_);
    }
  }

 private:
  struct Slot {
    Mat<S> m, v;
  };
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::unordered_map<std::string, Slot> state_;
};

// Label layout for domain classification; columns are sorted domain names.
struct LabelMap {
  std::map<std::string, int> index;
  bool multi_label = false;

  static LabelMap build(const std::vector<Dialogue>& dialogues) {
    LabelMap lm;
    for (const auto& d : dialogues) {
      for (const auto& dom : d.domains)
        lm.index.emplace(dom, 0);
      if (d.domains.size() > 1) lm.multi_label = true;
    }
    int col = 0;
    for (auto& [dom, idx] : lm.index) idx = col++;
    return lm;
  }

  int size() const { return static_cast<int>(index.size()); }
  std::vector<std::string> names() const {
    std::vector<std::string> out(index.size());
    for (const auto& [dom, idx] : index) out[idx] = dom;
    return out;
  }
};

// Weighted sum of the generative and summary objectives, both maximized.
template <typename S>
int combined_objective(seq::Graph<S>& g, int gen, int sum, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw UsageError("alpha must be in [0, 1]");
  return g.tape.add(g.tape.scale(gen, S(alpha)),
                    g.tape.scale(sum, S(1.0 - alpha)));
}

struct ObjectiveOpts {
  gen::Mode mode = gen::Mode::train;
  double alpha = 0.4;
  double tau = 0.01;
  double word_dropout = 0.4;
  double kl_weight = 0.0;
  int summary_max_len = 30;
  double lambda = 1.0;
  const LabelMap* labels = nullptr;  // enables the classification term
};

struct ObjectiveStats {
  double nll_x = 0, nll_y = 0, kl_x = 0, kl_y = 0;
  double gen = 0, sum = 0;
  int pairs = 0;
};

// One dialogue's training objective: mean per-pair evidence bound plus the
// summary-similarity term, optionally plus the weighted classification
// likelihood when the model carries a classifier head.
template <typename S>
int dialogue_objective(seq::Graph<S>& g, const seq::Model<S>& m,
                       const BatchDialogue& bd, const ObjectiveOpts& opts,
                       std::mt19937_64& rng, ObjectiveStats* stats = nullptr) {
  if (bd.encoded.empty()) throw DataError("dialogue has no utterance pairs");
  auto& t = g.tape;
  gen::ReconstructOpts ropts;
  ropts.mode = opts.mode;
  ropts.tau = opts.tau;
  ropts.word_dropout_rate = opts.word_dropout;

  std::vector<int> elbos, e_x, e_y;
  for (const auto& ep : bd.encoded) {
    std::vector<int> x(ep.x.begin(), ep.x.begin() + ep.x_len);
    std::vector<int> y(ep.y.begin(), ep.y.begin() + ep.y_len);
    auto nodes = gen::reconstruct_pair(g, m, x, y, ropts, rng);
    elbos.push_back(gen::elbo(g, nodes, opts.kl_weight));
    e_x.push_back(nodes.e_x);
    e_y.push_back(nodes.e_y);
    if (stats) {
      auto b = gen::breakdown(g, nodes);
      stats->nll_x += b.nll_x;
      stats->nll_y += b.nll_y;
      stats->kl_x += b.kl_x;
      stats->kl_y += b.kl_y;
      ++stats->pairs;
    }
  }
  int gen_obj = elbos[0];
  for (size_t i = 1; i < elbos.size(); ++i)
    gen_obj = t.add(gen_obj, elbos[i]);
  gen_obj = t.scale(gen_obj, S(1.0 / double(elbos.size())));

  summ::SummaryLatentNodes latents{};
  int sum_obj = summ::summary_objective(g, m, e_x, e_y, opts.summary_max_len,
                                        opts.tau, &latents);
  if (stats) {
    stats->gen += double(t.val(gen_obj)(0, 0));
    stats->sum += double(t.val(sum_obj)(0, 0));
  }
  int obj = combined_objective(g, gen_obj, sum_obj, opts.alpha);

  if (m.has_classifier() && opts.labels && !bd.dialogue->domains.empty()) {
    int feats = t.concat_cols(latents.s_x, latents.s_y);
    int logits = t.add_rowwise(t.matmul(feats, g.p("classifier/w")),
                               g.p("classifier/b"));
    int ce;
    if (opts.labels->multi_label) {
      Mat<S> target = Mat<S>::Zero(1, opts.labels->size());
      for (const auto& dom : bd.dialogue->domains)
        target(0, opts.labels->index.at(dom)) = S(1);
      ce = t.sigmoid_cross_entropy(logits, std::move(target));
    } else {
      ce = t.cross_entropy_rows(
          logits, {opts.labels->index.at(*bd.dialogue->domains.begin())});
    }
    obj = t.add(obj, t.scale(t.neg(ce), S(opts.lambda)));
  }
  return obj;
}

struct StepRecord {
  int64_t step = 0;  // 1-based
  double loss = 0;   // minimized objective, recorded before the update
  double gen = 0;    // batch-mean per-pair evidence bound
  double sum = 0;    // batch-mean summary similarity
  double nll_x = 0, nll_y = 0, kl_x = 0, kl_y = 0;  // per-pair means
  double kl_weight = 0;
  double grad_norm = 0;  // before clipping
};

struct TrainResult {
  std::vector<StepRecord> records;
  int64_t total_steps = 0;
  int epochs_run = 0;
};

using StepCallback = std::function<void(const StepRecord&)>;
using EpochCallback = std::function<void(int epoch)>;

// Full optimization loop: whole-dialogue batches, annealed KL weight, global
// gradient clipping, Adam. Throws TrainingError on a non-finite loss.
template <typename S>
TrainResult train(seq::Model<S>& m, const std::vector<Dialogue>& dialogues,
                  const Vocabulary& cv, const Vocabulary& av,
                  const TrainConfig& cfg, const LabelMap* labels = nullptr,
                  const StepCallback& on_step = {},
                  const EpochCallback& on_epoch = {}) {
  cfg.validate();
  BatchIterator it(dialogues, cv, av, cfg.batch_size, cfg.seed);
  int bpe = it.batches_per_epoch();
  if (bpe == 0) throw DataError("no dialogue in the corpus has a usable pair");
  int64_t total = cfg.max_steps > 0
                      ? cfg.max_steps
                      : static_cast<int64_t>(bpe) * cfg.max_epochs;
  if (total <= 0) throw UsageError("training would run zero steps");

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  Adam<S> opt(AdamConfig{cfg.learning_rate});
  TrainResult res;
  res.total_steps = total;

  int64_t step = 0;
  for (int epoch = 0; step < total; ++epoch) {
    it.reset(cfg.seed + static_cast<uint64_t>(epoch));
    Batch batch;
    while (step < total && it.next(batch)) {
      ObjectiveOpts opts;
      opts.mode = gen::Mode::train;
      opts.alpha = cfg.alpha;
      opts.tau = cfg.tau;
      opts.word_dropout = cfg.word_dropout;
      opts.kl_weight = kl_weight_schedule(step, total, cfg.kl_threshold,
                                          cfg.kl_anneal_fraction);
      opts.summary_max_len = cfg.summary_max_len;
      opts.lambda = cfg.lambda;
      opts.labels = labels;

      seq::Graph<S> g(m.params());
      ObjectiveStats stats;
      int obj = -1;
      for (const auto& bd : batch.dialogues) {
        int o = dialogue_objective(g, m, bd, opts, rng, &stats);
        obj = obj < 0 ? o : g.tape.add(obj, o);
      }
      int n = static_cast<int>(batch.dialogues.size());
      int loss_node = g.tape.neg(g.tape.scale(obj, S(1.0 / double(n))));
      double loss = double(g.tape.val(loss_node)(0, 0));

      g.tape.backward(loss_node);
      auto grads = collect_grads(m.params(), g);
      double gnorm = global_grad_norm(grads);
      if (!std::isfinite(loss) || !std::isfinite(gnorm))
        throw TrainingError("non-finite loss or gradient at step " +
                            std::to_string(step + 1));
      clip_global_norm(grads, cfg.grad_clip);
      opt.step(m.params(), grads);
      ++step;

      StepRecord rec;
      rec.step = step;
      rec.loss = loss;
      rec.gen = stats.gen / double(n);
      rec.sum = stats.sum / double(n);
      if (stats.pairs > 0) {
        rec.nll_x = stats.nll_x / stats.pairs;
        rec.nll_y = stats.nll_y / stats.pairs;
        rec.kl_x = stats.kl_x / stats.pairs;
        rec.kl_y = stats.kl_y / stats.pairs;
      }
      rec.kl_weight = opts.kl_weight;
      rec.grad_norm = gnorm;
      res.records.push_back(rec);
      if (on_step) on_step(rec);
    }
    res.epochs_run = epoch + 1;
    if (on_epoch) on_epoch(epoch);
  }
  return res;
}

}  // namespace sutat::train
