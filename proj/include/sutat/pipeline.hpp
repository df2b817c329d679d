#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sutat/checkpoint.hpp"
#include "sutat/evaluation.hpp"

namespace sutat::pipe {

// Prepared-corpus directory layout.
constexpr const char* kCorpusFile = "corpus.jsonl";
constexpr const char* kCustomerVocabFile = "vocab.customer.txt";
constexpr const char* kAgentVocabFile = "vocab.agent.txt";
constexpr const char* kLexiconFile = "lexicon.txt";
constexpr const char* kSplitsFile = "splits.json";

void save_corpus(const std::string& path,
                 const std::vector<Dialogue>& dialogues);

struct SplitSizes {
  int train = 0, valid = 0, test = 0;
};

// The two public corpora keep their published split sizes; anything else gets
// a deterministic 80/10/10 cut in corpus order.
SplitSizes split_sizes(int n_dialogues);

struct PreparedCorpus {
  std::vector<Dialogue> dialogues;
  Vocabulary customer_vocab{Role::customer, {}};
  Vocabulary agent_vocab{Role::agent, {}};
  FactualLexicon lexicon;
  std::map<std::string, std::vector<std::string>> splits;  // name -> ids

  std::vector<Dialogue> split(const std::string& name) const;
};

PreparedCorpus load_prepared(const std::string& dir);

struct PrepareOptions {
  std::string input;
  std::string format = "jsonl";
  std::string output_dir;
  int min_freq = 2;
  int max_vocab = 20000;
  std::string gazetteer;  // optional token list, one per line
};

struct PrepareSummary {
  int dialogues = 0;
  SplitSizes splits;
  int customer_vocab = 0, agent_vocab = 0;
  int lexicon = 0;
};

PrepareSummary prepare_corpus(const PrepareOptions& opts);

struct SyntheticOptions {
  std::string out_dir;
  int n_dialogues = 200;
  int n_domains = 2;
  uint64_t seed = 7;
};

// Templated request/confirmation dialogues with disjoint per-domain content
// words and frequent lexicon tokens (times, counts, booking codes), emitted as
// a ready-to-train prepared directory.
PrepareSummary make_synthetic(const SyntheticOptions& opts);

struct TrainOptions {
  std::string corpus_dir;
  std::string config_path;    // empty = defaults
  std::string arch_override;  // empty = config value
  std::string out_path;       // checkpoint; report lands beside it
  std::function<void(const train::StepRecord&)> on_step;
};

struct TrainOutcome {
  train::TrainResult result;
  std::string checkpoint_path;
  std::string report_path;
};

TrainOutcome run_training(const TrainOptions& opts);

void write_summaries(const std::string& path,
                     const std::vector<summ::SummaryResult>& results);
std::vector<summ::SummaryResult> read_summaries(const std::string& path);

std::vector<summ::SummaryResult> run_summarize(const ckpt::LoadedModel& lm,
                                               const PreparedCorpus& corpus,
                                               const std::string& split,
                                               int max_len, bool use_copy);

std::string rouge_report_json(const eval::RougeTable& table);
std::string ppl_report_json(const eval::PerplexityReport& rep);
std::string auc_report_json(const eval::AucReport& rep,
                            const std::string& mode);

eval::RougeTable run_evaluate_rouge(const std::string& summaries_path,
                                    const std::string& references_path);
eval::PerplexityReport run_evaluate_ppl(const ckpt::LoadedModel& lm,
                                        const PreparedCorpus& corpus,
                                        const std::string& split);

// mode "unsupervised": frozen-model linear probe. mode "supervised": joint
// fine-tuning of a classifier head from the checkpointed weights, then scored
// with that head.
eval::AucReport run_classify(const ckpt::LoadedModel& lm,
                             const PreparedCorpus& corpus,
                             const std::string& mode);

struct GeneratedText {
  std::vector<std::string> customer;
  std::vector<std::string> agent;
};

std::vector<GeneratedText> run_generate(const ckpt::LoadedModel& lm,
                                        int count, uint64_t seed, int max_len);
void write_generated(const std::string& path,
                     const std::vector<GeneratedText>& pairs);

}  // namespace sutat::pipe
