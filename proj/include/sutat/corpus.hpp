#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sutat/errors.hpp"

namespace sutat {

enum class Role { customer, agent };

inline const char* role_name(Role r) {
  return r == Role::customer ? "customer" : "agent";
}

// Special token ids, fixed across every vocabulary.
constexpr int kPadId = 0;
constexpr int kUnkId = 1;
constexpr int kBosId = 2;
constexpr int kEosId = 3;
constexpr int kNumSpecials = 4;

constexpr const char* kPadToken = "<pad>";
constexpr const char* kUnkToken = "<unk>";
constexpr const char* kBosToken = "<bos>";
constexpr const char* kEosToken = "<eos>";

struct Turn {
  Role speaker;
  std::vector<std::string> tokens;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;
  std::set<std::string> domains;
};

struct UtterancePair {
  std::vector<std::string> x;  // customer tokens
  std::vector<std::string> y;  // agent tokens
  std::string dialogue_id;
  int turn_index = 0;
};

// Lowercase, isolate punctuation, split on whitespace. Separator characters
// flanked by digits on both sides stay inside the token so times ("13:45"),
// decimals and codes survive; apostrophes stay inside words ("doesn't").
std::vector<std::string> tokenize(const std::string& text);

enum class CorpusFormat { jsonl, multiwoz_json, taskmaster_json };

CorpusFormat parse_corpus_format(const std::string& name);

std::vector<Dialogue> load_corpus(const std::string& path, CorpusFormat format);

// Merges consecutive same-speaker turns, drops a leading agent turn and a
// trailing unmatched turn, then pairs each (customer, agent) adjacency.
std::vector<UtterancePair> pair_utterances(const Dialogue& d);

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(Role role, std::vector<std::string> tokens_in_id_order);

  Role role() const { return role_; }
  int size() const { return static_cast<int>(id_to_token_.size()); }
  int encode(const std::string& token) const;  // UNK for out-of-vocabulary
  const std::string& decode(int id) const;     // throws on out-of-range id
  bool contains(const std::string& token) const;

  std::vector<int> encode_sequence(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode_sequence(const std::vector<int>& ids) const;

  // One non-special token per line, line number = id - 4.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path, Role role);

 private:
  Role role_ = Role::customer;
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

Vocabulary build_vocabulary(const std::vector<UtterancePair>& pairs, Role role,
                            int min_freq = 2, int max_size = 20000);

struct LexiconEntry {
  std::vector<std::string> rules;  // numeric | time | alphanumeric-code | gazetteer
};

class FactualLexicon {
 public:
  bool contains(const std::string& token) const {
    return entries_.count(token) > 0;
  }
  const std::map<std::string, LexiconEntry>& entries() const { return entries_; }
  void add(const std::string& token, const std::string& rule);
  size_t size() const { return entries_.size(); }

  void save(const std::string& path) const;  // token<TAB>rule,rule per line
  static FactualLexicon load(const std::string& path);

 private:
  std::map<std::string, LexiconEntry> entries_;
};

// Rule classifiers, exposed for tests.
bool is_numeric_token(const std::string& token);
bool is_time_token(const std::string& token);
bool is_alnum_code_token(const std::string& token);

FactualLexicon extract_factual_lexicon(
    const std::vector<UtterancePair>& pairs,
    const std::set<std::string>& gazetteer = {});

std::set<std::string> load_gazetteer(const std::string& path);

// One dialogue worth of encoded pairs, padded within its batch.
struct EncodedPair {
  std::vector<int> x;  // padded to the batch-wide customer max length
  std::vector<int> y;  // padded to the batch-wide agent max length
  int x_len = 0;       // valid prefix lengths
  int y_len = 0;
};

struct BatchDialogue {
  const Dialogue* dialogue = nullptr;
  std::vector<UtterancePair> pairs;
  std::vector<EncodedPair> encoded;
};

struct Batch {
  std::vector<BatchDialogue> dialogues;
  int customer_max_len = 0;
  int agent_max_len = 0;
};

// Batches are groups of whole dialogues; the summarizer needs every utterance
// of a dialogue together. Single consumer per instance.
class BatchIterator {
 public:
  BatchIterator(const std::vector<Dialogue>& dialogues,
                const Vocabulary& customer_vocab, const Vocabulary& agent_vocab,
                int batch_size, uint64_t shuffle_seed);

  // Restart with a new shuffle (e.g. per epoch).
  void reset(uint64_t shuffle_seed);
  bool next(Batch& out);
  int batches_per_epoch() const;

 private:
  const std::vector<Dialogue>* dialogues_;
  const Vocabulary* customer_vocab_;
  const Vocabulary* agent_vocab_;
  int batch_size_;
  std::vector<int> order_;  // indices of dialogues with >= 1 pair
  size_t cursor_ = 0;
};

}  // namespace sutat
