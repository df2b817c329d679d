#include "sutat/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sutat {

using nlohmann::json;

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '\'';
}

bool is_digit_separator(char c) {
  return c == '.' || c == ',' || c == ':' || c == '-' || c == '/';
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

json parse_json_file(const std::string& path) {
  auto in = open_or_throw(path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed JSON in " + path);
  return j;
}

Role parse_speaker(const std::string& s, const std::string& where) {
  if (s == "customer") return Role::customer;
  if (s == "agent") return Role::agent;
  throw DataError(where + ": unknown speaker tag '" + s + "'");
}

void append_turn(Dialogue& d, Role speaker, const std::string& text,
                 const std::string& where) {
  auto tokens = tokenize(text);
  if (tokens.empty()) throw DataError(where + ": turn has empty text");
  d.turns.push_back(Turn{speaker, std::move(tokens)});
}

std::vector<Dialogue> load_native_jsonl(const std::string& path) {
  auto in = open_or_throw(path);
  std::vector<Dialogue> out;
  std::string line;
  int record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = path + " record " + std::to_string(record);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError(where + ": malformed JSON");
    Dialogue d;
    if (!j.contains("id") || !j.contains("turns"))
      throw DataError(where + ": missing id or turns");
    d.id = j["id"].get<std::string>();
    for (const auto& t : j["turns"]) {
      if (!t.contains("speaker") || !t.contains("text"))
        throw DataError(where + ": turn missing speaker or text");
      append_turn(d, parse_speaker(t["speaker"].get<std::string>(), where),
                  t["text"].get<std::string>(), where);
    }
    if (d.turns.empty()) throw DataError(where + ": dialogue has no turns");
    if (j.contains("domains"))
      for (const auto& dom : j["domains"]) d.domains.insert(dom.get<std::string>());
    out.push_back(std::move(d));
    ++record;
  }
  return out;
}

// MultiWOZ 2.0 data.json: {dialogue_id: {"goal": {...}, "log": [{"text",
// "metadata"}...]}}. User turns carry an empty metadata object.
std::vector<Dialogue> load_multiwoz(const std::string& path) {
  json j = parse_json_file(path);
  if (!j.is_object()) throw DataError(path + ": expected a top-level object");
  static const char* kGoalDomains[] = {"taxi",       "police", "hospital",
                                       "hotel",      "attraction", "train",
                                       "restaurant", "bus"};
  std::vector<std::string> ids;
  for (auto it = j.begin(); it != j.end(); ++it) ids.push_back(it.key());
  std::sort(ids.begin(), ids.end());
  std::vector<Dialogue> out;
  for (const auto& id : ids) {
    const json& rec = j[id];
    std::string where = path + " dialogue " + id;
    Dialogue d;
    d.id = id;
    if (rec.contains("goal") && rec["goal"].is_object()) {
      for (const char* dom : kGoalDomains) {
        if (rec["goal"].contains(dom) && rec["goal"][dom].is_object() &&
            !rec["goal"][dom].empty())
          d.domains.insert(dom);
      }
    }
    if (!rec.contains("log") || !rec["log"].is_array())
      throw DataError(where + ": missing log");
    int i = 0;
    for (const auto& t : rec["log"]) {
      if (!t.contains("text")) throw DataError(where + ": log entry missing text");
      Role speaker;
      if (t.contains("metadata") && t["metadata"].is_object())
        speaker = t["metadata"].empty() ? Role::customer : Role::agent;
      else
        speaker = (i % 2 == 0) ? Role::customer : Role::agent;
      append_turn(d, speaker, t["text"].get<std::string>(), where);
      ++i;
    }
    if (d.turns.empty()) throw DataError(where + ": dialogue has no turns");
    out.push_back(std::move(d));
  }
  return out;
}

// Taskmaster-1: a JSON array of conversations with USER/ASSISTANT utterances.
// Domain label = instruction_id with its trailing "-<number>" stripped.
std::vector<Dialogue> load_taskmaster(const std::string& path) {
  json j = parse_json_file(path);
  if (!j.is_array()) throw DataError(path + ": expected a top-level array");
  std::vector<Dialogue> out;
  for (const auto& rec : j) {
    if (!rec.contains("conversation_id"))
      throw DataError(path + ": conversation missing conversation_id");
    std::string id = rec["conversation_id"].get<std::string>();
    std::string where = path + " conversation " + id;
    Dialogue d;
    d.id = id;
    if (rec.contains("instruction_id")) {
      std::string instr = rec["instruction_id"].get<std::string>();
      auto dash = instr.find_last_of('-');
      if (dash != std::string::npos &&
          instr.find_first_not_of("0123456789", dash + 1) == std::string::npos)
        instr = instr.substr(0, dash);
      if (!instr.empty()) d.domains.insert(instr);
    }
    if (!rec.contains("utterances") || !rec["utterances"].is_array())
      throw DataError(where + ": missing utterances");
    for (const auto& u : rec["utterances"]) {
      if (!u.contains("speaker") || !u.contains("text"))
        throw DataError(where + ": utterance missing speaker or text");
      std::string sp = u["speaker"].get<std::string>();
      Role speaker;
      if (sp == "USER")
        speaker = Role::customer;
      else if (sp == "ASSISTANT")
        speaker = Role::agent;
      else
        throw DataError(where + ": unknown speaker tag '" + sp + "'");
      append_turn(d, speaker, u["text"].get<std::string>(), where);
    }
    if (d.turns.empty()) throw DataError(where + ": dialogue has no turns");
    out.push_back(std::move(d));
  }
  std::sort(out.begin(), out.end(),
            [](const Dialogue& a, const Dialogue& b) { return a.id < b.id; });
  return out;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::string lower;
  lower.reserve(text.size());
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  };
  const size_t n = lower.size();
  for (size_t i = 0; i < n; ++i) {
    char c = lower[i];
    unsigned char uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      flush();
    } else if (is_word_char(c) || uc >= 0x80) {
      cur.push_back(c);  // non-ASCII bytes pass through untouched
    } else if (is_digit_separator(c) && i > 0 && i + 1 < n &&
               is_digit(lower[i - 1]) && is_digit(lower[i + 1])) {
      cur.push_back(c);  // keep 13:45, 3.5, 1,000 together
    } else {
      flush();
      tokens.push_back(std::string(1, c));
    }
  }
  flush();
  return tokens;
}

CorpusFormat parse_corpus_format(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "multiwoz-json") return CorpusFormat::multiwoz_json;
  if (name == "taskmaster-json") return CorpusFormat::taskmaster_json;
  throw UsageError("unknown corpus format: " + name);
}

std::vector<Dialogue> load_corpus(const std::string& path, CorpusFormat format) {
  switch (format) {
    case CorpusFormat::jsonl:
      return load_native_jsonl(path);
    case CorpusFormat::multiwoz_json:
      return load_multiwoz(path);
    case CorpusFormat::taskmaster_json:
      return load_taskmaster(path);
  }
  throw UsageError("unknown corpus format");
}

std::vector<UtterancePair> pair_utterances(const Dialogue& d) {
  // Merge consecutive same-speaker turns.
  std::vector<Turn> merged;
  for (const Turn& t : d.turns) {
    if (!merged.empty() && merged.back().speaker == t.speaker) {
      auto& dst = merged.back().tokens;
      dst.insert(dst.end(), t.tokens.begin(), t.tokens.end());
    } else {
      merged.push_back(t);
    }
  }
  size_t start = 0;
  if (!merged.empty() && merged.front().speaker == Role::agent) start = 1;

  std::vector<UtterancePair> pairs;
  int turn_index = 0;
  for (size_t i = start; i + 1 < merged.size(); i += 2) {
    // After merging and dropping a leading agent turn, speakers alternate.
    pairs.push_back(UtterancePair{merged[i].tokens, merged[i + 1].tokens, d.id,
                                  turn_index++});
  }
  return pairs;
}

Vocabulary::Vocabulary(Role role, std::vector<std::string> tokens_in_id_order)
    : role_(role) {
  id_to_token_ = {kPadToken, kUnkToken, kBosToken, kEosToken};
  id_to_token_.insert(id_to_token_.end(), tokens_in_id_order.begin(),
                      tokens_in_id_order.end());
  for (int i = 0; i < static_cast<int>(id_to_token_.size()); ++i)
    token_to_id_[id_to_token_[i]] = i;
}

int Vocabulary::encode(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::decode(int id) const {
  if (id < 0 || id >= size())
    throw DataError("token id out of range: " + std::to_string(id));
  return id_to_token_[id];
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

std::vector<int> Vocabulary::encode_sequence(
    const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(encode(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode_sequence(
    const std::vector<int>& ids) const {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (int id : ids) tokens.push_back(decode(id));
  return tokens;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  for (int i = kNumSpecials; i < size(); ++i) out << id_to_token_[i] << "\n";
}

Vocabulary Vocabulary::load(const std::string& path, Role role) {
  auto in = open_or_throw(path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  return Vocabulary(role, std::move(tokens));
}

Vocabulary build_vocabulary(const std::vector<UtterancePair>& pairs, Role role,
                            int min_freq, int max_size) {
  std::unordered_map<std::string, long> freq;
  for (const auto& p : pairs) {
    const auto& seq = role == Role::customer ? p.x : p.y;
    for (const auto& t : seq) ++freq[t];
  }
  std::vector<std::pair<std::string, long>> items;
  for (auto& [tok, f] : freq)
    if (f >= min_freq) items.emplace_back(tok, f);
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;  // ties broken lexicographically
  });
  if (static_cast<int>(items.size()) > max_size) items.resize(max_size);
  std::vector<std::string> tokens;
  tokens.reserve(items.size());
  for (auto& [tok, f] : items) tokens.push_back(tok);
  return Vocabulary(role, std::move(tokens));
}

void FactualLexicon::add(const std::string& token, const std::string& rule) {
  auto& entry = entries_[token];
  if (std::find(entry.rules.begin(), entry.rules.end(), rule) ==
      entry.rules.end())
    entry.rules.push_back(rule);
}

void FactualLexicon::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  for (const auto& [tok, entry] : entries_) {
    out << tok << "\t";
    for (size_t i = 0; i < entry.rules.size(); ++i) {
      if (i) out << ",";
      out << entry.rules[i];
    }
    out << "\n";
  }
}

FactualLexicon FactualLexicon::load(const std::string& path) {
  auto in = open_or_throw(path);
  FactualLexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    std::string tok = line.substr(0, tab);
    if (tab == std::string::npos) {
      lex.add(tok, "gazetteer");
      continue;
    }
    std::stringstream rules(line.substr(tab + 1));
    std::string rule;
    while (std::getline(rules, rule, ','))
      if (!rule.empty()) lex.add(tok, rule);
  }
  return lex;
}

bool is_numeric_token(const std::string& token) {
  if (token.empty()) return false;
  bool has_digit = false;
  for (char c : token) {
    if (is_digit(c))
      has_digit = true;
    else if (!is_digit_separator(c))
      return false;
  }
  return has_digit && is_digit(token.front()) && is_digit(token.back());
}

bool is_time_token(const std::string& token) {
  auto colon = token.find(':');
  if (colon == std::string::npos || colon == 0 || colon > 2) return false;
  if (token.size() - colon - 1 != 2) return false;
  for (size_t i = 0; i < token.size(); ++i)
    if (i != colon && !is_digit(token[i])) return false;
  return true;
}

bool is_alnum_code_token(const std::string& token) {
  if (token.size() < 6) return false;
  bool has_alpha = false, has_digit = false;
  for (char c : token) {
    if (std::isalpha(static_cast<unsigned char>(c)))
      has_alpha = true;
    else if (is_digit(c))
      has_digit = true;
    else
      return false;
  }
  return has_alpha && has_digit;
}

FactualLexicon extract_factual_lexicon(const std::vector<UtterancePair>& pairs,
                                       const std::set<std::string>& gazetteer) {
  FactualLexicon lex;
  auto classify = [&](const std::string& tok) {
    if (is_numeric_token(tok)) lex.add(tok, "numeric");
    if (is_time_token(tok)) lex.add(tok, "time");
    if (is_alnum_code_token(tok)) lex.add(tok, "alphanumeric-code");
    if (gazetteer.count(tok)) lex.add(tok, "gazetteer");
  };
  for (const auto& p : pairs) {
    for (const auto& t : p.x) classify(t);
    for (const auto& t : p.y) classify(t);
  }
  return lex;
}

std::set<std::string> load_gazetteer(const std::string& path) {
  auto in = open_or_throw(path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

BatchIterator::BatchIterator(const std::vector<Dialogue>& dialogues,
                             const Vocabulary& customer_vocab,
                             const Vocabulary& agent_vocab, int batch_size,
                             uint64_t shuffle_seed)
    : dialogues_(&dialogues),
      customer_vocab_(&customer_vocab),
      agent_vocab_(&agent_vocab),
      batch_size_(batch_size) {
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  reset(shuffle_seed);
}

void BatchIterator::reset(uint64_t shuffle_seed) {
  order_.clear();
  for (int i = 0; i < static_cast<int>(dialogues_->size()); ++i)
    if (!pair_utterances((*dialogues_)[i]).empty()) order_.push_back(i);
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(order_.begin(), order_.end(), rng);
  cursor_ = 0;
}

int BatchIterator::batches_per_epoch() const {
  return static_cast<int>((order_.size() + batch_size_ - 1) / batch_size_);
}

bool BatchIterator::next(Batch& out) {
  if (cursor_ >= order_.size()) return false;
  out = Batch{};
  size_t end = std::min(cursor_ + static_cast<size_t>(batch_size_), order_.size());
  for (size_t i = cursor_; i < end; ++i) {
    BatchDialogue bd;
    bd.dialogue = &(*dialogues_)[order_[i]];
    bd.pairs = pair_utterances(*bd.dialogue);
    for (const auto& p : bd.pairs) {
      EncodedPair ep;
      ep.x = customer_vocab_->encode_sequence(p.x);
      ep.y = agent_vocab_->encode_sequence(p.y);
      ep.x_len = static_cast<int>(ep.x.size());
      ep.y_len = static_cast<int>(ep.y.size());
      out.customer_max_len = std::max(out.customer_max_len, ep.x_len);
      out.agent_max_len = std::max(out.agent_max_len, ep.y_len);
      bd.encoded.push_back(std::move(ep));
    }
    out.dialogues.push_back(std::move(bd));
  }
  for (auto& bd : out.dialogues)
    for (auto& ep : bd.encoded) {
      ep.x.resize(out.customer_max_len, kPadId);
      ep.y.resize(out.agent_max_len, kPadId);
    }
  cursor_ = end;
  return true;
}

}  // namespace sutat
