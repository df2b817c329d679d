#include "sutat/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "json.hpp"

namespace sutat::pipe {

using nlohmann::json;

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::ofstream create_or_throw(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot create file: " + path);
  return out;
}

std::string path_in(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

// Shared tail of prepare_corpus and make_synthetic: derive vocabularies,
// lexicon and split manifest from the dialogues and write the directory.
PrepareSummary write_prepared(const std::string& dir,
                              const std::vector<Dialogue>& dialogues,
                              int min_freq, int max_vocab,
                              const std::set<std::string>& gazetteer) {
  if (dialogues.empty()) throw DataError("corpus has no dialogues");
  std::vector<UtterancePair> pairs;
  for (const auto& d : dialogues) {
    auto dp = pair_utterances(d);
    pairs.insert(pairs.end(), dp.begin(), dp.end());
  }
  if (pairs.empty()) throw DataError("corpus has no usable utterance pairs");

  Vocabulary cv = build_vocabulary(pairs, Role::customer, min_freq, max_vocab);
  Vocabulary av = build_vocabulary(pairs, Role::agent, min_freq, max_vocab);
  FactualLexicon lex = extract_factual_lexicon(pairs, gazetteer);

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory: " + dir);

  save_corpus(path_in(dir, kCorpusFile), dialogues);
  cv.save(path_in(dir, kCustomerVocabFile));
  av.save(path_in(dir, kAgentVocabFile));
  lex.save(path_in(dir, kLexiconFile));

  SplitSizes sz = split_sizes(int(dialogues.size()));
  json splits;
  auto ids = [&](int from, int count) {
    json arr = json::array();
    for (int i = from; i < from + count; ++i) arr.push_back(dialogues[i].id);
    return arr;
  };
  splits["train"] = ids(0, sz.train);
  splits["valid"] = ids(sz.train, sz.valid);
  splits["test"] = ids(sz.train + sz.valid, sz.test);
  create_or_throw(path_in(dir, kSplitsFile)) << splits.dump(2) << '\n';

  PrepareSummary summary;
  summary.dialogues = int(dialogues.size());
  summary.splits = sz;
  summary.customer_vocab = cv.size();
  summary.agent_vocab = av.size();
  summary.lexicon = int(lex.size());
  return summary;
}

}  // namespace

void save_corpus(const std::string& path,
                 const std::vector<Dialogue>& dialogues) {
  auto out = create_or_throw(path);
  for (const auto& d : dialogues) {
    json j;
    j["id"] = d.id;
    j["domains"] = d.domains;
    json turns = json::array();
    for (const auto& t : d.turns)
      turns.push_back({{"speaker", role_name(t.speaker)},
                       {"text", join_tokens(t.tokens)}});
    j["turns"] = std::move(turns);
    out << j.dump() << '\n';
  }
}

SplitSizes split_sizes(int n_dialogues) {
  if (n_dialogues < 1) throw DataError("corpus has no dialogues");
  if (n_dialogues == 10438) return {8438, 1000, 1000};  // MultiWOZ
  if (n_dialogues == 7708) return {6168, 770, 770};     // Taskmaster
  int tenth = n_dialogues / 10;
  return {n_dialogues - 2 * tenth, tenth, tenth};
}

std::vector<Dialogue> PreparedCorpus::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) throw UsageError("unknown split: " + name);
  std::map<std::string, const Dialogue*> by_id;
  for (const auto& d : dialogues) by_id[d.id] = &d;
  std::vector<Dialogue> out;
  for (const auto& id : it->second) {
    auto found = by_id.find(id);
    if (found == by_id.end())
      throw DataError("split '" + name + "' references unknown dialogue: " +
                      id);
    out.push_back(*found->second);
  }
  return out;
}

PreparedCorpus load_prepared(const std::string& dir) {
  PreparedCorpus c;
  c.dialogues = load_corpus(path_in(dir, kCorpusFile), CorpusFormat::jsonl);
  c.customer_vocab =
      Vocabulary::load(path_in(dir, kCustomerVocabFile), Role::customer);
  c.agent_vocab = Vocabulary::load(path_in(dir, kAgentVocabFile), Role::agent);
  c.lexicon = FactualLexicon::load(path_in(dir, kLexiconFile));

  std::ifstream in(path_in(dir, kSplitsFile));
  if (!in) throw DataError("cannot open file: " + path_in(dir, kSplitsFile));
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw DataError("malformed split manifest in " + dir);
  for (const auto& [name, ids] : j.items()) {
    std::vector<std::string> list;
    for (const auto& id : ids) list.push_back(id.get<std::string>());
    c.splits[name] = std::move(list);
  }
  for (const char* required : {"train", "valid", "test"})
    if (!c.splits.count(required))
      throw DataError(std::string("split manifest lacks '") + required + "'");
  return c;
}

PrepareSummary prepare_corpus(const PrepareOptions& opts) {
  auto dialogues = load_corpus(opts.input, parse_corpus_format(opts.format));
  std::set<std::string> gazetteer;
  if (!opts.gazetteer.empty()) gazetteer = load_gazetteer(opts.gazetteer);
  return write_prepared(opts.output_dir, dialogues, opts.min_freq,
                        opts.max_vocab, gazetteer);
}

namespace {

constexpr int kMaxSyntheticDomains = 8;
constexpr const char* kNouns[kMaxSyntheticDomains] = {
    "hotel", "taxi", "table", "flight",
    "ticket", "appointment", "movie", "apartment"};
constexpr const char* kVerbs[kMaxSyntheticDomains] = {
    "book", "call", "reserve", "schedule", "arrange", "order", "plan", "rent"};
constexpr const char* kQualifiers[kMaxSyntheticDomains] = {
    "cheap", "fast", "quiet", "direct", "early", "late", "large", "small"};
constexpr const char* kTimes[] = {"08:15", "09:30", "13:45", "17:00"};
constexpr const char* kCounts[] = {"2", "3", "4", "5"};
constexpr const char* kCodes[] = {"ab12cd34", "qx9k7f2p", "zt5m2r8w",
                                  "jh6n3v9c"};

}  // namespace

PrepareSummary make_synthetic(const SyntheticOptions& opts) {
  if (opts.n_dialogues < 1)
    throw UsageError("need at least one dialogue");
  if (opts.n_domains < 1 || opts.n_domains > kMaxSyntheticDomains)
    throw UsageError("domain count must be between 1 and " +
                     std::to_string(kMaxSyntheticDomains));
  std::mt19937_64 rng(opts.seed);
  auto pick = [&rng](const auto& pool) {
    return pool[std::uniform_int_distribution<size_t>(
        0, std::size(pool) - 1)(rng)];
  };
  std::vector<Dialogue> dialogues;
  for (int i = 0; i < opts.n_dialogues; ++i) {
    int dom = i % opts.n_domains;
    std::string n = kNouns[dom], v = kVerbs[dom], q = kQualifiers[dom];
    std::string time = pick(kTimes), count = pick(kCounts), code = pick(kCodes);
    Dialogue d;
    char id[16];
    std::snprintf(id, sizeof id, "syn-%04d", i);
    d.id = id;
    d.domains = {n};
    d.turns.push_back({Role::customer,
                       tokenize("hello i want to " + v + " a " + q + " " + n +
                                " for " + count + " people at " + time)});
    d.turns.push_back({Role::agent,
                       tokenize("sure your " + q + " " + n +
                                " is confirmed reference " + code + " at " +
                                time)});
    d.turns.push_back({Role::customer,
                       tokenize("great can you repeat the " + n +
                                " reference please")});
    d.turns.push_back({Role::agent,
                       tokenize("yes reference " + code + " for " + count +
                                " people thanks")});
    dialogues.push_back(std::move(d));
  }
  return write_prepared(opts.out_dir, dialogues, /*min_freq=*/1,
                        /*max_vocab=*/20000, {});
}

namespace {

json train_config_fields(const train::TrainConfig& c) {
  return {{"alpha", c.alpha},
          {"tau", c.tau},
          {"kl_threshold", c.kl_threshold},
          {"kl_anneal_fraction", c.kl_anneal_fraction},
          {"word_dropout", c.word_dropout},
          {"lambda", c.lambda},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"max_steps", c.max_steps},
          {"grad_clip", c.grad_clip},
          {"arch", c.arch},
          {"embed_dim", c.embed_dim},
          {"hidden", c.hidden},
          {"latent_dim", c.latent_dim},
          {"heads", c.heads},
          {"layers", c.layers},
          {"prior_hidden", c.prior_hidden},
          {"summary_max_len", c.summary_max_len},
          {"seed", c.seed}};
}

}  // namespace

TrainOutcome run_training(const TrainOptions& opts) {
  PreparedCorpus corpus = load_prepared(opts.corpus_dir);
  train::TrainConfig cfg;
  if (!opts.config_path.empty())
    cfg = train::TrainConfig::from_file(opts.config_path);
  if (!opts.arch_override.empty()) cfg.arch = opts.arch_override;
  cfg.validate();

  auto train_split = corpus.split("train");
  if (train_split.empty()) throw DataError("train split is empty");

  seq::ModelConfig mc =
      cfg.model_config(corpus.customer_vocab.size(), corpus.agent_vocab.size());
  seq::Model<float> model(mc, cfg.seed);

  TrainOutcome outcome;
  outcome.checkpoint_path = opts.out_path;
  outcome.report_path = opts.out_path + ".report.jsonl";

  auto report = create_or_throw(outcome.report_path);
  json header = {{"type", "header"},
                 {"config", train_config_fields(cfg)},
                 {"customer_vocab", corpus.customer_vocab.size()},
                 {"agent_vocab", corpus.agent_vocab.size()},
                 {"train_dialogues", train_split.size()}};
  report << header.dump() << '\n';

  auto on_step = [&](const train::StepRecord& r) {
    json line = {{"type", "step"},     {"step", r.step},
                 {"loss", r.loss},     {"gen", r.gen},
                 {"sum", r.sum},       {"nll_x", r.nll_x},
                 {"nll_y", r.nll_y},   {"kl_x", r.kl_x},
                 {"kl_y", r.kl_y},     {"kl_weight", r.kl_weight},
                 {"grad_norm", r.grad_norm}};
    report << line.dump() << '\n';
    if (opts.on_step) opts.on_step(r);
  };
  auto on_epoch = [&](int) {
    ckpt::save_checkpoint(opts.out_path, model, corpus.customer_vocab,
                          corpus.agent_vocab, {}, cfg);
  };

  outcome.result =
      train::train(model, train_split, corpus.customer_vocab,
                   corpus.agent_vocab, cfg, nullptr, on_step, on_epoch);
  ckpt::save_checkpoint(opts.out_path, model, corpus.customer_vocab,
                        corpus.agent_vocab, {}, cfg);
  return outcome;
}

std::vector<summ::SummaryResult> run_summarize(const ckpt::LoadedModel& lm,
                                               const PreparedCorpus& corpus,
                                               const std::string& split,
                                               int max_len, bool use_copy) {
  auto dialogues = corpus.split(split);
  if (dialogues.empty()) throw DataError("split '" + split + "' is empty");
  std::vector<summ::SummaryResult> out;
  out.reserve(dialogues.size());
  for (const auto& d : dialogues)
    out.push_back(summ::summarize_dialogue(lm.model, d, lm.customer_vocab,
                                           lm.agent_vocab, corpus.lexicon,
                                           max_len, use_copy));
  return out;
}

void write_summaries(const std::string& path,
                     const std::vector<summ::SummaryResult>& results) {
  auto out = create_or_throw(path);
  for (const auto& r : results) {
    json j;
    j["id"] = r.id;
    j["customer_summary"] = join_tokens(r.customer_summary);
    j["agent_summary"] = join_tokens(r.agent_summary);
    json att;
    for (const auto& [role, weights] : r.attention)
      att[role_name(role)] = weights;
    j["attention"] = std::move(att);
    json copies = json::array();
    for (const auto& c : r.copy_log)
      copies.push_back({{"role", role_name(c.role)},
                        {"position", c.position},
                        {"predicted", c.predicted},
                        {"substituted", c.substituted}});
    j["copies"] = std::move(copies);
    out << j.dump() << '\n';
  }
}

std::vector<summ::SummaryResult> read_summaries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open summary file: " + path);
  std::vector<summ::SummaryResult> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") ||
        !j.contains("customer_summary") || !j.contains("agent_summary"))
      throw DataError("summary line " + std::to_string(lineno) +
                      " is not a summary record");
    summ::SummaryResult r;
    r.id = j["id"].get<std::string>();
    r.customer_summary = tokenize(j["customer_summary"].get<std::string>());
    r.agent_summary = tokenize(j["agent_summary"].get<std::string>());
    out.push_back(std::move(r));
  }
  if (out.empty()) throw DataError("summary file has no records: " + path);
  return out;
}

namespace {

json rouge_json(const eval::RougeScore& s) {
  json j = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  if (s.degenerate) j["degenerate"] = true;
  return j;
}

}  // namespace

std::string rouge_report_json(const eval::RougeTable& table) {
  json j;
  for (const auto& [role, row] : table.scores) {
    json metrics;
    for (const auto& [name, score] : row) metrics[name] = rouge_json(score);
    j[role_name(role)] = std::move(metrics);
  }
  j["scored"] = table.scored;
  j["skipped"] = table.skipped;
  j["aggregate"] = "f1";
  return j.dump(2) + "\n";
}

std::string ppl_report_json(const eval::PerplexityReport& rep) {
  json j = {{"customer",
             {{"ppl", rep.customer_ppl},
              {"kl_mean", rep.kl_customer_mean},
              {"tokens", rep.customer_tokens}}},
            {"agent",
             {{"ppl", rep.agent_ppl},
              {"kl_mean", rep.kl_agent_mean},
              {"tokens", rep.agent_tokens}}},
            {"pairs", rep.pairs}};
  return j.dump(2) + "\n";
}

std::string auc_report_json(const eval::AucReport& rep,
                            const std::string& mode) {
  json j = {{"mode", mode},
            {"multi_label", rep.multi_label},
            {"macro_auc", rep.macro_auc},
            {"per_label", rep.per_label},
            {"train_count", rep.train_count},
            {"eval_count", rep.eval_count}};
  return j.dump(2) + "\n";
}

eval::RougeTable run_evaluate_rouge(const std::string& summaries_path,
                                    const std::string& references_path) {
  return eval::score_summaries(read_summaries(summaries_path),
                               eval::load_references(references_path));
}

eval::PerplexityReport run_evaluate_ppl(const ckpt::LoadedModel& lm,
                                        const PreparedCorpus& corpus,
                                        const std::string& split) {
  auto dialogues = corpus.split(split);
  if (dialogues.empty()) throw DataError("split '" + split + "' is empty");
  return eval::perplexity(lm.model, dialogues, lm.customer_vocab,
                          lm.agent_vocab);
}

eval::AucReport run_classify(const ckpt::LoadedModel& lm,
                             const PreparedCorpus& corpus,
                             const std::string& mode) {
  auto train_split = corpus.split("train");
  auto test_split = corpus.split("test");
  if (train_split.empty() || test_split.empty())
    throw DataError("classification needs non-empty train and test splits");

  if (mode == "unsupervised")
    return eval::classify_unsupervised(lm.model, train_split, test_split,
                                       lm.customer_vocab, lm.agent_vocab);
  if (mode != "supervised") throw UsageError("unknown mode: " + mode);

  train::LabelMap labels = train::LabelMap::build(train_split);
  if (labels.size() < 2)
    throw DataError("classification needs at least two domain labels");
  seq::Model<float> model = lm.model;  // fine-tune a copy of the checkpoint
  if (model.has_classifier()) {
    if (lm.labels != labels.names())
      throw DataError("checkpoint classifier labels do not match the corpus");
  } else {
    model.add_classifier(labels.size(), lm.train_config.seed);
  }
  train::train(model, train_split, lm.customer_vocab, lm.agent_vocab,
               lm.train_config, &labels);
  auto rep = eval::classify_supervised_eval(model, labels, test_split,
                                            lm.customer_vocab, lm.agent_vocab);
  rep.train_count = int(train_split.size());
  return rep;
}

std::vector<GeneratedText> run_generate(const ckpt::LoadedModel& lm, int count,
                                        uint64_t seed, int max_len) {
  if (count < 1) throw UsageError("count must be at least 1");
  std::mt19937_64 rng(seed);
  std::vector<GeneratedText> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    auto pair = gen::generate_pair(lm.model, rng, max_len);
    out.push_back({lm.customer_vocab.decode_sequence(pair.customer),
                   lm.agent_vocab.decode_sequence(pair.agent)});
  }
  return out;
}

void write_generated(const std::string& path,
                     const std::vector<GeneratedText>& pairs) {
  auto out = create_or_throw(path);
  for (const auto& p : pairs) {
    json j = {{"customer", join_tokens(p.customer)},
              {"agent", join_tokens(p.agent)}};
    out << j.dump() << '\n';
  }
}

}  // namespace sutat::pipe
