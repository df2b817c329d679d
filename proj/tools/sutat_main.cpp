// Command-line front end. Talks to the library exclusively through the C API
// so the shared-library surface stays exercised.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sutat/sutat_c.h"

namespace {

int report(sutat_status status, const std::string& success_message) {
  if (status == SUTAT_OK) {
    if (!success_message.empty()) std::cout << success_message << "\n";
    return 0;
  }
  std::cerr << "error: " << sutat_last_error() << "\n";
  return int(status);
}

void print_file(const std::string& path) {
  std::ifstream in(path);
  std::cout << in.rdbuf();
}

struct StepPrinter {
  bool verbose = std::getenv("SUTAT_VERBOSE") != nullptr;
  static void callback(int step, double loss, double kl_weight, void* user) {
    auto* self = static_cast<StepPrinter*>(user);
    if (self->verbose || step % 10 == 0)
      std::printf("step %d  loss %.4f  kl_weight %.3f\n", step, loss,
                  kl_weight);
  }
};

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised two-speaker dialogue summarizer"};
  app.require_subcommand(1);

  // prepare
  std::string in_path, format = "jsonl", out_dir, gazetteer;
  int min_freq = 2, max_vocab = 20000;
  auto* prepare = app.add_subcommand(
      "prepare", "Build a prepared corpus directory from raw dialogues");
  prepare->add_option("--input", in_path, "Raw corpus file")->required();
  prepare->add_option("--format", format,
                      "jsonl | multiwoz_json | taskmaster_json");
  prepare->add_option("--output-dir", out_dir, "Prepared directory")
      ->required();
  prepare->add_option("--min-freq", min_freq, "Vocabulary frequency floor");
  prepare->add_option("--max-vocab", max_vocab, "Vocabulary size cap");
  prepare->add_option("--gazetteer", gazetteer,
                      "Extra factual tokens, one per line");

  // train
  std::string corpus_dir, config_path, arch, ckpt_out;
  auto* train = app.add_subcommand("train", "Train a model on a prepared corpus");
  train->add_option("--corpus-dir", corpus_dir, "Prepared directory")
      ->required();
  train->add_option("--config", config_path, "key=value or JSON config file");
  train->add_option("--arch", arch, "Sequence model family")
      ->check(CLI::IsMember({"recurrent", "selfattentive"}));
  train->add_option("--out", ckpt_out, "Checkpoint path")->required();

  // summarize
  std::string s_ckpt, s_corpus, s_split = "test", s_out;
  int s_max_len = 30;
  bool no_copy = false;
  auto* summarize =
      app.add_subcommand("summarize", "Write summaries for a corpus split");
  summarize->add_option("--checkpoint", s_ckpt, "Checkpoint path")->required();
  summarize->add_option("--corpus-dir", s_corpus, "Prepared directory")
      ->required();
  summarize->add_option("--split", s_split, "train | valid | test");
  summarize->add_option("--max-len", s_max_len, "Summary length cap");
  summarize->add_flag("--no-copy", no_copy,
                      "Disable factual-token substitution");
  summarize->add_option("--out", s_out,
                        "Summary JSONL (default: <corpus-dir>/summaries.<split>.jsonl)");

  // evaluate
  std::string e_ckpt, e_summaries, e_references, e_corpus, e_split = "test",
                                                           e_out;
  bool want_ppl = false;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Score summaries against references, or report perplexity");
  evaluate->add_option("--checkpoint", e_ckpt, "Checkpoint path (for --ppl)");
  evaluate->add_option("--summaries", e_summaries, "Summary JSONL to score");
  evaluate->add_option("--references", e_references, "Reference JSONL");
  evaluate->add_flag("--ppl", want_ppl, "Report reconstruction perplexity");
  evaluate->add_option("--corpus-dir", e_corpus,
                       "Prepared directory (for --ppl)");
  evaluate->add_option("--split", e_split, "Split for --ppl");
  evaluate->add_option("--out", e_out, "Report JSON path");

  // classify
  std::string c_ckpt, c_corpus, c_mode = "unsupervised", c_out;
  auto* classify =
      app.add_subcommand("classify", "Domain classification AUC from summaries");
  classify->add_option("--checkpoint", c_ckpt, "Checkpoint path")->required();
  classify->add_option("--corpus-dir", c_corpus, "Prepared directory")
      ->required();
  classify->add_option("--mode", c_mode, "unsupervised | supervised")
      ->check(CLI::IsMember({"unsupervised", "supervised"}));
  classify->add_option("--out", c_out, "Report JSON path");

  // generate
  std::string g_ckpt, g_out;
  int g_count = 3, g_max_len = 30;
  uint64_t g_seed = 1;
  auto* generate =
      app.add_subcommand("generate", "Sample novel customer/agent pairs");
  generate->add_option("--checkpoint", g_ckpt, "Checkpoint path")->required();
  generate->add_option("--count", g_count, "Number of pairs");
  generate->add_option("--seed", g_seed, "Sampling seed");
  generate->add_option("--max-len", g_max_len, "Utterance length cap");
  generate->add_option("--out", g_out, "Output JSONL (default: stdout)");

  // make-synthetic
  std::string m_out;
  int m_dialogues = 200, m_domains = 2;
  uint64_t m_seed = 7;
  auto* synth = app.add_subcommand(
      "make-synthetic", "Write a templated synthetic corpus, ready to train");
  synth->add_option("--out", m_out, "Prepared directory")->required();
  synth->add_option("--n-dialogues", m_dialogues, "Dialogue count");
  synth->add_option("--n-domains", m_domains, "Domain count");
  synth->add_option("--seed", m_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (prepare->parsed())
    return report(sutat_prepare(in_path.c_str(), format.c_str(),
                                out_dir.c_str(), min_freq, max_vocab,
                                opt(gazetteer)),
                  "prepared corpus in " + out_dir);

  if (train->parsed()) {
    StepPrinter printer;
    return report(sutat_train(corpus_dir.c_str(), opt(config_path), opt(arch),
                              ckpt_out.c_str(), StepPrinter::callback,
                              &printer),
                  "wrote checkpoint " + ckpt_out + " and report " + ckpt_out +
                      ".report.jsonl");
  }

  if (summarize->parsed()) {
    if (s_out.empty()) s_out = s_corpus + "/summaries." + s_split + ".jsonl";
    sutat_model* model = nullptr;
    sutat_status st = sutat_model_open(s_ckpt.c_str(), &model);
    if (st == SUTAT_OK) {
      st = sutat_summarize(model, s_corpus.c_str(), s_split.c_str(), s_max_len,
                           no_copy ? 0 : 1, s_out.c_str());
      sutat_model_close(model);
    }
    return report(st, "wrote summaries to " + s_out);
  }

  if (evaluate->parsed()) {
    if (want_ppl) {
      if (e_ckpt.empty() || e_corpus.empty()) {
        std::cerr << "error: --ppl needs --checkpoint and --corpus-dir\n";
        return 1;
      }
      if (e_out.empty()) e_out = e_ckpt + ".ppl.json";
      sutat_model* model = nullptr;
      sutat_status st = sutat_model_open(e_ckpt.c_str(), &model);
      if (st == SUTAT_OK) {
        st = sutat_evaluate_ppl(model, e_corpus.c_str(), e_split.c_str(),
                                e_out.c_str());
        sutat_model_close(model);
      }
      int code = report(st, "");
      if (code == 0) print_file(e_out);
      return code;
    }
    if (e_summaries.empty() || e_references.empty()) {
      std::cerr << "error: need --summaries and --references, or --ppl\n";
      return 1;
    }
    if (e_out.empty()) e_out = e_summaries + ".rouge.json";
    int code = report(sutat_evaluate_rouge(e_summaries.c_str(),
                                           e_references.c_str(),
                                           e_out.c_str()),
                      "");
    if (code == 0) print_file(e_out);
    return code;
  }

  if (classify->parsed()) {
    if (c_out.empty()) c_out = c_ckpt + ".auc." + c_mode + ".json";
    sutat_model* model = nullptr;
    sutat_status st = sutat_model_open(c_ckpt.c_str(), &model);
    if (st == SUTAT_OK) {
      st = sutat_classify(model, c_corpus.c_str(), c_mode.c_str(),
                          c_out.c_str());
      sutat_model_close(model);
    }
    int code = report(st, "");
    if (code == 0) print_file(c_out);
    return code;
  }

  if (generate->parsed()) {
    bool to_stdout = g_out.empty();
    if (to_stdout) g_out = "/dev/stdout";
    sutat_model* model = nullptr;
    sutat_status st = sutat_model_open(g_ckpt.c_str(), &model);
    if (st == SUTAT_OK) {
      st = sutat_generate(model, g_count, g_seed, g_max_len, g_out.c_str());
      sutat_model_close(model);
    }
    return report(st, to_stdout ? "" : "wrote samples to " + g_out);
  }

  if (synth->parsed())
    return report(sutat_make_synthetic(m_out.c_str(), m_dialogues, m_domains,
                                       m_seed),
                  "wrote synthetic corpus to " + m_out);

  return 1;
}
