#include "sutat/sutat_c.h"

#include <fstream>
#include <string>

#include "sutat/pipeline.hpp"

struct sutat_model {
  sutat::ckpt::LoadedModel lm;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
sutat_status guard(F&& body) {
  try {
    g_last_error.clear();
    body();
    return SUTAT_OK;
  } catch (const sutat::UsageError& e) {
    g_last_error = e.what();
    return SUTAT_ERR_USAGE;
  } catch (const sutat::DataError& e) {
    g_last_error = e.what();
    return SUTAT_ERR_DATA;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SUTAT_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return SUTAT_ERR_RUNTIME;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw sutat::UsageError(std::string(what) + " must not be NULL");
}

void write_text(const char* path, const std::string& text) {
  require(path, "output path");
  std::ofstream out(path);
  if (!out) throw sutat::DataError(std::string("cannot create file: ") + path);
  out << text;
}

}  // namespace

extern "C" {

const char* sutat_last_error(void) { return g_last_error.c_str(); }

sutat_status sutat_prepare(const char* input_path, const char* format,
                           const char* output_dir, int min_freq, int max_vocab,
                           const char* gazetteer_path) {
  return guard([&] {
    require(input_path, "input path");
    require(format, "format");
    require(output_dir, "output directory");
    sutat::pipe::PrepareOptions opts;
    opts.input = input_path;
    opts.format = format;
    opts.output_dir = output_dir;
    opts.min_freq = min_freq;
    opts.max_vocab = max_vocab;
    if (gazetteer_path) opts.gazetteer = gazetteer_path;
    sutat::pipe::prepare_corpus(opts);
  });
}

sutat_status sutat_make_synthetic(const char* output_dir, int n_dialogues,
                                  int n_domains, uint64_t seed) {
  return guard([&] {
    require(output_dir, "output directory");
    sutat::pipe::SyntheticOptions opts;
    opts.out_dir = output_dir;
    opts.n_dialogues = n_dialogues;
    opts.n_domains = n_domains;
    opts.seed = seed;
    sutat::pipe::make_synthetic(opts);
  });
}

sutat_status sutat_train(const char* corpus_dir, const char* config_path,
                         const char* arch, const char* checkpoint_out,
                         sutat_step_fn on_step, void* user) {
  return guard([&] {
    require(corpus_dir, "corpus directory");
    require(checkpoint_out, "checkpoint path");
    sutat::pipe::TrainOptions opts;
    opts.corpus_dir = corpus_dir;
    if (config_path) opts.config_path = config_path;
    if (arch) opts.arch_override = arch;
    opts.out_path = checkpoint_out;
    if (on_step)
      opts.on_step = [on_step, user](const sutat::train::StepRecord& r) {
        on_step(int(r.step), r.loss, r.kl_weight, user);
      };
    sutat::pipe::run_training(opts);
  });
}

sutat_status sutat_model_open(const char* checkpoint_path, sutat_model** out) {
  return guard([&] {
    require(checkpoint_path, "checkpoint path");
    require(out, "output handle");
    *out = new sutat_model{sutat::ckpt::load_checkpoint(checkpoint_path)};
  });
}

void sutat_model_close(sutat_model* model) { delete model; }

sutat_status sutat_summarize(sutat_model* model, const char* corpus_dir,
                             const char* split, int max_len, int use_copy,
                             const char* output_path) {
  return guard([&] {
    require(model, "model handle");
    require(corpus_dir, "corpus directory");
    require(split, "split");
    require(output_path, "output path");
    auto corpus = sutat::pipe::load_prepared(corpus_dir);
    auto results = sutat::pipe::run_summarize(model->lm, corpus, split,
                                              max_len, use_copy != 0);
    sutat::pipe::write_summaries(output_path, results);
  });
}

sutat_status sutat_evaluate_rouge(const char* summaries_path,
                                  const char* references_path,
                                  const char* report_path) {
  return guard([&] {
    require(summaries_path, "summaries path");
    require(references_path, "references path");
    auto table =
        sutat::pipe::run_evaluate_rouge(summaries_path, references_path);
    write_text(report_path, sutat::pipe::rouge_report_json(table));
  });
}

sutat_status sutat_evaluate_ppl(sutat_model* model, const char* corpus_dir,
                                const char* split, const char* report_path) {
  return guard([&] {
    require(model, "model handle");
    require(corpus_dir, "corpus directory");
    require(split, "split");
    auto corpus = sutat::pipe::load_prepared(corpus_dir);
    auto rep = sutat::pipe::run_evaluate_ppl(model->lm, corpus, split);
    write_text(report_path, sutat::pipe::ppl_report_json(rep));
  });
}

sutat_status sutat_classify(sutat_model* model, const char* corpus_dir,
                            const char* mode, const char* report_path) {
  return guard([&] {
    require(model, "model handle");
    require(corpus_dir, "corpus directory");
    require(mode, "mode");
    auto corpus = sutat::pipe::load_prepared(corpus_dir);
    auto rep = sutat::pipe::run_classify(model->lm, corpus, mode);
    write_text(report_path, sutat::pipe::auc_report_json(rep, mode));
  });
}

sutat_status sutat_generate(sutat_model* model, int count, uint64_t seed,
                            int max_len, const char* output_path) {
  return guard([&] {
    require(model, "model handle");
    require(output_path, "output path");
    auto pairs = sutat::pipe::run_generate(model->lm, count, seed, max_len);
    sutat::pipe::write_generated(output_path, pairs);
  });
}

}  // extern "C"
