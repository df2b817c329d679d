/* C interface to the dialogue summarizer: corpus preparation, training,
 * summarization, evaluation, classification and sampling over opaque
 * checkpoint handles. All functions return a status code; the message for
 * the most recent failure on the calling thread is available through
 * sutat_last_error(). Outputs are written to the given file paths. */
#ifndef SUTAT_C_H
#define SUTAT_C_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sutat_status {
  SUTAT_OK = 0,
  SUTAT_ERR_USAGE = 1,   /* bad arguments or flag values */
  SUTAT_ERR_DATA = 2,    /* unreadable or malformed inputs */
  SUTAT_ERR_RUNTIME = 3  /* training/runtime failures */
} sutat_status;

/* Message for the last failure on this thread; empty string when none.
 * The pointer stays valid until the next call on the same thread. */
const char* sutat_last_error(void);

/* Reads a raw corpus ("jsonl", "multiwoz_json" or "taskmaster_json") and
 * writes a prepared directory: native corpus, two vocabularies, factual
 * lexicon and split manifest. gazetteer_path may be NULL. */
sutat_status sutat_prepare(const char* input_path, const char* format,
                           const char* output_dir, int min_freq, int max_vocab,
                           const char* gazetteer_path);

/* Writes a templated synthetic corpus as a prepared directory. */
sutat_status sutat_make_synthetic(const char* output_dir, int n_dialogues,
                                  int n_domains, uint64_t seed);

typedef void (*sutat_step_fn)(int step, double loss, double kl_weight,
                              void* user);

/* Trains on the prepared directory's train split. config_path and arch may be
 * NULL (defaults / config value). Writes the checkpoint to checkpoint_out and
 * a JSONL report beside it; on_step (may be NULL) fires once per step. */
sutat_status sutat_train(const char* corpus_dir, const char* config_path,
                         const char* arch, const char* checkpoint_out,
                         sutat_step_fn on_step, void* user);

typedef struct sutat_model sutat_model;

/* Loads a checkpoint. The handle must be released with sutat_model_close. */
sutat_status sutat_model_open(const char* checkpoint_path, sutat_model** out);
void sutat_model_close(sutat_model* model);

/* Summarizes every dialogue of a split into a JSONL file. use_copy toggles
 * factual-token substitution. */
sutat_status sutat_summarize(sutat_model* model, const char* corpus_dir,
                             const char* split, int max_len, int use_copy,
                             const char* output_path);

/* Scores a summary file against references; writes a JSON metric table. */
sutat_status sutat_evaluate_rouge(const char* summaries_path,
                                  const char* references_path,
                                  const char* report_path);

/* Reconstruction perplexity and KL means over a split; writes JSON. */
sutat_status sutat_evaluate_ppl(sutat_model* model, const char* corpus_dir,
                                const char* split, const char* report_path);

/* Domain classification AUC, mode "unsupervised" or "supervised";
 * writes JSON. */
sutat_status sutat_classify(sutat_model* model, const char* corpus_dir,
                            const char* mode, const char* report_path);

/* Samples novel (customer, agent) pairs into a JSONL file. */
sutat_status sutat_generate(sutat_model* model, int count, uint64_t seed,
                            int max_len, const char* output_path);

#ifdef __cplusplus
}
#endif

#endif /* SUTAT_C_H */
