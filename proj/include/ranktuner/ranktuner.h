/* Public C interface of the ranktuner shared library.
 *
 * Every function returns an rt_status; RT_OK means the output parameters
 * are valid. On failure rt_last_error() returns a thread-local message
 * describing what went wrong. Opaque handles are created and released by
 * the matching _create/_free pairs and must not be shared across threads
 * while being mutated.
 */

#ifndef RANKTUNER_RANKTUNER_H
#define RANKTUNER_RANKTUNER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rt_status {
  RT_OK = 0,
  RT_ERR_INVALID_ARGUMENT = 1,
  RT_ERR_OUT_OF_RANGE = 2,
  RT_ERR_IO = 3,
  RT_ERR_INTERNAL = 4
} rt_status;

typedef enum rt_xi_mode {
  RT_XI_MAX = 0,
  RT_XI_ARITHMETIC = 1,
  RT_XI_GEOMETRIC = 2,
  RT_XI_LOGARITHMIC = 3
} rt_xi_mode;

typedef enum rt_scheme_kind {
  RT_SCHEME_SFT = 0,
  RT_SCHEME_OVERTONE = 1,
  RT_SCHEME_DFT = 2,
  RT_SCHEME_EAFT = 3,
  RT_SCHEME_TALR = 4,
  RT_SCHEME_RANKTUNER = 5
} rt_scheme_kind;

typedef enum rt_initial_weight {
  RT_INITIAL_PROB = 0,
  RT_INITIAL_UNIFORM = 1
} rt_initial_weight;

typedef enum rt_scorer {
  RT_SCORER_ENTROPY_DOMINANT = 0,
  RT_SCORER_PROB_DOMINANT = 1,
  RT_SCORER_OURS = 2
} rt_scorer;

/* Per-token statistic bundle. */
typedef struct rt_token_stats {
  double p;
  int64_t rank;
  double entropy_bits;
  double p_max;
  double expected_rank;
  double support_term;
  double xi;
  double k_coeff;
  double indicator;
  double scale;
} rt_token_stats;

/* Gap summary produced by the bound sweep. */
typedef struct rt_gap_report {
  double mean;
  double median;
  double std_dev;
  double p80;
  double p90;
  int64_t count;
  int64_t violations;
} rt_gap_report;

/* Weighting scheme selector; only the fields of the chosen kind are read. */
typedef struct rt_scheme_config {
  rt_scheme_kind kind;
  double overtone_lambda;
  int32_t eaft_topk;
  double eaft_lnk_approx;
  double talr_floor;
  rt_initial_weight ranktuner_initial;
  rt_xi_mode ranktuner_xi_mode;
} rt_scheme_config;

typedef struct rt_train_config {
  rt_scheme_config scheme;
  double learning_rate;
  int64_t steps;
  int64_t batch_size;
  uint64_t seed;
  double scale_ceiling;
} rt_train_config;

typedef struct rt_step_telemetry {
  int64_t step;
  double loss;
  double grad_norm;
  double mean_weight;
  double mean_scale;
  double mean_entropy;
} rt_step_telemetry;

typedef struct rt_noise_metrics {
  double tok_precision;
  double tok_recall;
  int64_t seq_hit;
} rt_noise_metrics;

typedef struct rt_corpus rt_corpus;
typedef struct rt_model rt_model;
typedef struct rt_noise_experiment rt_noise_experiment;

const char* rt_version(void);

/* Message for the most recent failure on this thread; empty if none. */
const char* rt_last_error(void);

/* Fills a sensible default configuration (sft scheme, default knobs). */
void rt_scheme_config_init(rt_scheme_config* config);
void rt_train_config_init(rt_train_config* config);

/* ---- per-token statistics -------------------------------------------- */

rt_status rt_token_stats_compute(const double* logits, int64_t vocab_size, int64_t target,
                                 rt_xi_mode mode, double scale_ceiling, rt_token_stats* out);

rt_status rt_k_full(double xi, double* out);
rt_status rt_k_simplified(double xi, double* out);
rt_status rt_relative_rank_indicator(double rank, double expected_rank, double* out);

/* ---- theoretical bounds ---------------------------------------------- */

rt_status rt_geometric_maxent_entropy(double mean_rank, double* out);
rt_status rt_fano_entropy_cap(double p_max, int64_t vocab_size, double* out);
rt_status rt_fano_inverse(double entropy_bits, int64_t vocab_size, double* out);

/* Seeded random-distribution sweep; reports the 1/R - p and
 * 1/s(H) - 1/E[R] gap summaries. */
rt_status rt_bound_sweep(int64_t n, uint64_t seed, rt_gap_report* rank_prob,
                         rt_gap_report* expected_rank_entropy);

/* ---- token weighting -------------------------------------------------- */

/* Weight of one token under the scheme. `probs` is the full normalized
 * distribution (needed by the entropy-gated scheme, may be NULL otherwise);
 * seq_avg_losses supplies the batch context for the loss-tilted scheme. */
rt_status rt_token_weight(const rt_scheme_config* scheme, const rt_token_stats* stats,
                          const double* probs, int64_t vocab_size,
                          const double* seq_avg_losses, int64_t n_sequences, double* out);

/* ---- synthetic corpus -------------------------------------------------- */

rt_status rt_corpus_synth(int64_t vocab_size, int64_t n_records, double knowledge_sharpness,
                          uint64_t seed, rt_corpus** out);
void rt_corpus_free(rt_corpus* corpus);
int64_t rt_corpus_num_records(const rt_corpus* corpus);
int64_t rt_corpus_record_len(const rt_corpus* corpus, int64_t record);
int64_t rt_corpus_record_prompt_len(const rt_corpus* corpus, int64_t record);
rt_status rt_corpus_record_tokens(const rt_corpus* corpus, int64_t record, int64_t* tokens,
                                  int64_t capacity);

/* ---- toy model and training ------------------------------------------- */

rt_status rt_model_create(int64_t vocab_size, int32_t context_order, uint64_t seed,
                          rt_model** out);
void rt_model_free(rt_model* model);
int64_t rt_model_vocab_size(const rt_model* model);
int64_t rt_model_context_states(const rt_model* model);

/* Logit row for one context state; `logits` must hold vocab_size doubles. */
rt_status rt_model_forward(const rt_model* model, int64_t context, double* logits);

/* Runs config->steps optimizer steps over round-robin batches, writing one
 * telemetry entry per step (losses measured before each update). */
rt_status rt_model_train(rt_model* model, const rt_corpus* corpus,
                         const rt_train_config* config, rt_step_telemetry* telemetry);

/* Average base-2 predictive entropy over sampled continuations of the
 * corpus prompts at the given temperature. */
rt_status rt_model_inference_entropy(const rt_model* model, const rt_corpus* corpus,
                                     int64_t n_samples, double temperature, int64_t gen_len,
                                     uint64_t seed, double* out);

rt_status rt_model_save(const rt_model* model, const char* path);
rt_status rt_model_load(const char* path, rt_model** out);

/* ---- noise-sensitivity diagnostic -------------------------------------- */

/* Builds the synthetic noise benchmark (clean corpus + irrelevant-token
 * pool + scoring model) and splices noise into round(rho * N) records. */
rt_status rt_noise_experiment_run(int64_t vocab_size, int64_t n_records, double sharpness,
                                  double rho, uint64_t seed, rt_noise_experiment** out);
void rt_noise_experiment_free(rt_noise_experiment* experiment);
int64_t rt_noise_experiment_num_records(const rt_noise_experiment* experiment);

/* Span scored for one record: corrupted flag plus the absolute token
 * [start, end) interval (noise span, or the length-matched mid-span). */
rt_status rt_noise_experiment_span(const rt_noise_experiment* experiment, int64_t record,
                                   int32_t* corrupted, int64_t* start, int64_t* end);

rt_status rt_noise_experiment_metrics(const rt_noise_experiment* experiment, rt_scorer scorer,
                                      rt_xi_mode mode, double scale_ceiling,
                                      rt_noise_metrics* out);

/* ---- pass@k ------------------------------------------------------------ */

/* `matrix` is n_problems x n_samples row-major with 0/1 entries; the result
 * is the combinatorial pass@k percentage. */
rt_status rt_pass_at_k(const int32_t* matrix, int64_t n_problems, int64_t n_samples, int64_t k,
                       double* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* RANKTUNER_RANKTUNER_H */
