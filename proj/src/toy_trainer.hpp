#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core_stats.hpp"
#include "weighting.hpp"

namespace ranktuner {

/// Tabular next-token model: one unnormalized logit row per context state.
/// Consumes and produces plain logits, so every statistic of the core
/// module applies unchanged.
struct ToyLM {
  int vocab_size = 0;
  int context_order = 1; // 1 or 2
  std::vector<double> params; // [context_states * vocab_size], row-major
  std::uint64_t seed = 0;

  static ToyLM create(int vocab_size, int context_order, std::uint64_t seed);

  int context_states() const;
  std::span<const double> forward(int context) const;
  std::span<double> row(int context);

  // Context state for position `pos`; out-of-range history is padded with
  // token 0.
  int context_at(std::span<const int> tokens, int pos) const;
};

/// One prompt/response pair in token ids. Loss applies to positions at or
/// beyond prompt_len; noise_span marks an inserted [start, end) interval.
struct CorpusRecord {
  std::vector<int> token_ids;
  int prompt_len = 0;
  std::optional<std::pair<int, int>> noise_span;

  int response_len() const { return static_cast<int>(token_ids.size()) - prompt_len; }
};

/// Synthetic corpus together with the generating source model, so the true
/// per-context difficulty stays known.
struct SynthCorpus {
  std::vector<CorpusRecord> records;
  ToyLM source;
};

// Samples records from a fixed random first-order source whose per-context
// entropy decreases with `knowledge_sharpness`. Bit-identical per seed.
SynthCorpus synth_corpus(int vocab_size, int n_records, double knowledge_sharpness,
                         std::uint64_t seed);

struct TrainConfig {
  WeightScheme scheme;
  double learning_rate = 0.1;
  int steps = 1;
  int batch_size = 1;
  std::uint64_t seed = 0;
  double scale_ceiling = kDefaultScaleCeiling;
};

// Throws std::invalid_argument naming the offending field.
void validate_config(const TrainConfig& config);

struct StepStats {
  double loss = 0.0;
  double grad_norm = 0.0;
  double mean_weight = 0.0;
  double mean_scale = 0.0;
  double mean_entropy = 0.0;
};

// Frozen per-token weights for the batch, in record order then position
// order. This is the stop-gradient snapshot: the optimizer treats these as
// constants.
std::vector<double> batch_token_weights(const ToyLM& model, std::span<const CorpusRecord> batch,
                                        const WeightScheme& scheme, double scale_ceiling);

// Weighted NLL of the batch under fixed weights (same token order as
// batch_token_weights).
double batch_weighted_nll(const ToyLM& model, std::span<const CorpusRecord> batch,
                          std::span<const double> weights);

// Weighted NLL and its gradient with respect to the model parameters,
// weights held constant.
std::pair<double, std::vector<double>> batch_weighted_nll_grad(const ToyLM& model,
                                                               std::span<const CorpusRecord> batch,
                                                               std::span<const double> weights);

// One optimizer step: per-token stats, scheme weights from the frozen
// snapshot, weighted NLL, and a plain gradient-descent update.
StepStats train_step(ToyLM& model, std::span<const CorpusRecord> batch,
                     const TrainConfig& config);

// Runs `config.steps` steps over round-robin batches and returns one entry
// per step, with the loss measured before each update.
std::vector<StepStats> train(ToyLM& model, std::span<const CorpusRecord> corpus,
                             const TrainConfig& config);

// Average base-2 entropy of the temperature-scaled predictive distribution
// over sampled continuations of the prompts. Deterministic given the seed.
double inference_entropy(const ToyLM& model, std::span<const std::vector<int>> prompts,
                         int n_samples, double temperature, std::uint64_t seed,
                         int gen_len = 16);

// Flat binary snapshot: dimensions header plus row-major parameters.
void save_model(const ToyLM& model, const std::string& path);
ToyLM load_model(const std::string& path);

// Draws an index from `probs` given one uniform variate in [0, 1).
int sample_index(std::span<const double> probs, double u);

} // namespace ranktuner
