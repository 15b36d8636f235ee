#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "core_stats.hpp"
#include "toy_trainer.hpp"

namespace ranktuner {

/// A corpus with noise spliced into a seeded subset of records.
struct NoiseExperiment {
  std::vector<CorpusRecord> corpus;
  std::vector<int> corrupted_ids; // ascending
  double rho = 0.0;
  std::uint64_t seed = 0;
};

// Splices a sampled noise segment into round(rho * N) records, at the token
// index nearest the response midpoint. Non-span tokens and prompt lengths
// are preserved byte-identically.
NoiseExperiment insert_noise(std::span<const CorpusRecord> clean,
                             std::span<const std::vector<int>> noise_pool, double rho,
                             std::uint64_t seed);

enum class ScoreMethod {
  EntropyDominant, // H
  ProbDominant,    // -log p
  Ours,            // 1 / indicator
};

// Per-token importance scores under the selected method.
std::vector<double> indicator_scores(ScoreMethod method, std::span<const TokenStats> stats);

struct TokenPr {
  double precision = 0.0;
  double recall = 0.0;
};

// Top-ceil(rho*|T|) precision/recall of the scores against the noise mask.
// Ties at the cutoff break toward the lower token index.
TokenPr token_noise_pr(std::span<const double> scores, const std::vector<bool>& noise_mask,
                       double rho);

// Count of corrupted records among the top-ceil(rho*N) records by mean span
// score; ties break toward the lower record index.
int sequence_hit(std::span<const double> span_scores, std::span<const int> corrupted_ids,
                 double rho);

// The span scored for each record: the noise span for corrupted records, a
// length-matched mid-span (rounded mean noise length) for clean ones.
// Returned as absolute token [start, end) intervals.
std::vector<std::pair<int, int>> sequence_spans(const NoiseExperiment& experiment);

/// Per-problem binary correctness vectors, all of equal sample count.
struct CorrectnessMatrix {
  std::vector<std::vector<int>> rows;
};

// Combinatorial pass@k over all C(n, k) subsets, as a percentage. Uses the
// closed form 1 - C(n-c, k)/C(n, k) per problem.
double pass_at_k(const CorrectnessMatrix& matrix, int k);

// Scores every response token of every record against a fixed model,
// returned per record in position order.
std::vector<std::vector<double>> corpus_scores(const ToyLM& model,
                                               std::span<const CorpusRecord> corpus,
                                               ScoreMethod method, XiMode mode,
                                               double scale_ceiling = kDefaultScaleCeiling);

struct NoiseMetrics {
  double tok_precision = 0.0;
  double tok_recall = 0.0;
  int seq_hit = 0;
};

// Token- and sequence-level noise metrics for one experiment under one
// scoring method, with the scores coming from `corpus_scores`.
NoiseMetrics noise_metrics(const NoiseExperiment& experiment,
                           std::span<const std::vector<double>> scores);

/// Clean corpus, noise pool and scoring model for the end-to-end noise
/// protocol. The model is the corpus source, extended with near-uniform
/// rows over a held-out filler token range the noise pool draws from.
struct NoiseBenchmark {
  std::vector<CorpusRecord> clean;
  std::vector<std::vector<int>> pool;
  ToyLM model;
};

NoiseBenchmark make_noise_benchmark(int vocab_size, int n_records, double sharpness,
                                    std::uint64_t seed);

} // namespace ranktuner
