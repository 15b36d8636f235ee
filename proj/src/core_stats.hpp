#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ranktuner {

// Probability floor applied before any log or negative power of the
// target probability. Softmax output can underflow to exact zero.
inline constexpr double kProbFloor = 1e-12;

// Default clamp on the relative scale; keeps the toy trainer stable when
// p * s(H) is far below one.
inline constexpr double kDefaultScaleCeiling = 100.0;

/// How the intermediate point xi is estimated from a (rank, companion) pair.
enum class XiMode {
  Max,
  Arithmetic,
  Geometric,
  Logarithmic,
};

/// One decoding step's probability vector plus its descending sort order.
struct TokenDistribution {
  std::vector<double> probs;   // sums to 1 within 1e-9
  std::vector<int> sort_index; // rank position -> vocabulary index, descending
  int vocab_size = 0;

  // Builds a distribution from raw probabilities (e.g. a dumped or
  // quantized vector). Validates normalization and size.
  static TokenDistribution from_probs(std::vector<double> probs);
};

/// Per-token statistic bundle: probability, rank, entropy and the derived
/// rank-calibration quantities.
struct TokenStats {
  double p = 0.0;             // ground-truth probability, in (0, 1]
  int rank = 0;               // >= 1, ties counted by the >= comparison
  double entropy_bits = 0.0;  // base-2 entropy of the full distribution
  double p_max = 0.0;         // largest probability
  double expected_rank = 0.0; // mean guessing cost, in [1, (V+1)/2]
  double support_term = 0.0;  // entropy-induced lower bound on expected rank
  double xi = 0.0;            // intermediate point estimate, >= 1
  double k_coeff = 0.0;       // simplified calibration exponent, > 0
  double indicator = 0.0;     // relative rank indicator, > 0
  double scale = 0.0;         // relative scale, > 0 (clamped to the ceiling)
};

// Softmax with max-logit subtraction plus a descending sort.
// Throws std::invalid_argument naming the offending index on non-finite
// input or when fewer than two logits are given.
TokenDistribution normalize_and_sort(std::span<const double> logits);

// Shannon entropy in bits, with 0*log(0) treated as 0.
double entropy_bits(const TokenDistribution& dist);

// Rank of `target`: the count of logits >= the target's logit, target
// included. Ties are resolved pessimistically for the target.
int rank_of(std::span<const double> logits, int target);

// Mean number of guesses to hit a sample when guessing in descending
// probability order.
double expected_rank(const TokenDistribution& dist);

// Entropy-induced lower bound on the expected rank:
// 2^H/4 + 1 when H >= 2, else 2 - p_max. Has a jump at H = 2 by design.
double support_term(double entropy_bits, double p_max);

// Full calibration coefficient xi / ((xi+1) * log2(xi+1)^2); requires xi > 0.
double k_full(double xi);

// Simplified coefficient log2(xi+1)^-2, i.e. k_full without the xi/(xi+1)
// factor; requires xi > 0.
double k_simplified(double xi);

// Estimate of the intermediate point between rank and its companion
// (the support term in the scale path, the expected rank otherwise).
double xi_estimate(double rank, double companion, XiMode mode);

// 2^(f(rank) - f(expected_rank)) with f(x) = 1/log2(x+1). Equals 1 when
// rank == expected_rank; above 1 means better than expected.
double relative_rank_indicator(double rank, double expected_rank);

// Relative scale (p * s(H))^-K(xi) with xi = max/mean of (rank, s(H)) and
// K the simplified coefficient. Clamped to `ceiling`.
double relative_scale(double p, double entropy_bits, double p_max, int rank,
                      XiMode mode, double ceiling = kDefaultScaleCeiling);

// Computes the full per-token bundle from raw logits and the target index.
TokenStats token_stats(std::span<const double> logits, int target, XiMode mode,
                       double scale_ceiling = kDefaultScaleCeiling);

// Same bundle when the distribution is already normalized and sorted.
TokenStats token_stats(const TokenDistribution& dist, int target, XiMode mode,
                       double scale_ceiling = kDefaultScaleCeiling);

} // namespace ranktuner
