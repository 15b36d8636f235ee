#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "core_stats.hpp"

namespace ranktuner {

/// Summary statistics over a sequence of bound gaps.
struct GapReport {
  double mean = 0.0;
  double median = 0.0;
  double std_dev = 0.0;
  double p80 = 0.0;
  double p90 = 0.0;
  std::int64_t count = 0;
  std::int64_t violations = 0; // entries below -1e-9
};

// 1/rank - p; in [0, 1) because rank <= 1/p.
double rank_prob_gap(const TokenStats& stats);

// 1/s(H) - 1/E[R]; >= 0 up to float noise because E[R] >= s(H).
double expected_rank_entropy_gap(const TokenStats& stats);

// Entropy in bits of the geometric distribution on {1, 2, ...} with the
// given mean: log2(A-1) + A*log2(A/(A-1)). This is the entropy maximum
// over all positive-integer distributions with that mean. Requires A > 1.
double geometric_maxent_entropy(double mean_rank);

// The tail term A*log2(A/(A-1)); equals 2 at A = 2 and decreases towards
// log2(e) as A grows.
double geometric_phi(double mean_rank);

// Fano cap on entropy given the maximal mass: H_b(p) + (1-p)*log2(V-1).
// Strictly decreasing on [1/V, 1]; p_max below 1/V is infeasible.
double fano_entropy_cap(double p_max, int vocab_size);

// Inverse of fano_entropy_cap on [1/V, 1], by bisection to 1e-10. Feeds
// the entropy-only lower bound E[R] >= 2 - fano_inverse(H).
double fano_inverse(double entropy_bits, int vocab_size);

// Mean/median/std and nearest-rank p80/p90 over a nonempty gap sequence.
GapReport gap_statistics(std::span<const double> gaps);

struct BoundSweepResult {
  GapReport rank_prob;
  GapReport expected_rank_entropy;
};

// Draws a random Dirichlet-style distribution for bound sweeps. The vocab
// size and concentration are varied to cover both support-term branches.
std::vector<double> sweep_distribution(std::mt19937_64& rng);

// Runs `n` seeded random distributions with random targets and reports the
// two bound-gap summaries.
BoundSweepResult bound_sweep(std::int64_t n, std::uint64_t seed);

} // namespace ranktuner
