#include "bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ranktuner {

double rank_prob_gap(const TokenStats& stats) {
  return 1.0 / static_cast<double>(stats.rank) - stats.p;
}

double expected_rank_entropy_gap(const TokenStats& stats) {
  return 1.0 / stats.support_term - 1.0 / stats.expected_rank;
}

double geometric_maxent_entropy(double mean_rank) {
  if (!(mean_rank > 1.0)) {
    throw std::invalid_argument("geometric mean rank must exceed 1");
  }
  // A*log2(A) - (A-1)*log2(A-1): same value as log2(A-1) + A*log2(A/(A-1))
  // but stable as A approaches 1.
  const double a = mean_rank;
  return a * std::log2(a) - (a - 1.0) * std::log2(a - 1.0);
}

double geometric_phi(double mean_rank) {
  if (!(mean_rank > 1.0)) {
    throw std::invalid_argument("geometric mean rank must exceed 1");
  }
  return mean_rank * std::log2(mean_rank / (mean_rank - 1.0));
}

namespace {

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) {
    h -= p * std::log2(p);
  }
  if (p < 1.0) {
    h -= (1.0 - p) * std::log2(1.0 - p);
  }
  return h;
}

} // namespace

double fano_entropy_cap(double p_max, int vocab_size) {
  if (vocab_size < 2) {
    throw std::invalid_argument("vocab size must be at least 2");
  }
  const double lo = 1.0 / static_cast<double>(vocab_size);
  if (p_max < lo - 1e-12 || p_max > 1.0 + 1e-12) {
    throw std::invalid_argument("p_max outside [1/V, 1] is infeasible");
  }
  const double p = std::clamp(p_max, lo, 1.0);
  return binary_entropy(p) + (1.0 - p) * std::log2(static_cast<double>(vocab_size - 1));
}

double fano_inverse(double entropy_bits, int vocab_size) {
  if (vocab_size < 2) {
    throw std::invalid_argument("vocab size must be at least 2");
  }
  const double h_max = std::log2(static_cast<double>(vocab_size));
  if (entropy_bits < -1e-12 || entropy_bits > h_max + 1e-9) {
    throw std::invalid_argument("entropy outside [0, log2 V]");
  }
  const double h = std::clamp(entropy_bits, 0.0, h_max);

  // fano_entropy_cap is strictly decreasing on [1/V, 1].
  double lo = 1.0 / static_cast<double>(vocab_size);
  double hi = 1.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (fano_entropy_cap(mid, vocab_size) > h) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

GapReport gap_statistics(std::span<const double> gaps) {
  if (gaps.empty()) {
    throw std::invalid_argument("gap statistics need at least one entry");
  }

  std::vector<double> sorted(gaps.begin(), gaps.end());
  std::sort(sorted.begin(), sorted.end());

  const auto n = static_cast<std::int64_t>(sorted.size());
  auto nearest_rank = [&sorted, n](double q) {
    auto idx = static_cast<std::int64_t>(std::ceil(q * static_cast<double>(n)));
    idx = std::clamp<std::int64_t>(idx, 1, n);
    return sorted[static_cast<std::size_t>(idx - 1)];
  };

  GapReport report;
  report.count = n;
  double sum = 0.0;
  for (double g : sorted) {
    sum += g;
    if (g < -1e-9) {
      ++report.violations;
    }
  }
  report.mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (double g : sorted) {
    const double d = g - report.mean;
    sq += d * d;
  }
  report.std_dev = std::sqrt(sq / static_cast<double>(n));
  report.median = nearest_rank(0.5);
  report.p80 = nearest_rank(0.8);
  report.p90 = nearest_rank(0.9);
  return report;
}

std::vector<double> sweep_distribution(std::mt19937_64& rng) {
  // Cycle vocab size and Dirichlet concentration over a wide range so the
  // sweep hits sharp, moderate and near-uniform regimes.
  static constexpr double kAlphas[] = {0.05, 0.3, 1.0, 3.0};
  std::uniform_int_distribution<int> vocab_dist(2, 512);
  std::uniform_int_distribution<int> alpha_pick(0, 3);

  const int vocab = vocab_dist(rng);
  const double alpha = kAlphas[alpha_pick(rng)];
  std::gamma_distribution<double> gamma(alpha, 1.0);

  std::vector<double> probs(static_cast<std::size_t>(vocab));
  double sum = 0.0;
  for (double& p : probs) {
    p = gamma(rng);
    sum += p;
  }
  if (sum <= 0.0) {
    // All-zero gamma draws are possible for tiny alpha; fall back to uniform.
    std::fill(probs.begin(), probs.end(), 1.0 / vocab);
    return probs;
  }
  for (double& p : probs) {
    p /= sum;
  }
  return probs;
}

BoundSweepResult bound_sweep(std::int64_t n, std::uint64_t seed) {
  if (n < 1) {
    throw std::invalid_argument("sweep size must be at least 1");
  }
  std::mt19937_64 rng(seed);
  std::vector<double> prob_gaps;
  std::vector<double> entropy_gaps;
  prob_gaps.reserve(static_cast<std::size_t>(n));
  entropy_gaps.reserve(static_cast<std::size_t>(n));

  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<double> probs = sweep_distribution(rng);
    std::uniform_int_distribution<int> target_dist(0, static_cast<int>(probs.size()) - 1);
    const int target = target_dist(rng);

    // Renormalize exactly; gamma draws can carry rounding residue.
    double sum = 0.0;
    for (double p : probs) {
      sum += p;
    }
    for (double& p : probs) {
      p /= sum;
    }

    const TokenStats st = token_stats(TokenDistribution::from_probs(std::move(probs)), target,
                                      XiMode::Max);
    prob_gaps.push_back(rank_prob_gap(st));
    entropy_gaps.push_back(expected_rank_entropy_gap(st));
  }

  BoundSweepResult result;
  result.rank_prob = gap_statistics(prob_gaps);
  result.expected_rank_entropy = gap_statistics(entropy_gaps);
  return result;
}

} // namespace ranktuner
