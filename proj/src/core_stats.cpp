#include "core_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ranktuner {

namespace {

double log2_safe(double x) { return std::log2(x); }

void check_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::invalid_argument(std::string(what) + " contains a non-finite entry at index " +
                                  std::to_string(i));
    }
  }
}

std::vector<int> descending_sort_index(const std::vector<double>& probs) {
  std::vector<int> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&probs](int a, int b) { return probs[a] > probs[b]; });
  return idx;
}

} // namespace

TokenDistribution TokenDistribution::from_probs(std::vector<double> probs) {
  if (probs.size() < 2) {
    throw std::invalid_argument("distribution needs at least two entries");
  }
  check_finite(probs, "probs");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] < 0.0) {
      throw std::invalid_argument("probs has a negative entry at index " + std::to_string(i));
    }
    sum += probs[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("probs sums to " + std::to_string(sum) + ", expected 1");
  }
  TokenDistribution dist;
  dist.vocab_size = static_cast<int>(probs.size());
  dist.sort_index = descending_sort_index(probs);
  dist.probs = std::move(probs);
  return dist;
}

TokenDistribution normalize_and_sort(std::span<const double> logits) {
  if (logits.size() < 2) {
    throw std::invalid_argument("logits needs at least two entries");
  }
  check_finite(logits, "logits");

  const double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    denom += probs[i];
  }
  for (double& p : probs) {
    p /= denom;
  }

  TokenDistribution dist;
  dist.vocab_size = static_cast<int>(logits.size());
  dist.sort_index = descending_sort_index(probs);
  dist.probs = std::move(probs);
  return dist;
}

double entropy_bits(const TokenDistribution& dist) {
  double h = 0.0;
  for (double p : dist.probs) {
    if (p > 0.0) {
      h -= p * log2_safe(p);
    }
  }
  return std::max(h, 0.0);
}

int rank_of(std::span<const double> logits, int target) {
  if (target < 0 || target >= static_cast<int>(logits.size())) {
    throw std::out_of_range("target index " + std::to_string(target) + " out of range for " +
                            std::to_string(logits.size()) + " logits");
  }
  const double z = logits[target];
  int rank = 0;
  for (double v : logits) {
    if (v >= z) {
      ++rank;
    }
  }
  return rank;
}

double expected_rank(const TokenDistribution& dist) {
  double acc = 0.0;
  for (int pos = 0; pos < dist.vocab_size; ++pos) {
    acc += static_cast<double>(pos + 1) * dist.probs[dist.sort_index[pos]];
  }
  return acc;
}

double support_term(double entropy_bits, double p_max) {
  if (entropy_bits >= 2.0) {
    return 0.25 * std::exp2(entropy_bits) + 1.0;
  }
  return 2.0 - p_max;
}

double k_full(double xi) {
  if (!(xi > 0.0)) {
    throw std::invalid_argument("xi must be positive");
  }
  const double l = log2_safe(xi + 1.0);
  return xi / ((xi + 1.0) * l * l);
}

double k_simplified(double xi) {
  if (!(xi > 0.0)) {
    throw std::invalid_argument("xi must be positive");
  }
  const double l = log2_safe(xi + 1.0);
  return 1.0 / (l * l);
}

double xi_estimate(double rank, double companion, XiMode mode) {
  switch (mode) {
    case XiMode::Max:
      return std::max(rank, companion);
    case XiMode::Arithmetic:
      return 0.5 * (rank + companion);
    case XiMode::Geometric:
      return std::sqrt(rank * companion);
    case XiMode::Logarithmic:
      if (std::abs(rank - companion) < 1e-9) {
        return 0.5 * (rank + companion);
      }
      return (rank - companion) / (std::log(rank) - std::log(companion));
  }
  throw std::invalid_argument("unknown xi mode");
}

namespace {

double rank_transform(double x) { return 1.0 / std::log2(x + 1.0); }

} // namespace

double relative_rank_indicator(double rank, double expected_rank) {
  return std::exp2(rank_transform(rank) - rank_transform(expected_rank));
}

double relative_scale(double p, double entropy_bits, double p_max, int rank,
                      XiMode mode, double ceiling) {
  const double s = support_term(entropy_bits, p_max);
  const double xi = xi_estimate(static_cast<double>(rank), s, mode);
  const double k = k_simplified(xi);
  const double base = std::max(p, kProbFloor) * s;
  return std::min(std::pow(base, -k), ceiling);
}

TokenStats token_stats(const TokenDistribution& dist, int target, XiMode mode,
                       double scale_ceiling) {
  if (target < 0 || target >= dist.vocab_size) {
    throw std::out_of_range("target index " + std::to_string(target) + " out of range for vocab " +
                            std::to_string(dist.vocab_size));
  }

  TokenStats st;
  st.p = dist.probs[target];
  st.rank = rank_of(dist.probs, target);
  st.entropy_bits = entropy_bits(dist);
  st.p_max = dist.probs[dist.sort_index[0]];
  st.expected_rank = expected_rank(dist);
  st.support_term = support_term(st.entropy_bits, st.p_max);
  st.xi = xi_estimate(static_cast<double>(st.rank), st.support_term, mode);
  st.k_coeff = k_simplified(st.xi);
  st.indicator = relative_rank_indicator(static_cast<double>(st.rank), st.expected_rank);
  const double base = std::max(st.p, kProbFloor) * st.support_term;
  st.scale = std::min(std::pow(base, -st.k_coeff), scale_ceiling);
  return st;
}

TokenStats token_stats(std::span<const double> logits, int target, XiMode mode,
                       double scale_ceiling) {
  // Rank alone is tie-exact on raw logits; everything else flows through
  // the normalized distribution. Softmax is strictly monotone, so the two
  // rank computations agree.
  return token_stats(normalize_and_sort(logits), target, mode, scale_ceiling);
}

} // namespace ranktuner
