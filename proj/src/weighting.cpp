#include "weighting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ranktuner {

WeightScheme WeightScheme::overtone(double lambda) {
  WeightScheme s;
  s.kind = SchemeKind::Overtone;
  s.overtone_lambda = lambda;
  return s;
}

WeightScheme WeightScheme::dft() {
  WeightScheme s;
  s.kind = SchemeKind::Dft;
  return s;
}

WeightScheme WeightScheme::eaft(int topk, double lnk_approx) {
  WeightScheme s;
  s.kind = SchemeKind::Eaft;
  s.eaft_topk = topk;
  s.eaft_lnk_approx = lnk_approx;
  return s;
}

WeightScheme WeightScheme::talr(double floor) {
  WeightScheme s;
  s.kind = SchemeKind::Talr;
  s.talr_floor = floor;
  return s;
}

WeightScheme WeightScheme::ranktuner(InitialWeight initial, XiMode mode) {
  WeightScheme s;
  s.kind = SchemeKind::Ranktuner;
  s.ranktuner_initial = initial;
  s.ranktuner_xi_mode = mode;
  return s;
}

void validate_scheme(const WeightScheme& scheme) {
  switch (scheme.kind) {
    case SchemeKind::Sft:
    case SchemeKind::Dft:
    case SchemeKind::Ranktuner:
      return;
    case SchemeKind::Overtone:
      if (!(scheme.overtone_lambda > 0.0 && scheme.overtone_lambda <= 1.0)) {
        throw std::invalid_argument("overtone_lambda must be in (0, 1]");
      }
      return;
    case SchemeKind::Eaft:
      if (scheme.eaft_topk < 2) {
        throw std::invalid_argument("eaft_topk must be at least 2");
      }
      if (!(scheme.eaft_lnk_approx > 0.0)) {
        throw std::invalid_argument("eaft_lnk_approx must be positive");
      }
      return;
    case SchemeKind::Talr:
      if (!(scheme.talr_floor > 0.0 && scheme.talr_floor < 1.0)) {
        throw std::invalid_argument("talr_floor must be in (0, 1)");
      }
      return;
  }
  throw std::invalid_argument("unknown scheme kind");
}

const char* scheme_name(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::Sft: return "sft";
    case SchemeKind::Overtone: return "overtone";
    case SchemeKind::Dft: return "dft";
    case SchemeKind::Eaft: return "eaft";
    case SchemeKind::Talr: return "talr";
    case SchemeKind::Ranktuner: return "ranktuner";
  }
  return "unknown";
}

double talr_temperature(const BatchContext& ctx) {
  if (ctx.seq_avg_losses.empty()) {
    throw std::invalid_argument("batch context has no sequence losses");
  }
  for (double l : ctx.seq_avg_losses) {
    if (!(l > 0.0)) {
      throw std::invalid_argument("sequence losses must be positive");
    }
  }
  std::vector<double> sorted = ctx.seq_avg_losses;
  // Lower median: element (n-1)/2 of the sorted sequence.
  const std::size_t mid = (sorted.size() - 1) / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  return sorted[mid];
}

double eaft_topk_entropy(const TokenDistribution& dist, int topk) {
  if (topk < 1 || topk > dist.vocab_size) {
    throw std::invalid_argument("topk " + std::to_string(topk) + " exceeds vocab " +
                                std::to_string(dist.vocab_size));
  }
  double mass = 0.0;
  for (int pos = 0; pos < topk; ++pos) {
    mass += dist.probs[dist.sort_index[pos]];
  }
  if (mass <= 0.0) {
    return 0.0;
  }
  double h = 0.0;
  for (int pos = 0; pos < topk; ++pos) {
    const double q = dist.probs[dist.sort_index[pos]] / mass;
    if (q > 0.0) {
      h -= q * std::log(q);
    }
  }
  return h;
}

double token_weight(const WeightScheme& scheme, const TokenStats& stats,
                    const TokenDistribution& dist, const BatchContext& ctx) {
  switch (scheme.kind) {
    case SchemeKind::Sft:
      return 1.0;
    case SchemeKind::Overtone:
      return stats.p >= stats.p_max ? scheme.overtone_lambda : 1.0;
    case SchemeKind::Dft:
      return stats.p;
    case SchemeKind::Eaft:
      return eaft_topk_entropy(dist, scheme.eaft_topk) / scheme.eaft_lnk_approx;
    case SchemeKind::Talr: {
      const double tau = talr_temperature(ctx);
      const double tilted = std::pow(std::max(stats.p, kProbFloor), 1.0 / tau);
      return std::max(tilted, scheme.talr_floor);
    }
    case SchemeKind::Ranktuner: {
      const double w0 = scheme.ranktuner_initial == InitialWeight::Prob ? stats.p : 1.0;
      return w0 * stats.scale;
    }
  }
  throw std::invalid_argument("unknown scheme kind");
}

double weighted_nll(std::span<const double> token_losses, std::span<const double> weights) {
  if (token_losses.size() != weights.size()) {
    throw std::invalid_argument("losses and weights differ in length");
  }
  if (token_losses.empty()) {
    return 0.0;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < token_losses.size(); ++i) {
    if (weights[i] < 0.0) {
      throw std::invalid_argument("weights must be nonnegative");
    }
    acc += weights[i] * token_losses[i];
  }
  return acc / static_cast<double>(token_losses.size());
}

double logit_gradient_magnitude(LossShape shape, double alpha, double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("p must lie strictly inside (0, 1)");
  }
  switch (shape) {
    case LossShape::LogLoss:
      return 1.0 - p;
    case LossShape::LinearLoss:
      return p * (1.0 - p);
    case LossShape::AlphaPower:
      if (!(alpha > 0.0)) {
        throw std::invalid_argument("alpha must be positive");
      }
      return std::pow(p, alpha) * (1.0 - p);
  }
  throw std::invalid_argument("unknown loss shape");
}

} // namespace ranktuner
