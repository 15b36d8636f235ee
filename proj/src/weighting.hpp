#pragma once

#include <span>
#include <vector>

#include "core_stats.hpp"

namespace ranktuner {

enum class SchemeKind {
  Sft,
  Overtone,
  Dft,
  Eaft,
  Talr,
  Ranktuner,
};

enum class InitialWeight {
  Prob,
  Uniform,
};

/// Token-weighting scheme tag plus its hyperparameters. Only the fields of
/// the selected kind are read.
struct WeightScheme {
  SchemeKind kind = SchemeKind::Sft;
  double overtone_lambda = 0.1;
  int eaft_topk = 20;
  double eaft_lnk_approx = 3.0;
  double talr_floor = 0.01;
  InitialWeight ranktuner_initial = InitialWeight::Prob;
  XiMode ranktuner_xi_mode = XiMode::Max;

  static WeightScheme sft() { return {}; }
  static WeightScheme overtone(double lambda);
  static WeightScheme dft();
  static WeightScheme eaft(int topk, double lnk_approx = 3.0);
  static WeightScheme talr(double floor = 0.01);
  static WeightScheme ranktuner(InitialWeight initial, XiMode mode = XiMode::Max);
};

// Throws std::invalid_argument naming the offending field.
void validate_scheme(const WeightScheme& scheme);

const char* scheme_name(SchemeKind kind);

// Base convention: token losses are natural-log NLL (nats); the entropy
// feeding the support term stays base-2. Only the entropy-gated scheme
// uses natural-log entropy, over the renormalized top-k.

/// Batch-level inputs shared by all tokens of one optimizer step. Weights
/// are computed from a frozen forward snapshot and never carry gradient.
struct BatchContext {
  std::vector<double> seq_avg_losses; // per-sequence mean NLL, nats
};

// Median of the per-sequence average losses (lower median for even counts).
double talr_temperature(const BatchContext& ctx);

// Natural-log entropy of the top-k probabilities renormalized to sum 1.
double eaft_topk_entropy(const TokenDistribution& dist, int topk);

// The per-token weight under `scheme`. The distribution is consulted only
// by the entropy-gated scheme; the context only by the loss-tilted one.
double token_weight(const WeightScheme& scheme, const TokenStats& stats,
                    const TokenDistribution& dist, const BatchContext& ctx);

// (1/T) * sum(w_t * loss_t). Lengths must match, weights must be >= 0.
double weighted_nll(std::span<const double> token_losses, std::span<const double> weights);

enum class LossShape {
  LogLoss,   // f(p) = -log p
  LinearLoss, // f(p) = -p
  AlphaPower, // f(p) = (1 - p^alpha) / alpha
};

// Normalized logit-gradient magnitude W_f(p) = -f'(p) * p * (1-p) for the
// three loss shapes; requires p in (0, 1). `alpha` is read only by the
// power shape.
double logit_gradient_magnitude(LossShape shape, double alpha, double p);

} // namespace ranktuner
