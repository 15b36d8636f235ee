#include "toy_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace ranktuner {

namespace {

constexpr int kMinVocab = 16;
constexpr int kMaxVocab = 256;

XiMode stats_mode(const WeightScheme& scheme) {
  return scheme.kind == SchemeKind::Ranktuner ? scheme.ranktuner_xi_mode : XiMode::Max;
}

struct TokenEval {
  int context = 0;
  int target = 0;
  double loss_nats = 0.0;
  TokenStats stats;
  TokenDistribution dist;
};

// Forward pass over the response positions of the batch, in record order
// then position order. This is the single token enumeration every other
// batch operation follows.
std::vector<TokenEval> evaluate_batch(const ToyLM& model, std::span<const CorpusRecord> batch,
                                      XiMode mode, double scale_ceiling) {
  std::vector<TokenEval> evals;
  for (const CorpusRecord& record : batch) {
    const int len = static_cast<int>(record.token_ids.size());
    for (int pos = record.prompt_len; pos < len; ++pos) {
      TokenEval ev;
      ev.context = model.context_at(record.token_ids, pos);
      ev.target = record.token_ids[static_cast<std::size_t>(pos)];
      ev.dist = normalize_and_sort(model.forward(ev.context));
      ev.stats = token_stats(ev.dist, ev.target, mode, scale_ceiling);
      ev.loss_nats = -std::log(std::max(ev.stats.p, kProbFloor));
      evals.push_back(std::move(ev));
    }
  }
  return evals;
}

BatchContext batch_context(std::span<const CorpusRecord> batch,
                           std::span<const TokenEval> evals) {
  BatchContext ctx;
  std::size_t cursor = 0;
  for (const CorpusRecord& record : batch) {
    const int n = record.response_len();
    if (n <= 0) {
      continue;
    }
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      sum += evals[cursor + static_cast<std::size_t>(i)].loss_nats;
    }
    ctx.seq_avg_losses.push_back(sum / n);
    cursor += static_cast<std::size_t>(n);
  }
  return ctx;
}

} // namespace

ToyLM ToyLM::create(int vocab_size, int context_order, std::uint64_t seed) {
  if (vocab_size < kMinVocab || vocab_size > kMaxVocab) {
    throw std::invalid_argument("vocab_size must be in [16, 256]");
  }
  if (context_order != 1 && context_order != 2) {
    throw std::invalid_argument("context_order must be 1 or 2");
  }
  ToyLM model;
  model.vocab_size = vocab_size;
  model.context_order = context_order;
  model.seed = seed;
  model.params.resize(static_cast<std::size_t>(model.context_states()) *
                      static_cast<std::size_t>(vocab_size));
  // Small random init breaks rank ties of an all-zero table.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (double& w : model.params) {
    w = noise(rng);
  }
  return model;
}

int ToyLM::context_states() const {
  int states = 1;
  for (int i = 0; i < context_order; ++i) {
    states *= vocab_size;
  }
  return states;
}

std::span<const double> ToyLM::forward(int context) const {
  if (context < 0 || context >= context_states()) {
    throw std::out_of_range("context state " + std::to_string(context) + " out of range");
  }
  return std::span<const double>(params)
      .subspan(static_cast<std::size_t>(context) * static_cast<std::size_t>(vocab_size),
               static_cast<std::size_t>(vocab_size));
}

std::span<double> ToyLM::row(int context) {
  if (context < 0 || context >= context_states()) {
    throw std::out_of_range("context state " + std::to_string(context) + " out of range");
  }
  return std::span<double>(params)
      .subspan(static_cast<std::size_t>(context) * static_cast<std::size_t>(vocab_size),
               static_cast<std::size_t>(vocab_size));
}

int ToyLM::context_at(std::span<const int> tokens, int pos) const {
  auto history = [&tokens, pos](int back) {
    const int idx = pos - back;
    return idx >= 0 ? tokens[static_cast<std::size_t>(idx)] : 0;
  };
  if (context_order == 1) {
    return history(1);
  }
  return history(2) * vocab_size + history(1);
}

SynthCorpus synth_corpus(int vocab_size, int n_records, double knowledge_sharpness,
                         std::uint64_t seed) {
  if (!(knowledge_sharpness > 0.0)) {
    throw std::invalid_argument("knowledge_sharpness must be positive");
  }
  if (n_records < 1) {
    throw std::invalid_argument("n_records must be at least 1");
  }

  std::mt19937_64 rng(seed);
  SynthCorpus corpus;
  corpus.source = ToyLM::create(vocab_size, 1, seed);

  std::normal_distribution<double> shape(0.0, 1.0);
  for (double& w : corpus.source.params) {
    w = knowledge_sharpness * shape(rng);
  }

  std::uniform_int_distribution<int> prompt_len_dist(1, 4);
  std::uniform_int_distribution<int> response_len_dist(8, 16);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  corpus.records.reserve(static_cast<std::size_t>(n_records));
  for (int r = 0; r < n_records; ++r) {
    CorpusRecord record;
    record.prompt_len = prompt_len_dist(rng);
    const int total = record.prompt_len + response_len_dist(rng);
    record.token_ids.reserve(static_cast<std::size_t>(total));
    for (int pos = 0; pos < total; ++pos) {
      const int ctx = corpus.source.context_at(record.token_ids, pos);
      const TokenDistribution dist = normalize_and_sort(corpus.source.forward(ctx));
      record.token_ids.push_back(sample_index(dist.probs, unit(rng)));
    }
    corpus.records.push_back(std::move(record));
  }
  return corpus;
}

void validate_config(const TrainConfig& config) {
  validate_scheme(config.scheme);
  if (!(config.learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (config.steps < 1) {
    throw std::invalid_argument("steps must be at least 1");
  }
  if (config.batch_size < 1) {
    throw std::invalid_argument("batch_size must be at least 1");
  }
  if (!(config.scale_ceiling > 0.0)) {
    throw std::invalid_argument("scale_ceiling must be positive");
  }
}

std::vector<double> batch_token_weights(const ToyLM& model, std::span<const CorpusRecord> batch,
                                        const WeightScheme& scheme, double scale_ceiling) {
  const std::vector<TokenEval> evals =
      evaluate_batch(model, batch, stats_mode(scheme), scale_ceiling);
  const BatchContext ctx = batch_context(batch, evals);

  std::vector<double> weights;
  weights.reserve(evals.size());
  for (const TokenEval& ev : evals) {
    weights.push_back(token_weight(scheme, ev.stats, ev.dist, ctx));
  }
  return weights;
}

double batch_weighted_nll(const ToyLM& model, std::span<const CorpusRecord> batch,
                          std::span<const double> weights) {
  std::size_t i = 0;
  double acc = 0.0;
  for (const CorpusRecord& record : batch) {
    const int len = static_cast<int>(record.token_ids.size());
    for (int pos = record.prompt_len; pos < len; ++pos, ++i) {
      const int ctx = model.context_at(record.token_ids, pos);
      const int target = record.token_ids[static_cast<std::size_t>(pos)];
      const TokenDistribution dist = normalize_and_sort(model.forward(ctx));
      acc += weights[i] * -std::log(std::max(dist.probs[target], kProbFloor));
    }
  }
  if (i != weights.size()) {
    throw std::invalid_argument("weight count does not match batch token count");
  }
  return i == 0 ? 0.0 : acc / static_cast<double>(i);
}

std::pair<double, std::vector<double>> batch_weighted_nll_grad(const ToyLM& model,
                                                               std::span<const CorpusRecord> batch,
                                                               std::span<const double> weights) {
  std::vector<double> grad(model.params.size(), 0.0);
  std::size_t i = 0;
  std::size_t total = 0;
  for (const CorpusRecord& record : batch) {
    total += static_cast<std::size_t>(std::max(record.response_len(), 0));
  }
  if (total != weights.size()) {
    throw std::invalid_argument("weight count does not match batch token count");
  }
  if (total == 0) {
    return {0.0, std::move(grad)};
  }

  const double inv_t = 1.0 / static_cast<double>(total);
  double acc = 0.0;
  for (const CorpusRecord& record : batch) {
    const int len = static_cast<int>(record.token_ids.size());
    for (int pos = record.prompt_len; pos < len; ++pos, ++i) {
      const int ctx = model.context_at(record.token_ids, pos);
      const int target = record.token_ids[static_cast<std::size_t>(pos)];
      const TokenDistribution dist = normalize_and_sort(model.forward(ctx));
      acc += weights[i] * -std::log(std::max(dist.probs[target], kProbFloor));

      // d(-log p_target)/dz_j = p_j - 1[j == target], scaled by w/T.
      const double coeff = weights[i] * inv_t;
      double* g = grad.data() + static_cast<std::size_t>(ctx) * model.vocab_size;
      for (int j = 0; j < model.vocab_size; ++j) {
        g[j] += coeff * dist.probs[j];
      }
      g[target] -= coeff;
    }
  }
  return {acc * inv_t, std::move(grad)};
}

StepStats train_step(ToyLM& model, std::span<const CorpusRecord> batch,
                     const TrainConfig& config) {
  if (batch.empty()) {
    throw std::invalid_argument("batch must be nonempty");
  }
  validate_config(config);

  const std::vector<TokenEval> evals =
      evaluate_batch(model, batch, stats_mode(config.scheme), config.scale_ceiling);
  const BatchContext ctx = batch_context(batch, evals);

  std::vector<double> weights;
  weights.reserve(evals.size());
  for (const TokenEval& ev : evals) {
    weights.push_back(token_weight(config.scheme, ev.stats, ev.dist, ctx));
  }

  auto [loss, grad] = batch_weighted_nll_grad(model, batch, weights);

  StepStats out;
  out.loss = loss;
  double sq = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    sq += grad[i] * grad[i];
    model.params[i] -= config.learning_rate * grad[i];
  }
  out.grad_norm = std::sqrt(sq);

  if (!evals.empty()) {
    double w_sum = 0.0;
    double s_sum = 0.0;
    double h_sum = 0.0;
    for (std::size_t i = 0; i < evals.size(); ++i) {
      w_sum += weights[i];
      s_sum += evals[i].stats.scale;
      h_sum += evals[i].stats.entropy_bits;
    }
    const double n = static_cast<double>(evals.size());
    out.mean_weight = w_sum / n;
    out.mean_scale = s_sum / n;
    out.mean_entropy = h_sum / n;
  }
  return out;
}

std::vector<StepStats> train(ToyLM& model, std::span<const CorpusRecord> corpus,
                             const TrainConfig& config) {
  validate_config(config);
  if (corpus.empty()) {
    throw std::invalid_argument("corpus must be nonempty");
  }

  const std::size_t n = corpus.size();
  std::vector<StepStats> telemetry;
  telemetry.reserve(static_cast<std::size_t>(config.steps));
  std::vector<CorpusRecord> batch(static_cast<std::size_t>(config.batch_size));
  for (int step = 0; step < config.steps; ++step) {
    for (int j = 0; j < config.batch_size; ++j) {
      const std::size_t idx =
          (static_cast<std::size_t>(step) * static_cast<std::size_t>(config.batch_size) +
           static_cast<std::size_t>(j)) %
          n;
      batch[static_cast<std::size_t>(j)] = corpus[idx];
    }
    telemetry.push_back(train_step(model, batch, config));
  }
  return telemetry;
}

double inference_entropy(const ToyLM& model, std::span<const std::vector<int>> prompts,
                         int n_samples, double temperature, std::uint64_t seed, int gen_len) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be positive");
  }
  if (n_samples < 1 || gen_len < 1) {
    throw std::invalid_argument("n_samples and gen_len must be at least 1");
  }
  if (prompts.empty()) {
    throw std::invalid_argument("prompts must be nonempty");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> scaled(static_cast<std::size_t>(model.vocab_size));

  double entropy_sum = 0.0;
  std::int64_t positions = 0;
  std::vector<int> tokens;
  for (const std::vector<int>& prompt : prompts) {
    for (int run = 0; run < n_samples; ++run) {
      tokens.assign(prompt.begin(), prompt.end());
      for (int g = 0; g < gen_len; ++g) {
        const int pos = static_cast<int>(tokens.size());
        const int ctx = model.context_at(tokens, pos);
        const std::span<const double> logits = model.forward(ctx);
        for (int j = 0; j < model.vocab_size; ++j) {
          scaled[static_cast<std::size_t>(j)] = logits[static_cast<std::size_t>(j)] / temperature;
        }
        const TokenDistribution dist = normalize_and_sort(scaled);
        entropy_sum += entropy_bits(dist);
        ++positions;
        tokens.push_back(sample_index(dist.probs, unit(rng)));
      }
    }
  }
  return entropy_sum / static_cast<double>(positions);
}

void save_model(const ToyLM& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  const char magic[4] = {'R', 'T', 'L', 'M'};
  const std::uint32_t version = 1;
  const std::int64_t vocab = model.vocab_size;
  const std::int64_t order = model.context_order;
  const std::uint64_t seed = model.seed;
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&vocab), sizeof(vocab));
  out.write(reinterpret_cast<const char*>(&order), sizeof(order));
  out.write(reinterpret_cast<const char*>(&seed), sizeof(seed));
  out.write(reinterpret_cast<const char*>(model.params.data()),
            static_cast<std::streamsize>(model.params.size() * sizeof(double)));
  if (!out) {
    throw std::runtime_error("failed writing model snapshot to " + path);
  }
}

ToyLM load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  char magic[4] = {};
  std::uint32_t version = 0;
  std::int64_t vocab = 0;
  std::int64_t order = 0;
  std::uint64_t seed = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&vocab), sizeof(vocab));
  in.read(reinterpret_cast<char*>(&order), sizeof(order));
  in.read(reinterpret_cast<char*>(&seed), sizeof(seed));
  if (!in || std::memcmp(magic, "RTLM", 4) != 0 || version != 1) {
    throw std::runtime_error(path + " is not a model snapshot");
  }
  ToyLM model = ToyLM::create(static_cast<int>(vocab), static_cast<int>(order), seed);
  in.read(reinterpret_cast<char*>(model.params.data()),
          static_cast<std::streamsize>(model.params.size() * sizeof(double)));
  if (!in) {
    throw std::runtime_error(path + " is truncated");
  }
  return model;
}

int sample_index(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) {
      return static_cast<int>(i);
    }
  }
  return static_cast<int>(probs.size()) - 1;
}

} // namespace ranktuner
