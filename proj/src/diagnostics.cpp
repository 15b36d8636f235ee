#include "diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace ranktuner {

namespace {

// Indices 0..n-1 ordered by descending score, ties toward the lower index.
std::vector<int> rank_by_score(std::span<const double> scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

// ceil(rho * n), clamped to [1, n].
std::int64_t top_k_cutoff(std::size_t n, double rho) {
  if (n == 0) {
    throw std::invalid_argument("cannot rank an empty sequence");
  }
  const auto k = static_cast<std::int64_t>(std::ceil(rho * static_cast<double>(n)));
  return std::clamp<std::int64_t>(k, 1, static_cast<std::int64_t>(n));
}

} // namespace

NoiseExperiment insert_noise(std::span<const CorpusRecord> clean,
                             std::span<const std::vector<int>> noise_pool, double rho,
                             std::uint64_t seed) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("rho must lie in (0, 1)");
  }
  if (noise_pool.empty()) {
    throw std::invalid_argument("noise pool must be nonempty");
  }
  for (const std::vector<int>& entry : noise_pool) {
    if (entry.empty()) {
      throw std::invalid_argument("noise pool entries must be nonempty");
    }
  }
  if (clean.empty()) {
    throw std::invalid_argument("corpus must be nonempty");
  }

  const int n = static_cast<int>(clean.size());
  const int n_corrupt = std::clamp(static_cast<int>(std::lround(rho * n)), 1, n);

  NoiseExperiment exp;
  exp.rho = rho;
  exp.seed = seed;
  exp.corpus.assign(clean.begin(), clean.end());

  // Partial Fisher-Yates draw of n_corrupt distinct record ids.
  std::mt19937_64 rng(seed);
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = 0; i < n_corrupt; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(pick(rng))]);
  }
  exp.corrupted_ids.assign(ids.begin(), ids.begin() + n_corrupt);
  std::sort(exp.corrupted_ids.begin(), exp.corrupted_ids.end());

  std::uniform_int_distribution<std::size_t> pool_pick(0, noise_pool.size() - 1);
  for (int id : exp.corrupted_ids) {
    CorpusRecord& record = exp.corpus[static_cast<std::size_t>(id)];
    const std::vector<int>& noise = noise_pool[pool_pick(rng)];
    const int out_len = record.response_len();
    // Token index nearest the response midpoint; a .5 tie rounds up.
    const int insert_rel = (out_len + 1) / 2;
    const int at = record.prompt_len + insert_rel;
    record.token_ids.insert(record.token_ids.begin() + at, noise.begin(), noise.end());
    record.noise_span = {at, at + static_cast<int>(noise.size())};
  }
  return exp;
}

std::vector<double> indicator_scores(ScoreMethod method, std::span<const TokenStats> stats) {
  std::vector<double> scores;
  scores.reserve(stats.size());
  for (const TokenStats& st : stats) {
    switch (method) {
      case ScoreMethod::EntropyDominant:
        scores.push_back(st.entropy_bits);
        break;
      case ScoreMethod::ProbDominant:
        scores.push_back(-std::log(std::max(st.p, kProbFloor)));
        break;
      case ScoreMethod::Ours:
        scores.push_back(1.0 / st.indicator);
        break;
    }
  }
  return scores;
}

TokenPr token_noise_pr(std::span<const double> scores, const std::vector<bool>& noise_mask,
                       double rho) {
  if (scores.size() != noise_mask.size()) {
    throw std::invalid_argument("scores and noise mask differ in length");
  }
  const std::int64_t noise_total =
      std::count(noise_mask.begin(), noise_mask.end(), true);
  if (noise_total == 0) {
    throw std::invalid_argument("noise mask marks no tokens");
  }

  const auto k = top_k_cutoff(scores.size(), rho);
  const std::vector<int> order = rank_by_score(scores);
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < k; ++i) {
    if (noise_mask[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]) {
      ++hits;
    }
  }
  TokenPr pr;
  pr.precision = static_cast<double>(hits) / static_cast<double>(k);
  pr.recall = static_cast<double>(hits) / static_cast<double>(noise_total);
  return pr;
}

int sequence_hit(std::span<const double> span_scores, std::span<const int> corrupted_ids,
                 double rho) {
  const auto k = top_k_cutoff(span_scores.size(), rho);
  const std::vector<int> order = rank_by_score(span_scores);
  std::vector<bool> corrupted(span_scores.size(), false);
  for (int id : corrupted_ids) {
    corrupted[static_cast<std::size_t>(id)] = true;
  }
  int hits = 0;
  for (std::int64_t i = 0; i < k; ++i) {
    if (corrupted[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]) {
      ++hits;
    }
  }
  return hits;
}

std::vector<std::pair<int, int>> sequence_spans(const NoiseExperiment& experiment) {
  // Clean records get a mid-span matched to the mean inserted length.
  double len_sum = 0.0;
  int len_count = 0;
  for (int id : experiment.corrupted_ids) {
    const auto& span = experiment.corpus[static_cast<std::size_t>(id)].noise_span;
    if (!span) {
      throw std::invalid_argument("corrupted record lacks a noise span");
    }
    len_sum += span->second - span->first;
    ++len_count;
  }
  const int matched_len =
      len_count == 0 ? 1 : std::max(1, static_cast<int>(std::lround(len_sum / len_count)));

  std::vector<std::pair<int, int>> spans;
  spans.reserve(experiment.corpus.size());
  for (const CorpusRecord& record : experiment.corpus) {
    if (record.noise_span) {
      spans.push_back(*record.noise_span);
      continue;
    }
    const int out_len = record.response_len();
    const int len = std::min(matched_len, std::max(out_len, 0));
    const int start = record.prompt_len + (std::max(out_len, 0) - len) / 2;
    spans.push_back({start, start + len});
  }
  return spans;
}

namespace {

// Exact binomial coefficients; n is capped so the count fits 64 bits.
unsigned long long binomial(int n, int k) {
  if (k < 0 || k > n) {
    return 0;
  }
  k = std::min(k, n - k);
  unsigned long long result = 1;
  for (int i = 1; i <= k; ++i) {
    result = result * static_cast<unsigned long long>(n - k + i) /
             static_cast<unsigned long long>(i);
  }
  return result;
}

} // namespace

double pass_at_k(const CorrectnessMatrix& matrix, int k) {
  if (matrix.rows.empty()) {
    throw std::invalid_argument("correctness matrix is empty");
  }
  const int n = static_cast<int>(matrix.rows.front().size());
  if (n < 1 || n > 64) {
    throw std::invalid_argument("sample count per problem must be in [1, 64]");
  }
  if (k < 1 || k > n) {
    throw std::invalid_argument("k must lie in [1, " + std::to_string(n) + "]");
  }

  unsigned long long passing = 0;
  unsigned long long total = 0;
  for (const std::vector<int>& row : matrix.rows) {
    if (static_cast<int>(row.size()) != n) {
      throw std::invalid_argument("correctness rows have unequal sample counts");
    }
    int correct = 0;
    for (int c : row) {
      if (c != 0 && c != 1) {
        throw std::invalid_argument("correctness entries must be 0 or 1");
      }
      correct += c;
    }
    const unsigned long long all = binomial(n, k);
    passing += all - binomial(n - correct, k);
    total += all;
  }
  return 100.0 * static_cast<double>(passing) / static_cast<double>(total);
}

std::vector<std::vector<double>> corpus_scores(const ToyLM& model,
                                               std::span<const CorpusRecord> corpus,
                                               ScoreMethod method, XiMode mode,
                                               double scale_ceiling) {
  std::vector<std::vector<double>> all_scores;
  all_scores.reserve(corpus.size());
  std::vector<TokenStats> stats;
  for (const CorpusRecord& record : corpus) {
    stats.clear();
    const int len = static_cast<int>(record.token_ids.size());
    for (int pos = record.prompt_len; pos < len; ++pos) {
      const int ctx = model.context_at(record.token_ids, pos);
      stats.push_back(token_stats(model.forward(ctx),
                                  record.token_ids[static_cast<std::size_t>(pos)], mode,
                                  scale_ceiling));
    }
    all_scores.push_back(indicator_scores(method, stats));
  }
  return all_scores;
}

NoiseMetrics noise_metrics(const NoiseExperiment& experiment,
                           std::span<const std::vector<double>> scores) {
  if (scores.size() != experiment.corpus.size()) {
    throw std::invalid_argument("score rows do not match the corpus");
  }

  std::vector<double> flat;
  std::vector<bool> mask;
  for (std::size_t r = 0; r < experiment.corpus.size(); ++r) {
    const CorpusRecord& record = experiment.corpus[r];
    const int out_len = record.response_len();
    if (static_cast<int>(scores[r].size()) != out_len) {
      throw std::invalid_argument("score row " + std::to_string(r) +
                                  " does not match the response length");
    }
    for (int i = 0; i < out_len; ++i) {
      const int pos = record.prompt_len + i;
      flat.push_back(scores[r][static_cast<std::size_t>(i)]);
      mask.push_back(record.noise_span && pos >= record.noise_span->first &&
                     pos < record.noise_span->second);
    }
  }

  const std::vector<std::pair<int, int>> spans = sequence_spans(experiment);
  std::vector<double> span_means;
  span_means.reserve(spans.size());
  for (std::size_t r = 0; r < spans.size(); ++r) {
    const CorpusRecord& record = experiment.corpus[r];
    const auto [start, end] = spans[r];
    double sum = 0.0;
    for (int pos = start; pos < end; ++pos) {
      sum += scores[r][static_cast<std::size_t>(pos - record.prompt_len)];
    }
    span_means.push_back(end > start ? sum / (end - start) : 0.0);
  }

  NoiseMetrics metrics;
  const TokenPr pr = token_noise_pr(flat, mask, experiment.rho);
  metrics.tok_precision = pr.precision;
  metrics.tok_recall = pr.recall;
  metrics.seq_hit = sequence_hit(span_means, experiment.corrupted_ids, experiment.rho);
  return metrics;
}

NoiseBenchmark make_noise_benchmark(int vocab_size, int n_records, double sharpness,
                                    std::uint64_t seed) {
  if (vocab_size < 32) {
    throw std::invalid_argument("noise benchmark needs vocab_size >= 32");
  }
  if (n_records < 2) {
    throw std::invalid_argument("noise benchmark needs at least 2 records");
  }
  if (!(sharpness > 0.0)) {
    throw std::invalid_argument("sharpness must be positive");
  }

  NoiseBenchmark bench;
  bench.model = ToyLM::create(vocab_size, 1, seed);
  const int content = vocab_size / 2;

  // Content contexts predict content tokens sharply; filler contexts stay
  // near uniform, mirroring text the model never learned.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> shape(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.01);
  for (int ctx = 0; ctx < bench.model.context_states(); ++ctx) {
    std::span<double> row = bench.model.row(ctx);
    if (ctx < content) {
      for (int j = 0; j < vocab_size; ++j) {
        row[static_cast<std::size_t>(j)] = j < content ? sharpness * shape(rng) : -8.0;
      }
    } else {
      for (int j = 0; j < vocab_size; ++j) {
        row[static_cast<std::size_t>(j)] = jitter(rng);
      }
    }
  }

  std::uniform_int_distribution<int> prompt_len_dist(1, 3);
  std::uniform_int_distribution<int> response_len_dist(10, 16);
  std::uniform_int_distribution<int> start_dist(0, content - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  bench.clean.reserve(static_cast<std::size_t>(n_records));
  for (int r = 0; r < n_records; ++r) {
    CorpusRecord record;
    record.prompt_len = prompt_len_dist(rng);
    const int total = record.prompt_len + response_len_dist(rng);
    record.token_ids.push_back(start_dist(rng));
    for (int pos = 1; pos < total; ++pos) {
      const int ctx = bench.model.context_at(record.token_ids, pos);
      const TokenDistribution dist = normalize_and_sort(bench.model.forward(ctx));
      record.token_ids.push_back(sample_index(dist.probs, unit(rng)));
    }
    bench.clean.push_back(std::move(record));
  }

  std::uniform_int_distribution<int> noise_len_dist(3, 6);
  std::uniform_int_distribution<int> filler_dist(content, vocab_size - 1);
  for (int e = 0; e < 8; ++e) {
    std::vector<int> entry(static_cast<std::size_t>(noise_len_dist(rng)));
    for (int& t : entry) {
      t = filler_dist(rng);
    }
    bench.pool.push_back(std::move(entry));
  }
  return bench;
}

} // namespace ranktuner
