#include "ranktuner/ranktuner.h"

#include <exception>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "core_stats.hpp"
#include "diagnostics.hpp"
#include "toy_trainer.hpp"
#include "weighting.hpp"

namespace {

thread_local std::string g_last_error;

rt_status fail(rt_status code, const char* message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
rt_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return RT_OK;
  } catch (const std::out_of_range& e) {
    return fail(RT_ERR_OUT_OF_RANGE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(RT_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::runtime_error& e) {
    return fail(RT_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(RT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(RT_ERR_INTERNAL, "unknown error");
  }
}

ranktuner::XiMode to_xi_mode(rt_xi_mode mode) {
  switch (mode) {
    case RT_XI_MAX: return ranktuner::XiMode::Max;
    case RT_XI_ARITHMETIC: return ranktuner::XiMode::Arithmetic;
    case RT_XI_GEOMETRIC: return ranktuner::XiMode::Geometric;
    case RT_XI_LOGARITHMIC: return ranktuner::XiMode::Logarithmic;
  }
  throw std::invalid_argument("unknown xi mode");
}

ranktuner::WeightScheme to_scheme(const rt_scheme_config& config) {
  ranktuner::WeightScheme scheme;
  switch (config.kind) {
    case RT_SCHEME_SFT: scheme.kind = ranktuner::SchemeKind::Sft; break;
    case RT_SCHEME_OVERTONE: scheme.kind = ranktuner::SchemeKind::Overtone; break;
    case RT_SCHEME_DFT: scheme.kind = ranktuner::SchemeKind::Dft; break;
    case RT_SCHEME_EAFT: scheme.kind = ranktuner::SchemeKind::Eaft; break;
    case RT_SCHEME_TALR: scheme.kind = ranktuner::SchemeKind::Talr; break;
    case RT_SCHEME_RANKTUNER: scheme.kind = ranktuner::SchemeKind::Ranktuner; break;
    default: throw std::invalid_argument("unknown scheme kind");
  }
  scheme.overtone_lambda = config.overtone_lambda;
  scheme.eaft_topk = config.eaft_topk;
  scheme.eaft_lnk_approx = config.eaft_lnk_approx;
  scheme.talr_floor = config.talr_floor;
  scheme.ranktuner_initial = config.ranktuner_initial == RT_INITIAL_UNIFORM
                                 ? ranktuner::InitialWeight::Uniform
                                 : ranktuner::InitialWeight::Prob;
  scheme.ranktuner_xi_mode = to_xi_mode(config.ranktuner_xi_mode);
  ranktuner::validate_scheme(scheme);
  return scheme;
}

rt_token_stats to_c(const ranktuner::TokenStats& st) {
  rt_token_stats out;
  out.p = st.p;
  out.rank = st.rank;
  out.entropy_bits = st.entropy_bits;
  out.p_max = st.p_max;
  out.expected_rank = st.expected_rank;
  out.support_term = st.support_term;
  out.xi = st.xi;
  out.k_coeff = st.k_coeff;
  out.indicator = st.indicator;
  out.scale = st.scale;
  return out;
}

ranktuner::TokenStats from_c(const rt_token_stats& st) {
  ranktuner::TokenStats out;
  out.p = st.p;
  out.rank = static_cast<int>(st.rank);
  out.entropy_bits = st.entropy_bits;
  out.p_max = st.p_max;
  out.expected_rank = st.expected_rank;
  out.support_term = st.support_term;
  out.xi = st.xi;
  out.k_coeff = st.k_coeff;
  out.indicator = st.indicator;
  out.scale = st.scale;
  return out;
}

void require(bool condition, const char* message) {
  if (!condition) {
    throw std::invalid_argument(message);
  }
}

} // namespace

struct rt_corpus {
  ranktuner::SynthCorpus data;
};

struct rt_model {
  ranktuner::ToyLM data;
};

struct rt_noise_experiment {
  ranktuner::NoiseExperiment experiment;
  ranktuner::ToyLM model;
};

extern "C" {

const char* rt_version(void) { return "0.1.0"; }

const char* rt_last_error(void) { return g_last_error.c_str(); }

void rt_scheme_config_init(rt_scheme_config* config) {
  if (config == nullptr) {
    return;
  }
  config->kind = RT_SCHEME_SFT;
  config->overtone_lambda = 0.1;
  config->eaft_topk = 20;
  config->eaft_lnk_approx = 3.0;
  config->talr_floor = 0.01;
  config->ranktuner_initial = RT_INITIAL_PROB;
  config->ranktuner_xi_mode = RT_XI_MAX;
}

void rt_train_config_init(rt_train_config* config) {
  if (config == nullptr) {
    return;
  }
  rt_scheme_config_init(&config->scheme);
  config->learning_rate = 0.5;
  config->steps = 100;
  config->batch_size = 8;
  config->seed = 0;
  config->scale_ceiling = ranktuner::kDefaultScaleCeiling;
}

rt_status rt_token_stats_compute(const double* logits, int64_t vocab_size, int64_t target,
                                 rt_xi_mode mode, double scale_ceiling, rt_token_stats* out) {
  return guarded([&] {
    require(logits != nullptr && out != nullptr, "logits and out must be non-null");
    require(vocab_size >= 2, "vocab_size must be at least 2");
    const std::span<const double> view(logits, static_cast<std::size_t>(vocab_size));
    *out = to_c(ranktuner::token_stats(view, static_cast<int>(target), to_xi_mode(mode),
                                       scale_ceiling));
  });
}

rt_status rt_k_full(double xi, double* out) {
  return guarded([&] {
    require(out != nullptr, "out must be non-null");
    *out = ranktuner::k_full(xi);
  });
}

rt_status rt_k_simplified(double xi, double* out) {
  return guarded([&] {
    require(out != nullptr, "out must be non-null");
    *out = ranktuner::k_simplified(xi);
  });
}

rt_status rt_relative_rank_indicator(double rank, double expected_rank, double* out) {
  return guarded([&] {
    require(out != nullptr, "out must be non-null");
    require(rank >= 1.0 && expected_rank >= 1.0, "rank arguments must be at least 1");
    *out = ranktuner::relative_rank_indicator(rank, expected_rank);
  });
}

rt_status rt_geometric_maxent_entropy(double mean_rank, double* out) {
  return guarded([&] {
    require(out != nullptr, "out must be non-null");
    *out = ranktuner::geometric_maxent_entropy(mean_rank);
  });
}

rt_status rt_fano_entropy_cap(double p_max, int64_t vocab_size, double* out) {
  return guarded([&] {
    require(out != nullptr, "out must be non-null");
    *out = ranktuner::fano_entropy_cap(p_max, static_cast<int>(vocab_size));
  });
}

rt_status rt_fano_inverse(double entropy_bits, int64_t vocab_size, double* out) {
  return guarded([&] {
    require(out != nullptr, "out must be non-null");
    *out = ranktuner::fano_inverse(entropy_bits, static_cast<int>(vocab_size));
  });
}

rt_status rt_bound_sweep(int64_t n, uint64_t seed, rt_gap_report* rank_prob,
                         rt_gap_report* expected_rank_entropy) {
  return guarded([&] {
    require(rank_prob != nullptr && expected_rank_entropy != nullptr,
            "report pointers must be non-null");
    const ranktuner::BoundSweepResult result = ranktuner::bound_sweep(n, seed);
    auto convert = [](const ranktuner::GapReport& r) {
      rt_gap_report out;
      out.mean = r.mean;
      out.median = r.median;
      out.std_dev = r.std_dev;
      out.p80 = r.p80;
      out.p90 = r.p90;
      out.count = r.count;
      out.violations = r.violations;
      return out;
    };
    *rank_prob = convert(result.rank_prob);
    *expected_rank_entropy = convert(result.expected_rank_entropy);
  });
}

rt_status rt_token_weight(const rt_scheme_config* scheme, const rt_token_stats* stats,
                          const double* probs, int64_t vocab_size,
                          const double* seq_avg_losses, int64_t n_sequences, double* out) {
  return guarded([&] {
    require(scheme != nullptr && stats != nullptr && out != nullptr,
            "scheme, stats and out must be non-null");
    const ranktuner::WeightScheme ws = to_scheme(*scheme);

    ranktuner::TokenDistribution dist;
    if (probs != nullptr && vocab_size >= 2) {
      dist = ranktuner::TokenDistribution::from_probs(
          std::vector<double>(probs, probs + vocab_size));
    } else {
      require(ws.kind != ranktuner::SchemeKind::Eaft,
              "the entropy-gated scheme needs the full distribution");
      dist.vocab_size = 2;
      dist.probs = {1.0, 0.0};
      dist.sort_index = {0, 1};
    }

    ranktuner::BatchContext ctx;
    if (seq_avg_losses != nullptr && n_sequences > 0) {
      ctx.seq_avg_losses.assign(seq_avg_losses, seq_avg_losses + n_sequences);
    }
    *out = ranktuner::token_weight(ws, from_c(*stats), dist, ctx);
  });
}

rt_status rt_corpus_synth(int64_t vocab_size, int64_t n_records, double knowledge_sharpness,
                          uint64_t seed, rt_corpus** out) {
  return guarded([&] {
    require(out != nullptr, "out must be non-null");
    auto corpus = std::make_unique<rt_corpus>();
    corpus->data = ranktuner::synth_corpus(static_cast<int>(vocab_size),
                                           static_cast<int>(n_records), knowledge_sharpness,
                                           seed);
    *out = corpus.release();
  });
}

void rt_corpus_free(rt_corpus* corpus) { delete corpus; }

int64_t rt_corpus_num_records(const rt_corpus* corpus) {
  return corpus == nullptr ? 0 : static_cast<int64_t>(corpus->data.records.size());
}

int64_t rt_corpus_record_len(const rt_corpus* corpus, int64_t record) {
  if (corpus == nullptr || record < 0 ||
      record >= static_cast<int64_t>(corpus->data.records.size())) {
    return -1;
  }
  return static_cast<int64_t>(corpus->data.records[static_cast<std::size_t>(record)]
                                  .token_ids.size());
}

int64_t rt_corpus_record_prompt_len(const rt_corpus* corpus, int64_t record) {
  if (corpus == nullptr || record < 0 ||
      record >= static_cast<int64_t>(corpus->data.records.size())) {
    return -1;
  }
  return corpus->data.records[static_cast<std::size_t>(record)].prompt_len;
}

rt_status rt_corpus_record_tokens(const rt_corpus* corpus, int64_t record, int64_t* tokens,
                                  int64_t capacity) {
  return guarded([&] {
    require(corpus != nullptr && tokens != nullptr, "corpus and tokens must be non-null");
    require(record >= 0 && record < static_cast<int64_t>(corpus->data.records.size()),
            "record index out of range");
    const auto& ids = corpus->data.records[static_cast<std::size_t>(record)].token_ids;
    require(capacity >= static_cast<int64_t>(ids.size()), "token buffer too small");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      tokens[i] = ids[i];
    }
  });
}

rt_status rt_model_create(int64_t vocab_size, int32_t context_order, uint64_t seed,
                          rt_model** out) {
  return guarded([&] {
    require(out != nullptr, "out must be non-null");
    auto model = std::make_unique<rt_model>();
    model->data = ranktuner::ToyLM::create(static_cast<int>(vocab_size), context_order, seed);
    *out = model.release();
  });
}

void rt_model_free(rt_model* model) { delete model; }

int64_t rt_model_vocab_size(const rt_model* model) {
  return model == nullptr ? 0 : model->data.vocab_size;
}

int64_t rt_model_context_states(const rt_model* model) {
  return model == nullptr ? 0 : model->data.context_states();
}

rt_status rt_model_forward(const rt_model* model, int64_t context, double* logits) {
  return guarded([&] {
    require(model != nullptr && logits != nullptr, "model and logits must be non-null");
    const std::span<const double> row = model->data.forward(static_cast<int>(context));
    for (std::size_t i = 0; i < row.size(); ++i) {
      logits[i] = row[i];
    }
  });
}

rt_status rt_model_train(rt_model* model, const rt_corpus* corpus,
                         const rt_train_config* config, rt_step_telemetry* telemetry) {
  return guarded([&] {
    require(model != nullptr && corpus != nullptr && config != nullptr,
            "model, corpus and config must be non-null");
    ranktuner::TrainConfig tc;
    tc.scheme = to_scheme(config->scheme);
    tc.learning_rate = config->learning_rate;
    tc.steps = static_cast<int>(config->steps);
    tc.batch_size = static_cast<int>(config->batch_size);
    tc.seed = config->seed;
    tc.scale_ceiling = config->scale_ceiling;
    ranktuner::validate_config(tc);
    require(telemetry != nullptr, "telemetry buffer must be non-null");

    const std::vector<ranktuner::StepStats> stats =
        ranktuner::train(model->data, corpus->data.records, tc);
    for (std::size_t i = 0; i < stats.size(); ++i) {
      telemetry[i].step = static_cast<int64_t>(i);
      telemetry[i].loss = stats[i].loss;
      telemetry[i].grad_norm = stats[i].grad_norm;
      telemetry[i].mean_weight = stats[i].mean_weight;
      telemetry[i].mean_scale = stats[i].mean_scale;
      telemetry[i].mean_entropy = stats[i].mean_entropy;
    }
  });
}

rt_status rt_model_inference_entropy(const rt_model* model, const rt_corpus* corpus,
                                     int64_t n_samples, double temperature, int64_t gen_len,
                                     uint64_t seed, double* out) {
  return guarded([&] {
    require(model != nullptr && corpus != nullptr && out != nullptr,
            "model, corpus and out must be non-null");
    std::vector<std::vector<int>> prompts;
    prompts.reserve(corpus->data.records.size());
    for (const ranktuner::CorpusRecord& record : corpus->data.records) {
      prompts.emplace_back(record.token_ids.begin(),
                           record.token_ids.begin() + record.prompt_len);
    }
    *out = ranktuner::inference_entropy(model->data, prompts, static_cast<int>(n_samples),
                                        temperature, seed, static_cast<int>(gen_len));
  });
}

rt_status rt_model_save(const rt_model* model, const char* path) {
  return guarded([&] {
    require(model != nullptr && path != nullptr, "model and path must be non-null");
    ranktuner::save_model(model->data, path);
  });
}

rt_status rt_model_load(const char* path, rt_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must be non-null");
    auto model = std::make_unique<rt_model>();
    model->data = ranktuner::load_model(path);
    *out = model.release();
  });
}

rt_status rt_noise_experiment_run(int64_t vocab_size, int64_t n_records, double sharpness,
                                  double rho, uint64_t seed, rt_noise_experiment** out) {
  return guarded([&] {
    require(out != nullptr, "out must be non-null");
    ranktuner::NoiseBenchmark bench = ranktuner::make_noise_benchmark(
        static_cast<int>(vocab_size), static_cast<int>(n_records), sharpness, seed);
    auto handle = std::make_unique<rt_noise_experiment>();
    handle->experiment = ranktuner::insert_noise(bench.clean, bench.pool, rho, seed);
    handle->model = std::move(bench.model);
    *out = handle.release();
  });
}

void rt_noise_experiment_free(rt_noise_experiment* experiment) { delete experiment; }

int64_t rt_noise_experiment_num_records(const rt_noise_experiment* experiment) {
  return experiment == nullptr ? 0
                               : static_cast<int64_t>(experiment->experiment.corpus.size());
}

rt_status rt_noise_experiment_span(const rt_noise_experiment* experiment, int64_t record,
                                   int32_t* corrupted, int64_t* start, int64_t* end) {
  return guarded([&] {
    require(experiment != nullptr && corrupted != nullptr && start != nullptr && end != nullptr,
            "all output pointers must be non-null");
    const auto& corpus = experiment->experiment.corpus;
    require(record >= 0 && record < static_cast<int64_t>(corpus.size()),
            "record index out of range");
    const std::vector<std::pair<int, int>> spans =
        ranktuner::sequence_spans(experiment->experiment);
    const auto idx = static_cast<std::size_t>(record);
    *corrupted = corpus[idx].noise_span.has_value() ? 1 : 0;
    *start = spans[idx].first;
    *end = spans[idx].second;
  });
}

rt_status rt_noise_experiment_metrics(const rt_noise_experiment* experiment, rt_scorer scorer,
                                      rt_xi_mode mode, double scale_ceiling,
                                      rt_noise_metrics* out) {
  return guarded([&] {
    require(experiment != nullptr && out != nullptr, "experiment and out must be non-null");
    ranktuner::ScoreMethod method;
    switch (scorer) {
      case RT_SCORER_ENTROPY_DOMINANT: method = ranktuner::ScoreMethod::EntropyDominant; break;
      case RT_SCORER_PROB_DOMINANT: method = ranktuner::ScoreMethod::ProbDominant; break;
      case RT_SCORER_OURS: method = ranktuner::ScoreMethod::Ours; break;
      default: throw std::invalid_argument("unknown scorer");
    }
    const std::vector<std::vector<double>> scores =
        ranktuner::corpus_scores(experiment->model, experiment->experiment.corpus, method,
                                 to_xi_mode(mode), scale_ceiling);
    const ranktuner::NoiseMetrics metrics =
        ranktuner::noise_metrics(experiment->experiment, scores);
    out->tok_precision = metrics.tok_precision;
    out->tok_recall = metrics.tok_recall;
    out->seq_hit = metrics.seq_hit;
  });
}

rt_status rt_pass_at_k(const int32_t* matrix, int64_t n_problems, int64_t n_samples, int64_t k,
                       double* out) {
  return guarded([&] {
    require(matrix != nullptr && out != nullptr, "matrix and out must be non-null");
    require(n_problems >= 1 && n_samples >= 1, "matrix must be nonempty");
    ranktuner::CorrectnessMatrix cm;
    cm.rows.resize(static_cast<std::size_t>(n_problems));
    for (int64_t p = 0; p < n_problems; ++p) {
      auto& row = cm.rows[static_cast<std::size_t>(p)];
      row.resize(static_cast<std::size_t>(n_samples));
      for (int64_t s = 0; s < n_samples; ++s) {
        row[static_cast<std::size_t>(s)] = matrix[p * n_samples + s];
      }
    }
    *out = ranktuner::pass_at_k(cm, static_cast<int>(k));
  });
}

} // extern "C"
