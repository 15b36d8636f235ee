// ranktuner CLI: computes per-token rank/entropy statistics from logit
// dumps, runs the bound sweeps, the toy trainer and the noise diagnostic,
// and evaluates pass@k. Everything numerical goes through the public C API
// of libranktuner.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ranktuner/ranktuner.h"

namespace {

using nlohmann::json;

// Deterministic double formatting so identical runs emit identical bytes.
std::string fmt(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.12g", value);
  return buffer;
}

[[noreturn]] void die(const std::string& message) {
  std::cerr << "ranktuner: " << message << "\n";
  std::exit(1);
}

std::string api_error(const std::string& where) {
  return where + ": " + rt_last_error();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    die("cannot open output file " + path);
  }
  return out;
}

rt_xi_mode parse_xi_mode(const std::string& name) {
  if (name == "max") return RT_XI_MAX;
  if (name == "arithmetic") return RT_XI_ARITHMETIC;
  if (name == "geometric") return RT_XI_GEOMETRIC;
  if (name == "logarithmic") return RT_XI_LOGARITHMIC;
  die("unknown xi mode '" + name + "'");
}

rt_scheme_kind parse_scheme_kind(const std::string& name) {
  if (name == "sft") return RT_SCHEME_SFT;
  if (name == "overtone") return RT_SCHEME_OVERTONE;
  if (name == "dft") return RT_SCHEME_DFT;
  if (name == "eaft") return RT_SCHEME_EAFT;
  if (name == "talr") return RT_SCHEME_TALR;
  if (name == "ranktuner") return RT_SCHEME_RANKTUNER;
  die("unknown scheme '" + name + "'");
}

const char* scheme_kind_name(rt_scheme_kind kind) {
  switch (kind) {
    case RT_SCHEME_SFT: return "sft";
    case RT_SCHEME_OVERTONE: return "overtone";
    case RT_SCHEME_DFT: return "dft";
    case RT_SCHEME_EAFT: return "eaft";
    case RT_SCHEME_TALR: return "talr";
    case RT_SCHEME_RANKTUNER: return "ranktuner";
  }
  return "unknown";
}

// ---- stats ----------------------------------------------------------------

struct DumpRecord {
  std::string record_id;
  int64_t prompt_len = 0;
  std::vector<int64_t> targets;
  std::vector<std::vector<double>> logits;
};

DumpRecord parse_dump_line(const std::string& line, int line_number) {
  json parsed;
  try {
    parsed = json::parse(line);
  } catch (const json::exception& e) {
    die("line " + std::to_string(line_number) + ": parse error (" + e.what() + ")");
  }
  DumpRecord record;
  try {
    record.record_id = parsed.at("record_id").get<std::string>();
    record.prompt_len = parsed.at("prompt_len").get<int64_t>();
    record.targets = parsed.at("targets").get<std::vector<int64_t>>();
    record.logits = parsed.at("logits").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    die("line " + std::to_string(line_number) + ": malformed record (" + e.what() + ")");
  }
  if (record.targets.size() != record.logits.size()) {
    die("record " + record.record_id + ": targets length " +
        std::to_string(record.targets.size()) + " does not match " +
        std::to_string(record.logits.size()) + " logit rows");
  }
  if (record.prompt_len < 0 || record.prompt_len > static_cast<int64_t>(record.targets.size())) {
    die("record " + record.record_id + ": prompt_len out of range");
  }
  for (std::size_t row = 0; row < record.logits.size(); ++row) {
    if (record.logits[row].size() != record.logits.front().size()) {
      die("record " + record.record_id + ": ragged logits at row " + std::to_string(row));
    }
    if (record.targets[row] < 0 ||
        record.targets[row] >= static_cast<int64_t>(record.logits[row].size())) {
      die("record " + record.record_id + ": target out of range at row " + std::to_string(row));
    }
  }
  return record;
}

int cmd_stats(const std::string& input, const std::string& output, const std::string& xi_mode,
              double scale_ceiling) {
  std::ifstream in(input);
  if (!in) {
    die("cannot open input file " + input);
  }
  const rt_xi_mode mode = parse_xi_mode(xi_mode);

  std::ofstream out = open_output(output);
  out << "# schema: ranktuner.stats.v1\n";
  out << "record_id,position,p,rank,entropy_bits,expected_rank,support_term,xi,k_coeff,"
         "indicator,scale\n";

  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) {
      continue;
    }
    const DumpRecord record = parse_dump_line(line, line_number);
    for (int64_t pos = record.prompt_len; pos < static_cast<int64_t>(record.targets.size());
         ++pos) {
      const std::vector<double>& row = record.logits[static_cast<std::size_t>(pos)];
      rt_token_stats stats;
      if (rt_token_stats_compute(row.data(), static_cast<int64_t>(row.size()),
                                 record.targets[static_cast<std::size_t>(pos)], mode,
                                 scale_ceiling, &stats) != RT_OK) {
        die("record " + record.record_id + ", position " + std::to_string(pos) + ": " +
            rt_last_error());
      }
      out << record.record_id << ',' << pos << ',' << fmt(stats.p) << ',' << stats.rank << ','
          << fmt(stats.entropy_bits) << ',' << fmt(stats.expected_rank) << ','
          << fmt(stats.support_term) << ',' << fmt(stats.xi) << ',' << fmt(stats.k_coeff) << ','
          << fmt(stats.indicator) << ',' << fmt(stats.scale) << '\n';
    }
  }
  return 0;
}

// ---- validate-bounds -------------------------------------------------------

int cmd_validate_bounds(int64_t n, uint64_t seed, const std::string& output) {
  rt_gap_report rank_prob;
  rt_gap_report entropy;
  if (rt_bound_sweep(n, seed, &rank_prob, &entropy) != RT_OK) {
    die(api_error("bound sweep"));
  }

  std::ofstream out = open_output(output);
  out << "# schema: ranktuner.gaps.v1\n";
  out << "error_type,mean,median,std,p80,p90,count,violations\n";
  auto emit = [&out](const char* name, const rt_gap_report& r) {
    out << name << ',' << fmt(r.mean) << ',' << fmt(r.median) << ',' << fmt(r.std_dev) << ','
        << fmt(r.p80) << ',' << fmt(r.p90) << ',' << r.count << ',' << r.violations << '\n';
  };
  emit("rank_prob", rank_prob);
  emit("expected_rank_entropy", entropy);
  out.close();

  if (rank_prob.violations > 0 || entropy.violations > 0) {
    std::cerr << "ranktuner: bound violations detected ("
              << rank_prob.violations + entropy.violations << ")\n";
    return 2;
  }
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainSetup {
  rt_train_config config;
  int64_t vocab_size = 16;
  int32_t context_order = 1;
};

TrainSetup parse_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    die("cannot open config file " + path);
  }
  TrainSetup setup;
  rt_train_config_init(&setup.config);

  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    std::string trimmed;
    for (char c : line) {
      if (!std::isspace(static_cast<unsigned char>(c))) {
        trimmed += c;
      }
    }
    if (trimmed.empty()) {
      continue;
    }
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      die(path + ":" + std::to_string(line_number) + ": expected key=value");
    }
    const std::string key = trimmed.substr(0, eq);
    const std::string value = trimmed.substr(eq + 1);
    try {
      if (key == "scheme") {
        setup.config.scheme.kind = parse_scheme_kind(value);
      } else if (key == "initial") {
        if (value == "prob") {
          setup.config.scheme.ranktuner_initial = RT_INITIAL_PROB;
        } else if (value == "uniform") {
          setup.config.scheme.ranktuner_initial = RT_INITIAL_UNIFORM;
        } else {
          die("config field initial: unknown value '" + value + "'");
        }
      } else if (key == "xi_mode") {
        setup.config.scheme.ranktuner_xi_mode = parse_xi_mode(value);
      } else if (key == "overtone_lambda") {
        setup.config.scheme.overtone_lambda = std::stod(value);
      } else if (key == "eaft_topk") {
        setup.config.scheme.eaft_topk = static_cast<int32_t>(std::stol(value));
      } else if (key == "eaft_lnk_approx") {
        setup.config.scheme.eaft_lnk_approx = std::stod(value);
      } else if (key == "talr_floor") {
        setup.config.scheme.talr_floor = std::stod(value);
      } else if (key == "learning_rate") {
        setup.config.learning_rate = std::stod(value);
      } else if (key == "steps") {
        setup.config.steps = std::stol(value);
      } else if (key == "batch_size") {
        setup.config.batch_size = std::stol(value);
      } else if (key == "seed") {
        setup.config.seed = std::stoull(value);
      } else if (key == "scale_ceiling") {
        setup.config.scale_ceiling = std::stod(value);
      } else if (key == "vocab_size") {
        setup.vocab_size = std::stol(value);
      } else if (key == "context_order") {
        setup.context_order = static_cast<int32_t>(std::stol(value));
      } else {
        die("config field '" + key + "' is not recognized");
      }
    } catch (const std::invalid_argument&) {
      die("config field '" + key + "': cannot parse value '" + value + "'");
    } catch (const std::out_of_range&) {
      die("config field '" + key + "': value out of range");
    }
  }
  return setup;
}

int cmd_train(const std::string& config_path, const std::string& scheme_override,
              const std::string& output, int64_t corpus_records, double corpus_sharpness,
              std::optional<uint64_t> corpus_seed, bool probe_entropy,
              const std::string& save_model) {
  TrainSetup setup = parse_train_config(config_path);
  if (!scheme_override.empty()) {
    setup.config.scheme.kind = parse_scheme_kind(scheme_override);
  }
  if (setup.config.steps < 1 || setup.config.steps > 10000000) {
    die("config field 'steps': must be in [1, 10000000]");
  }

  rt_corpus* corpus = nullptr;
  const uint64_t cseed = corpus_seed.value_or(setup.config.seed);
  if (rt_corpus_synth(setup.vocab_size, corpus_records, corpus_sharpness, cseed, &corpus) !=
      RT_OK) {
    die(api_error("corpus synthesis"));
  }

  rt_model* model = nullptr;
  if (rt_model_create(setup.vocab_size, setup.context_order, setup.config.seed, &model) !=
      RT_OK) {
    rt_corpus_free(corpus);
    die(api_error("model creation"));
  }

  std::vector<rt_step_telemetry> telemetry(static_cast<std::size_t>(setup.config.steps));
  if (rt_model_train(model, corpus, &setup.config, telemetry.data()) != RT_OK) {
    const std::string message = api_error("training");
    rt_model_free(model);
    rt_corpus_free(corpus);
    die(message);
  }

  std::ofstream out = open_output(output);
  out << "# schema: ranktuner.telemetry.v1\n";
  out << "step,loss,grad_norm,mean_weight,mean_scale,mean_entropy\n";
  for (const rt_step_telemetry& t : telemetry) {
    out << t.step << ',' << fmt(t.loss) << ',' << fmt(t.grad_norm) << ',' << fmt(t.mean_weight)
        << ',' << fmt(t.mean_scale) << ',' << fmt(t.mean_entropy) << '\n';
  }

  if (probe_entropy) {
    double entropy = 0.0;
    if (rt_model_inference_entropy(model, corpus, 8, 0.2, 16, setup.config.seed, &entropy) !=
        RT_OK) {
      die(api_error("inference entropy probe"));
    }
    out << "# probe: scheme=" << scheme_kind_name(setup.config.scheme.kind)
        << " inference_entropy_bits=" << fmt(entropy) << " temperature=0.2 samples=8\n";
  }

  if (!save_model.empty()) {
    if (rt_model_save(model, save_model.c_str()) != RT_OK) {
      die(api_error("model snapshot"));
    }
  }

  rt_model_free(model);
  rt_corpus_free(corpus);
  return 0;
}

// ---- noise -------------------------------------------------------------------

int cmd_noise(double rho, uint64_t seed, const std::string& scorer, int64_t records,
              int64_t vocab, double sharpness, const std::string& xi_mode, double scale_ceiling,
              const std::string& output, const std::string& manifest) {
  rt_scorer method;
  if (scorer == "entropy_dominant") {
    method = RT_SCORER_ENTROPY_DOMINANT;
  } else if (scorer == "prob_dominant") {
    method = RT_SCORER_PROB_DOMINANT;
  } else if (scorer == "ours") {
    method = RT_SCORER_OURS;
  } else {
    die("unknown scorer '" + scorer + "'");
  }

  rt_noise_experiment* exp = nullptr;
  if (rt_noise_experiment_run(vocab, records, sharpness, rho, seed, &exp) != RT_OK) {
    die(api_error("noise experiment"));
  }

  rt_noise_metrics metrics;
  if (rt_noise_experiment_metrics(exp, method, parse_xi_mode(xi_mode), scale_ceiling,
                                  &metrics) != RT_OK) {
    const std::string message = api_error("noise metrics");
    rt_noise_experiment_free(exp);
    die(message);
  }

  std::ofstream out = open_output(output);
  out << "# schema: ranktuner.noise.v1\n";
  out << "method,tok_prec,tok_rec,seq_hit,rho,seed\n";
  out << scorer << ',' << fmt(metrics.tok_precision) << ',' << fmt(metrics.tok_recall) << ','
      << metrics.seq_hit << ',' << fmt(rho) << ',' << seed << '\n';

  if (!manifest.empty()) {
    std::ofstream mout = open_output(manifest);
    mout << "# schema: ranktuner.noise-manifest.v1\n";
    mout << "record_id,corrupted,span_start,span_end\n";
    const int64_t n = rt_noise_experiment_num_records(exp);
    for (int64_t r = 0; r < n; ++r) {
      int32_t corrupted = 0;
      int64_t start = 0;
      int64_t end = 0;
      if (rt_noise_experiment_span(exp, r, &corrupted, &start, &end) != RT_OK) {
        die(api_error("noise manifest"));
      }
      mout << r << ',' << corrupted << ',' << start << ',' << end << '\n';
    }
  }

  rt_noise_experiment_free(exp);
  return 0;
}

// ---- passk ---------------------------------------------------------------------

int cmd_passk(const std::string& input, const std::vector<int64_t>& ks,
              const std::string& output) {
  std::ifstream in(input);
  if (!in) {
    die("cannot open input file " + input);
  }
  std::vector<int32_t> matrix;
  int64_t n_samples = -1;
  int64_t n_problems = 0;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::istringstream row(line);
    std::vector<int32_t> values;
    int v = 0;
    while (row >> v) {
      if (v != 0 && v != 1) {
        die("line " + std::to_string(line_number) + ": entries must be 0 or 1");
      }
      values.push_back(v);
    }
    if (values.empty()) {
      continue;
    }
    if (n_samples < 0) {
      n_samples = static_cast<int64_t>(values.size());
    } else if (n_samples != static_cast<int64_t>(values.size())) {
      die("line " + std::to_string(line_number) + ": ragged row (expected " +
          std::to_string(n_samples) + " entries)");
    }
    matrix.insert(matrix.end(), values.begin(), values.end());
    ++n_problems;
  }
  if (n_problems == 0) {
    die("input has no correctness rows");
  }

  std::ostringstream result;
  result << "# schema: ranktuner.passk.v1\n";
  result << "k,pass_percentage\n";
  for (int64_t k : ks) {
    double pct = 0.0;
    if (rt_pass_at_k(matrix.data(), n_problems, n_samples, k, &pct) != RT_OK) {
      die(api_error("pass@" + std::to_string(k)));
    }
    result << k << ',' << fmt(pct) << '\n';
  }

  if (output.empty()) {
    std::cout << result.str();
  } else {
    std::ofstream out = open_output(output);
    out << result.str();
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"rank-calibrated token statistics, weighting schemes and diagnostics"};
  app.require_subcommand(1);

  auto* stats = app.add_subcommand("stats", "per-token statistics from a logit dump");
  std::string stats_input;
  std::string stats_output;
  std::string stats_xi_mode = "max";
  double stats_ceiling = 100.0;
  stats->add_option("--input", stats_input, "line-delimited logit dump")->required();
  stats->add_option("--output", stats_output, "CSV output path")->required();
  stats->add_option("--xi-mode", stats_xi_mode, "max|arithmetic|geometric|logarithmic");
  stats->add_option("--scale-ceiling", stats_ceiling, "clamp for the relative scale");

  auto* bounds = app.add_subcommand("validate-bounds", "random-distribution bound sweep");
  int64_t bounds_n = 10000;
  uint64_t bounds_seed = 0;
  std::string bounds_output;
  bounds->add_option("--n", bounds_n, "number of sampled distributions")
      ->check(CLI::PositiveNumber);
  bounds->add_option("--seed", bounds_seed, "sweep seed")->envname("RANKTUNER_SEED");
  bounds->add_option("--output", bounds_output, "CSV output path")->required();

  auto* train = app.add_subcommand("train", "toy weighted fine-tuning run");
  std::string train_config;
  std::string train_scheme;
  std::string train_output;
  int64_t train_records = 16;
  double train_sharpness = 6.0;
  std::optional<uint64_t> train_corpus_seed;
  bool train_probe = false;
  std::string train_save;
  train->add_option("--config", train_config, "key=value training configuration")->required();
  train->add_option("--scheme", train_scheme, "override the configured scheme tag");
  train->add_option("--output", train_output, "telemetry CSV path")->required();
  train->add_option("--corpus-records", train_records, "synthetic corpus size")
      ->check(CLI::PositiveNumber);
  train->add_option("--corpus-sharpness", train_sharpness, "synthetic corpus sharpness");
  train->add_option("--corpus-seed", train_corpus_seed, "corpus seed (defaults to config seed)");
  train->add_flag("--probe-entropy", train_probe, "append the inference-entropy probe");
  train->add_option("--save-model", train_save, "write a model snapshot");

  auto* noise = app.add_subcommand("noise", "noise-insertion sensitivity protocol");
  double noise_rho = 0.1;
  uint64_t noise_seed = 0;
  std::string noise_scorer = "ours";
  int64_t noise_records = 50;
  int64_t noise_vocab = 32;
  double noise_sharpness = 4.0;
  std::string noise_xi_mode = "max";
  double noise_ceiling = 100.0;
  std::string noise_output;
  std::string noise_manifest;
  noise->add_option("--rho", noise_rho, "corruption ratio in (0, 1)");
  noise->add_option("--seed", noise_seed, "experiment seed")->envname("RANKTUNER_SEED");
  noise->add_option("--scorer", noise_scorer, "entropy_dominant|prob_dominant|ours");
  noise->add_option("--n", noise_records, "number of records")->check(CLI::PositiveNumber);
  noise->add_option("--vocab", noise_vocab, "vocabulary size");
  noise->add_option("--sharpness", noise_sharpness, "content-region sharpness");
  noise->add_option("--xi-mode", noise_xi_mode, "max|arithmetic|geometric|logarithmic");
  noise->add_option("--scale-ceiling", noise_ceiling, "clamp for the relative scale");
  noise->add_option("--output", noise_output, "metrics CSV path")->required();
  noise->add_option("--manifest", noise_manifest, "optional span manifest path");

  auto* passk = app.add_subcommand("passk", "combinatorial pass@k from correctness vectors");
  std::string passk_input;
  std::vector<int64_t> passk_ks;
  std::string passk_output;
  passk->add_option("--input", passk_input, "line-delimited 0/1 vectors")->required();
  passk->add_option("--k", passk_ks, "k value (repeatable)")->required();
  passk->add_option("--output", passk_output, "CSV output path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  if (stats->parsed()) {
    return cmd_stats(stats_input, stats_output, stats_xi_mode, stats_ceiling);
  }
  if (bounds->parsed()) {
    return cmd_validate_bounds(bounds_n, bounds_seed, bounds_output);
  }
  if (train->parsed()) {
    return cmd_train(train_config, train_scheme, train_output, train_records, train_sharpness,
                     train_corpus_seed, train_probe, train_save);
  }
  if (noise->parsed()) {
    return cmd_noise(noise_rho, noise_seed, noise_scorer, noise_records, noise_vocab,
                     noise_sharpness, noise_xi_mode, noise_ceiling, noise_output,
                     noise_manifest);
  }
  if (passk->parsed()) {
    return cmd_passk(passk_input, passk_ks, passk_output);
  }
  return 1;
}
