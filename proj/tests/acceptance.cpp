// Acceptance suite: one criterion per check, one PASS/FAIL line each.
// Returns the number of failed criteria. The entropy-signature probe is
// advisory and reported without gating the exit status.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "core_stats.hpp"
#include "diagnostics.hpp"
#include "toy_trainer.hpp"
#include "weighting.hpp"

using namespace ranktuner;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& name, bool passed, const std::string& detail = "") {
  std::cout << (passed ? "PASS" : "FAIL") << " - " << name;
  if (!detail.empty()) {
    std::cout << " (" << detail << ")";
  }
  std::cout << "\n";
  if (!passed) {
    ++g_failures;
  }
}

void advisory(const std::string& name, bool held, const std::string& detail) {
  std::cout << (held ? "ADVISORY-OK" : "ADVISORY-FLAG") << " - " << name << " (" << detail
            << ")\n";
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<double> normalized_sweep_draw(std::mt19937_64& rng) {
  std::vector<double> probs = sweep_distribution(rng);
  double sum = 0.0;
  for (double p : probs) sum += p;
  for (double& p : probs) p /= sum;
  return probs;
}

// ---- criterion 1: R <= 1/p and E[R] >= s(H) on 10,000 seeded draws --------

void check_bound_adherence() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20260810);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> probs = normalized_sweep_draw(rng);
    std::uniform_int_distribution<int> target_dist(0, static_cast<int>(probs.size()) - 1);
    const TokenStats st = token_stats(TokenDistribution::from_probs(probs), target_dist(rng),
                                      XiMode::Max);
    if (st.rank * st.p > 1.0 + 1e-9) ++violations;
    if (st.expected_rank < st.support_term - 1e-9) ++violations;
  }
  const double elapsed = seconds_since(start);
  report("bound adherence: rank*p <= 1 and E[R] >= s(H) on 10000 seeded draws",
         violations == 0 && elapsed < 10.0,
         "violations=" + std::to_string(violations) + ", " + std::to_string(elapsed) + "s");
}

// ---- criterion 2: K(xi) regime table ---------------------------------------

void check_k_regime_table() {
  const bool ok = std::abs(k_full(1.0) - 0.5) < 1e-12 && std::abs(k_full(2.0) - 0.265) < 3e-3 &&
                  std::abs(k_full(5.0) - 0.125) < 3e-3 && std::abs(k_full(10.0) - 0.076) < 3e-3;
  std::ostringstream detail;
  detail << "K(1)=" << k_full(1.0) << " K(2)=" << k_full(2.0) << " K(5)=" << k_full(5.0)
         << " K(10)=" << k_full(10.0);
  report("K(xi) regime table at xi = 1, 2, 5, 10", ok, detail.str());
}

// ---- criterion 3: geometric max-entropy bound ------------------------------

void check_geometric_bound() {
  std::mt19937_64 rng(424242);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const TokenDistribution dist = TokenDistribution::from_probs(normalized_sweep_draw(rng));
    const double mean = expected_rank(dist);
    if (mean <= 1.0) continue;
    if (entropy_bits(dist) > geometric_maxent_entropy(mean) + 1e-9) ++violations;
  }
  const bool phi_exact = geometric_phi(2.0) == 2.0;
  const bool phi_limit = std::abs(geometric_phi(1e4) - std::log2(std::exp(1.0))) < 1e-3;
  report("geometric max-entropy bound with phi(2)=2 and phi(1e4) near log2(e)",
         violations == 0 && phi_exact && phi_limit,
         "violations=" + std::to_string(violations));
}

// ---- criterion 4: CMVT witness ----------------------------------------------

void check_cmvt_witness() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> pick(1.0, 50.0);
  auto f = [](double x) { return 1.0 / std::log2(x + 1.0); };
  int found = 0;
  int tested = 0;
  while (tested < 1000) {
    const double a = pick(rng);
    const double b = pick(rng);
    if (std::abs(a - b) < 1e-6) continue;
    ++tested;
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double delta_f = f(a) - f(b);
    const double delta_log = std::log2(a) - std::log2(b);
    auto residual = [&](double xi) { return delta_f + k_full(xi) * delta_log; };
    const double r_lo = residual(lo);
    if (r_lo * residual(hi) >= 0.0) continue;
    double left = lo;
    double right = hi;
    for (int iter = 0; iter < 200 && right - left > 1e-13; ++iter) {
      const double mid = 0.5 * (left + right);
      if (residual(mid) * r_lo <= 0.0) {
        right = mid;
      } else {
        left = mid;
      }
    }
    const double root = 0.5 * (left + right);
    if (root > lo && root < hi && std::abs(residual(root)) < 1e-9) ++found;
  }
  report("CMVT witness found by bisection for 1000 pairs in [1, 50]^2", found == 1000,
         std::to_string(found) + "/1000");
}

// ---- criterion 5: surrogate one-sidedness ------------------------------------

void check_surrogate_one_sided() {
  std::mt19937_64 rng(31337);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> probs = normalized_sweep_draw(rng);
    std::uniform_int_distribution<int> target_dist(0, static_cast<int>(probs.size()) - 1);
    const TokenStats st = token_stats(TokenDistribution::from_probs(probs), target_dist(rng),
                                      XiMode::Max);
    const double lhs = std::pow(st.expected_rank / st.rank, st.k_coeff);
    const double rhs = std::pow(st.p * st.support_term, st.k_coeff);
    if (lhs < rhs - 1e-9) ++violations;
  }
  report("surrogate one-sidedness: (E[R]/R)^K >= (p*s(H))^K on the sweep", violations == 0,
         "violations=" + std::to_string(violations));
}

// ---- criterion 6: gradient oracle ---------------------------------------------

void check_gradient_oracle() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<WeightScheme> schemes{
      WeightScheme::sft(),
      WeightScheme::overtone(0.1),
      WeightScheme::dft(),
      WeightScheme::eaft(8),
      WeightScheme::talr(0.01),
      WeightScheme::ranktuner(InitialWeight::Prob),
      WeightScheme::ranktuner(InitialWeight::Uniform),
  };
  std::mt19937_64 rng(515151);
  std::normal_distribution<double> kick(0.0, 1.0);
  double worst = 0.0;
  int triples = 0;
  for (int round = 0; round < 15; ++round) {
    const SynthCorpus corpus = synth_corpus(16, 3, 2.5, 7000 + round);
    ToyLM model = ToyLM::create(16, round % 2 == 0 ? 1 : 2, 8000 + round);
    for (double& w : model.params) {
      w += kick(rng);
    }
    for (const WeightScheme& scheme : schemes) {
      const std::vector<double> weights =
          batch_token_weights(model, corpus.records, scheme, kDefaultScaleCeiling);
      const auto [loss, analytic] = batch_weighted_nll_grad(model, corpus.records, weights);
      (void)loss;

      ToyLM probe = model;
      for (std::size_t i = 0; i < probe.params.size(); ++i) {
        const double original = probe.params[i];
        probe.params[i] = original + 1e-5;
        const double up = batch_weighted_nll(probe, corpus.records, weights);
        probe.params[i] = original - 1e-5;
        const double down = batch_weighted_nll(probe, corpus.records, weights);
        probe.params[i] = original;
        const double numeric = (up - down) / 2e-5;
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
      }
      ++triples;
    }
  }
  const double elapsed = seconds_since(start);
  std::ostringstream detail;
  detail << triples << " triples, max rel err " << worst << ", " << elapsed << "s";
  report("gradient oracle: analytic matches central differences below 1e-4",
         triples >= 100 && worst < 1e-4 && elapsed < 30.0, detail.str());
}

// ---- criterion 7: pass@k equivalence -------------------------------------------

double pass_at_k_bruteforce(int n, int c, int k) {
  std::vector<int> row(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < c; ++i) row[static_cast<std::size_t>(i)] = 1;
  long long passing = 0;
  long long total = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != k) continue;
    ++total;
    for (int i = 0; i < n; ++i) {
      if ((mask >> i & 1u) && row[static_cast<std::size_t>(i)] == 1) {
        ++passing;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(passing) / static_cast<double>(total);
}

void check_pass_at_k() {
  bool ok = true;
  for (int n = 1; n <= 8 && ok; ++n) {
    for (int c = 0; c <= n && ok; ++c) {
      CorrectnessMatrix m;
      m.rows = {std::vector<int>(static_cast<std::size_t>(n), 0)};
      for (int i = 0; i < c; ++i) m.rows[0][static_cast<std::size_t>(i)] = 1;
      for (int k = 1; k <= n; ++k) {
        if (std::abs(pass_at_k(m, k) - pass_at_k_bruteforce(n, c, k)) > 1e-9) {
          ok = false;
          break;
        }
      }
    }
  }
  CorrectnessMatrix spot;
  spot.rows = {{1, 0, 0, 0}};
  ok = ok && pass_at_k(spot, 2) == 50.0;
  report("pass@k closed form equals exhaustive enumeration for all n <= 8", ok);
}

// ---- criterion 8: noise-protocol fixture ----------------------------------------

void check_noise_fixture() {
  // Five identical records, one corrupted with four uniform-context noise
  // tokens. Profiles keyed by token id against fixed 8-token logit rows:
  // token 0 = argmax under a sharp row, token 1 = wrong target under the
  // same row, token 7 = uniform row. Counts enumerated by hand: 54 response
  // tokens, top slice 11.
  std::vector<CorpusRecord> clean(5);
  for (CorpusRecord& r : clean) {
    r.token_ids = {2, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0};
    r.prompt_len = 1;
  }
  const std::vector<std::vector<int>> pool{{7, 7, 7, 7}};
  const NoiseExperiment exp = insert_noise(clean, pool, 0.2, 2024);

  auto profile_stats = [](int token) {
    std::vector<double> logits(8, 0.0);
    if (token == 0 || token == 1) logits[0] = 6.0;
    return token_stats(logits, token, XiMode::Max);
  };
  auto scores_for = [&](ScoreMethod method) {
    std::vector<std::vector<double>> all;
    for (const CorpusRecord& record : exp.corpus) {
      std::vector<TokenStats> stats;
      for (std::size_t pos = static_cast<std::size_t>(record.prompt_len);
           pos < record.token_ids.size(); ++pos) {
        stats.push_back(profile_stats(record.token_ids[pos]));
      }
      all.push_back(indicator_scores(method, stats));
    }
    return all;
  };

  const NoiseMetrics ours = noise_metrics(exp, scores_for(ScoreMethod::Ours));
  const NoiseMetrics ent = noise_metrics(exp, scores_for(ScoreMethod::EntropyDominant));

  const bool ok = exp.corrupted_ids.size() == 1 && ent.tok_precision == 4.0 / 11.0 &&
                  ent.tok_recall == 1.0 && ent.seq_hit == 1 &&
                  ours.tok_precision == 1.0 / 11.0 && ours.tok_recall == 0.25 &&
                  ours.seq_hit == 0 && ours.seq_hit < ent.seq_hit;
  std::ostringstream detail;
  detail << "ours prec/rec/hit = " << ours.tok_precision << "/" << ours.tok_recall << "/"
         << ours.seq_hit << "; entropy = " << ent.tok_precision << "/" << ent.tok_recall << "/"
         << ent.seq_hit;
  report("noise fixture: hand-enumerated metrics hold and ours hit < entropy hit", ok,
         detail.str());
}

// ---- criterion 9: training sanity + advisory entropy signature ------------------

void check_training_sanity() {
  const std::vector<WeightScheme> schemes{
      WeightScheme::sft(),
      WeightScheme::overtone(0.1),
      WeightScheme::dft(),
      WeightScheme::eaft(8),
      WeightScheme::talr(0.01),
      WeightScheme::ranktuner(InitialWeight::Prob),
      WeightScheme::ranktuner(InitialWeight::Uniform),
  };
  const SynthCorpus corpus = synth_corpus(16, 16, 6.0, 55);
  bool ok = true;
  std::ostringstream detail;
  for (const WeightScheme& scheme : schemes) {
    TrainConfig config;
    config.scheme = scheme;
    config.learning_rate = 0.5;
    config.steps = 201; // loss at step 0 plus 200 further steps
    config.batch_size = 4;
    ToyLM model = ToyLM::create(16, 1, 56);
    const std::vector<StepStats> telemetry = train(model, corpus.records, config);
    double best = telemetry.front().loss;
    for (const StepStats& s : telemetry) best = std::min(best, s.loss);
    if (!(best < telemetry.front().loss)) {
      ok = false;
      detail << scheme_name(scheme.kind) << " failed to improve; ";
    }
  }
  report("training sanity: every scheme lowers its own weighted loss over 200 steps", ok,
         detail.str().empty() ? "7 schemes" : detail.str());

  // Advisory: the post-training inference-entropy signature. A shared
  // warmup stands in for the pretrained base model; the signature needs a
  // model-strong starting point, so the warmup runs well past convergence.
  const SynthCorpus probe_corpus = synth_corpus(32, 24, 3.0, 77);
  TrainConfig warmup;
  warmup.scheme = WeightScheme::sft();
  warmup.learning_rate = 0.5;
  warmup.steps = 400;
  warmup.batch_size = 4;
  ToyLM base = ToyLM::create(32, 1, 78);
  train(base, probe_corpus.records, warmup);

  std::vector<std::vector<int>> prompts;
  for (const CorpusRecord& r : probe_corpus.records) {
    prompts.emplace_back(r.token_ids.begin(), r.token_ids.begin() + r.prompt_len);
  }
  auto probe = [&](const WeightScheme& scheme) {
    TrainConfig config;
    config.scheme = scheme;
    config.learning_rate = 0.5;
    config.steps = 200;
    config.batch_size = 4;
    ToyLM model = base;
    train(model, probe_corpus.records, config);
    return inference_entropy(model, prompts, 8, 0.2, 79);
  };
  const double h_dft = probe(WeightScheme::dft());
  const double h_sft = probe(WeightScheme::sft());
  const double h_overtone = probe(WeightScheme::overtone(0.1));
  std::ostringstream sig;
  sig << "dft=" << h_dft << " sft=" << h_sft << " overtone=" << h_overtone;
  advisory("entropy signature ordering dft <= sft <= overtone",
           h_dft <= h_sft && h_sft <= h_overtone, sig.str());
}

// ---- criterion 10: CLI determinism ------------------------------------------------

#ifndef RANKTUNER_CLI_PATH
#define RANKTUNER_CLI_PATH "ranktuner"
#endif

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool run_cli(const std::string& args) {
  const std::string command = std::string(RANKTUNER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return std::system(command.c_str()) == 0;
}

void check_cli_determinism() {
  const fs::path dir = fs::path("acceptance_scratch");
  fs::remove_all(dir);
  fs::create_directories(dir);

  const fs::path dump = dir / "dump.jsonl";
  {
    std::ofstream out(dump);
    out << R"({"record_id":"r1","prompt_len":1,"targets":[2,1,0],"logits":[[0.0,0.0,0.0],[0.6931471805599453,0.0,0.0],[3.0,2.0,1.0]]})"
        << "\n";
    out << R"({"record_id":"r2","prompt_len":0,"targets":[1,1],"logits":[[0.5,-0.5,0.25],[2.0,2.0,2.0]]})"
        << "\n";
  }
  const fs::path correctness = dir / "correctness.txt";
  {
    std::ofstream out(correctness);
    out << "1 0 0 0\n0 1 1 0\n";
  }
  const fs::path config = dir / "train.cfg";
  {
    std::ofstream out(config);
    out << "scheme=ranktuner\ninitial=prob\nxi_mode=max\nlearning_rate=0.5\nsteps=25\n"
           "batch_size=4\nseed=42\nvocab_size=16\n";
  }

  struct Command {
    std::string name;
    std::string args_template; // %1 / %2 replaced with the run's output paths
    std::vector<std::string> outputs;
  };
  const std::vector<Command> commands{
      {"stats", "stats --input " + dump.string() + " --output %1", {"stats.csv"}},
      {"validate-bounds", "validate-bounds --n 2000 --seed 7 --output %1", {"gaps.csv"}},
      {"train",
       "train --config " + config.string() + " --output %1 --probe-entropy --save-model %2",
       {"telemetry.csv", "model.bin"}},
      {"noise", "noise --rho 0.1 --seed 42 --scorer ours --output %1 --manifest %2",
       {"metrics.csv", "manifest.csv"}},
      {"passk", "passk --input " + correctness.string() + " --k 1 --k 2 --k 4 --output %1",
       {"passk.csv"}},
  };

  bool all_ok = true;
  std::ostringstream detail;
  for (const Command& cmd : commands) {
    std::vector<std::string> first;
    std::vector<std::string> second;
    for (int run = 0; run < 2; ++run) {
      std::string args = cmd.args_template;
      std::vector<fs::path> outs;
      for (std::size_t i = 0; i < cmd.outputs.size(); ++i) {
        const fs::path out =
            dir / (cmd.name + "_run" + std::to_string(run) + "_" + cmd.outputs[i]);
        outs.push_back(out);
        const std::string token = "%" + std::to_string(i + 1);
        args.replace(args.find(token), token.size(), out.string());
      }
      if (!run_cli(args)) {
        all_ok = false;
        detail << cmd.name << " exited nonzero; ";
        break;
      }
      for (const fs::path& out : outs) {
        (run == 0 ? first : second).push_back(slurp(out));
      }
    }
    if (first.size() != second.size() || first != second) {
      all_ok = false;
      detail << cmd.name << " output differs across runs; ";
    }
    if (!first.empty() && first.front().empty()) {
      all_ok = false;
      detail << cmd.name << " produced empty output; ";
    }
  }
  report("CLI determinism: byte-identical outputs across repeated runs", all_ok,
         detail.str().empty() ? "5 commands x 2 runs" : detail.str());
}

} // namespace

int main() {
  check_bound_adherence();
  check_k_regime_table();
  check_geometric_bound();
  check_cmvt_witness();
  check_surrogate_one_sided();
  check_gradient_oracle();
  check_pass_at_k();
  check_noise_fixture();
  check_training_sanity();
  check_cli_determinism();

  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: ")
            << (g_failures == 0 ? "" : std::to_string(g_failures)) << "\n";
  return g_failures;
}
