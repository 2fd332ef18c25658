#include "perturblm/cli.hpp"

#include "perturblm/config.hpp"
#include "perturblm/generate.hpp"
#include "perturblm/io.hpp"
#include "perturblm/synthetic.hpp"
#include "perturblm/theory.hpp"
#include "perturblm/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#ifndef PERTURBLM_VERSION
#define PERTURBLM_VERSION "0.0.0"
#endif

namespace perturblm {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t resolve_seed(std::uint64_t config_seed, const std::optional<std::uint64_t>& flag_seed) {
  if (flag_seed) return *flag_seed;
  if (const char* env = std::getenv("PERTURBLM_SEED"); env && *env) {
    std::uint64_t v = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [ptr, ec] = std::from_chars(env, end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError("PERTURBLM_SEED", "not an unsigned integer");
    return v;
  }
  return config_seed;
}

namespace {

// Options shared by every subcommand.
struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

json load_config(const std::string& path) { return path.empty() ? json::object() : read_config_file(path); }

void require_object(const json& j, std::initializer_list<const char*> keys, const std::string& prefix = "") {
  if (!j.is_object()) throw ConfigError(prefix, "expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end())
      throw ConfigError(prefix.empty() ? key : prefix + "." + key, "unknown key");
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(key, "expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
    if constexpr (std::is_unsigned_v<T>)
      if (v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(key, "expected a nonnegative integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(key, "expected a number");
  }
  return v.get<T>();
}

std::vector<TokenSeq> seq_list(const json& j, const char* key, std::vector<TokenSeq> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array()) throw ConfigError(key, "expected an array of token arrays");
  std::vector<TokenSeq> out;
  for (const auto& s : v) {
    if (!s.is_array()) throw ConfigError(key, "expected an array of token arrays");
    TokenSeq seq;
    for (const auto& t : s) {
      if (!t.is_number_integer()) throw ConfigError(key, "token ids must be integers");
      seq.push_back(t.get<TokenId>());
    }
    out.push_back(std::move(seq));
  }
  return out;
}

TokenSeq seq_value(const json& j, const char* key, TokenSeq fallback) {
  if (!j.contains(key)) return fallback;
  json wrapped = json::object();
  wrapped[key] = json::array({j.at(key)});
  return seq_list(wrapped, key, {}).front();
}

json seq_json(const std::vector<TokenSeq>& seqs) {
  json a = json::array();
  for (const auto& s : seqs) a.push_back(s);
  return a;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config, std::uint64_t seed,
                    const std::vector<std::string>& outputs, double seconds) {
  json m{{"command", command},
         {"config", config},
         {"seed", seed},
         {"version", PERTURBLM_VERSION},
         {"outputs", outputs},
         {"wall_clock_seconds", seconds}};
  write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

int vocab_size_of(const Corpus& corpus) {
  TokenId hi = 1;
  for (const auto& s : corpus)
    for (TokenId t : s) {
      if (t < 0) throw std::runtime_error("corpus contains a negative token id");
      hi = std::max(hi, t);
    }
  return hi + 1;
}

ReferenceProvider empirical_reference(const Corpus& corpus, int vocab_size) {
  return [&corpus, vocab_size] {
    return std::make_shared<const TransitionMatrix>(empirical_transition_matrix(corpus, vocab_size));
  };
}

// ---------------------------------------------------------------- experiment

int cmd_experiment(const CommonArgs& a, std::optional<int> threads_flag, std::ostream& out) {
  Stopwatch clock;
  ExperimentConfig cfg = experiment_config_from_json(read_config_file(a.config));
  cfg.spec.seed = resolve_seed(cfg.spec.seed, a.seed);
  if (threads_flag) {
    if (*threads_flag < 0) throw ConfigError("threads", "must be >= 0");
    cfg.threads = *threads_flag;
  }
  const int threads = cfg.threads > 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());

  const ExperimentResult result = run_experiment(cfg.spec, threads);
  const fs::path dir = prepare_out_dir(a.out);
  std::vector<std::string> outputs{"results.csv", "summary.csv"};
  write_file_atomic(dir / "results.csv", results_csv(result));
  write_file_atomic(dir / "summary.csv", summary_csv(result));
  if (cfg.plot) {
    for (int v : cfg.spec.vocab_sizes) {
      const std::string name = "mae_v" + std::to_string(v) + ".svg";
      write_file_atomic(dir / name, summary_svg(result, v));
      outputs.push_back(name);
    }
  }
  write_manifest(dir, "experiment", experiment_config_to_json(cfg), cfg.spec.seed, outputs, clock.seconds());
  out << "wrote " << result.records.size() << " result rows to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainFileConfig {
  std::optional<int> vocab_size;
  std::optional<TokenId> eos_id;
  int model_dim = 50;
  double dropout_rate = 0.1;
  bool train_embeddings = false;
  std::uint64_t seed = 0;
  TrainConfig train;
};

int cmd_train(const CommonArgs& a, const std::string& corpus_path, std::ostream& out) {
  Stopwatch clock;
  const json j = load_config(a.config);
  require_object(j, {"vocab_size", "eos_id", "model_dim", "dropout_rate", "train_embeddings", "seed", "perturb", "train"});
  TrainFileConfig cfg;
  if (j.contains("vocab_size")) cfg.vocab_size = value_or<int>(j, "vocab_size", 0);
  if (j.contains("eos_id")) cfg.eos_id = value_or<TokenId>(j, "eos_id", 0);
  cfg.model_dim = value_or(j, "model_dim", cfg.model_dim);
  cfg.dropout_rate = value_or(j, "dropout_rate", cfg.dropout_rate);
  cfg.train_embeddings = value_or(j, "train_embeddings", cfg.train_embeddings);
  cfg.seed = resolve_seed(value_or<std::uint64_t>(j, "seed", 0), a.seed);
  if (j.contains("train")) {
    require_object(j.at("train"), {"rule", "m", "include_identity_copy", "lr", "weight_decay", "epochs", "batch_size",
                                   "adam_beta1", "adam_beta2", "adam_eps", "seed", "resample_each_epoch"},
                   "train");
    apply_train_keys(j.at("train"), cfg.train, "train");
  }
  cfg.train.seed = cfg.seed;

  const Corpus corpus = read_corpus(fs::path(corpus_path));
  if (corpus.empty()) throw std::runtime_error("corpus " + corpus_path + " is empty");
  const int v = cfg.vocab_size.value_or(vocab_size_of(corpus));
  if (j.contains("perturb")) cfg.train.perturb = perturb_spec_from_json(j.at("perturb"), "perturb", empirical_reference(corpus, v));
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("train", e.what());
  }

  const Vocabulary vocab(v, cfg.eos_id);
  for (const auto& s : corpus) vocab.check(s);
  RandomSource master(cfg.seed);
  RandomSource init_rng = master.split(0);
  NeuralBigramModel model = init_model(vocab, cfg.model_dim, init_rng, cfg.dropout_rate);
  model.train_embeddings = cfg.train_embeddings;
  RandomSource train_rng = master.split(1);
  const TrainResult run = train(corpus, std::move(model), cfg.train, train_rng);

  const fs::path dir = prepare_out_dir(a.out);
  save_checkpoint(run.model, dir / "checkpoint.json");
  write_file_atomic(dir / "loss.csv", loss_trace_csv(run.loss_trace));
  const auto& d = run.diagnostics;
  const json diag{{"perturbed_positions", d.perturb.perturbed_positions},
                  {"empty_candidate_skips", d.perturb.empty_candidate_skips},
                  {"positions_seen", d.perturb.positions_seen},
                  {"log_floor_events", d.log_floor_events},
                  {"empty_prefix_pairs", d.empty_prefix_pairs},
                  {"pairs_per_epoch", d.pairs_per_epoch}};
  write_file_atomic(dir / "diagnostics.json", diag.dump(2) + "\n");

  json resolved{{"vocab_size", v},
                {"model_dim", cfg.model_dim},
                {"dropout_rate", cfg.dropout_rate},
                {"train_embeddings", cfg.train_embeddings},
                {"seed", cfg.seed}};
  if (cfg.eos_id) resolved["eos_id"] = *cfg.eos_id;
  json train_json = train_config_to_json(cfg.train);
  resolved["perturb"] = train_json["perturb"];
  train_json.erase("perturb");
  train_json.erase("seed");
  resolved["train"] = train_json;
  write_manifest(dir, "train", resolved, cfg.seed, {"checkpoint.json", "loss.csv", "diagnostics.json"}, clock.seconds());
  out << "final loss " << (run.loss_trace.empty() ? 0.0 : run.loss_trace.back()) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const CommonArgs& a, const std::string& checkpoint, const std::string& prompt,
                 const std::string& prompt_file, std::ostream& out) {
  Stopwatch clock;
  const json j = load_config(a.config);
  require_object(j, {"max_length", "seed", "perturb"});
  const NeuralBigramModel model = load_checkpoint(fs::path(checkpoint));
  GenerateConfig cfg;
  cfg.max_length = value_or(j, "max_length", cfg.max_length);
  if (cfg.max_length < 1) throw ConfigError("max_length", "must be >= 1");
  cfg.seed = resolve_seed(value_or<std::uint64_t>(j, "seed", 0), a.seed);
  if (j.contains("perturb")) {
    cfg.perturb = perturb_spec_from_json(j.at("perturb"), "perturb", [&model] {
      return std::make_shared<const TransitionMatrix>(extract_transition_matrix(model));
    });
  }

  std::vector<TokenSeq> prompts;
  if (!prompt.empty()) prompts.push_back(parse_token_line(prompt));
  if (!prompt_file.empty()) {
    const Corpus more = read_corpus(fs::path(prompt_file));
    prompts.insert(prompts.end(), more.begin(), more.end());
  }
  if (prompts.empty()) throw ConfigError("prompt", "no prompt given (use --prompt or --prompt-file)");

  RandomSource master(cfg.seed);
  std::ostringstream lines;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    model.vocab.check(prompts[i]);
    RandomSource rng = master.split(i);
    lines << format_token_line(generate(model, prompts[i], cfg, rng)) << "\n";
  }
  if (a.out.empty()) {
    out << lines.str();
    return kExitOk;
  }
  const fs::path dir = prepare_out_dir(a.out);
  write_file_atomic(dir / "generated.txt", lines.str());
  json resolved{{"checkpoint", checkpoint},
                {"prompts", seq_json(prompts)},
                {"max_length", cfg.max_length},
                {"seed", cfg.seed},
                {"perturb", perturb_spec_to_json(cfg.perturb)}};
  write_manifest(dir, "generate", resolved, cfg.seed, {"generated.txt"}, clock.seconds());
  return kExitOk;
}

// ---------------------------------------------------------------- perturb

int cmd_perturb(const CommonArgs& a, const std::string& corpus_path, const std::optional<std::string>& kind,
                const std::optional<double>& intensity, const std::optional<std::string>& synonyms,
                std::ostream& out) {
  Stopwatch clock;
  json j = load_config(a.config);
  require_object(j, {"seed", "vocab_size", "perturb"});
  json pj = j.value("perturb", json::object());
  if (kind) pj["kind"] = *kind;
  if (intensity) pj["intensity"] = *intensity;
  if (synonyms) pj["synonyms"] = *synonyms;
  const std::uint64_t seed = resolve_seed(value_or<std::uint64_t>(j, "seed", 0), a.seed);

  const Corpus corpus = read_corpus(fs::path(corpus_path));
  const int v = j.contains("vocab_size") ? value_or<int>(j, "vocab_size", 0) : vocab_size_of(corpus);
  const PerturbSpec spec = perturb_spec_from_json(pj, "perturb", empirical_reference(corpus, v));

  RandomSource rng(seed);
  PerturbStats stats;
  Corpus perturbed;
  perturbed.reserve(corpus.size());
  for (const auto& s : corpus) perturbed.push_back(perturb(s, spec, rng, &stats));

  const fs::path dir = prepare_out_dir(a.out);
  write_corpus(dir / "perturbed.txt", perturbed);
  json resolved{{"corpus", corpus_path}, {"vocab_size", v}, {"seed", seed}, {"perturb", perturb_spec_to_json(spec)}};
  write_manifest(dir, "perturb", resolved, seed, {"perturbed.txt"}, clock.seconds());
  out << "perturbed " << stats.perturbed_positions << " of " << stats.positions_seen << " positions\n";
  return kExitOk;
}

// ---------------------------------------------------------------- theory

// S_i = {i + 1 mod |V|}: sparse enough that some outcomes are unreachable
// from a small support.
SynonymTable cyclic_synonyms(int vocab_size) {
  SynonymTable table(vocab_size);
  if (vocab_size < 2) return table;
  for (TokenId i = 0; i < vocab_size; ++i) table.set(i, {(i + 1) % vocab_size});
  return table;
}

struct SpaceArgs {
  int vocab_size;
  int length;
  std::vector<TokenSeq> support;
};

SpaceArgs space_args(const json& j, int v, int len, std::vector<TokenSeq> support) {
  SpaceArgs s{value_or(j, "vocab_size", v), value_or(j, "length", len), seq_list(j, "support", std::move(support))};
  if (s.vocab_size < 1) throw ConfigError("vocab_size", "must be >= 1");
  if (s.length < 0) throw ConfigError("length", "must be >= 0");
  return s;
}

std::vector<TokenSeq> diagonal_support(int vocab_size, int length, int count) {
  std::vector<TokenSeq> out;
  for (TokenId i = 0; i < std::min(count, vocab_size); ++i) out.emplace_back(static_cast<std::size_t>(length), i);
  return out;
}

SequenceSpace make_space(const SpaceArgs& s) {
  try {
    return SequenceSpace(s.vocab_size, s.length, s.support);
  } catch (const std::length_error& e) {
    throw ConfigError("length", e.what());
  } catch (const std::exception& e) {
    throw ConfigError("support", e.what());
  }
}

// Perturbation block for theory checks; defaults to replacement with cyclic
// synonyms.
PerturbSpec theory_perturb(const json& j, int vocab_size, double beta) {
  json pj = j.value("perturb", json::object());
  if (!pj.is_object()) throw ConfigError("perturb", "expected a JSON object");
  if (!pj.contains("kind")) pj["kind"] = "replacement";
  if (!pj.contains("intensity")) pj["intensity"] = beta;
  PerturbSpec spec = perturb_spec_from_json(pj, "perturb");
  if (!pj.contains("synonyms") && (spec.kind == PerturbKind::Replacement || spec.kind == PerturbKind::Insertion))
    spec.synonyms = cyclic_synonyms(vocab_size);
  return spec;
}

json space_json(const SpaceArgs& s) {
  return json{{"vocab_size", s.vocab_size}, {"length", s.length}, {"support", seq_json(s.support)}};
}

json cmd_theory_report(const std::string& check, const json& j, std::uint64_t seed) {
  if (check == "verify-prop1") {
    require_object(j, {"beta", "vocab_size", "synonyms", "x", "y", "seed"});
    const double beta = value_or(j, "beta", 0.5);
    const int v = value_or(j, "vocab_size", 3);
    SynonymTable syn;
    if (j.contains("synonyms")) {
      syn = perturb_spec_from_json(json{{"synonyms", j.at("synonyms")}}, "").synonyms;
    } else {
      syn = SynonymTable(v);
      syn.set(0, {2});
      syn.set(1, {2});
    }
    const TokenSeq x = seq_value(j, "x", {0});
    const TokenSeq y = seq_value(j, "y", {1});
    const Vocabulary vocab(v);
    vocab.check(x);
    vocab.check(y);
    const Prop1Report r = verify_prop1(beta, syn, x, y);
    json params{{"beta", beta}, {"vocab_size", v}, {"x", x}, {"y", y}};
    params["synonyms"] = perturb_spec_to_json(PerturbSpec::replacement(beta, syn)).value("synonyms", json::object());
    return json{{"check", check},           {"parameters", params}, {"exact_tv", r.exact_tv},
                {"max_tv", r.exact_tv},     {"bound", r.bound},     {"holds", r.holds},
                {"shared_synonyms", r.shared_synonyms}};
  }
  if (check == "eta" || check == "rho") {
    require_object(j, {"vocab_size", "length", "support", "delta", "perturb", "seed"});
    const SpaceArgs sa = space_args(j, 3, 2, diagonal_support(3, 2, 2));
    const int delta = value_or(j, "delta", 1);
    const PerturbSpec spec = theory_perturb(j, sa.vocab_size, 0.5);
    const SequenceSpace space = make_space(sa);
    json params = space_json(sa);
    params["delta"] = delta;
    params["perturb"] = perturb_spec_to_json(spec, true);
    if (check == "eta") {
      const EtaResult r = eta_T(spec, space, delta);
      json rep{{"check", check}, {"parameters", params}, {"value", r.value}};
      if (r.worst) rep["worst"] = *r.worst;
      return rep;
    }
    return json{{"check", check}, {"parameters", params}, {"value", rho_T(spec, space, delta)}};
  }
  if (check == "assumption2") {
    require_object(j, {"vocab_size", "length", "support", "n_models", "model_dim", "perturber", "seed"});
    const SpaceArgs sa = space_args(j, 4, 2, diagonal_support(4, 2, 4));
    const int n_models = value_or(j, "n_models", 100);
    const int model_dim = value_or(j, "model_dim", 4);
    const std::string which = value_or<std::string>(j, "perturber", "partition");
    if (which != "partition" && which != "identity")
      throw ConfigError("perturber", "expected \"partition\" or \"identity\"");
    const SequenceSpace space = make_space(sa);
    const PartitionPerturber part = first_token_partition(space);
    RandomSource rng(seed);
    const Assumption2Report r =
        which == "partition"
            ? verify_assumption2(part, space, n_models, rng, model_dim)
            : verify_assumption2(make_kernel(PerturbSpec::identity(), space), part.domain_of, space, n_models, rng,
                                 model_dim);
    json params = space_json(sa);
    params["n_models"] = n_models;
    params["model_dim"] = model_dim;
    params["perturber"] = which;
    params["seed"] = seed;
    json rep{{"check", check}, {"parameters", params}, {"max_tv", r.max_tv}, {"bound", 1e-12},
             {"holds", r.holds}, {"checked", r.checked}};
    if (r.counterexample) rep["counterexample"] = *r.counterexample;
    return rep;
  }
  if (check == "robustness") {
    require_object(j, {"vocab_size", "length", "support", "delta", "n_pairs", "perturb", "seed"});
    const SpaceArgs sa = space_args(j, 3, 2, diagonal_support(3, 2, 2));
    const int delta = value_or(j, "delta", 1);
    const int n_pairs = value_or(j, "n_pairs", 50);
    const PerturbSpec spec = theory_perturb(j, sa.vocab_size, 0.5);
    const SequenceSpace space = make_space(sa);
    RandomSource rng(seed);
    const RobustnessReport r = verify_robustness_bound(spec, space, delta, n_pairs, rng);
    json params = space_json(sa);
    params["delta"] = delta;
    params["n_pairs"] = n_pairs;
    params["perturb"] = perturb_spec_to_json(spec, true);
    params["seed"] = seed;
    json rep{{"check", check},        {"parameters", params}, {"max_tv", r.max_tv},
             {"bound", r.eta},        {"holds", r.holds},     {"max_support_tv", r.max_support_tv},
             {"checked", r.checked}};
    if (r.counterexample) rep["counterexample"] = *r.counterexample;
    if (!r.note.empty()) rep["note"] = r.note;
    return rep;
  }
  throw ConfigError("check", "unknown theory check " + check);
}

int cmd_theory(const std::string& check, const CommonArgs& a, std::ostream& out) {
  Stopwatch clock;
  const json j = load_config(a.config);
  if (!j.is_object()) throw ConfigError("", "expected a JSON object");
  const std::uint64_t seed = resolve_seed(value_or<std::uint64_t>(j, "seed", 0), a.seed);
  const json report = cmd_theory_report(check, j, seed);
  const std::string text = report.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
    return kExitOk;
  }
  const fs::path dir = prepare_out_dir(a.out);
  write_file_atomic(dir / "report.json", text);
  json resolved = report.at("parameters");
  write_manifest(dir, "theory " + check, resolved, seed, {"report.json"}, clock.seconds());
  return kExitOk;
}

void add_common(CLI::App* app, CommonArgs& a, bool out_required) {
  app->add_option("--config", a.config, "JSON config file");
  app->add_option("--seed", a.seed, "master seed (overrides PERTURBLM_SEED and the config)");
  auto* o = app->add_option("--out", a.out, "output directory");
  if (out_required) o->required();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Perturbed autoregressive language models: training, sampling and theory checks", "perturblm"};
  app.set_version_flag("--version", PERTURBLM_VERSION);
  app.require_subcommand(1);

  CommonArgs common;
  std::optional<int> threads;
  std::string corpus, checkpoint, prompt, prompt_file;
  std::optional<std::string> kind, synonyms;
  std::optional<double> intensity;

  auto* experiment = app.add_subcommand("experiment", "run the synthetic Markov-chain extrapolation experiment");
  add_common(experiment, common, true);
  experiment->get_option("--config")->required();
  experiment->add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* train_cmd = app.add_subcommand("train", "train a bigram model on a token corpus");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--corpus", corpus, "corpus file, one sequence of token ids per line")->required();

  auto* generate_cmd = app.add_subcommand("generate", "sample continuations from a checkpoint");
  add_common(generate_cmd, common, false);
  generate_cmd->add_option("--checkpoint", checkpoint, "checkpoint.json from train")->required();
  generate_cmd->add_option("--prompt", prompt, "prompt as space-separated token ids");
  generate_cmd->add_option("--prompt-file", prompt_file, "file with one prompt per line");

  auto* perturb_cmd = app.add_subcommand("perturb", "apply a perturbation kernel to every sequence of a corpus");
  add_common(perturb_cmd, common, true);
  perturb_cmd->add_option("--corpus", corpus, "corpus file")->required();
  perturb_cmd->add_option("--kind", kind, "identity|insertion|replacement|deletion|bigram");
  perturb_cmd->add_option("--intensity", intensity, "alpha or beta");
  perturb_cmd->add_option("--synonyms", synonyms, "synonym file (\"id: id id\" per line)");

  auto* theory = app.add_subcommand("theory", "exact checks on small enumerable sequence spaces");
  theory->require_subcommand(1);
  std::string check;
  const std::pair<const char*, const char*> checks[] = {
      {"verify-prop1", "exact TV between perturbed laws of two sequences against the Hamming bound"},
      {"eta", "worst perturbed-law TV between out-of-support points and the support"},
      {"rho", "largest support distance of outcomes perturbed from points within delta"},
      {"assumption2", "partition-perturber agreement on random bigram models"},
      {"robustness", "out-of-support TV of agreeing model pairs against eta"},
  };
  for (const auto& [name, about] : checks) {
    auto* sub = theory->add_subcommand(name, about);
    add_common(sub, common, false);
    sub->callback([&check, name] { check = name; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*experiment) return cmd_experiment(common, threads, out);
    if (*train_cmd) return cmd_train(common, corpus, out);
    if (*generate_cmd) return cmd_generate(common, checkpoint, prompt, prompt_file, out);
    if (*perturb_cmd) return cmd_perturb(common, corpus, kind, intensity, synonyms, out);
    if (*theory) return cmd_theory(check, common, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace perturblm
