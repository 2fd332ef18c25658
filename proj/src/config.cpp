#include "perturblm/config.hpp"

#include "perturblm/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace perturblm {

using nlohmann::json;

namespace {

std::string join(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix, "expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError(join(prefix, key), "unknown key");
}

template <typename T>
T get_as(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field, std::string("wrong type (") + j.type_name() + ")");
  }
}

template <typename T>
void read(const json& j, const char* key, T& into, const std::string& prefix) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  const std::string field = join(prefix, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(field, "expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(field, "expected a string");
  }
  into = get_as<T>(v, field);
}

}  // namespace

json parse_config_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", source + ": " + e.what());
  }
}

json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

namespace {

SynonymTable synonyms_from_json(const json& j, const std::string& field) {
  if (j.is_string()) {
    try {
      return read_synonyms(std::filesystem::path(j.get<std::string>()));
    } catch (const std::exception& e) {
      throw ConfigError(field, e.what());
    }
  }
  std::vector<std::vector<TokenId>> entries;
  auto put = [&](long id, const json& list) {
    if (id < 0) throw ConfigError(field, "negative token id");
    if (!list.is_array()) throw ConfigError(field, "synonym set must be an array of token ids");
    if (static_cast<std::size_t>(id) >= entries.size()) entries.resize(static_cast<std::size_t>(id) + 1);
    for (const auto& t : list) {
      if (!t.is_number_integer()) throw ConfigError(field, "synonym ids must be integers");
      entries[static_cast<std::size_t>(id)].push_back(t.get<TokenId>());
    }
  };
  if (j.is_object()) {
    for (const auto& [key, list] : j.items()) {
      long id = 0;
      try {
        std::size_t used = 0;
        id = std::stol(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw ConfigError(field, "key '" + key + "' is not a token id");
      }
      put(id, list);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) put(static_cast<long>(i), j[i]);
  } else {
    throw ConfigError(field, "expected a path, an object or an array");
  }
  try {
    return SynonymTable(std::move(entries));
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace

PerturbSpec perturb_spec_from_json(const json& j, const std::string& prefix, const ReferenceProvider& default_reference) {
  reject_unknown(j, {"kind", "intensity", "synonyms", "eos_id", "reference"}, prefix);
  PerturbSpec spec;
  std::string kind = "identity";
  read(j, "kind", kind, prefix);
  try {
    spec.kind = perturb_kind_from_string(kind);
  } catch (const std::exception& e) {
    throw ConfigError(join(prefix, "kind"), e.what());
  }
  read(j, "intensity", spec.intensity, prefix);
  if (j.contains("synonyms")) spec.synonyms = synonyms_from_json(j.at("synonyms"), join(prefix, "synonyms"));
  if (j.contains("eos_id")) {
    TokenId eos = 0;
    read(j, "eos_id", eos, prefix);
    spec.eos_id = eos;
  }
  if (j.contains("reference")) {
    const std::string field = join(prefix, "reference");
    const json& r = j.at("reference");
    if (!r.is_array() || r.empty()) throw ConfigError(field, "expected a nonempty array of rows");
    const auto n = static_cast<Eigen::Index>(r.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const json& row = r[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) throw ConfigError(field, "matrix must be square");
      for (Eigen::Index k = 0; k < n; ++k) {
        if (!row[static_cast<std::size_t>(k)].is_number()) throw ConfigError(field, "entries must be numbers");
        m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
      }
    }
    try {
      spec.ref_matrix = std::make_shared<const TransitionMatrix>(std::move(m));
    } catch (const std::exception& e) {
      throw ConfigError(field, e.what());
    }
  } else if (spec.kind == PerturbKind::BigramSynonym && default_reference) {
    spec.ref_matrix = default_reference();
  }
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw ConfigError(prefix, e.what());
  }
  return spec;
}

json perturb_spec_to_json(const PerturbSpec& spec, bool include_reference) {
  json j{{"kind", to_string(spec.kind)}, {"intensity", spec.intensity}};
  json syn = json::object();
  const auto& entries = spec.synonyms.entries();
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (!entries[i].empty()) syn[std::to_string(i)] = entries[i];
  if (!syn.empty()) j["synonyms"] = syn;
  if (spec.eos_id) j["eos_id"] = *spec.eos_id;
  if (include_reference && spec.ref_matrix) {
    json rows = json::array();
    const Eigen::MatrixXd& m = spec.ref_matrix->matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
      rows.push_back(row);
    }
    j["reference"] = rows;
  }
  return j;
}

void apply_train_keys(const json& j, TrainConfig& cfg, const std::string& prefix) {
  if (j.contains("rule")) {
    std::string rule;
    read(j, "rule", rule, prefix);
    try {
      cfg.rule = ScoringRule::parse(rule);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(join(prefix, "rule"), e.what());
    }
  }
  read(j, "m", cfg.m, prefix);
  read(j, "include_identity_copy", cfg.include_identity_copy, prefix);
  read(j, "lr", cfg.lr, prefix);
  read(j, "weight_decay", cfg.weight_decay, prefix);
  read(j, "epochs", cfg.epochs, prefix);
  read(j, "batch_size", cfg.batch_size, prefix);
  read(j, "adam_beta1", cfg.adam_beta1, prefix);
  read(j, "adam_beta2", cfg.adam_beta2, prefix);
  read(j, "adam_eps", cfg.adam_eps, prefix);
  read(j, "seed", cfg.seed, prefix);
  read(j, "resample_each_epoch", cfg.resample_each_epoch, prefix);
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"rule", cfg.rule.to_string()},
              {"m", cfg.m},
              {"include_identity_copy", cfg.include_identity_copy},
              {"lr", cfg.lr},
              {"weight_decay", cfg.weight_decay},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"adam_beta1", cfg.adam_beta1},
              {"adam_beta2", cfg.adam_beta2},
              {"adam_eps", cfg.adam_eps},
              {"seed", cfg.seed},
              {"resample_each_epoch", cfg.resample_each_epoch},
              {"perturb", perturb_spec_to_json(cfg.perturb)}};
}

namespace {

const std::set<std::string> kTrainKeys{"rule",       "m",          "include_identity_copy", "lr",
                                       "weight_decay", "epochs",   "batch_size",            "adam_beta1",
                                       "adam_beta2", "adam_eps",   "seed",                  "resample_each_epoch"};

}  // namespace

ExperimentConfig experiment_config_from_json(const json& j) {
  reject_unknown(j,
                 {"vocab_sizes", "intensities", "replications", "seed", "threads", "plot", "model_dim", "dropout_rate",
                  "train_embeddings", "reference", "synthetic", "train"},
                 "");
  ExperimentConfig cfg;
  ExperimentSpec& s = cfg.spec;
  if (j.contains("vocab_sizes")) {
    const auto& v = j.at("vocab_sizes");
    if (!v.is_array() || v.empty()) throw ConfigError("vocab_sizes", "expected a nonempty array of integers");
    s.vocab_sizes.clear();
    for (const auto& x : v) {
      if (!x.is_number_integer()) throw ConfigError("vocab_sizes", "expected integers");
      s.vocab_sizes.push_back(x.get<int>());
    }
  }
  if (j.contains("intensities")) {
    const auto& v = j.at("intensities");
    if (!v.is_array() || v.empty()) throw ConfigError("intensities", "expected a nonempty array of numbers");
    s.intensities.clear();
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError("intensities", "expected numbers");
      s.intensities.push_back(x.get<double>());
    }
  }
  read(j, "replications", s.replications, "");
  read(j, "seed", s.seed, "");
  read(j, "threads", cfg.threads, "");
  read(j, "plot", cfg.plot, "");
  read(j, "model_dim", s.model_dim, "");
  read(j, "dropout_rate", s.dropout_rate, "");
  read(j, "train_embeddings", s.train_embeddings, "");
  if (j.contains("reference")) {
    std::string ref;
    read(j, "reference", ref, "");
    if (ref == "true") s.reference = ReferenceMatrix::True;
    else if (ref == "empirical") s.reference = ReferenceMatrix::Empirical;
    else throw ConfigError("reference", "expected \"true\" or \"empirical\"");
  }
  if (j.contains("synthetic")) {
    const json& sj = j.at("synthetic");
    reject_unknown(sj, {"dirichlet_concentration", "n_sequences", "seq_length", "stop_probability"}, "synthetic");
    read(sj, "dirichlet_concentration", s.synthetic.dirichlet_concentration, "synthetic");
    read(sj, "n_sequences", s.synthetic.n_sequences, "synthetic");
    read(sj, "seq_length", s.synthetic.seq_length, "synthetic");
    read(sj, "stop_probability", s.synthetic.stop_probability, "synthetic");
  }
  if (j.contains("train")) {
    reject_unknown(j.at("train"), kTrainKeys, "train");
    apply_train_keys(j.at("train"), s.train, "train");
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
  if (cfg.threads < 0) throw ConfigError("threads", "must be >= 0");
  return cfg;
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
  const ExperimentSpec& s = cfg.spec;
  json train = train_config_to_json(s.train);
  train.erase("perturb");
  return json{{"vocab_sizes", s.vocab_sizes},
              {"intensities", s.intensities},
              {"replications", s.replications},
              {"seed", s.seed},
              {"threads", cfg.threads},
              {"plot", cfg.plot},
              {"model_dim", s.model_dim},
              {"dropout_rate", s.dropout_rate},
              {"train_embeddings", s.train_embeddings},
              {"reference", s.reference == ReferenceMatrix::True ? "true" : "empirical"},
              {"synthetic",
               {{"dirichlet_concentration", s.synthetic.dirichlet_concentration},
                {"n_sequences", s.synthetic.n_sequences},
                {"seq_length", s.synthetic.seq_length},
                {"stop_probability", s.synthetic.stop_probability}}},
              {"train", train}};
}

}  // namespace perturblm
