// JSON configuration for the command-line driver. Parsing is strict: unknown
// keys and mistyped values raise ConfigError naming the offending field.
#pragma once

#include "perturblm/synthetic.hpp"
#include "perturblm/train.hpp"

#include <json.hpp>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

namespace perturblm {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : "field '" + field + "': " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Parses text as JSON; syntax errors become ConfigError with line/column.
nlohmann::json parse_config_text(const std::string& text, const std::string& source);
nlohmann::json read_config_file(const std::string& path);

using ReferenceProvider = std::function<std::shared_ptr<const TransitionMatrix>()>;

/// Perturbation block: {"kind", "intensity", "synonyms", "eos_id", "reference"}.
/// "synonyms" is a file path, an object {"id": [ids]} or an array indexed by
/// id. "reference" is an inline row-stochastic matrix; without it the
/// BigramSynonym kind asks `default_reference`.
PerturbSpec perturb_spec_from_json(const nlohmann::json& j, const std::string& prefix,
                                   const ReferenceProvider& default_reference = {});
/// Synonyms are written inline so the result is self-contained.
nlohmann::json perturb_spec_to_json(const PerturbSpec& spec, bool include_reference = false);

/// Reads the TrainConfig keys present in `j` into `cfg`. `prefix` is used in
/// error messages. Perturbation settings are handled by the caller.
void apply_train_keys(const nlohmann::json& j, TrainConfig& cfg, const std::string& prefix = "train");
nlohmann::json train_config_to_json(const TrainConfig& cfg);

/// Full experiment config:
/// {vocab_sizes, intensities, replications, seed, threads, plot, model_dim,
///  dropout_rate, train_embeddings, reference, synthetic{...}, train{...}}
struct ExperimentConfig {
  ExperimentSpec spec;
  int threads = 0;  // 0 = all cores
  bool plot = true;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

}  // namespace perturblm
