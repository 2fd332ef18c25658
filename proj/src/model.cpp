#include "perturblm/model.hpp"

#include "perturblm/io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace perturblm {

template struct BigramNet<double>;

CategoricalDist forward(const NeuralBigramModel& model, TokenId prev_token, bool training, RandomSource* rng) {
  return CategoricalDist(forward_probs(model, prev_token, training, rng));
}

TransitionMatrix extract_transition_matrix(const NeuralBigramModel& model) {
  const int v = model.vocab_size();
  Eigen::MatrixXd rows(v, v);
  for (TokenId i = 0; i < v; ++i) rows.row(i) = forward_probs(model, i, false, nullptr).transpose();
  return TransitionMatrix(std::move(rows));
}

NeuralBigramModel init_model(const Vocabulary& vocab, int dim, RandomSource& rng, double dropout_rate) {
  if (dim < 1) throw std::invalid_argument("init_model: d must be >= 1");
  NeuralBigramModel m;
  m.vocab = vocab;
  m.dim = dim;
  m.dropout_rate = dropout_rate;
  const int v = vocab.size;
  const double he = std::sqrt(2.0 / dim);
  auto fill = [&rng](Eigen::MatrixXd& mat, Eigen::Index r, Eigen::Index c, double sd) {
    mat.resize(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) mat(i, j) = rng.normal(0.0, sd);
  };
  fill(m.E, v, dim, 1.0);
  fill(m.W1, dim, dim, he);
  fill(m.W2, v, dim, he);
  m.b1 = Eigen::VectorXd::Zero(dim);
  m.b2 = Eigen::VectorXd::Zero(v);
  m.check_shapes();
  return m;
}

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* name) {
  if (!j.is_array()) throw std::invalid_argument(std::string("checkpoint field '") + name + "' must be an array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument(std::string("checkpoint field '") + name + "' is ragged");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const char* name) {
  if (!j.is_array()) throw std::invalid_argument(std::string("checkpoint field '") + name + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

std::string checkpoint_json(const NeuralBigramModel& model) {
  json j;
  j["vocab_size"] = model.vocab.size;
  j["d"] = model.dim;
  j["dropout_rate"] = model.dropout_rate;
  j["train_embeddings"] = model.train_embeddings;
  if (model.vocab.eos_id) j["eos_id"] = *model.vocab.eos_id;
  if (model.vocab.pad_id) j["pad_id"] = *model.vocab.pad_id;
  j["E"] = matrix_to_json(model.E);
  j["W1"] = matrix_to_json(model.W1);
  j["b1"] = vector_to_json(model.b1);
  j["W2"] = matrix_to_json(model.W2);
  j["b2"] = vector_to_json(model.b2);
  return j.dump();
}

NeuralBigramModel model_from_json(const std::string& text) {
  const json j = json::parse(text);
  for (const char* key : {"vocab_size", "d", "dropout_rate", "E", "W1", "b1", "W2", "b2"})
    if (!j.contains(key)) throw std::invalid_argument(std::string("checkpoint is missing field '") + key + "'");
  NeuralBigramModel m;
  std::optional<TokenId> eos, pad;
  if (j.contains("eos_id")) eos = j["eos_id"].get<TokenId>();
  if (j.contains("pad_id")) pad = j["pad_id"].get<TokenId>();
  m.vocab = Vocabulary(j["vocab_size"].get<int>(), eos, pad);
  m.dim = j["d"].get<int>();
  m.dropout_rate = j["dropout_rate"].get<double>();
  m.train_embeddings = j.value("train_embeddings", false);
  m.E = matrix_from_json(j["E"], "E");
  m.W1 = matrix_from_json(j["W1"], "W1");
  m.b1 = vector_from_json(j["b1"], "b1");
  m.W2 = matrix_from_json(j["W2"], "W2");
  m.b2 = vector_from_json(j["b2"], "b2");
  m.check_shapes();
  if (!m.all_finite()) throw std::invalid_argument("checkpoint contains non-finite parameters");
  return m;
}

void save_checkpoint(const NeuralBigramModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_json(model));
}

NeuralBigramModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace perturblm
