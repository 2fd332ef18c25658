#include "perturblm/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace perturblm {

void SyntheticSpec::validate() const {
  if (vocab_size < 2) throw std::invalid_argument("SyntheticSpec: vocab_size must be >= 2");
  if (n_sequences < 1) throw std::invalid_argument("SyntheticSpec: n_sequences must be >= 1");
  if (seq_length < 2) throw std::invalid_argument("SyntheticSpec: seq_length must be >= 2");
  if (!(dirichlet_concentration > 0.0)) throw std::invalid_argument("SyntheticSpec: concentration must be > 0");
  if (!(stop_probability >= 0.0 && stop_probability < 1.0))
    throw std::invalid_argument("SyntheticSpec: stop_probability must lie in [0, 1)");
}

GroundTruth gen_ground_truth(const SyntheticSpec& spec, RandomSource& rng) {
  spec.validate();
  const int v = spec.vocab_size;
  Eigen::MatrixXd m(v, v);
  for (int i = 0; i < v; ++i) {
    double total = 0.0;
    // Gamma(shape < 1) variates can all underflow for tiny vocabularies; redraw.
    while (!(total > 0.0)) {
      for (int j = 0; j < v; ++j) m(i, j) = rng.gamma(spec.dirichlet_concentration);
      total = m.row(i).sum();
    }
    m.row(i) /= total;
  }
  return {CategoricalDist::uniform(v), TransitionMatrix(std::move(m))};
}

Corpus sample_corpus(const GroundTruth& truth, const SyntheticSpec& spec, RandomSource& rng) {
  spec.validate();
  if (truth.transition.size() != spec.vocab_size || truth.initial.size() != spec.vocab_size)
    throw std::invalid_argument("sample_corpus: ground truth does not match vocab_size");
  std::vector<CategoricalDist> rows;
  rows.reserve(static_cast<std::size_t>(spec.vocab_size));
  for (TokenId i = 0; i < spec.vocab_size; ++i) rows.push_back(truth.transition.row(i));

  Corpus corpus;
  corpus.reserve(static_cast<std::size_t>(spec.n_sequences));
  for (int s = 0; s < spec.n_sequences; ++s) {
    TokenSeq x;
    x.reserve(static_cast<std::size_t>(spec.seq_length));
    x.push_back(sample_categorical(truth.initial, rng));
    while (static_cast<int>(x.size()) < spec.seq_length) {
      if (x.size() >= 2 && rng.bernoulli(spec.stop_probability)) break;
      x.push_back(sample_categorical(rows[static_cast<std::size_t>(x.back())], rng));
    }
    corpus.push_back(std::move(x));
  }
  return corpus;
}

ObservedPairs::ObservedPairs(int vocab_size)
    : size_(vocab_size), seen_(static_cast<std::size_t>(vocab_size) * static_cast<std::size_t>(vocab_size), 0) {
  if (vocab_size < 1) throw std::invalid_argument("ObservedPairs: vocab_size must be positive");
}

void ObservedPairs::add(TokenId from, TokenId to) {
  if (from < 0 || from >= size_ || to < 0 || to >= size_) throw std::out_of_range("ObservedPairs: token out of range");
  auto& cell = seen_[index(from, to)];
  if (!cell) {
    cell = 1;
    ++count_;
  }
}

ObservedPairs observed_pairs(const Corpus& corpus, int vocab_size) {
  ObservedPairs pairs(vocab_size);
  for (const auto& x : corpus)
    for (std::size_t t = 1; t < x.size(); ++t) pairs.add(x[t - 1], x[t]);
  return pairs;
}

double mae_unseen(const TransitionMatrix& estimate, const TransitionMatrix& truth, const ObservedPairs& observed) {
  const int v = truth.size();
  if (estimate.size() != v || observed.vocab_size() != v) throw std::invalid_argument("mae_unseen: dimension mismatch");
  if (observed.unseen_count() == 0) throw std::invalid_argument("mae_unseen: no unseen pairs, metric undefined");
  double total = 0.0;
  for (TokenId i = 0; i < v; ++i)
    for (TokenId j = 0; j < v; ++j)
      if (!observed.contains(i, j)) total += std::abs(estimate(i, j) - truth(i, j));
  return total / static_cast<double>(observed.unseen_count());
}

TransitionMatrix empirical_transition_matrix(const Corpus& corpus, int vocab_size) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(vocab_size, vocab_size);
  for (const auto& x : corpus)
    for (std::size_t t = 1; t < x.size(); ++t) counts(x[t - 1], x[t]) += 1.0;
  for (int i = 0; i < vocab_size; ++i) {
    const double total = counts.row(i).sum();
    if (total > 0.0) counts.row(i) /= total;
    else counts.row(i).setConstant(1.0 / vocab_size);
  }
  return TransitionMatrix(std::move(counts));
}

void ExperimentSpec::validate() const {
  if (vocab_sizes.empty()) throw std::invalid_argument("ExperimentSpec: vocab_sizes is empty");
  if (intensities.empty()) throw std::invalid_argument("ExperimentSpec: intensities is empty");
  if (std::find(intensities.begin(), intensities.end(), 0.0) == intensities.end())
    throw std::invalid_argument("ExperimentSpec: intensities must contain 0 (the classical baseline)");
  for (double a : intensities)
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("ExperimentSpec: intensities must lie in [0, 1]");
  if (replications < 1) throw std::invalid_argument("ExperimentSpec: replications must be >= 1");
  if (model_dim < 1) throw std::invalid_argument("ExperimentSpec: model_dim must be >= 1");
  for (int v : vocab_sizes) {
    SyntheticSpec s = synthetic;
    s.vocab_size = v;
    s.validate();
  }
  train.validate();
}

namespace {

struct ReplicationTask {
  std::size_t vocab_index;
  int replication;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, int threads) {
  spec.validate();
  const std::size_t n_int = spec.intensities.size();
  const auto reps = static_cast<std::size_t>(spec.replications);

  std::vector<ReplicationTask> tasks;
  for (std::size_t vi = 0; vi < spec.vocab_sizes.size(); ++vi)
    for (int r = 0; r < spec.replications; ++r) tasks.push_back({vi, r});

  // Slot for (vocab index, intensity index, replication).
  std::vector<ExperimentRecord> records(spec.vocab_sizes.size() * n_int * reps);
  auto slot = [&](std::size_t vi, std::size_t ii, std::size_t r) { return (vi * n_int + ii) * reps + r; };

  const RandomSource master(spec.seed);
  auto run_task = [&](const ReplicationTask& task) {
    const int v = spec.vocab_sizes[task.vocab_index];
    const RandomSource rep_rng =
        master.split(static_cast<std::uint64_t>(v)).split(static_cast<std::uint64_t>(task.replication));
    SyntheticSpec syn = spec.synthetic;
    syn.vocab_size = v;
    RandomSource data_rng = rep_rng.split(0);
    const GroundTruth truth = gen_ground_truth(syn, data_rng);
    const Corpus corpus = sample_corpus(truth, syn, data_rng);
    const ObservedPairs observed = observed_pairs(corpus, v);
    RandomSource init_rng = rep_rng.split(1);
    NeuralBigramModel init = init_model(Vocabulary(v), spec.model_dim, init_rng, spec.dropout_rate);
    init.train_embeddings = spec.train_embeddings;

    auto reference = std::make_shared<const TransitionMatrix>(
        spec.reference == ReferenceMatrix::True ? truth.transition : empirical_transition_matrix(corpus, v));

    for (std::size_t ii = 0; ii < n_int; ++ii) {
      RandomSource cell_rng = rep_rng.split(1000 + ii);
      TrainConfig cfg = spec.train;
      cfg.perturb = PerturbSpec::bigram(spec.intensities[ii], reference);
      const TrainResult run = train(corpus, init, cfg, cell_rng);
      const double mae = mae_unseen(extract_transition_matrix(run.model), truth.transition, observed);
      records[slot(task.vocab_index, ii, static_cast<std::size_t>(task.replication))] =
          ExperimentRecord{v, spec.intensities[ii], task.replication, mae, cell_rng.stream()};
    }
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        run_task(tasks[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult result;
  result.records = std::move(records);
  result.summary = summarize(result.records);
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<ExperimentRecord>& records) {
  std::map<std::pair<int, double>, std::vector<double>> groups;
  std::vector<std::pair<int, double>> order;
  for (const auto& r : records) {
    auto key = std::make_pair(r.vocab_size, r.intensity);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(r.mae);
  }
  std::vector<SummaryRow> rows;
  for (const auto& key : order) {
    const auto& values = groups[key];
    const auto n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double x : values) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : values) ss += (x - mean) * (x - mean);
    const double se = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    rows.push_back({key.first, key.second, mean, se, static_cast<int>(values.size())});
  }
  return rows;
}

const SummaryRow& ExperimentResult::summary_for(int vocab_size, double intensity) const {
  for (const auto& row : summary)
    if (row.vocab_size == vocab_size && row.intensity == intensity) return row;
  throw std::out_of_range("no summary row for the requested cell");
}

PairedDifference ExperimentResult::paired(int vocab_size, double intensity_a, double intensity_b) const {
  std::map<int, double> a, b;
  for (const auto& r : records) {
    if (r.vocab_size != vocab_size) continue;
    if (r.intensity == intensity_a) a[r.replication] = r.mae;
    if (r.intensity == intensity_b) b[r.replication] = r.mae;
  }
  std::vector<double> diffs;
  for (const auto& [rep, mae_a] : a) {
    const auto it = b.find(rep);
    if (it != b.end()) diffs.push_back(it->second - mae_a);
  }
  if (diffs.empty()) throw std::out_of_range("no paired replications for the requested cells");
  const auto n = static_cast<double>(diffs.size());
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= n;
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double se = diffs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return {mean, se, static_cast<int>(diffs.size())};
}

namespace {

std::string fmt_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string results_csv(const ExperimentResult& result) {
  std::string out = "vocab_size,intensity,replication,mae,seed\n";
  for (const auto& r : result.records) {
    out += std::to_string(r.vocab_size) + ',' + fmt_double(r.intensity) + ',' + std::to_string(r.replication) + ',' +
           fmt_double(r.mae) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

std::string summary_csv(const ExperimentResult& result) {
  std::string out = "vocab_size,intensity,mean_mae,stderr_mae,n\n";
  for (const auto& s : result.summary) {
    out += std::to_string(s.vocab_size) + ',' + fmt_double(s.intensity) + ',' + fmt_double(s.mean_mae) + ',' +
           fmt_double(s.stderr_mae) + ',' + std::to_string(s.n) + '\n';
  }
  return out;
}

std::string summary_svg(const ExperimentResult& result, int vocab_size) {
  std::vector<SummaryRow> rows;
  for (const auto& s : result.summary)
    if (s.vocab_size == vocab_size) rows.push_back(s);
  if (rows.empty()) throw std::out_of_range("summary_svg: no rows for vocabulary size");
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.intensity < b.intensity; });

  const double width = 480, height = 320, left = 70, right = 20, top = 30, bottom = 50;
  double x_lo = rows.front().intensity, x_hi = rows.back().intensity;
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  double y_lo = rows.front().mean_mae, y_hi = y_lo;
  for (const auto& s : rows) {
    y_lo = std::min(y_lo, s.mean_mae - 2.0 * s.stderr_mae);
    y_hi = std::max(y_hi, s.mean_mae + 2.0 * s.stderr_mae);
  }
  if (y_hi <= y_lo) y_hi = y_lo + 1e-6;
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;
  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right); };
  auto py = [&](double y) { return height - bottom - (y - y_lo) / (y_hi - y_lo) * (height - top - bottom); };

  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">|V| = " << vocab_size
     << "</text>\n";
  os << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" points=\"";
  for (const auto& s : rows) os << px(s.intensity) << ',' << py(s.mean_mae + 2.0 * s.stderr_mae) << ' ';
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    os << px(it->intensity) << ',' << py(it->mean_mae - 2.0 * it->stderr_mae) << ' ';
  os << "\"/>\n<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
  for (const auto& s : rows) os << px(s.intensity) << ',' << py(s.mean_mae) << ' ';
  os << "\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
     << height - bottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
     << "\" stroke=\"black\"/>\n";
  for (const auto& s : rows) {
    os << "<text x=\"" << px(s.intensity) << "\" y=\"" << height - bottom + 16
       << "\" text-anchor=\"middle\" font-size=\"11\">" << s.intensity << "</text>\n";
  }
  os << "<text x=\"" << left - 6 << "\" y=\"" << py(y_hi) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << y_hi
     << "</text>\n";
  os << "<text x=\"" << left - 6 << "\" y=\"" << py(y_lo) << "\" text-anchor=\"end\" font-size=\"11\">" << y_lo
     << "</text>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
     << "\" text-anchor=\"middle\" font-size=\"12\">perturbation intensity</text>\n";
  os << "<text x=\"16\" y=\"" << height / 2 << "\" transform=\"rotate(-90 16 " << height / 2
     << ")\" text-anchor=\"middle\" font-size=\"12\">MAE on unseen pairs</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace perturblm
