#include "perturblm/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace perturblm {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

TokenId parse_id(std::string_view word) {
  TokenId v = 0;
  const auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), v);
  if (ec != std::errc() || ptr != word.data() + word.size() || v < 0)
    throw std::invalid_argument("invalid token id '" + std::string(word) + "'");
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

TokenSeq parse_token_line(std::string_view line) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(parse_id(line.substr(i, j - i)));
    i = j;
  }
  return out;
}

std::string format_token_line(const TokenSeq& seq) {
  std::string s;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(seq[i]);
  }
  return s;
}

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    try {
      corpus.push_back(parse_token_line(line));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

Corpus read_corpus(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& seq : corpus) out << format_token_line(seq) << '\n';
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ostringstream os;
  write_corpus(os, corpus);
  write_file_atomic(path, os.str());
}

SynonymTable read_synonyms(std::istream& in, int vocab_size) {
  SynonymTable table(std::max(vocab_size, 0));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("synonym line " + std::to_string(lineno) + ": missing ':'");
    try {
      const TokenSeq key = parse_token_line(std::string_view(line).substr(0, colon));
      if (key.size() != 1) throw std::invalid_argument("expected exactly one id before ':'");
      table.set(key[0], parse_token_line(std::string_view(line).substr(colon + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("synonym line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return table;
}

SynonymTable read_synonyms(const std::filesystem::path& path, int vocab_size) {
  auto in = open_in(path);
  return read_synonyms(in, vocab_size);
}

void write_synonyms(std::ostream& out, const SynonymTable& table) {
  for (int i = 0; i < table.vocab_size(); ++i) {
    out << i << ':';
    for (TokenId s : table.of(i)) out << ' ' << s;
    out << '\n';
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace perturblm
