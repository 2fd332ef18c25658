// Text formats: corpora (one sequence per line, space-separated ids) and
// synonym tables ("id: id id id" per line).
#pragma once

#include "perturblm/core.hpp"
#include "perturblm/perturb.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace perturblm {

using Corpus = std::vector<TokenSeq>;

/// Parses whitespace-separated decimal ids; throws std::invalid_argument on
/// anything else.
TokenSeq parse_token_line(std::string_view line);
std::string format_token_line(const TokenSeq& seq);

Corpus read_corpus(std::istream& in);
Corpus read_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Ids absent from the file get an empty synonym set. `vocab_size` pads the
/// table when positive.
SynonymTable read_synonyms(std::istream& in, int vocab_size = 0);
SynonymTable read_synonyms(const std::filesystem::path& path, int vocab_size = 0);
void write_synonyms(std::ostream& out, const SynonymTable& table);

/// Writes to a sibling temporary and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace perturblm
