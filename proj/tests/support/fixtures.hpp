#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "synthq/corpus.hpp"

namespace synthq::testing {

std::filesystem::path source_dir();
std::filesystem::path stopwords_dir();
std::filesystem::path data_dir();

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Seeded retrieval mini-corpus. Every document mixes a few topic words from
/// a shared vocabulary with filler; every query names some of its document's
/// topics through alias words that never occur in documents, so an untrained
/// encoder retrieves near chance and training has to learn the aliases.
/// Query templates use only stopwords besides the aliases, so every query has
/// the same content-word count.
struct MiniCorpus {
  std::vector<Document> docs;
  std::vector<WeightedPair> pairs;  // raw_cw filled with the English list
};

MiniCorpus make_mini_corpus(std::uint64_t seed, std::size_t n_docs = 200, std::size_t queries_per_doc = 3);

/// The CW/delta points shipped in data/.
std::filesystem::path cdp_points_csv();

}  // namespace synthq::testing
