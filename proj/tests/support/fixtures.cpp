#include "fixtures.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "synthq/random.hpp"
#include "synthq/tokenize.hpp"

namespace synthq::testing {

std::filesystem::path source_dir() { return SYNTHQ_SOURCE_DIR; }
std::filesystem::path stopwords_dir() { return source_dir() / "stopwords"; }
std::filesystem::path data_dir() { return source_dir() / "data"; }
std::filesystem::path cdp_points_csv() { return data_dir() / "multihop_cw_delta.csv"; }

TempDir::TempDir() {
  static std::uint64_t counter = 0;
  Rng rng(std::random_device{}());
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = std::filesystem::temp_directory_path() /
                     ("synthq-test-" + std::to_string(rng() % 1000000000ULL) + "-" + std::to_string(counter++));
    if (std::filesystem::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::vector<std::string> pseudo_words(std::size_t n, Rng& rng, std::set<std::string>& taken) {
  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w;
    for (int s = 0; s < 3; ++s) {
      w += consonants[uniform_index(rng, consonants.size())];
      w += vowels[uniform_index(rng, vowels.size())];
    }
    if (taken.insert(w).second) out.push_back(w);
  }
  return out;
}

}  // namespace

MiniCorpus make_mini_corpus(std::uint64_t seed, std::size_t n_docs, std::size_t queries_per_doc) {
  constexpr std::size_t kVocab = 300;
  constexpr std::size_t kTopicsPerDoc = 6;
  constexpr std::size_t kFillerPerDoc = 4;
  constexpr std::size_t kAliasesPerQuery = 3;
  static const char* kTemplates[] = {"what about the {} {} {}", "where is {} {} and {}", "how do {} {} {}"};

  Rng rng(seed);
  std::set<std::string> taken;
  const auto topics = pseudo_words(kVocab, rng, taken);
  const auto aliases = pseudo_words(kVocab, rng, taken);
  const auto filler = pseudo_words(20, rng, taken);

  const auto stop = StopwordTable::load_for_language(stopwords_dir(), "en");
  const TokenizerSpec spec;

  MiniCorpus mc;
  for (std::size_t d = 0; d < n_docs; ++d) {
    const auto chosen = sample_indices(kVocab, kTopicsPerDoc, rng);
    std::vector<std::string> words;
    for (auto t : chosen) words.push_back(topics[t]);
    for (std::size_t f = 0; f < kFillerPerDoc; ++f) words.push_back(filler[uniform_index(rng, filler.size())]);
    shuffle(std::span<std::string>(words), rng);
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    const std::string id = "d" + std::to_string(1000 + d);
    mc.docs.push_back({id, text + ".", "en", std::nullopt});

    for (std::size_t q = 0; q < queries_per_doc; ++q) {
      auto pick = sample_indices(kTopicsPerDoc, kAliasesPerQuery, rng);
      std::vector<std::string> names;
      for (auto i : pick) names.push_back(aliases[chosen[i]]);
      shuffle(std::span<std::string>(names), rng);
      std::string tpl = kTemplates[q % 3];
      std::string query;
      std::size_t next = 0;
      for (std::size_t i = 0; i < tpl.size(); ++i) {
        if (tpl.compare(i, 2, "{}") == 0) {
          query += names[next++];
          ++i;
        } else {
          query += tpl[i];
        }
      }
      WeightedPair p;
      p.query = query + "?";
      p.doc_id = id;
      p.raw_cw = static_cast<std::uint32_t>(content_word_count(p.query, spec, stop));
      mc.pairs.push_back(std::move(p));
    }
  }
  return mc;
}

}  // namespace synthq::testing
