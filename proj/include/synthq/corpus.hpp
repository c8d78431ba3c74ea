#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace synthq {

struct Document {
  std::string id;
  std::string text;
  std::string language = "en";
  std::optional<std::string> group_id;

  bool operator==(const Document&) const = default;
};

/// Human-written reference query; only used as the quality reference for
/// Dist-Sim and Len-Sim.
struct HumanQuery {
  std::string doc_id;
  std::string text;
};

enum class QueryMode { diverse, paraphrase };

std::string_view to_string(QueryMode mode);
QueryMode parse_query_mode(std::string_view name);

struct SyntheticQuerySet {
  std::string doc_id;
  QueryMode mode = QueryMode::diverse;
  std::vector<std::string> queries;
  std::string generator_id;
  std::string prompt_hash;

  bool operator==(const SyntheticQuerySet&) const = default;
};

/// The training unit. `raw_cw` is the untruncated content-word count of the
/// query; `reasoning_query` is the optional reasoning-augmented rewrite used
/// by the reasoning-index weighting schemes.
struct WeightedPair {
  std::string query;
  std::string doc_id;
  std::uint32_t raw_cw = 0;
  double weight = 1.0;
  std::optional<std::string> reasoning_query;

  bool operator==(const WeightedPair&) const = default;
};

/// Documents with an id index. Ids are unique by construction.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> docs);

  const std::vector<Document>& documents() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  bool contains(std::string_view id) const;
  const Document& at(std::string_view id) const;

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LoadOptions {
  std::optional<std::size_t> limit;
  // When set together with `limit`, draw a seeded random subset (kept in file
  // order) instead of the file-order prefix.
  std::optional<std::uint64_t> sample_seed;
};

std::vector<Document> load_documents(const std::filesystem::path& path,
                                     const LoadOptions& options = {});

std::vector<HumanQuery> load_human_queries(const std::filesystem::path& path);

/// doc_id -> first human query for that document, in file order.
std::unordered_map<std::string, std::string> human_query_map(
    const std::vector<HumanQuery>& queries);

void save_synthetic(const std::vector<SyntheticQuerySet>& sets, const std::filesystem::path& path);
std::vector<SyntheticQuerySet> load_synthetic(const std::filesystem::path& path);

/// Throws "unknown doc <id>" before writing anything if a pair references a
/// document the corpus does not contain.
void save_pairs(const std::vector<WeightedPair>& pairs, const Corpus& corpus,
                const std::filesystem::path& path);
std::vector<WeightedPair> load_pairs(const std::filesystem::path& path);

/// One (query, doc_id) pair per synthetic query, weight 1.
std::vector<WeightedPair> flatten_to_pairs(const std::vector<SyntheticQuerySet>& sets);

}  // namespace synthq
