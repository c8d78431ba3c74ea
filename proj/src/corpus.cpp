#include "synthq/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "jsonl.hpp"
#include "synthq/error.hpp"
#include "synthq/random.hpp"

namespace synthq {

using detail::Json;
using detail::required_string;

std::string_view to_string(QueryMode mode) {
  return mode == QueryMode::diverse ? "diverse" : "paraphrase";
}

QueryMode parse_query_mode(std::string_view name) {
  if (name == "diverse") return QueryMode::diverse;
  if (name == "paraphrase") return QueryMode::paraphrase;
  throw Error("unknown query mode \"" + std::string(name) + "\"");
}

Corpus::Corpus(std::vector<Document> docs) : docs_(std::move(docs)) {
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (!index_.emplace(docs_[i].id, i).second) throw Error("duplicate id " + docs_[i].id);
  }
}

bool Corpus::contains(std::string_view id) const { return index_.contains(std::string(id)); }

const Document& Corpus::at(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw Error("unknown doc " + std::string(id));
  return docs_[it->second];
}

namespace {

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

}  // namespace

std::vector<Document> load_documents(const std::filesystem::path& path,
                                     const LoadOptions& options) {
  const bool random_subset = options.limit && options.sample_seed;
  const std::size_t prefix_limit =
      (options.limit && !random_subset) ? *options.limit : std::numeric_limits<std::size_t>::max();

  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> seen;
  if (prefix_limit == 0) return docs;

  detail::for_each_jsonl(path, [&](const Json& obj, std::size_t lineno) {
    Document doc;
    doc.id = required_string(obj, "id", lineno);
    doc.text = required_string(obj, "text", lineno);
    if (doc.id.empty()) throw Error("line " + std::to_string(lineno) + ": empty id");
    if (blank(doc.text)) throw Error("line " + std::to_string(lineno) + ": empty text");
    if (auto it = obj.find("language"); it != obj.end() && !it->is_null()) {
      doc.language = it->get<std::string>();
    }
    if (auto it = obj.find("group_id"); it != obj.end() && !it->is_null()) {
      doc.group_id = it->get<std::string>();
    }
    if (!seen.emplace(doc.id, lineno).second) {
      throw Error("duplicate id " + doc.id + " (line " + std::to_string(lineno) + ")");
    }
    docs.push_back(std::move(doc));
    return docs.size() < prefix_limit;
  });

  if (random_subset && *options.limit < docs.size()) {
    Rng rng(*options.sample_seed);
    std::vector<Document> picked;
    for (auto i : sample_indices(docs.size(), *options.limit, rng)) picked.push_back(docs[i]);
    return picked;
  }
  return docs;
}

std::vector<HumanQuery> load_human_queries(const std::filesystem::path& path) {
  std::vector<HumanQuery> out;
  detail::for_each_jsonl(path, [&](const Json& obj, std::size_t lineno) {
    out.push_back({required_string(obj, "doc_id", lineno), required_string(obj, "text", lineno)});
    return true;
  });
  return out;
}

std::unordered_map<std::string, std::string> human_query_map(
    const std::vector<HumanQuery>& queries) {
  std::unordered_map<std::string, std::string> map;
  for (const auto& q : queries) map.emplace(q.doc_id, q.text);
  return map;
}

void save_synthetic(const std::vector<SyntheticQuerySet>& sets, const std::filesystem::path& path) {
  std::vector<Json> rows;
  rows.reserve(sets.size());
  for (const auto& s : sets) {
    Json row = Json::object();
    row["doc_id"] = s.doc_id;
    row["mode"] = std::string(to_string(s.mode));
    row["queries"] = s.queries;
    row["generator_id"] = s.generator_id;
    row["prompt_hash"] = s.prompt_hash;
    rows.push_back(std::move(row));
  }
  detail::write_jsonl(path, rows);
}

std::vector<SyntheticQuerySet> load_synthetic(const std::filesystem::path& path) {
  std::vector<SyntheticQuerySet> out;
  detail::for_each_jsonl(path, [&](const Json& obj, std::size_t lineno) {
    SyntheticQuerySet s;
    s.doc_id = required_string(obj, "doc_id", lineno);
    s.mode = parse_query_mode(required_string(obj, "mode", lineno));
    auto it = obj.find("queries");
    if (it == obj.end() || !it->is_array() || it->empty()) {
      throw Error("line " + std::to_string(lineno) + ": \"queries\" must be a non-empty array");
    }
    for (const auto& q : *it) {
      if (!q.is_string() || q.get<std::string>().empty()) {
        throw Error("line " + std::to_string(lineno) + ": queries must be non-empty strings");
      }
      s.queries.push_back(q.get<std::string>());
    }
    s.generator_id = required_string(obj, "generator_id", lineno);
    s.prompt_hash = required_string(obj, "prompt_hash", lineno);
    out.push_back(std::move(s));
    return true;
  });
  return out;
}

void save_pairs(const std::vector<WeightedPair>& pairs, const Corpus& corpus,
                const std::filesystem::path& path) {
  for (const auto& p : pairs) {
    if (!corpus.contains(p.doc_id)) throw Error("unknown doc " + p.doc_id);
  }
  std::vector<Json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    Json row = Json::object();
    row["query"] = p.query;
    row["doc_id"] = p.doc_id;
    row["weight"] = p.weight;
    row["raw_cw"] = p.raw_cw;
    if (p.reasoning_query) row["reasoning_query"] = *p.reasoning_query;
    rows.push_back(std::move(row));
  }
  detail::write_jsonl(path, rows);
}

std::vector<WeightedPair> load_pairs(const std::filesystem::path& path) {
  std::vector<WeightedPair> out;
  detail::for_each_jsonl(path, [&](const Json& obj, std::size_t lineno) {
    WeightedPair p;
    p.query = required_string(obj, "query", lineno);
    p.doc_id = required_string(obj, "doc_id", lineno);
    if (auto it = obj.find("weight"); it != obj.end()) {
      if (!it->is_number()) throw Error("line " + std::to_string(lineno) + ": weight not a number");
      p.weight = it->get<double>();
      if (!(p.weight > 0.0) || !std::isfinite(p.weight)) {
        throw Error("line " + std::to_string(lineno) + ": weight must be finite and positive");
      }
    }
    if (auto it = obj.find("raw_cw"); it != obj.end()) p.raw_cw = it->get<std::uint32_t>();
    if (auto it = obj.find("reasoning_query"); it != obj.end() && it->is_string()) {
      p.reasoning_query = it->get<std::string>();
    }
    out.push_back(std::move(p));
    return true;
  });
  return out;
}

std::vector<WeightedPair> flatten_to_pairs(const std::vector<SyntheticQuerySet>& sets) {
  std::vector<WeightedPair> pairs;
  for (const auto& s : sets) {
    for (const auto& q : s.queries) pairs.push_back({q, s.doc_id, 0, 1.0, std::nullopt});
  }
  return pairs;
}

}  // namespace synthq
