#include "synthq/qd_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>

#include "synthq/error.hpp"

namespace synthq {

double dist_sim(const std::vector<std::pair<std::string, std::string>>& synthetic,
                const HumanMap& human, ScorerBackend& backend) {
  if (synthetic.empty()) throw Error("dist_sim: no synthetic queries");
  std::vector<std::string> texts;
  texts.reserve(2 * synthetic.size());
  for (const auto& [doc_id, query] : synthetic) {
    auto it = human.find(doc_id);
    if (it == human.end()) throw Error("no human query for doc " + doc_id);
    texts.push_back(query);
    texts.push_back(it->second);
  }
  const auto vectors = backend.embed(texts);
  if (vectors.size() != texts.size()) throw Error("dist_sim: backend returned wrong vector count");
  double total = 0.0;
  for (std::size_t i = 0; i < synthetic.size(); ++i) total += dot(vectors[2 * i], vectors[2 * i + 1]);
  return total / static_cast<double>(synthetic.size());
}

double len_sim(const std::vector<std::size_t>& synthetic_lengths,
               const std::vector<std::size_t>& human_lengths) {
  if (synthetic_lengths.size() != human_lengths.size()) {
    throw Error("len_sim: " + std::to_string(synthetic_lengths.size()) + " synthetic lengths vs " +
                std::to_string(human_lengths.size()) + " human lengths");
  }
  if (synthetic_lengths.empty()) throw Error("len_sim: no pairs");
  double total = 0.0;
  for (std::size_t i = 0; i < synthetic_lengths.size(); ++i) {
    const auto ls = synthetic_lengths[i];
    const auto lh = human_lengths[i];
    const auto longest = std::max(ls, lh);
    if (longest == 0) {
      total += 1.0;
      continue;
    }
    const auto diff = ls > lh ? ls - lh : lh - ls;
    total += 1.0 - static_cast<double>(diff) / static_cast<double>(longest);
  }
  return total / static_cast<double>(synthetic_lengths.size());
}

CeResult ce_ratio(const std::vector<SyntheticQuerySet>& sets, ScorerBackend& backend,
                  double threshold) {
  std::vector<TextPair> pairs;
  for (const auto& s : sets) {
    if (s.queries.empty()) throw Error("ce_ratio: empty query set for doc " + s.doc_id);
    for (std::size_t i = 0; i < s.queries.size(); ++i) {
      for (std::size_t j = i + 1; j < s.queries.size(); ++j) {
        pairs.emplace_back(s.queries[i], s.queries[j]);
      }
    }
  }
  CeResult result;
  result.n_pairs = pairs.size();
  if (pairs.empty()) {
    result.no_pairs = true;
    return result;
  }
  const auto scores = backend.pair_score(pairs);
  if (scores.size() != pairs.size()) throw Error("ce_ratio: backend returned wrong score count");
  const auto above = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
  result.ratio = static_cast<double>(above) / static_cast<double>(pairs.size());
  return result;
}

namespace {

constexpr int kMaxOrder = 4;
constexpr double kPrecisionFloor = 1e-9;

using NgramCounts = std::map<std::vector<std::string_view>, int>;

NgramCounts count_ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::vector<std::string_view> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[gram];
  }
  return counts;
}

}  // namespace

double bleu4(const Tokens& candidate, const std::vector<Tokens>& references) {
  if (candidate.empty()) throw Error("bleu4: empty candidate");
  const bool any_ref = std::any_of(references.begin(), references.end(),
                                   [](const Tokens& r) { return !r.empty(); });
  if (!any_ref) throw Error("bleu4: no non-empty reference");

  double log_sum = 0.0;
  int orders = 0;
  for (int n = 1; n <= kMaxOrder; ++n) {
    const auto cand = count_ngrams(candidate, static_cast<std::size_t>(n));
    if (cand.empty()) break;
    NgramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, c] : count_ngrams(ref, static_cast<std::size_t>(n))) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, c);
      }
    }
    int clipped = 0;
    int total = 0;
    for (const auto& [gram, c] : cand) {
      total += c;
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) clipped += std::min(c, it->second);
    }
    const double p = std::max(static_cast<double>(clipped) / total, kPrecisionFloor);
    log_sum += std::log(p);
    ++orders;
  }

  const auto c = candidate.size();
  std::size_t r = 0;
  std::size_t best_diff = std::numeric_limits<std::size_t>::max();
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const auto len = ref.size();
    const auto diff = len > c ? len - c : c - len;
    if (diff < best_diff || (diff == best_diff && len < r)) {
      best_diff = diff;
      r = len;
    }
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return std::clamp(bp * std::exp(log_sum / orders), 0.0, 1.0);
}

double self_bleu(const std::vector<std::string>& queries, const TokenizerSpec& spec) {
  if (queries.size() < 2) throw Error("Self-BLEU undefined for M=1");
  std::vector<Tokens> toks;
  toks.reserve(queries.size());
  for (const auto& q : queries) toks.push_back(tokenize(q, spec));
  double total = 0.0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    std::vector<Tokens> refs;
    refs.reserve(toks.size() - 1);
    for (std::size_t j = 0; j < toks.size(); ++j) {
      if (j != i) refs.push_back(toks[j]);
    }
    total += bleu4(toks[i], refs);
  }
  return total / static_cast<double>(toks.size());
}

double corpus_self_bleu(const std::vector<SyntheticQuerySet>& sets, const TokenizerSpec& spec) {
  double total = 0.0;
  std::size_t docs = 0;
  for (const auto& s : sets) {
    if (s.queries.size() < 2) continue;
    total += self_bleu(s.queries, spec);
    ++docs;
  }
  if (docs == 0) throw Error("Self-BLEU undefined for M=1");
  return total / static_cast<double>(docs);
}

QDReport measure(const std::vector<SyntheticQuerySet>& sets, const HumanMap& human,
                 ScorerBackend& backend, const TokenizerSpec& spec, double ce_threshold) {
  std::vector<std::pair<std::string, std::string>> flat;
  std::vector<std::size_t> ls;
  std::vector<std::size_t> lh;
  for (const auto& s : sets) {
    auto it = human.find(s.doc_id);
    if (it == human.end()) throw Error("no human query for doc " + s.doc_id);
    for (const auto& q : s.queries) {
      flat.emplace_back(s.doc_id, q);
      ls.push_back(codepoint_length(q));
      lh.push_back(codepoint_length(it->second));
    }
  }
  QDReport report;
  report.dist_sim = dist_sim(flat, human, backend);
  report.len_sim = len_sim(ls, lh);
  const auto ce = ce_ratio(sets, backend, ce_threshold);
  report.ce = ce.ratio;
  report.n_pairs = ce.n_pairs;
  report.self_bleu = corpus_self_bleu(sets, spec);
  report.n_queries = flat.size();
  report.backend_model = backend.model_id();
  return report;
}

}  // namespace synthq
