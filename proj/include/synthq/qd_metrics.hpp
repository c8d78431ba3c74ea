#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "synthq/corpus.hpp"
#include "synthq/scorer.hpp"
#include "synthq/tokenize.hpp"

namespace synthq {

using Tokens = std::vector<std::string>;
using HumanMap = std::unordered_map<std::string, std::string>;

/// Mean cosine between each synthetic query and its document's human query.
/// With several synthetic queries per document each one pairs with the same
/// human query.
double dist_sim(const std::vector<std::pair<std::string, std::string>>& synthetic,
                const HumanMap& human, ScorerBackend& backend);

/// Mean of 1 - |ls - lh| / max(ls, lh) over matched pairs; (0, 0) scores 1.
double len_sim(const std::vector<std::size_t>& synthetic_lengths,
               const std::vector<std::size_t>& human_lengths);

struct CeResult {
  double ratio = 0.0;
  std::size_t n_pairs = 0;
  bool no_pairs = false;  // every set had a single query; ratio reported as 0
};

/// Fraction of within-document query pairs (i < j) whose pair score exceeds
/// `threshold`, pooled over all documents.
CeResult ce_ratio(const std::vector<SyntheticQuerySet>& sets, ScorerBackend& backend,
                  double threshold = 0.5);

/// BLEU-4 of `candidate` against `references`: geometric mean of clipped
/// n-gram precisions (each floored at 1e-9) times the brevity penalty against
/// the closest reference length (ties go to the shorter reference). Orders
/// longer than the candidate are left out of the mean.
double bleu4(const Tokens& candidate, const std::vector<Tokens>& references);

/// Mean BLEU-4 of each query against the others in its set. Needs >= 2 queries.
double self_bleu(const std::vector<std::string>& queries, const TokenizerSpec& spec);

/// Mean of per-document Self-BLEU over sets with at least two queries.
double corpus_self_bleu(const std::vector<SyntheticQuerySet>& sets, const TokenizerSpec& spec);

struct QDReport {
  double dist_sim = 0.0;
  double len_sim = 0.0;
  double ce = 0.0;
  double self_bleu = 0.0;
  std::size_t n_queries = 0;
  std::size_t n_pairs = 0;
  std::string backend_model;
};

/// All four metrics for a generated corpus against its human queries.
/// Lengths for Len-Sim are Unicode character counts.
QDReport measure(const std::vector<SyntheticQuerySet>& sets, const HumanMap& human,
                 ScorerBackend& backend, const TokenizerSpec& spec, double ce_threshold = 0.5);

}  // namespace synthq
