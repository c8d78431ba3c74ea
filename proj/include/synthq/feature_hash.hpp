#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace synthq {

struct SparseFeature {
  std::uint32_t index;
  double value;
};

/// Signed hashed counts of token unigrams and adjacent bigrams over `dim`
/// buckets, sorted by index with duplicates merged and zeros removed.
/// Hashing is FNV-1a + splitmix64, so output is platform independent.
std::vector<SparseFeature> hashed_ngram_features(const std::vector<std::string>& tokens,
                                                 std::uint32_t dim);

}  // namespace synthq
