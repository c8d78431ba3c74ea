#include "synthq/feature_hash.hpp"

#include <algorithm>

#include "synthq/error.hpp"
#include "synthq/hashing.hpp"

namespace synthq {

namespace {

constexpr std::uint64_t kSignSalt = 0x5bd1e9955bd1e995ULL;

void add_feature(std::vector<SparseFeature>& out, std::string_view key, std::uint32_t dim) {
  const std::uint64_t h = fnv1a64(key);
  const auto bucket = static_cast<std::uint32_t>(mix64(h) % dim);
  const double sign = (mix64(h ^ kSignSalt) & 1U) ? 1.0 : -1.0;
  out.push_back({bucket, sign});
}

}  // namespace

std::vector<SparseFeature> hashed_ngram_features(const std::vector<std::string>& tokens,
                                                 std::uint32_t dim) {
  if (dim == 0) throw Error("feature dimension must be positive");
  std::vector<SparseFeature> raw;
  raw.reserve(2 * tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add_feature(raw, tokens[i], dim);
    if (i + 1 < tokens.size()) {
      // U+001F separator cannot occur inside a normalized token.
      add_feature(raw, tokens[i] + '\x1f' + tokens[i + 1], dim);
    }
  }
  std::sort(raw.begin(), raw.end(),
            [](const SparseFeature& a, const SparseFeature& b) { return a.index < b.index; });
  std::vector<SparseFeature> merged;
  for (const auto& f : raw) {
    if (!merged.empty() && merged.back().index == f.index) {
      merged.back().value += f.value;
    } else {
      merged.push_back(f);
    }
  }
  std::erase_if(merged, [](const SparseFeature& f) { return f.value == 0.0; });
  return merged;
}

}  // namespace synthq
