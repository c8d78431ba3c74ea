#include "synthq/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "synthq/error.hpp"
#include "synthq/random.hpp"

namespace synthq {

ToyEncoder::ToyEncoder(std::uint32_t hash_dim, std::uint32_t embed_dim, double scale,
                       TokenizerSpec spec)
    : hash_dim_(hash_dim), embed_dim_(embed_dim), scale_(scale), spec_(std::move(spec)) {
  if (hash_dim_ == 0 || embed_dim_ == 0) throw Error("encoder dimensions must be positive");
  if (!(scale_ > 0.0)) throw Error("encoder scale must be positive");
  projection_.assign(static_cast<std::size_t>(hash_dim_) * embed_dim_, 0.0);
}

ToyEncoder ToyEncoder::random_init(std::uint64_t seed, std::uint32_t hash_dim,
                                   std::uint32_t embed_dim, double scale, TokenizerSpec spec) {
  ToyEncoder enc(hash_dim, embed_dim, scale, std::move(spec));
  Rng rng(seed);
  const double a = std::sqrt(3.0 / embed_dim);
  for (auto& p : enc.projection_) p = (2.0 * uniform01(rng) - 1.0) * a;
  return enc;
}

std::vector<SparseFeature> ToyEncoder::features(std::string_view text) const {
  return hashed_ngram_features(tokenize(text, spec_), hash_dim_);
}

Vector ToyEncoder::project(const std::vector<SparseFeature>& features) const {
  Vector out(embed_dim_, 0.0);
  for (const auto& f : features) {
    const double* row = projection_.data() + static_cast<std::size_t>(f.index) * embed_dim_;
    for (std::uint32_t k = 0; k < embed_dim_; ++k) out[k] += f.value * row[k];
  }
  return out;
}

Vector ToyEncoder::encode(std::string_view text) const { return encode_features(features(text)); }

Vector ToyEncoder::encode_features(const std::vector<SparseFeature>& features) const {
  Vector v = project(features);
  normalize_or_e1(v);
  return v;
}

double normalize_or_e1(Vector& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm == 0.0 || !std::isfinite(norm)) {
    std::fill(v.begin(), v.end(), 0.0);
    if (!v.empty()) v[0] = 1.0;
    return norm;
  }
  for (double& x : v) x /= norm;
  return norm;
}

}  // namespace synthq
