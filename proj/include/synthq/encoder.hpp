#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synthq/feature_hash.hpp"
#include "synthq/tokenize.hpp"

namespace synthq {

using Vector = std::vector<double>;

/// Linear encoder over hashed unigram+bigram features: encode(t) is the
/// L2-normalized product of t's signed feature counts with a
/// hash_dim x embed_dim projection. Text without features (or with a zero
/// projection) encodes to e_1.
class ToyEncoder {
 public:
  ToyEncoder(std::uint32_t hash_dim = 2048, std::uint32_t embed_dim = 128, double scale = 20.0,
             TokenizerSpec spec = {});

  /// Projection entries uniform in [-a, a], a = sqrt(3 / embed_dim).
  static ToyEncoder random_init(std::uint64_t seed, std::uint32_t hash_dim = 2048,
                                std::uint32_t embed_dim = 128, double scale = 20.0,
                                TokenizerSpec spec = {});

  std::uint32_t hash_dim() const { return hash_dim_; }
  std::uint32_t embed_dim() const { return embed_dim_; }
  double scale() const { return scale_; }
  const TokenizerSpec& tokenizer() const { return spec_; }

  std::span<double> projection() { return projection_; }
  std::span<const double> projection() const { return projection_; }

  std::vector<SparseFeature> features(std::string_view text) const;

  /// Unnormalized projection of a feature vector.
  Vector project(const std::vector<SparseFeature>& features) const;

  Vector encode(std::string_view text) const;
  Vector encode_features(const std::vector<SparseFeature>& features) const;

 private:
  std::uint32_t hash_dim_;
  std::uint32_t embed_dim_;
  double scale_;
  TokenizerSpec spec_;
  std::vector<double> projection_;  // row-major [hash_dim][embed_dim]
};

/// u / |u| in place; returns the original norm. A zero vector becomes e_1.
double normalize_or_e1(Vector& v);

}  // namespace synthq
