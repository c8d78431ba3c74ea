#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "synthq/tokenize.hpp"

namespace synthq {

using Vector = std::vector<double>;
using TextPair = std::pair<std::string, std::string>;

/// Embedding + pair-scoring provider behind the quality/diversity metrics.
/// embed() returns unit-norm vectors of one fixed dimension; pair_score()
/// returns values in [0, 1]. Both are deterministic for fixed input.
class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;
  virtual std::vector<Vector> embed(const std::vector<std::string>& texts) = 0;
  virtual std::vector<double> pair_score(const std::vector<TextPair>& pairs) = 0;
  virtual std::string model_id() const = 0;
};

/// Hashed unigram+bigram embedding, L2-normalized. Texts with no features map
/// to e_1. dim must be >= 8.
std::vector<Vector> stub_embed(const std::vector<std::string>& texts, std::uint32_t dim = 256,
                               const TokenizerSpec& spec = {});

double dot(const Vector& a, const Vector& b);

/// Model-free backend. Pair scores are max(0, cosine) of the stub embeddings
/// unless pinned to a constant.
class StubScorer final : public ScorerBackend {
 public:
  explicit StubScorer(std::uint32_t dim = 256, TokenizerSpec spec = {},
                      std::optional<double> pinned_pair_score = std::nullopt);

  std::vector<Vector> embed(const std::vector<std::string>& texts) override;
  std::vector<double> pair_score(const std::vector<TextPair>& pairs) override;
  std::string model_id() const override;

 private:
  std::uint32_t dim_;
  TokenizerSpec spec_;
  std::optional<double> pinned_;
};

/// Client for the scorer sidecar's /embed, /score-pairs and /healthz.
/// Responses whose model id differs from the one reported by /healthz at
/// first contact are rejected, so one run never mixes scorer models.
class SidecarScorer final : public ScorerBackend {
 public:
  explicit SidecarScorer(std::string base_url, std::size_t batch_size = 64);
  ~SidecarScorer() override;

  std::vector<Vector> embed(const std::vector<std::string>& texts) override;
  std::vector<double> pair_score(const std::vector<TextPair>& pairs) override;
  std::string model_id() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// POST /segment client for zh/ja/ko.
class SidecarSegmenter final : public Segmenter {
 public:
  explicit SidecarSegmenter(std::string base_url);
  ~SidecarSegmenter() override;

  std::vector<std::vector<std::string>> segment(const std::vector<std::string>& texts,
                                                std::string_view language) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// "stub" or "sidecar:<url>".
std::unique_ptr<ScorerBackend> make_backend(std::string_view selector, const TokenizerSpec& spec = {});

}  // namespace synthq
