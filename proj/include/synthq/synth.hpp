#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "synthq/cache.hpp"
#include "synthq/corpus.hpp"
#include "synthq/error.hpp"
#include "synthq/llm_client.hpp"
#include "synthq/scorer.hpp"
#include "synthq/tokenize.hpp"

namespace synthq {

struct PromptTemplate {
  QueryMode mode = QueryMode::diverse;
  std::string body;  // placeholders {M} and {document}
};

/// The built-in paraphrase / diverse templates.
PromptTemplate default_template(QueryMode mode);

/// Template body read from a file. The body must contain {document} and end
/// with "Generate {M} queries: 1." (trailing whitespace is trimmed).
PromptTemplate load_template(const std::filesystem::path& path, QueryMode mode);

/// SHA-256 over mode and body; recorded as provenance on every query set.
std::string prompt_hash(const PromptTemplate& tpl);

/// Substitutes {M} and {document} in one pass. Any other {identifier} left
/// in the template is an error; the document text is never rescanned.
std::string render_prompt(const PromptTemplate& tpl, std::size_t m, std::string_view document_text);

class ParseUnderfull : public Error {
 public:
  ParseUnderfull(std::size_t found, std::size_t needed);
  std::size_t found() const { return found_; }

 private:
  std::size_t found_;
};

/// First `m` items of a numbered-list completion. Items are lines starting
/// with "N." or "N)"; because the prompt ends in "1.", an unmarked first
/// non-empty line counts as item 1.
std::vector<std::string> parse_numbered_list(std::string_view raw, std::size_t m);

struct GenerationConfig {
  std::string model;
  std::size_t m = 5;
  double temperature = 0.0;
  unsigned max_retries = 3;
  std::string endpoint_url;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds initial_backoff{500};
  double requests_per_second = 0.0;  // 0 = unlimited
  double burst = 1.0;

  void validate() const;
};

/// Token bucket shared by generation workers.
class RateLimiter {
 public:
  RateLimiter(double per_second, double burst);
  void acquire();

 private:
  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mutex_;
};

/// One chat-completion request per document per attempt. Only responses that
/// parse to at least M queries are cached, so a retry never replays a bad
/// completion.
class QueryGenerator {
 public:
  QueryGenerator(GenerationConfig cfg, ChatClient& client, ResponseCache* cache = nullptr);

  SyntheticQuerySet generate(const Document& doc, const PromptTemplate& tpl);

  /// Exact outgoing payload for (document, template).
  nlohmann::json request_payload(const Document& doc, const PromptTemplate& tpl) const;

  const GenerationConfig& config() const { return cfg_; }
  std::size_t requests_sent() const { return requests_.load(); }

 private:
  GenerationConfig cfg_;
  ChatClient& client_;
  ResponseCache* cache_;
  RateLimiter limiter_;
  std::atomic<std::size_t> requests_{0};
};

enum class DiversityTarget { in_domain, ood };

std::string_view to_string(DiversityTarget t);
DiversityTarget parse_diversity_target(std::string_view name);

struct CandidateMeasurement {
  QueryMode mode = QueryMode::diverse;
  double ce = 0.0;
  double self_bleu = 0.0;
};

struct PromptSelection {
  PromptTemplate chosen;
  QueryMode chosen_mode = QueryMode::diverse;
  double sample_ce = 0.0;
  double sample_self_bleu = 0.0;
  DiversityTarget target = DiversityTarget::ood;
  std::vector<CandidateMeasurement> measurements;
};

/// In-domain needs CE > 0.5 and Self-BLEU > 0.5; OOD needs both < 0.5.
/// Exactly 0.5 satisfies neither.
bool meets_target(const CandidateMeasurement& m, DiversityTarget target);

/// Index of the first measurement meeting `target`; throws listing every
/// measurement when none does.
std::size_t select_prompt(const std::vector<CandidateMeasurement>& measurements,
                          DiversityTarget target);

using CandidateMeasurer =
    std::function<CandidateMeasurement(const PromptTemplate&, const std::vector<SyntheticQuerySet>&)>;

/// CE via `backend` and corpus Self-BLEU via `spec`.
CandidateMeasurer qd_measurer(ScorerBackend& backend, TokenizerSpec spec, double ce_threshold = 0.5);

/// Generates with every candidate on the sample, measures each, and picks the
/// first candidate meeting the target.
PromptSelection tune_prompt(const std::vector<Document>& sample_docs,
                            const std::vector<PromptTemplate>& candidates, DiversityTarget target,
                            QueryGenerator& generator, const CandidateMeasurer& measure);

struct BuildOptions {
  std::size_t max_in_flight = 4;
  double failure_ceiling = 0.01;
};

struct BuildResult {
  std::vector<SyntheticQuerySet> sets;                       // document order, successes only
  std::vector<std::pair<std::string, std::string>> failures;  // (doc id, cause)
};

/// Full-corpus generation with the selected template. Throws when the
/// failure rate exceeds options.failure_ceiling, naming the failed documents.
BuildResult build_dataset(const std::vector<Document>& docs, const PromptTemplate& tpl,
                          QueryGenerator& generator, const BuildOptions& options = {});

}  // namespace synthq
