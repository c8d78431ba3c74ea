#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synthq/corpus.hpp"
#include "synthq/encoder.hpp"

namespace synthq {

// ---------------------------------------------------------------------------
// Retrieval evaluation

/// doc_id -> graded relevance for one query.
using Judgments = std::map<std::string, int, std::less<>>;
/// query_id -> judgments.
using Qrels = std::map<std::string, Judgments, std::less<>>;

/// Gain 2^rel - 1, discount log2(i + 1). Throws on empty judgments or when no
/// judgment is positive.
double ndcg_at_k(std::span<const std::string> ranking, const Judgments& judgments,
                 std::size_t k = 10);

/// Precomputed unit vectors for every document, in corpus order.
struct DocIndex {
  std::vector<std::string> ids;
  std::vector<Vector> vectors;
};

DocIndex build_doc_index(const Corpus& corpus, const ToyEncoder& encoder);

/// Document ids by descending cosine with `query_vector`, ties by ascending
/// id. `limit` truncates the result (0 = full permutation).
std::vector<std::string> rank_by_vector(const Vector& query_vector, const DocIndex& index,
                                        std::size_t limit = 0);

std::vector<std::string> rank_corpus(std::string_view query, const ToyEncoder& encoder,
                                     const DocIndex& index, std::size_t limit = 0);

struct EvalQuery {
  std::string id;
  std::string text;
};

struct EvalReport {
  double mean_ndcg = 0.0;
  std::size_t k = 10;
  std::size_t n_queries = 0;
  std::size_t n_skipped = 0;  // no positive judgment, or no qrels at all
  std::vector<std::pair<std::string, double>> per_query;
};

EvalReport evaluate(const ToyEncoder& encoder, const DocIndex& index,
                    const std::vector<EvalQuery>& queries, const Qrels& qrels, std::size_t k = 10);

/// `{"query_id", "doc_id", "rel"}` per line.
Qrels load_qrels(const std::filesystem::path& path);
/// `{"query_id", "text"}` per line.
std::vector<EvalQuery> load_eval_queries(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Correlation analysis

struct CorrelationResult {
  double r = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// Two-tailed P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_tailed(double t, double df);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Sample Pearson r with a two-tailed t-test on n - 2 degrees of freedom.
CorrelationResult pearson_r_p(std::span<const double> x, std::span<const double> y);

struct CdpPoint {
  double cw = 0.0;
  double delta = 0.0;
  std::string condition;
};

struct ThresholdFit {
  double slope = 0.0;
  double intercept = 0.0;
  double zero_crossing = 0.0;
  double r = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// OLS delta = slope * cw + intercept and the CW where the fit crosses zero.
ThresholdFit fit_cw_threshold(const std::vector<CdpPoint>& points);

struct BucketRate {
  std::string label;
  std::size_t positive = 0;
  std::size_t total = 0;
};

/// Buckets CW < low, low <= CW <= high, CW > high. Positive means delta > 0.
std::vector<BucketRate> positive_rate_buckets(const std::vector<CdpPoint>& points,
                                              double low = 7.0, double high = 10.0);

struct ConditionCorrelation {
  std::string condition;
  CorrelationResult result;
};

/// Pearson r of delta on cw per condition, in order of first appearance.
std::vector<ConditionCorrelation> correlate_by_condition(const std::vector<CdpPoint>& points);

/// CSV with header `cw,delta,condition` (condition column optional).
std::vector<CdpPoint> load_cdp_points(const std::filesystem::path& path);

}  // namespace synthq
