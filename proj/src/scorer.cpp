#include "synthq/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "http_util.hpp"
#include "synthq/error.hpp"
#include "synthq/feature_hash.hpp"

namespace synthq {

using nlohmann::json;

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw Error("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<Vector> stub_embed(const std::vector<std::string>& texts, std::uint32_t dim,
                               const TokenizerSpec& spec) {
  if (dim < 8) throw Error("stub_embed: dim must be >= 8");
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    Vector v(dim, 0.0);
    for (const auto& f : hashed_ngram_features(tokenize(text, spec), dim)) v[f.index] += f.value;
    double norm = std::sqrt(dot(v, v));
    if (norm == 0.0) {
      v[0] = 1.0;
    } else {
      for (auto& x : v) x /= norm;
    }
    out.push_back(std::move(v));
  }
  return out;
}

StubScorer::StubScorer(std::uint32_t dim, TokenizerSpec spec, std::optional<double> pinned_pair_score)
    : dim_(dim), spec_(std::move(spec)), pinned_(pinned_pair_score) {
  if (dim_ < 8) throw Error("stub scorer: dim must be >= 8");
  if (pinned_ && (*pinned_ < 0.0 || *pinned_ > 1.0)) throw Error("pinned pair score outside [0,1]");
}

std::vector<Vector> StubScorer::embed(const std::vector<std::string>& texts) {
  return stub_embed(texts, dim_, spec_);
}

std::vector<double> StubScorer::pair_score(const std::vector<TextPair>& pairs) {
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (pinned_) {
      scores.push_back(*pinned_);
      continue;
    }
    const auto e = stub_embed({a, b}, dim_, spec_);
    scores.push_back(std::clamp(dot(e[0], e[1]), 0.0, 1.0));
  }
  return scores;
}

std::string StubScorer::model_id() const {
  std::string id = "stub-hash-" + std::to_string(dim_);
  if (pinned_) id += "-pinned";
  return id;
}

struct SidecarScorer::Impl {
  std::string base_path;
  std::unique_ptr<httplib::Client> client;
  std::size_t batch_size;
  std::mutex mutex;
  std::optional<std::string> embed_model;
  std::optional<std::string> ce_model;

  void ensure_health() {
    if (embed_model) return;
    const json health = detail::get_json(*client, detail::join_path(base_path, "/healthz"));
    embed_model = health.value("embed_model", "");
    ce_model = health.value("ce_model", "");
  }

  void check_model(const json& response, const std::optional<std::string>& expected) {
    const std::string got = response.value("model", "");
    if (expected && !expected->empty() && got != *expected) {
      throw Error("sidecar model changed from " + *expected + " to " + got +
                  "; refusing to mix scorer models in one run");
    }
  }
};

SidecarScorer::SidecarScorer(std::string base_url, std::size_t batch_size)
    : impl_(std::make_unique<Impl>()) {
  const auto url = detail::parse_url(base_url);
  impl_->base_path = url.path == "/" ? "" : url.path;
  impl_->client = detail::make_client(url.origin, std::chrono::seconds(120));
  impl_->batch_size = std::max<std::size_t>(1, batch_size);
}

SidecarScorer::~SidecarScorer() = default;

std::vector<Vector> SidecarScorer::embed(const std::vector<std::string>& texts) {
  std::lock_guard lock(impl_->mutex);
  impl_->ensure_health();
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += impl_->batch_size) {
    const auto end = std::min(texts.size(), start + impl_->batch_size);
    json req = {{"texts", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                                   texts.begin() + static_cast<std::ptrdiff_t>(end))}};
    const json res = json::parse(
        detail::post_json(*impl_->client, detail::join_path(impl_->base_path, "/embed"), req.dump()));
    impl_->check_model(res, impl_->embed_model);
    const auto& vectors = res.at("vectors");
    if (vectors.size() != end - start) throw Error("/embed returned a misaligned response");
    for (const auto& v : vectors) {
      Vector vec = v.get<Vector>();
      if (!out.empty() && vec.size() != out.front().size()) {
        throw Error("/embed returned vectors of differing dimension");
      }
      if (std::abs(std::sqrt(dot(vec, vec)) - 1.0) > 1e-5) {
        throw Error("/embed returned a vector that is not unit norm");
      }
      out.push_back(std::move(vec));
    }
  }
  return out;
}

std::vector<double> SidecarScorer::pair_score(const std::vector<TextPair>& pairs) {
  std::lock_guard lock(impl_->mutex);
  impl_->ensure_health();
  std::vector<double> out;
  out.reserve(pairs.size());
  for (std::size_t start = 0; start < pairs.size(); start += impl_->batch_size) {
    const auto end = std::min(pairs.size(), start + impl_->batch_size);
    json arr = json::array();
    for (auto i = start; i < end; ++i) arr.push_back({pairs[i].first, pairs[i].second});
    const json res = json::parse(detail::post_json(
        *impl_->client, detail::join_path(impl_->base_path, "/score-pairs"), json{{"pairs", arr}}.dump()));
    impl_->check_model(res, impl_->ce_model);
    const auto& scores = res.at("scores");
    if (scores.size() != end - start) throw Error("/score-pairs returned a misaligned response");
    for (const auto& s : scores) {
      const double v = s.get<double>();
      if (!(v >= 0.0 && v <= 1.0)) throw Error("/score-pairs returned a score outside [0,1]");
      out.push_back(v);
    }
  }
  return out;
}

std::string SidecarScorer::model_id() const {
  std::lock_guard lock(impl_->mutex);
  impl_->ensure_health();
  return "sidecar:" + *impl_->embed_model + "|" + *impl_->ce_model;
}

struct SidecarSegmenter::Impl {
  std::string base_path;
  std::unique_ptr<httplib::Client> client;
  std::mutex mutex;
};

SidecarSegmenter::SidecarSegmenter(std::string base_url) : impl_(std::make_unique<Impl>()) {
  const auto url = detail::parse_url(base_url);
  impl_->base_path = url.path == "/" ? "" : url.path;
  impl_->client = detail::make_client(url.origin, std::chrono::seconds(60));
}

SidecarSegmenter::~SidecarSegmenter() = default;

std::vector<std::vector<std::string>> SidecarSegmenter::segment(const std::vector<std::string>& texts,
                                                                std::string_view language) {
  std::lock_guard lock(impl_->mutex);
  json req = {{"texts", texts}, {"lang", std::string(language)}};
  const json res = json::parse(
      detail::post_json(*impl_->client, detail::join_path(impl_->base_path, "/segment"), req.dump()));
  auto tokens = res.at("tokens").get<std::vector<std::vector<std::string>>>();
  if (tokens.size() != texts.size()) throw Error("/segment returned a misaligned response");
  return tokens;
}

std::unique_ptr<ScorerBackend> make_backend(std::string_view selector, const TokenizerSpec& spec) {
  if (selector == "stub") return std::make_unique<StubScorer>(256, spec);
  constexpr std::string_view kSidecar = "sidecar:";
  if (selector.starts_with(kSidecar)) {
    return std::make_unique<SidecarScorer>(std::string(selector.substr(kSidecar.size())));
  }
  throw Error("unknown backend \"" + std::string(selector) + "\" (expected stub or sidecar:<url>)");
}

}  // namespace synthq
