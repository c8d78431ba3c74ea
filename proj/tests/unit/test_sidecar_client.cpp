#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "fake_servers.hpp"
#include "synthq/error.hpp"
#include "synthq/qd_metrics.hpp"
#include "synthq/scorer.hpp"
#include "synthq/tokenize.hpp"

using namespace synthq;
using synthq::testing::FakeSidecar;

TEST_CASE("embed: unit norm, order aligned, deterministic, batched") {
  FakeSidecar sidecar;
  SidecarScorer scorer(sidecar.base_url(), 16);
  std::vector<std::string> texts;
  for (int i = 0; i < 40; ++i) texts.push_back("text number " + std::to_string(i));
  texts.push_back("text number 3");
  const auto v = scorer.embed(texts);
  REQUIRE(v.size() == texts.size());
  for (const auto& x : v) CHECK(std::sqrt(dot(x, x)) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(v[3] == v[40]);
  CHECK(v[3] == stub_embed({"text number 3"}, 64)[0]);
  CHECK(v[7] == stub_embed({"text number 7"}, 64)[0]);
  CHECK(sidecar.embed_calls() == 3);
  CHECK(scorer.embed(texts) == v);
}

TEST_CASE("verbatim copies have cosine one") {
  FakeSidecar sidecar;
  SidecarScorer scorer(sidecar.base_url());
  const auto v = scorer.embed({"what is rba", "what is rba"});
  CHECK(dot(v[0], v[1]) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("score-pairs: aligned, in range, high for identical pairs") {
  FakeSidecar sidecar;
  SidecarScorer scorer(sidecar.base_url(), 20);
  std::vector<TextPair> same;
  for (int i = 0; i < 50; ++i) {
    const auto q = "identical query " + std::to_string(i);
    same.emplace_back(q, q);
  }
  const auto s = scorer.pair_score(same);
  REQUIRE(s.size() == 50);
  for (double x : s) CHECK(x > 0.9);

  // Either order is accepted; scores are only required to be in range.
  const auto ab = scorer.pair_score({{"alpha beta", "gamma delta"}, {"gamma delta", "alpha beta"}});
  REQUIRE(ab.size() == 2);
  for (double x : ab) {
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
}

TEST_CASE("healthz model ids and refusal to mix models") {
  FakeSidecar sidecar("bge-like", "ce-like");
  SidecarScorer scorer(sidecar.base_url());
  CHECK(scorer.model_id() == "sidecar:bge-like|ce-like");
  scorer.embed({"x"});
  sidecar.switch_model("other-model");
  CHECK_THROWS_WITH_AS(scorer.embed({"x"}), doctest::Contains("refusing to mix"), Error);
}

TEST_CASE("segment partitions Chinese text and rejects space-delimited languages") {
  FakeSidecar sidecar;
  SidecarSegmenter seg(sidecar.base_url());
  const std::string zh = "什么是快速建模方法";
  const auto tokens = seg.segment({zh, ""}, "zh");
  REQUIRE(tokens.size() == 2);
  std::string joined;
  for (const auto& t : tokens[0]) joined += t;
  CHECK(joined == zh);
  CHECK(tokens[1].empty());
  CHECK_THROWS_AS(seg.segment({"bonjour"}, "fr"), HttpError);

  TokenizerSpec spec{"zh", TokenizerStrategy::sidecar_segmenter};
  CHECK(tokenize("什么是", spec, &seg) == std::vector<std::string>{"什", "么", "是"});
}

TEST_CASE("metrics run through the sidecar backend") {
  FakeSidecar sidecar;
  auto backend = make_backend("sidecar:" + sidecar.base_url());
  HumanMap human = {{"d1", "what is rba"}};
  CHECK(dist_sim({{"d1", "what is rba"}}, human, *backend) == doctest::Approx(1.0).epsilon(1e-6));
  SyntheticQuerySet set{"d1", QueryMode::paraphrase, {"what is rba", "what is rba"}, "g", "h"};
  CHECK(ce_ratio({set}, *backend).ratio == 1.0);
}

TEST_CASE("unreachable sidecar and bad selectors fail loudly") {
  SidecarScorer scorer("http://127.0.0.1:1");
  CHECK_THROWS_AS(scorer.embed({"x"}), HttpError);
  CHECK_THROWS_AS(make_backend("bert"), Error);
  CHECK(make_backend("stub")->model_id() == "stub-hash-256");
}
