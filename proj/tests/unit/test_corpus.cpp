#include <string>

#include "doctest.h"
#include "fixtures.hpp"
#include "synthq/corpus.hpp"
#include "synthq/error.hpp"

using namespace synthq;
using synthq::testing::TempDir;
using synthq::testing::write_text;

namespace {

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("three valid lines load in file order") {
  TempDir dir;
  write_text(dir / "docs.jsonl",
             "{\"id\":\"b\",\"text\":\"second\"}\n"
             "{\"id\":\"a\",\"text\":\"first\",\"language\":\"fr\",\"group_id\":\"g\"}\n"
             "\n"
             "{\"id\":\"c\",\"text\":\"third\"}\n");
  const auto docs = load_documents(dir / "docs.jsonl");
  REQUIRE(docs.size() == 3);
  CHECK(docs[0].id == "b");
  CHECK(docs[1].id == "a");
  CHECK(docs[1].language == "fr");
  CHECK(docs[1].group_id == "g");
  CHECK(docs[0].language == "en");
  CHECK_FALSE(docs[0].group_id.has_value());
  CHECK(docs[2].text == "third");
  CHECK(load_documents(dir / "docs.jsonl") == docs);
}

TEST_CASE("duplicate id names the id and line") {
  TempDir dir;
  write_text(dir / "docs.jsonl",
             "{\"id\":\"d1\",\"text\":\"x\"}\n{\"id\":\"d2\",\"text\":\"x\"}\n"
             "{\"id\":\"d3\",\"text\":\"x\"}\n{\"id\":\"d1\",\"text\":\"y\"}\n");
  const auto msg = error_of([&] { load_documents(dir / "docs.jsonl"); });
  CHECK(msg.find("duplicate id d1 (line 4)") != std::string::npos);
}

TEST_CASE("malformed line and empty text are rejected with the line number") {
  TempDir dir;
  write_text(dir / "bad.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{not json\n");
  CHECK(error_of([&] { load_documents(dir / "bad.jsonl"); }).find("line 2") != std::string::npos);
  write_text(dir / "blank.jsonl", "{\"id\":\"a\",\"text\":\"   \"}\n");
  CHECK(error_of([&] { load_documents(dir / "blank.jsonl"); }).find("line 1") != std::string::npos);
  write_text(dir / "missing.jsonl", "{\"id\":\"a\"}\n");
  CHECK(error_of([&] { load_documents(dir / "missing.jsonl"); }).find("line 1") != std::string::npos);
}

TEST_CASE("limit takes a file-order prefix, seeded sampling a stable subset") {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 80000; ++i) {
    text += "{\"id\":\"d" + std::to_string(i) + "\",\"text\":\"t\"}\n";
  }
  write_text(dir / "big.jsonl", text);
  const auto prefix = load_documents(dir / "big.jsonl", {.limit = 8000});
  REQUIRE(prefix.size() == 8000);
  CHECK(prefix.front().id == "d0");
  CHECK(prefix.back().id == "d7999");

  const auto s1 = load_documents(dir / "big.jsonl", {.limit = 100, .sample_seed = 9});
  const auto s2 = load_documents(dir / "big.jsonl", {.limit = 100, .sample_seed = 9});
  REQUIRE(s1.size() == 100);
  CHECK(s1 == s2);
  CHECK(s1 != std::vector<Document>(prefix.begin(), prefix.begin() + 100));
}

TEST_CASE("pairs round-trip losslessly") {
  TempDir dir;
  Corpus corpus({{"d1", "one"}, {"d2", "two"}});
  std::vector<WeightedPair> pairs = {
      {"what is one", "d1", 1, 1.0, std::nullopt},
      {"why two \"quoted\" é", "d2", 2, 0.123456789012345678, std::string("why two, reasoning")}};
  save_pairs(pairs, corpus, dir / "pairs.jsonl");
  CHECK(load_pairs(dir / "pairs.jsonl") == pairs);
}

TEST_CASE("empty pair list gives an empty file") {
  TempDir dir;
  save_pairs({}, Corpus{}, dir / "pairs.jsonl");
  CHECK(synthq::testing::read_text(dir / "pairs.jsonl").empty());
  CHECK(load_pairs(dir / "pairs.jsonl").empty());
}

TEST_CASE("unknown doc is rejected before writing") {
  TempDir dir;
  Corpus corpus(std::vector<Document>{{"d1", "one"}});
  const auto msg = error_of([&] {
    save_pairs({{"q", "d1", 1, 1.0, {}}, {"q", "dX", 1, 1.0, {}}}, corpus, dir / "pairs.jsonl");
  });
  CHECK(msg.find("unknown doc dX") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "pairs.jsonl"));
}

TEST_CASE("non-positive weight in a pairs file is rejected") {
  TempDir dir;
  write_text(dir / "p.jsonl", "{\"query\":\"q\",\"doc_id\":\"d\",\"weight\":0}\n");
  CHECK_THROWS_AS(load_pairs(dir / "p.jsonl"), Error);
}

TEST_CASE("synthetic sets round-trip and flatten in order") {
  TempDir dir;
  std::vector<SyntheticQuerySet> sets = {
      {"d1", QueryMode::diverse, {"a", "b", "c"}, "gen", "h1"},
      {"d2", QueryMode::paraphrase, {"x"}, "gen", "h2"}};
  save_synthetic(sets, dir / "s.jsonl");
  CHECK(load_synthetic(dir / "s.jsonl") == sets);
  const auto pairs = flatten_to_pairs(sets);
  REQUIRE(pairs.size() == 4);
  CHECK(pairs[0].query == "a");
  CHECK(pairs[2].query == "c");
  CHECK(pairs[3].doc_id == "d2");
  CHECK(pairs[3].weight == 1.0);
}

TEST_CASE("human query map keeps the first query per document") {
  const auto map = human_query_map({{"d1", "first"}, {"d2", "x"}, {"d1", "second"}});
  CHECK(map.at("d1") == "first");
  CHECK(map.size() == 2);
}

TEST_CASE("corpus lookup") {
  Corpus corpus({{"a", "x"}, {"b", "y"}});
  CHECK(corpus.contains("a"));
  CHECK_FALSE(corpus.contains("z"));
  CHECK(corpus.at("b").text == "y");
  CHECK_THROWS_AS(corpus.at("z"), Error);
  CHECK_THROWS_AS(Corpus({{"a", "x"}, {"a", "y"}}), Error);
}
