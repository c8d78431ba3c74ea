#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "synthq/error.hpp"
#include "synthq/random.hpp"
#include "synthq/tokenize.hpp"

using namespace synthq;

namespace {

using Strings = std::vector<std::string>;

const StopwordTable& english() {
  static const StopwordTable table =
      StopwordTable::load_for_language(synthq::testing::stopwords_dir(), "en");
  return table;
}

std::string join(const Strings& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// Brute-force CW: build the set by hand.
std::size_t cw_oracle(const Strings& tokens, const StopwordTable& sw) {
  std::set<std::string> seen;
  for (const auto& t : tokens) {
    if (codepoint_length(t) > 1 && !sw.contains(t)) seen.insert(t);
  }
  return seen.size();
}

class FixedSegmenter : public Segmenter {
 public:
  std::vector<Strings> segment(const Strings& texts, std::string_view) override {
    ++calls;
    std::vector<Strings> out;
    for (const auto& t : texts) out.push_back(t.empty() ? Strings{} : Strings{"什么", "是", "RBA", "？"});
    return out;
  }
  int calls = 0;
};

}  // namespace

TEST_CASE("unicode word boundaries with lowercase") {
  TokenizerSpec en;
  CHECK(tokenize("What does Ivan promise?", en) == Strings{"what", "does", "ivan", "promise"});
  CHECK(tokenize("", en).empty());
  CHECK(tokenize("RBA is used", en) == Strings{"rba", "is", "used"});
  CHECK(tokenize("  ...  !!", en).empty());
}

TEST_CASE("NFKC folds compatibility forms") {
  TokenizerSpec en;
  CHECK(tokenize("ＡＢＣ ﬁle", en) == Strings{"abc", "file"});
  CHECK(normalize_token("Ⅻ") == "xii");
  CHECK(normalize_token("ÉCOLE") == "école");
}

TEST_CASE("presegmented splits on whitespace only") {
  TokenizerSpec spec{"zh", TokenizerStrategy::external_presegmented};
  CHECK(tokenize("什么 是  RBA ？", spec) == Strings{"什么", "是", "rba"});
}

TEST_CASE("CJK languages require an explicit override for the regex tokenizer") {
  TokenizerSpec zh{"zh-Hans", TokenizerStrategy::unicode_regex};
  CHECK_THROWS_AS(zh.validate(), Error);
  CHECK_THROWS_AS(tokenize("你好", zh), Error);
  zh.allow_regex_for_cjk = true;
  CHECK_NOTHROW(zh.validate());
  CHECK_NOTHROW(TokenizerSpec{"fr"}.validate());
  CHECK(is_cjk_language("ja-JP"));
  CHECK_FALSE(is_cjk_language("en"));
  CHECK(primary_language("zh-Hans") == "zh");
}

TEST_CASE("sidecar strategy needs a segmenter and drops punctuation") {
  TokenizerSpec spec{"zh", TokenizerStrategy::sidecar_segmenter};
  CHECK_THROWS_AS(tokenize("什么是RBA？", spec), Error);
  FixedSegmenter seg;
  CHECK(tokenize("什么是RBA？", spec, &seg) == Strings{"什么", "是", "rba"});
  CHECK(seg.calls == 1);
}

TEST_CASE("invalid UTF-8 is rejected") {
  CHECK_FALSE(is_valid_utf8("\xff"));
  CHECK_FALSE(is_valid_utf8("\xc0\x80"));
  CHECK(is_valid_utf8("naïve 中文"));
  CHECK_THROWS_AS(tokenize("bad \xff", TokenizerSpec{}), Error);
  CHECK(codepoint_length("naïve") == 5);
  CHECK(codepoint_length("中文") == 2);
}

TEST_CASE("tokenizer names parse") {
  CHECK(parse_tokenizer_strategy("regex") == TokenizerStrategy::unicode_regex);
  CHECK(parse_tokenizer_strategy("presegmented") == TokenizerStrategy::external_presegmented);
  CHECK(parse_tokenizer_strategy("sidecar") == TokenizerStrategy::sidecar_segmenter);
  CHECK(parse_tokenizer_strategy("unicode_regex") == TokenizerStrategy::unicode_regex);
  CHECK_THROWS_AS(parse_tokenizer_strategy("jieba"), Error);
}

TEST_CASE("content word anchors") {
  TokenizerSpec en;
  CHECK(content_word_count("What does Ivan promise to do when he turns thirty?", en, english()) == 4);
  CHECK(content_word_count("to do of the", en, english()) == 0);
  CHECK(content_word_count("promise promise Ivan", en, english()) == 2);
  CHECK(content_word_count("", en, english()) == 0);
  CHECK(content_word_count("x y z promise", en, english()) == 1);
  // No stemming.
  CHECK(content_word_count("turns turn", en, english()) == 2);
}

TEST_CASE("stopword lists are lowercase NFKC and non-empty") {
  for (const auto& entry : std::filesystem::directory_iterator(synthq::testing::stopwords_dir())) {
    const auto lang = entry.path().stem().string();
    CAPTURE(lang);
    const auto table = StopwordTable::load(entry.path(), lang);
    CHECK(table.size() > 0);
    for (const auto& w : table.words()) {
      CHECK_FALSE(w.empty());
      CHECK(normalize_token(w) == w);
    }
  }
}

TEST_CASE("stopword file format ignores comments and blank lines") {
  synthq::testing::TempDir dir;
  synthq::testing::write_text(dir / "xx.txt", "# header\nThe\n\n  of  \nand # trailing\n");
  const auto table = StopwordTable::load(dir / "xx.txt", "xx");
  CHECK(table.size() == 3);
  CHECK(table.contains("the"));
  CHECK(table.contains("of"));
  CHECK(table.contains("and"));
}

TEST_CASE("interrogative stopwords are detected for French and Chinese") {
  const auto fr = StopwordTable::load_for_language(synthq::testing::stopwords_dir(), "fr");
  CHECK_FALSE(interrogative_stopwords(fr).empty());
  const auto zh = StopwordTable::load_for_language(synthq::testing::stopwords_dir(), "zh");
  CHECK_FALSE(interrogative_stopwords(zh).empty());
  CHECK(interrogative_stopwords(english()).empty());
}

TEST_CASE("stopword table language must match the tokenizer") {
  const auto fr = StopwordTable::load_for_language(synthq::testing::stopwords_dir(), "fr");
  CHECK_THROWS_AS(content_word_count("bonjour", TokenizerSpec{}, fr), Error);
}

TEST_CASE("CW properties over random queries") {
  // Vocabulary mixing stopwords, content words, single letters and case.
  const Strings vocab = {"the", "of", "what", "Ivan", "promise", "thirty", "a", "x", "Turns",
                         "river", "RIVER", "is", "école", "中", "data", "to", "do", "when"};
  TokenizerSpec en;
  Rng rng(11);
  std::vector<std::string> extra_stops = {"promise", "river", "data"};
  for (int trial = 0; trial < 500; ++trial) {
    Strings words;
    const auto n = uniform_index(rng, 12);
    for (std::size_t i = 0; i < n; ++i) words.push_back(vocab[uniform_index(rng, vocab.size())]);
    const auto q = join(words);
    const auto tokens = tokenize(q, en);
    const auto cw = content_word_count(q, en, english());
    CAPTURE(q);
    CHECK(cw == cw_oracle(tokens, english()));
    CHECK(cw <= tokens.size());

    Strings shuffled = words;
    shuffle(std::span<std::string>(shuffled), rng);
    CHECK(content_word_count(join(shuffled), en, english()) == cw);
    CHECK(content_word_count(q + " " + q, en, english()) == cw);

    Strings bigger(english().words().begin(), english().words().end());
    bigger.insert(bigger.end(), extra_stops.begin(), extra_stops.end());
    StopwordTable grown("en", bigger);
    CHECK(content_word_count(q, en, grown) <= cw);

    for (const auto& t : tokens) {
      if (codepoint_length(t) == 1) {
        CHECK(content_word_count(t, en, StopwordTable("en", {})) == 0);
      }
    }
  }
}
