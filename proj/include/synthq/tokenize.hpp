#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace synthq {

enum class TokenizerStrategy {
  unicode_regex,           // Unicode word boundaries (space-delimited languages)
  external_presegmented,   // input already segmented, split on whitespace
  sidecar_segmenter,       // POST /segment on the scorer sidecar
};

std::string_view to_string(TokenizerStrategy s);
/// Accepts the CLI spellings "regex", "presegmented", "sidecar" as well as the
/// enum names.
TokenizerStrategy parse_tokenizer_strategy(std::string_view name);

struct TokenizerSpec {
  std::string language = "en";
  TokenizerStrategy strategy = TokenizerStrategy::unicode_regex;
  // zh/ja/ko have no spaces between words; unicode_regex for them must be
  // requested explicitly.
  bool allow_regex_for_cjk = false;

  /// Throws if the combination is not allowed.
  void validate() const;
};

/// Primary language subtag, lowercased: "zh-Hans" -> "zh".
std::string primary_language(std::string_view tag);
bool is_cjk_language(std::string_view tag);

/// Word segmentation service for languages without whitespace word breaks.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::vector<std::vector<std::string>> segment(const std::vector<std::string>& texts,
                                                        std::string_view language) = 0;
};

/// Lowercase then NFKC-normalize a UTF-8 string.
std::string normalize_token(std::string_view token);

/// Number of Unicode scalar values in a valid UTF-8 string.
std::size_t codepoint_length(std::string_view utf8);

bool is_valid_utf8(std::string_view bytes);

/// Ordered, normalized tokens. Tokens consisting only of punctuation, symbols
/// or whitespace are dropped for every strategy. `segmenter` is required for
/// the sidecar strategy.
std::vector<std::string> tokenize(std::string_view text, const TokenizerSpec& spec,
                                  Segmenter* segmenter = nullptr);

class StopwordTable {
 public:
  StopwordTable() = default;
  StopwordTable(std::string language, const std::vector<std::string>& words);

  /// One token per line, UTF-8, `#` starts a comment.
  static StopwordTable load(const std::filesystem::path& path, std::string language);
  /// `<dir>/<primary language>.txt`
  static StopwordTable load_for_language(const std::filesystem::path& dir,
                                         std::string_view language);

  const std::string& language() const { return language_; }
  const std::unordered_set<std::string>& words() const { return words_; }
  bool contains(std::string_view normalized_token) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::string language_;
  std::unordered_set<std::string> words_;
};

/// Interrogatives known to be listed as stopwords in some languages (French,
/// Chinese), which deflates CW for question-style queries. Returns the ones
/// present in `table`; an empty result means no warning is needed.
std::vector<std::string> interrogative_stopwords(const StopwordTable& table);

/// Unique tokens that are not stopwords and are longer than one character.
std::size_t content_word_count(const std::vector<std::string>& tokens,
                               const StopwordTable& stopwords);

std::size_t content_word_count(std::string_view query, const TokenizerSpec& spec,
                               const StopwordTable& stopwords, Segmenter* segmenter = nullptr);

}  // namespace synthq
