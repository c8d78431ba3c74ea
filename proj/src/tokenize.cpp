#include "synthq/tokenize.hpp"

#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <unordered_map>

#include "synthq/error.hpp"

namespace synthq {

std::string_view to_string(TokenizerStrategy s) {
  switch (s) {
    case TokenizerStrategy::unicode_regex: return "unicode_regex";
    case TokenizerStrategy::external_presegmented: return "external_presegmented";
    case TokenizerStrategy::sidecar_segmenter: return "sidecar_segmenter";
  }
  return "?";
}

TokenizerStrategy parse_tokenizer_strategy(std::string_view name) {
  if (name == "regex" || name == "unicode_regex") return TokenizerStrategy::unicode_regex;
  if (name == "presegmented" || name == "external_presegmented") {
    return TokenizerStrategy::external_presegmented;
  }
  if (name == "sidecar" || name == "sidecar_segmenter") return TokenizerStrategy::sidecar_segmenter;
  throw Error("unknown tokenizer \"" + std::string(name) + "\"");
}

std::string primary_language(std::string_view tag) {
  const auto cut = tag.find_first_of("-_");
  std::string out(tag.substr(0, cut));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_cjk_language(std::string_view tag) {
  const auto lang = primary_language(tag);
  return lang == "zh" || lang == "ja" || lang == "ko";
}

void TokenizerSpec::validate() const {
  if (strategy == TokenizerStrategy::unicode_regex && is_cjk_language(language) &&
      !allow_regex_for_cjk) {
    throw Error("language " + language +
                " needs a segmenter; use the presegmented or sidecar tokenizer, or pass the "
                "explicit regex override");
  }
}

bool is_valid_utf8(std::string_view bytes) {
  const auto* s = reinterpret_cast<const uint8_t*>(bytes.data());
  const auto len = static_cast<int32_t>(bytes.size());
  int32_t i = 0;
  while (i < len) {
    UChar32 c;
    U8_NEXT(s, i, len, c);
    if (c < 0) return false;
  }
  return true;
}

std::size_t codepoint_length(std::string_view utf8) {
  return static_cast<std::size_t>(std::count_if(
      utf8.begin(), utf8.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

namespace {

const icu::Normalizer2& nfkc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw Error("ICU NFKC normalizer unavailable");
  return *n;
}

icu::UnicodeString nfkc_normalize(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfkc().normalize(s, status);
  if (U_FAILURE(status)) throw Error("NFKC normalization failed");
  return out;
}

std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

bool has_word_character(std::string_view utf8) {
  const auto* s = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto len = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < len) {
    UChar32 c;
    U8_NEXT(s, i, len, c);
    if (c >= 0 && (u_isalnum(c) || u_hasBinaryProperty(c, UCHAR_ALPHABETIC))) return true;
  }
  return false;
}

// BreakIterator construction is expensive; keep one per thread and locale.
icu::BreakIterator& word_iterator(const std::string& language) {
  thread_local std::unordered_map<std::string, std::unique_ptr<icu::BreakIterator>> cache;
  auto& slot = cache[language];
  if (!slot) {
    UErrorCode status = U_ZERO_ERROR;
    slot.reset(icu::BreakIterator::createWordInstance(icu::Locale(language.c_str()), status));
    if (U_FAILURE(status) || !slot) throw Error("ICU word break iterator unavailable");
  }
  return *slot;
}

std::vector<std::string> split_unicode_words(std::string_view text, const std::string& language) {
  const icu::UnicodeString normalized =
      nfkc_normalize(icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(),
                                                                   static_cast<int32_t>(text.size()))));
  auto& it = word_iterator(language);
  it.setText(normalized);
  std::vector<std::string> tokens;
  int32_t start = it.first();
  for (int32_t end = it.next(); end != icu::BreakIterator::DONE; start = end, end = it.next()) {
    const int32_t status = it.getRuleStatus();
    if (status >= UBRK_WORD_NONE && status < UBRK_WORD_NONE_LIMIT) continue;
    icu::UnicodeString piece(normalized, start, end - start);
    tokens.push_back(normalize_token(to_utf8(piece)));
  }
  return tokens;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  const icu::UnicodeString s =
      icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  int32_t i = 0;
  const int32_t n = s.length();
  while (i < n) {
    while (i < n && u_isUWhiteSpace(s.char32At(i))) i = s.moveIndex32(i, 1);
    const int32_t start = i;
    while (i < n && !u_isUWhiteSpace(s.char32At(i))) i = s.moveIndex32(i, 1);
    if (i > start) out.push_back(to_utf8(icu::UnicodeString(s, start, i - start)));
  }
  return out;
}

}  // namespace

std::string normalize_token(std::string_view token) {
  icu::UnicodeString s =
      icu::UnicodeString::fromUTF8(icu::StringPiece(token.data(), static_cast<int32_t>(token.size())));
  s.toLower(icu::Locale::getRoot());
  return to_utf8(nfkc_normalize(s));
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerSpec& spec,
                                  Segmenter* segmenter) {
  spec.validate();
  if (!is_valid_utf8(text)) throw Error("tokenize: input is not valid UTF-8");
  if (text.empty()) return {};

  std::vector<std::string> raw;
  switch (spec.strategy) {
    case TokenizerStrategy::unicode_regex:
      return split_unicode_words(text, primary_language(spec.language));
    case TokenizerStrategy::external_presegmented:
      raw = split_whitespace(text);
      break;
    case TokenizerStrategy::sidecar_segmenter: {
      if (segmenter == nullptr) throw Error("sidecar tokenizer selected but no segmenter is reachable");
      auto segmented = segmenter->segment({std::string(text)}, primary_language(spec.language));
      if (segmented.size() != 1) throw Error("segmenter returned a misaligned response");
      raw = std::move(segmented.front());
      break;
    }
  }
  std::vector<std::string> tokens;
  tokens.reserve(raw.size());
  for (const auto& t : raw) {
    if (!has_word_character(t)) continue;
    tokens.push_back(normalize_token(t));
  }
  return tokens;
}

StopwordTable::StopwordTable(std::string language, const std::vector<std::string>& words)
    : language_(std::move(language)) {
  for (const auto& w : words) {
    auto n = normalize_token(w);
    if (!n.empty()) words_.insert(std::move(n));
  }
}

StopwordTable StopwordTable::load(const std::filesystem::path& path, std::string language) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stopword file " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    words.push_back(line.substr(b, e - b + 1));
  }
  return StopwordTable(std::move(language), words);
}

StopwordTable StopwordTable::load_for_language(const std::filesystem::path& dir,
                                               std::string_view language) {
  const auto lang = primary_language(language);
  return load(dir / (lang + ".txt"), lang);
}

bool StopwordTable::contains(std::string_view normalized_token) const {
  return words_.contains(std::string(normalized_token));
}

std::vector<std::string> interrogative_stopwords(const StopwordTable& table) {
  static const std::unordered_map<std::string, std::vector<std::string>> kInterrogatives = {
      {"fr", {"quel", "quelle", "quels", "quelles", "comment", "pourquoi", "quand", "où", "qui", "que"}},
      {"zh", {"什么", "为什么", "哪里", "怎么", "怎样", "谁", "哪"}},
  };
  std::vector<std::string> found;
  auto it = kInterrogatives.find(primary_language(table.language()));
  if (it == kInterrogatives.end()) return found;
  for (const auto& w : it->second) {
    if (table.contains(normalize_token(w))) found.push_back(w);
  }
  return found;
}

std::size_t content_word_count(const std::vector<std::string>& tokens,
                               const StopwordTable& stopwords) {
  std::unordered_set<std::string_view> content;
  for (const auto& t : tokens) {
    if (codepoint_length(t) > 1 && !stopwords.contains(t)) content.insert(t);
  }
  return content.size();
}

std::size_t content_word_count(std::string_view query, const TokenizerSpec& spec,
                               const StopwordTable& stopwords, Segmenter* segmenter) {
  if (!stopwords.language().empty() &&
      primary_language(stopwords.language()) != primary_language(spec.language)) {
    throw Error("stopword table is for " + stopwords.language() + " but tokenizer is for " +
                spec.language);
  }
  return content_word_count(tokenize(query, spec, segmenter), stopwords);
}

}  // namespace synthq
