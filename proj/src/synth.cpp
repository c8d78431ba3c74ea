#include "synthq/synth.hpp"

#include <cctype>
#include <cstdio>
#include <exception>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "synthq/hashing.hpp"
#include "synthq/qd_metrics.hpp"

namespace synthq {

namespace {

constexpr std::string_view kTemplateTail = "Generate {M} queries: 1.";

constexpr std::string_view kParaphraseBody =
    "Your task is to generate {M} paraphrase queries based on the document(s).\n"
    "\n"
    "  - Identify ONE main question the document(s) answer\n"
    "  - Then rephrase it {M} different ways\n"
    "\n"
    "All queries must ask the SAME question with DIFFERENT wording.\n"
    "\n"
    "Document(s): {document}\n"
    "\n"
    "Generate {M} queries: 1.";

constexpr std::string_view kDiverseBody =
    "Your task is to generate {M} independent queries based on the document(s).\n"
    "\n"
    "You MUST generate queries in these specific formats:\n"
    "  - What... questions (factual)\n"
    "  - How... questions (procedural)\n"
    "  - Why... questions (causal)\n"
    "  - When/If... questions (conditional)\n"
    "  - Keyword queries (2-5 words, no question mark)\n"
    "  - Statement/claim format (e.g., \"X is used for Y\")\n"
    "  - Which/Is it true... questions\n"
    "  - Comparison or contrast questions\n"
    "\n"
    "Each query must target different information from the document.\n"
    "\n"
    "Document(s): {document}\n"
    "\n"
    "Generate {M} queries: 1.";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_identifier_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

PromptTemplate default_template(QueryMode mode) {
  return {mode, std::string(mode == QueryMode::diverse ? kDiverseBody : kParaphraseBody)};
}

PromptTemplate load_template(const std::filesystem::path& path, QueryMode mode) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string body = ss.str();
  while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.pop_back();
  if (body.find("{document}") == std::string::npos) {
    throw Error("template " + path.string() + " has no {document} placeholder");
  }
  if (!std::string_view(body).ends_with(kTemplateTail)) {
    throw Error("template " + path.string() + " must end with \"" + std::string(kTemplateTail) + "\"");
  }
  return {mode, std::move(body)};
}

std::string prompt_hash(const PromptTemplate& tpl) {
  return sha256_hex(std::string(to_string(tpl.mode)) + '\n' + tpl.body);
}

std::string render_prompt(const PromptTemplate& tpl, std::size_t m, std::string_view document_text) {
  if (m == 0) throw Error("render_prompt: M must be >= 1");
  if (trim(document_text).empty()) throw Error("render_prompt: empty document");
  const std::string m_str = std::to_string(m);
  const std::string_view body = tpl.body;
  std::string out;
  out.reserve(body.size() + document_text.size() + 16);
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      std::size_t j = i + 1;
      while (j < body.size() && is_identifier_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}' && j > i + 1) {
        const auto name = body.substr(i + 1, j - i - 1);
        if (name == "M") {
          out += m_str;
        } else if (name == "document") {
          out += document_text;
        } else {
          throw Error("unresolved placeholder {" + std::string(name) + "}");
        }
        i = j + 1;
        continue;
      }
    }
    out += body[i++];
  }
  return out;
}

ParseUnderfull::ParseUnderfull(std::size_t found, std::size_t needed)
    : Error("found " + std::to_string(found) + (found == 1 ? " item" : " items") + ", need " +
            std::to_string(needed)),
      found_(found) {}

std::vector<std::string> parse_numbered_list(std::string_view raw, std::size_t m) {
  std::vector<std::string> items;
  bool seen_content = false;
  std::size_t pos = 0;
  while (pos <= raw.size() && items.size() < m) {
    auto nl = raw.find('\n', pos);
    if (nl == std::string_view::npos) nl = raw.size();
    const auto line = trim(raw.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;

    std::size_t d = 0;
    while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
    std::size_t k = d;
    while (k < line.size() && (line[k] == ' ' || line[k] == '\t')) ++k;
    const bool marked = d > 0 && k < line.size() && (line[k] == '.' || line[k] == ')');
    if (marked) {
      const auto text = trim(line.substr(k + 1));
      if (!text.empty()) items.emplace_back(text);
    } else if (!seen_content) {
      items.emplace_back(line);
    }
    seen_content = true;
  }
  if (items.size() < m) throw ParseUnderfull(items.size(), m);
  return items;
}

void GenerationConfig::validate() const {
  if (m == 0) throw Error("M must be >= 1");
  if (temperature < 0.0) throw Error("temperature must be >= 0");
  if (model.empty()) throw Error("model name required");
  if (requests_per_second < 0.0) throw Error("requests_per_second must be >= 0");
}

RateLimiter::RateLimiter(double per_second, double burst)
    : rate_(per_second), capacity_(std::max(1.0, burst)), tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (rate_ <= 0.0) return;
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait = (1.0 - tokens_) / rate_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    lock.lock();
  }
}

QueryGenerator::QueryGenerator(GenerationConfig cfg, ChatClient& client, ResponseCache* cache)
    : cfg_(std::move(cfg)), client_(client), cache_(cache),
      limiter_(cfg_.requests_per_second, cfg_.burst) {
  cfg_.validate();
}

nlohmann::json QueryGenerator::request_payload(const Document& doc, const PromptTemplate& tpl) const {
  nlohmann::json message = {{"role", "user"}, {"content", render_prompt(tpl, cfg_.m, doc.text)}};
  return {{"model", cfg_.model},
          {"messages", nlohmann::json::array({message})},
          {"temperature", cfg_.temperature}};
}

SyntheticQuerySet QueryGenerator::generate(const Document& doc, const PromptTemplate& tpl) {
  const auto payload = request_payload(doc, tpl);
  const auto canonical = canonical_payload(client_.endpoint(), payload);

  auto call = [&]() {
    limiter_.acquire();
    ++requests_;
    std::string body = client_.post(payload);
    parse_numbered_list(extract_completion_text(body), cfg_.m);
    return body;
  };

  std::string last_error;
  const unsigned attempts = cfg_.max_retries + 1;
  for (unsigned attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0 && cfg_.initial_backoff.count() > 0) {
      std::this_thread::sleep_for(cfg_.initial_backoff * (1U << std::min(attempt - 1, 10U)));
    }
    try {
      const std::string body = cache_ ? cache_->get_or_call(canonical, call) : call();
      SyntheticQuerySet set;
      set.doc_id = doc.id;
      set.mode = tpl.mode;
      set.queries = parse_numbered_list(extract_completion_text(body), cfg_.m);
      set.generator_id = cfg_.model;
      set.prompt_hash = prompt_hash(tpl);
      return set;
    } catch (const CacheCorruption&) {
      throw;
    } catch (const HttpError& e) {
      if (!e.retryable()) throw HttpError(e.status(), "doc " + doc.id + ": " + e.what());
      last_error = e.what();
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  throw Error("doc " + doc.id + ": generation failed after " + std::to_string(attempts) +
              " attempts: " + last_error);
}

std::string_view to_string(DiversityTarget t) { return t == DiversityTarget::ood ? "ood" : "in_domain"; }

DiversityTarget parse_diversity_target(std::string_view name) {
  if (name == "ood") return DiversityTarget::ood;
  if (name == "in_domain" || name == "in-domain") return DiversityTarget::in_domain;
  throw Error("unknown target \"" + std::string(name) + "\" (expected ood or in_domain)");
}

bool meets_target(const CandidateMeasurement& m, DiversityTarget target) {
  if (target == DiversityTarget::in_domain) return m.ce > 0.5 && m.self_bleu > 0.5;
  return m.ce < 0.5 && m.self_bleu < 0.5;
}

std::size_t select_prompt(const std::vector<CandidateMeasurement>& measurements,
                          DiversityTarget target) {
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    if (meets_target(measurements[i], target)) return i;
  }
  std::string msg = "no candidate prompt meets the " + std::string(to_string(target)) + " target:";
  for (const auto& m : measurements) {
    char buf[128];
    std::snprintf(buf, sizeof buf, " %s(CE=%.4f, Self-BLEU=%.4f)", std::string(to_string(m.mode)).c_str(),
                  m.ce, m.self_bleu);
    msg += buf;
  }
  throw Error(msg);
}

CandidateMeasurer qd_measurer(ScorerBackend& backend, TokenizerSpec spec, double ce_threshold) {
  return [&backend, spec = std::move(spec), ce_threshold](const PromptTemplate& tpl,
                                                          const std::vector<SyntheticQuerySet>& sets) {
    CandidateMeasurement m;
    m.mode = tpl.mode;
    m.ce = ce_ratio(sets, backend, ce_threshold).ratio;
    m.self_bleu = corpus_self_bleu(sets, spec);
    return m;
  };
}

PromptSelection tune_prompt(const std::vector<Document>& sample_docs,
                            const std::vector<PromptTemplate>& candidates, DiversityTarget target,
                            QueryGenerator& generator, const CandidateMeasurer& measure) {
  if (candidates.empty()) throw Error("tune_prompt: no candidate prompts");
  if (sample_docs.size() < 2) throw Error("tune_prompt: need at least 2 sample documents");

  PromptSelection selection;
  selection.target = target;
  for (const auto& tpl : candidates) {
    std::vector<SyntheticQuerySet> sets;
    sets.reserve(sample_docs.size());
    for (const auto& doc : sample_docs) sets.push_back(generator.generate(doc, tpl));
    auto m = measure(tpl, sets);
    m.mode = tpl.mode;
    selection.measurements.push_back(m);
  }
  const auto chosen = select_prompt(selection.measurements, target);
  selection.chosen = candidates[chosen];
  selection.chosen_mode = candidates[chosen].mode;
  selection.sample_ce = selection.measurements[chosen].ce;
  selection.sample_self_bleu = selection.measurements[chosen].self_bleu;
  return selection;
}

BuildResult build_dataset(const std::vector<Document>& docs, const PromptTemplate& tpl,
                          QueryGenerator& generator, const BuildOptions& options) {
  std::vector<std::optional<SyntheticQuerySet>> results(docs.size());
  std::vector<std::optional<std::string>> errors(docs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto worker = [&]() {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= docs.size()) return;
      try {
        results[i] = generator.generate(docs[i], tpl);
      } catch (const CacheCorruption&) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        next = docs.size();
        return;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const auto workers = std::max<std::size_t>(1, std::min(options.max_in_flight, docs.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  BuildResult out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (results[i]) {
      out.sets.push_back(std::move(*results[i]));
    } else if (errors[i]) {
      out.failures.emplace_back(docs[i].id, *errors[i]);
    }
  }
  if (!docs.empty()) {
    const double rate = static_cast<double>(out.failures.size()) / static_cast<double>(docs.size());
    if (rate > options.failure_ceiling) {
      std::string msg = std::to_string(out.failures.size()) + " of " + std::to_string(docs.size()) +
                        " documents failed (ceiling " + std::to_string(options.failure_ceiling) + "):";
      for (const auto& [id, cause] : out.failures) msg += "\n  " + id + ": " + cause;
      throw Error(msg);
    }
  }
  return out;
}

}  // namespace synthq
