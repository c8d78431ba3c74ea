#include "synthq/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "jsonl.hpp"
#include "synthq/cache.hpp"
#include "synthq/corpus.hpp"
#include "synthq/error.hpp"
#include "synthq/hashing.hpp"
#include "synthq/llm_client.hpp"
#include "synthq/random.hpp"
#include "synthq/scorer.hpp"
#include "synthq/synth.hpp"
#include "synthq/tokenize.hpp"
#include "synthq/trainer.hpp"
#include "synthq/weighting.hpp"

#ifndef SYNTHQ_STOPWORDS_DIR
#define SYNTHQ_STOPWORDS_DIR "stopwords"
#endif

namespace synthq {

using Json = nlohmann::json;
using OJson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Reports

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  throw UsageError("unknown report format \"" + std::string(name) + "\" (expected json or csv)");
}

OJson qd_report_json(const QDReport& r, std::string_view config_hash) {
  OJson j;
  j["kind"] = "qd_report";
  j["config_hash"] = config_hash;
  j["dist_sim"] = r.dist_sim;
  j["len_sim"] = r.len_sim;
  j["ce"] = r.ce;
  j["self_bleu"] = r.self_bleu;
  j["n_queries"] = r.n_queries;
  j["n_pairs"] = r.n_pairs;
  j["backend_model"] = r.backend_model;
  return j;
}

OJson cdp_report_json(const std::vector<ConditionCorrelation>& conditions, const ThresholdFit& fit,
                      const std::vector<BucketRate>& buckets, std::string_view config_hash) {
  OJson j;
  j["kind"] = "cdp_report";
  j["config_hash"] = config_hash;
  OJson conds = OJson::array();
  std::size_t significant = 0;
  for (const auto& c : conditions) {
    OJson row;
    row["condition"] = c.condition;
    row["r"] = c.result.r;
    row["p"] = c.result.p;
    row["n"] = c.result.n;
    conds.push_back(std::move(row));
    if (c.result.p < 0.05) ++significant;
  }
  j["conditions"] = std::move(conds);
  j["n_significant"] = significant;
  OJson t;
  t["slope"] = fit.slope;
  t["intercept"] = fit.intercept;
  t["zero_crossing"] = fit.zero_crossing;
  t["r"] = fit.r;
  t["p"] = fit.p;
  t["n"] = fit.n;
  j["threshold"] = std::move(t);
  OJson b = OJson::array();
  for (const auto& bucket : buckets) {
    OJson row;
    row["bucket"] = bucket.label;
    row["positive"] = bucket.positive;
    row["total"] = bucket.total;
    b.push_back(std::move(row));
  }
  j["buckets"] = std::move(b);
  return j;
}

OJson eval_report_json(const EvalReport& r, std::string_view config_hash) {
  OJson j;
  j["kind"] = "eval_report";
  j["config_hash"] = config_hash;
  j["k"] = r.k;
  j["mean_ndcg"] = r.mean_ndcg;
  j["n_queries"] = r.n_queries;
  j["n_skipped"] = r.n_skipped;
  OJson per = OJson::array();
  for (const auto& [id, score] : r.per_query) {
    OJson row;
    row["query_id"] = id;
    row["ndcg"] = score;
    per.push_back(std::move(row));
  }
  j["per_query"] = std::move(per);
  return j;
}

namespace {

std::string csv_field(const OJson& v) {
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  if (v.is_number_float()) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v.get<double>());
    return std::string(buf, res.ptr);
  }
  if (v.is_null()) return "";
  return v.dump();
}

std::string csv_table(const std::vector<std::string>& header, const OJson& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out += ',';
      out += row.contains(header[i]) ? csv_field(row.at(header[i])) : "";
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::string render_report(const OJson& report, ReportFormat format) {
  if (format == ReportFormat::json) return report.dump(2) + "\n";
  const std::string kind = report.value("kind", "");
  if (kind == "qd_report") {
    return csv_table({"dist_sim", "len_sim", "ce", "self_bleu", "n_queries", "n_pairs", "backend_model",
                      "config_hash"},
                     OJson::array({report}));
  }
  if (kind == "cdp_report") return csv_table({"condition", "r", "p", "n"}, report.at("conditions"));
  if (kind == "eval_report") return csv_table({"query_id", "ndcg"}, report.at("per_query"));
  if (kind == "train_report") return csv_table({"epoch", "step", "ndcg"}, report.at("evals"));
  if (kind == "weight_preview") return csv_table({"cw", "count"}, report.at("cw_histogram"));
  throw Error("no CSV layout for report kind \"" + kind + "\"");
}

void write_report(const OJson& report, ReportFormat format, const std::filesystem::path& path) {
  detail::write_file_atomic(path, render_report(report, format));
}

// ---------------------------------------------------------------------------
// Configuration schema

namespace {

struct Key {
  const char* name;
  Json fallback;
  const char* help;
};

struct Section {
  const char* name;
  std::vector<Key> keys;
};

const std::vector<Section>& schema() {
  static const std::vector<Section> sections = {
      {"tokenizer",
       {{"lang", "en", "language tag of the text"},
        {"tokenizer", "regex", "tokenizer strategy: regex, presegmented or sidecar"},
        {"stopwords_dir", "", "directory holding <lang>.txt stopword lists"},
        {"allow_regex_for_cjk", false, "allow the regex tokenizer for zh/ja/ko"},
        {"segmenter_url", "", "scorer sidecar base URL for the sidecar tokenizer"}}},
      {"scoring",
       {{"backend", "stub", "scorer backend: stub or sidecar:<url>"},
        {"ce_threshold", 0.5, "pair-score threshold for the CE ratio"}}},
      {"generate",
       {{"docs", "", "documents.jsonl"},
        {"out", "", "output synthetic.jsonl"},
        {"mode", "auto", "diverse, paraphrase, or auto (select by diversity target)"},
        {"m", 5, "queries per document"},
        {"target", "ood", "diversity target for auto mode: ood or in_domain"},
        {"model", "", "model name sent to the endpoint"},
        {"endpoint", "", "chat-completions URL"},
        {"api_key_env", "OPENAI_API_KEY", "environment variable holding the API key"},
        {"temperature", 0.0, "sampling temperature"},
        {"max_retries", 3, "retries per document on retryable failures"},
        {"requests_per_second", 0.0, "rate limit (0 = unlimited)"},
        {"burst", 1.0, "rate limiter burst size"},
        {"max_in_flight", 4, "concurrent requests"},
        {"failure_ceiling", 0.01, "maximum tolerated fraction of failed documents"},
        {"cache_dir", ".synthq-cache", "response cache directory (empty disables)"},
        {"sample_size", 100, "documents sampled for prompt selection"},
        {"sample_seed", 0, "seed for the prompt-selection sample"},
        {"limit", 0, "use only the first N documents (0 = all)"},
        {"template_diverse", "", "file overriding the diverse prompt template"},
        {"template_paraphrase", "", "file overriding the paraphrase prompt template"},
        {"transcripts", "", "append request/response transcripts to this JSONL file"},
        {"human", "", "human_queries.jsonl; with --report, also measure the output"},
        {"report", "", "QD report path for the fused measure step"}}},
      {"measure",
       {{"in", "", "synthetic.jsonl"},
        {"human", "", "human_queries.jsonl"},
        {"out", "", "report path (stdout when empty)"},
        {"format", "json", "json or csv"}}},
      {"weight",
       {{"in", "", "pairs_unweighted.jsonl (query, doc_id)"},
        {"synthetic", "", "synthetic.jsonl to flatten instead of --in"},
        {"docs", "", "documents.jsonl (validates doc ids)"},
        {"out", "", "output pairs.jsonl"},
        {"preview", "", "weight preview report (default <out>.preview.json)"},
        {"scheme", "cw", "uniform, cw, ri or ri_times_cw"},
        {"kappa_cw", 100.0, "CW truncation"},
        {"kappa_ri", 5.0, "reasoning-index truncation"}}},
      {"train",
       {{"pairs", "", "pairs.jsonl"},
        {"docs", "", "documents.jsonl"},
        {"out", "", "checkpoint path"},
        {"resume", false, "continue from the checkpoint at --out"},
        {"log", "", "write per-step loss and per-epoch NDCG as JSONL"},
        {"scheme", "uniform", "uniform, cw, ri or ri_times_cw"},
        {"kappa_cw", 100.0, "CW truncation"},
        {"kappa_ri", 5.0, "reasoning-index truncation"},
        {"epochs", 5, "training epochs"},
        {"seed", 0, "seed for init, split and shuffling"},
        {"lr", 5e-3, "peak learning rate"},
        {"lr_schedule", "constant", "constant or cosine"},
        {"batch_size", 32, "pairs per batch"},
        {"beta1", 0.9, "AdamW beta1"},
        {"beta2", 0.98, "AdamW beta2"},
        {"eps", 1e-8, "AdamW epsilon"},
        {"weight_decay", 0.01, "AdamW decoupled weight decay"},
        {"grad_clip", 1.0, "global gradient-norm clip (0 disables)"},
        {"hash_dim", 2048, "hashed feature buckets"},
        {"embed_dim", 128, "embedding dimension"},
        {"scale", 20.0, "similarity scale"},
        {"validation_fraction", 0.1, "held-out fraction of pairs"},
        {"eval_k", 10, "NDCG cutoff for validation"},
        {"exclusive_doc_batches", false, "keep queries of one document in separate batches"}}},
      {"eval",
       {{"model", "", "checkpoint"},
        {"docs", "", "documents.jsonl"},
        {"qrels", "", "qrels.jsonl"},
        {"queries", "", "queries.jsonl ({query_id, text})"},
        {"k", 10, "NDCG cutoff"},
        {"out", "", "report path (stdout when empty)"},
        {"format", "json", "json or csv"}}},
      {"correlate",
       {{"points", "", "CSV with columns cw,delta,condition"},
        {"out", "cdp_report.json", "report path"},
        {"format", "json", "json or csv"},
        {"low", 7.0, "upper bound of the low-CW bucket (exclusive)"},
        {"high", 10.0, "lower bound of the high-CW bucket (exclusive)"}}},
      {"report",
       {{"in", "", "JSON report written by another subcommand"},
        {"out", "", "output path (stdout when empty)"},
        {"format", "csv", "json or csv"}}},
  };
  return sections;
}

const Section& section(std::string_view name) {
  for (const auto& s : schema()) {
    if (name == s.name) return s;
  }
  throw Error("no config section " + std::string(name));
}

std::vector<std::string> shared_sections(std::string_view command) {
  if (command == "generate" || command == "measure") return {"tokenizer", "scoring"};
  if (command == "weight" || command == "train" || command == "eval") return {"tokenizer"};
  return {};
}

std::string flag_name(std::string_view key) {
  std::string s(key);
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

bool same_kind(const Json& fallback, const Json& value) {
  if (fallback.is_boolean()) return value.is_boolean();
  if (fallback.is_string()) return value.is_string();
  if (fallback.is_number_integer()) return value.is_number_integer() && value.get<long long>() >= 0;
  if (fallback.is_number()) return value.is_number();
  return false;
}

Json parse_flag_value(const Json& fallback, const std::string& text, const std::string& flag) {
  if (fallback.is_string()) return text;
  if (fallback.is_number_integer()) {
    unsigned long long v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
      throw UsageError(flag + ": expected a non-negative integer, got \"" + text + "\"");
    }
    return v;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || std::isnan(v)) {
    throw UsageError(flag + ": expected a number, got \"" + text + "\"");
  }
  return v;
}

}  // namespace

Json default_config() {
  Json j = Json::object();
  for (const auto& s : schema()) {
    Json sec = Json::object();
    for (const auto& k : s.keys) sec[k.name] = k.fallback;
    j[s.name] = std::move(sec);
  }
  return j;
}

namespace {

// Checks a --config document against the schema and overlays it on `base`.
void apply_config_file(Json& base, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  Json file;
  try {
    file = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError("config " + path.string() + ": malformed JSON");
  }
  if (!file.is_object()) throw UsageError("config " + path.string() + ": top level must be an object");
  for (const auto& [sec_name, sec_value] : file.items()) {
    if (!base.contains(sec_name)) throw UsageError("config: unknown section \"" + sec_name + "\"");
    if (!sec_value.is_object()) throw UsageError("config: section \"" + sec_name + "\" must be an object");
    for (const auto& [key, value] : sec_value.items()) {
      auto& slot = base[sec_name];
      if (!slot.contains(key)) throw UsageError("config: unknown key \"" + sec_name + "." + key + "\"");
      if (!same_kind(slot[key], value)) {
        throw UsageError("config: \"" + sec_name + "." + key + "\" has the wrong type");
      }
      slot[key] = value;
    }
  }
}

// Flag storage for one subcommand.
struct Bindings {
  std::string config_path;
  struct Bound {
    std::string section;
    const Key* key;
    CLI::Option* option;
    std::string text;
    bool flag = false;
  };
  std::vector<std::unique_ptr<Bound>> bound;
};

void bind_section(CLI::App& app, Bindings& b, const Section& sec) {
  for (const auto& key : sec.keys) {
    auto bound = std::make_unique<Bindings::Bound>();
    bound->section = sec.name;
    bound->key = &key;
    const std::string name = flag_name(key.name);
    if (key.fallback.is_boolean()) {
      bound->option = app.add_flag(name, bound->flag, key.help);
    } else {
      std::string help = key.help;
      const std::string shown = key.fallback.is_string() ? key.fallback.get<std::string>() : key.fallback.dump();
      if (!shown.empty()) help += " [" + shown + "]";
      bound->option = app.add_option(name, bound->text, help)
                          ->type_name(key.fallback.is_string()          ? "TEXT"
                                      : key.fallback.is_number_integer() ? "UINT"
                                                                         : "FLOAT");
    }
    b.bound.push_back(std::move(bound));
  }
}

RunConfig resolve(const std::string& command, const Bindings& b) {
  Json all = default_config();
  if (!b.config_path.empty()) apply_config_file(all, b.config_path);
  for (const auto& bound : b.bound) {
    if (bound->option->count() == 0) continue;
    auto& slot = all[bound->section][bound->key->name];
    slot = bound->key->fallback.is_boolean()
               ? Json(bound->flag)
               : parse_flag_value(bound->key->fallback, bound->text, flag_name(bound->key->name));
  }
  RunConfig rc;
  rc.command = command;
  rc.values = Json::object();
  for (const auto& s : shared_sections(command)) rc.values[s] = all[s];
  rc.values[command] = all[command];
  // Destinations and side channels do not change what is computed.
  Json hashed = rc.values;
  for (const char* key : {"out", "format", "log", "report", "preview", "transcripts", "cache_dir", "resume"}) {
    hashed[command].erase(key);
  }
  rc.hash = sha256_hex(hashed.dump());
  return rc;
}

// ---------------------------------------------------------------------------
// Helpers shared by the subcommands

struct Ctx {
  const RunConfig& rc;
  std::ostream& out;
  std::ostream& err;

  const Json& sec() const { return rc.values.at(rc.command); }
  std::string str(const char* key) const { return sec().at(key).get<std::string>(); }
  double num(const char* key) const { return sec().at(key).get<double>(); }
  std::uint64_t uint(const char* key) const { return sec().at(key).get<std::uint64_t>(); }
  bool flag(const char* key) const { return sec().at(key).get<bool>(); }

  std::string required(const char* key) const {
    auto v = str(key);
    if (v.empty()) throw UsageError(rc.command + ": " + flag_name(key) + " is required");
    return v;
  }
};

TokenizerSpec tokenizer_spec(const RunConfig& rc) {
  const auto& t = rc.values.at("tokenizer");
  TokenizerSpec spec;
  spec.language = t.at("lang").get<std::string>();
  try {
    spec.strategy = parse_tokenizer_strategy(t.at("tokenizer").get<std::string>());
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  spec.allow_regex_for_cjk = t.at("allow_regex_for_cjk").get<bool>();
  try {
    spec.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return spec;
}

std::unique_ptr<Segmenter> segmenter_for(const RunConfig& rc, const TokenizerSpec& spec) {
  if (spec.strategy != TokenizerStrategy::sidecar_segmenter) return nullptr;
  const auto url = rc.values.at("tokenizer").at("segmenter_url").get<std::string>();
  if (url.empty()) throw UsageError("--tokenizer sidecar needs --segmenter-url");
  return std::make_unique<SidecarSegmenter>(url);
}

std::filesystem::path stopwords_dir(const RunConfig& rc) {
  auto dir = rc.values.at("tokenizer").at("stopwords_dir").get<std::string>();
  if (!dir.empty()) return dir;
  if (const char* env = std::getenv("SYNTHQ_STOPWORDS_DIR"); env && *env) return env;
  return SYNTHQ_STOPWORDS_DIR;
}

void write_meta(const std::filesystem::path& artifact, const RunConfig& rc, OJson extra = OJson::object()) {
  OJson meta;
  meta["artifact"] = artifact.filename().string();
  meta["command"] = rc.command;
  meta["config_hash"] = rc.hash;
  meta["config"] = rc.values;
  for (auto& [k, v] : extra.items()) meta[k] = v;
  auto path = artifact;
  path += ".meta.json";
  detail::write_file_atomic(path, meta.dump(2) + "\n");
}

void emit(const Ctx& ctx, const OJson& report, const std::string& out_path, ReportFormat format) {
  if (out_path.empty()) {
    ctx.out << render_report(report, format);
  } else {
    write_report(report, format, out_path);
  }
}

ReportFormat format_of(const Ctx& ctx) { return parse_report_format(ctx.str("format")); }

template <typename Enum, typename Parse>
Enum parse_choice(Parse parse, const std::string& value) {
  try {
    return parse(value);
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Subcommands

QDReport measure_sets(const std::vector<SyntheticQuerySet>& sets, const std::string& human_path,
                      const RunConfig& rc) {
  const auto human = human_query_map(load_human_queries(human_path));
  const auto spec = tokenizer_spec(rc);
  auto backend = make_backend(rc.values.at("scoring").at("backend").get<std::string>(), spec);
  return measure(sets, human, *backend, spec, rc.values.at("scoring").at("ce_threshold").get<double>());
}

int cmd_generate(const Ctx& ctx) {
  const auto docs_path = ctx.required("docs");
  const auto out_path = ctx.required("out");

  GenerationConfig cfg;
  cfg.model = ctx.required("model");
  cfg.endpoint_url = ctx.required("endpoint");
  cfg.m = ctx.uint("m");
  cfg.temperature = ctx.num("temperature");
  cfg.max_retries = static_cast<unsigned>(ctx.uint("max_retries"));
  cfg.api_key_env = ctx.str("api_key_env");
  cfg.requests_per_second = ctx.num("requests_per_second");
  cfg.burst = ctx.num("burst");
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const std::string mode = ctx.str("mode");
  if (mode != "auto" && mode != "diverse" && mode != "paraphrase") {
    throw UsageError("--mode must be diverse, paraphrase or auto");
  }

  LoadOptions load;
  if (auto limit = ctx.uint("limit"); limit > 0) load.limit = limit;
  const auto docs = load_documents(docs_path, load);
  if (docs.empty()) throw Error(docs_path + ": no documents");

  OpenAiChatClient client(cfg.endpoint_url, cfg.api_key_env);
  if (auto t = ctx.str("transcripts"); !t.empty()) client.log_transcripts(t);
  std::optional<ResponseCache> cache;
  if (auto dir = ctx.str("cache_dir"); !dir.empty()) cache.emplace(dir);
  QueryGenerator generator(cfg, client, cache ? &*cache : nullptr);

  auto load_tpl = [&](const char* key, QueryMode m) {
    const auto path = ctx.str(key);
    return path.empty() ? default_template(m) : load_template(path, m);
  };
  const PromptTemplate paraphrase = load_tpl("template_paraphrase", QueryMode::paraphrase);
  const PromptTemplate diverse = load_tpl("template_diverse", QueryMode::diverse);

  OJson selection_json = nullptr;
  PromptTemplate chosen;
  if (mode == "auto") {
    const auto target = parse_choice<DiversityTarget>(parse_diversity_target, ctx.str("target"));
    Rng rng(ctx.uint("sample_seed"));
    std::vector<Document> sample;
    for (auto i : sample_indices(docs.size(), ctx.uint("sample_size"), rng)) sample.push_back(docs[i]);
    const auto spec = tokenizer_spec(ctx.rc);
    auto backend = make_backend(ctx.rc.values.at("scoring").at("backend").get<std::string>(), spec);
    const double threshold = ctx.rc.values.at("scoring").at("ce_threshold").get<double>();
    const auto selection =
        tune_prompt(sample, {paraphrase, diverse}, target, generator, qd_measurer(*backend, spec, threshold));
    chosen = selection.chosen;
    selection_json = OJson::object();
    selection_json["target"] = std::string(to_string(selection.target));
    selection_json["chosen_mode"] = std::string(to_string(selection.chosen_mode));
    selection_json["sample_ce"] = selection.sample_ce;
    selection_json["sample_self_bleu"] = selection.sample_self_bleu;
    selection_json["sample_size"] = sample.size();
    OJson ms = OJson::array();
    for (const auto& m : selection.measurements) {
      OJson row;
      row["mode"] = std::string(to_string(m.mode));
      row["ce"] = m.ce;
      row["self_bleu"] = m.self_bleu;
      ms.push_back(std::move(row));
    }
    selection_json["measurements"] = std::move(ms);
    ctx.err << "selected " << to_string(selection.chosen_mode) << " prompt (CE " << selection.sample_ce
            << ", Self-BLEU " << selection.sample_self_bleu << ")\n";
  } else {
    chosen = mode == "diverse" ? diverse : paraphrase;
  }

  BuildOptions opts;
  opts.max_in_flight = std::max<std::size_t>(1, ctx.uint("max_in_flight"));
  opts.failure_ceiling = ctx.num("failure_ceiling");
  const auto built = build_dataset(docs, chosen, generator, opts);
  for (const auto& [id, cause] : built.failures) ctx.err << "warning: doc " << id << ": " << cause << "\n";
  save_synthetic(built.sets, out_path);

  OJson failures = OJson::array();
  for (const auto& [id, cause] : built.failures) failures.push_back({{"doc_id", id}, {"cause", cause}});
  OJson extra;
  extra["prompt_mode"] = std::string(to_string(chosen.mode));
  extra["prompt_hash"] = prompt_hash(chosen);
  extra["selection"] = selection_json;
  extra["n_documents"] = docs.size();
  extra["n_sets"] = built.sets.size();
  extra["failures"] = failures;
  write_meta(out_path, ctx.rc, extra);

  ctx.out << "wrote " << built.sets.size() << " query sets to " << out_path << " (" << generator.requests_sent()
          << " requests)\n";

  const auto report_path = ctx.str("report");
  const auto human_path = ctx.str("human");
  if (!report_path.empty()) {
    if (human_path.empty()) throw UsageError("--report needs --human");
    write_report(qd_report_json(measure_sets(built.sets, human_path, ctx.rc), ctx.rc.hash), ReportFormat::json,
                 report_path);
    ctx.out << "wrote QD report to " << report_path << "\n";
  }
  return 0;
}

int cmd_measure(const Ctx& ctx) {
  const auto sets = load_synthetic(ctx.required("in"));
  const auto report = measure_sets(sets, ctx.required("human"), ctx.rc);
  emit(ctx, qd_report_json(report, ctx.rc.hash), ctx.str("out"), format_of(ctx));
  return 0;
}

int cmd_weight(const Ctx& ctx) {
  const auto in = ctx.str("in");
  const auto synthetic = ctx.str("synthetic");
  if (in.empty() == synthetic.empty()) throw UsageError("weight: give exactly one of --in or --synthetic");
  const auto out_path = ctx.required("out");
  const Corpus corpus(load_documents(ctx.required("docs")));

  WeightConfig wc;
  wc.scheme = parse_choice<WeightScheme>(parse_weight_scheme, ctx.str("scheme"));
  wc.kappa_cw = ctx.num("kappa_cw");
  wc.kappa_ri = ctx.num("kappa_ri");
  try {
    wc.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  auto pairs = in.empty() ? flatten_to_pairs(load_synthetic(synthetic)) : load_pairs(in);
  const auto spec = tokenizer_spec(ctx.rc);
  const auto stop = StopwordTable::load_for_language(stopwords_dir(ctx.rc), spec.language);
  if (auto found = interrogative_stopwords(stop); !found.empty()) {
    ctx.err << "warning: the " << stop.language() << " stopword list contains interrogatives (";
    for (std::size_t i = 0; i < found.size(); ++i) ctx.err << (i ? ", " : "") << found[i];
    ctx.err << "); CW of question-style queries will be lower\n";
  }
  auto segmenter = segmenter_for(ctx.rc, spec);

  std::vector<std::uint32_t> cws;
  cws.reserve(pairs.size());
  for (auto& p : pairs) {
    p.raw_cw = static_cast<std::uint32_t>(content_word_count(p.query, spec, stop, segmenter.get()));
    // Per-batch weights are recomputed during training.
    p.weight = 1.0;
    cws.push_back(p.raw_cw);
  }
  save_pairs(pairs, corpus, out_path);

  OJson preview;
  preview["kind"] = "weight_preview";
  preview["config_hash"] = ctx.rc.hash;
  preview["scheme"] = std::string(to_string(wc.scheme));
  preview["kappa_cw"] = wc.kappa_cw;
  preview["kappa_ri"] = wc.kappa_ri;
  preview["n_pairs"] = pairs.size();
  std::map<std::uint32_t, std::size_t> histogram;
  double sum = 0.0;
  std::size_t truncated = 0;
  for (auto cw : cws) {
    ++histogram[cw];
    sum += cw;
    if (cw > wc.kappa_cw) ++truncated;
  }
  preview["cw_mean"] = pairs.empty() ? 0.0 : sum / static_cast<double>(pairs.size());
  preview["zero_cw"] = histogram.count(0) ? histogram[0] : 0;
  preview["truncated"] = truncated;
  if (!cws.empty() && (wc.scheme == WeightScheme::cw || wc.scheme == WeightScheme::uniform)) {
    // Corpus-wide normalization, for inspection only.
    try {
      const auto w = batch_weights(wc, cws);
      const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
      preview["corpus_weight_min"] = *lo;
      preview["corpus_weight_max"] = *hi;
    } catch (const Error& e) {
      preview["corpus_weight_error"] = e.what();
    }
  } else if (wc.scheme == WeightScheme::ri || wc.scheme == WeightScheme::ri_times_cw) {
    std::size_t with_reasoning = 0;
    for (const auto& p : pairs) with_reasoning += p.reasoning_query ? 1 : 0;
    preview["with_reasoning_query"] = with_reasoning;
  }
  OJson hist = OJson::array();
  for (const auto& [cw, count] : histogram) {
    OJson row;
    row["cw"] = cw;
    row["count"] = count;
    hist.push_back(std::move(row));
  }
  preview["cw_histogram"] = std::move(hist);

  auto preview_path = ctx.str("preview");
  if (preview_path.empty()) preview_path = out_path + ".preview.json";
  write_report(preview, ReportFormat::json, preview_path);
  write_meta(out_path, ctx.rc);
  ctx.out << "annotated " << pairs.size() << " pairs -> " << out_path << " (mean CW "
          << preview["cw_mean"].get<double>() << ")\n";
  return 0;
}

TrainConfig train_config(const Ctx& ctx) {
  TrainConfig c;
  c.lr = ctx.num("lr");
  c.beta1 = ctx.num("beta1");
  c.beta2 = ctx.num("beta2");
  c.eps = ctx.num("eps");
  c.weight_decay = ctx.num("weight_decay");
  c.grad_clip = ctx.num("grad_clip");
  c.batch_size = ctx.uint("batch_size");
  c.epochs = static_cast<unsigned>(ctx.uint("epochs"));
  c.seed = ctx.uint("seed");
  c.weighting.scheme = parse_choice<WeightScheme>(parse_weight_scheme, ctx.str("scheme"));
  c.weighting.kappa_cw = ctx.num("kappa_cw");
  c.weighting.kappa_ri = ctx.num("kappa_ri");
  c.lr_schedule = parse_choice<LrSchedule>(parse_lr_schedule, ctx.str("lr_schedule"));
  c.hash_dim = static_cast<std::uint32_t>(ctx.uint("hash_dim"));
  c.embed_dim = static_cast<std::uint32_t>(ctx.uint("embed_dim"));
  c.scale = ctx.num("scale");
  c.validation_fraction = ctx.num("validation_fraction");
  c.eval_k = ctx.uint("eval_k");
  c.exclusive_doc_batches = ctx.flag("exclusive_doc_batches");
  c.tokenizer = tokenizer_spec(ctx.rc);
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return c;
}

int cmd_train(const Ctx& ctx) {
  const auto cfg = train_config(ctx);
  const auto out_path = ctx.required("out");
  auto pairs = load_pairs(ctx.required("pairs"));
  const Corpus corpus(load_documents(ctx.required("docs")));
  const bool uses_cw = cfg.weighting.scheme == WeightScheme::cw || cfg.weighting.scheme == WeightScheme::ri_times_cw;
  if (uses_cw && std::all_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.raw_cw == 0; })) {
    throw Error("pairs carry no raw_cw; annotate them with `synthq weight` first");
  }

  std::optional<Trainer> trainer;
  if (ctx.flag("resume")) {
    trainer.emplace(Trainer::resume(out_path, pairs, corpus));
    if (trainer->config().hash() != cfg.hash()) {
      throw UsageError("--resume: checkpoint " + out_path + " was written with a different training config");
    }
    ctx.err << "resumed at epoch " << trainer->epochs_done() << "\n";
  } else {
    trainer.emplace(cfg, pairs, corpus);
  }
  const auto initial = trainer->result();
  if (!ctx.flag("resume")) ctx.err << "epoch 0: validation ndcg@" << cfg.eval_k << " " << initial.initial_ndcg << "\n";
  while (trainer->epochs_done() < cfg.epochs) {
    trainer->run_epoch();
    trainer->save_checkpoint(out_path);
    const auto r = trainer->result();
    ctx.err << "epoch " << r.evals.back().epoch << ": loss " << r.steps.back().loss << ", validation ndcg@"
            << cfg.eval_k << " " << r.evals.back().ndcg << "\n";
  }
  const auto result = trainer->result();

  OJson report;
  report["kind"] = "train_report";
  report["config_hash"] = ctx.rc.hash;
  report["train_config_hash"] = cfg.hash();
  report["initial_ndcg"] = result.initial_ndcg;
  report["best_ndcg"] = result.best_ndcg;
  report["best_epoch"] = result.best_epoch;
  report["steps"] = trainer->steps_done();
  OJson evals = OJson::array();
  for (const auto& e : result.evals) {
    OJson row;
    row["epoch"] = e.epoch;
    row["step"] = e.step;
    row["ndcg"] = e.ndcg;
    evals.push_back(std::move(row));
  }
  report["evals"] = std::move(evals);
  write_meta(out_path, ctx.rc, report);

  if (auto log = ctx.str("log"); !log.empty()) {
    std::vector<detail::Json> rows;
    for (const auto& s : result.steps) rows.push_back({{"step", s.step}, {"loss", s.loss}});
    for (const auto& e : result.evals) rows.push_back({{"epoch", e.epoch}, {"step", e.step}, {"ndcg", e.ndcg}});
    detail::write_jsonl(log, rows);
  }
  ctx.out << report.dump(2) << "\n";
  return 0;
}

int cmd_eval(const Ctx& ctx) {
  const auto encoder = load_encoder(ctx.required("model"));
  const Corpus corpus(load_documents(ctx.required("docs")));
  const auto qrels = load_qrels(ctx.required("qrels"));
  const auto queries = load_eval_queries(ctx.required("queries"));
  const auto k = ctx.uint("k");
  if (k == 0) throw UsageError("--k must be positive");
  const auto index = build_doc_index(corpus, encoder);
  const auto report = evaluate(encoder, index, queries, qrels, k);
  if (report.n_skipped > 0) ctx.err << "skipped " << report.n_skipped << " queries without positive judgments\n";
  emit(ctx, eval_report_json(report, ctx.rc.hash), ctx.str("out"), format_of(ctx));
  return 0;
}

int cmd_correlate(const Ctx& ctx) {
  const auto points = load_cdp_points(ctx.required("points"));
  if (points.empty()) throw Error("no points");
  const auto conditions = correlate_by_condition(points);
  const auto fit = fit_cw_threshold(points);
  const auto buckets = positive_rate_buckets(points, ctx.num("low"), ctx.num("high"));
  const auto report = cdp_report_json(conditions, fit, buckets, ctx.rc.hash);
  const auto out_path = ctx.required("out");
  write_report(report, format_of(ctx), out_path);
  ctx.out << conditions.size() << " conditions, " << report["n_significant"].get<std::size_t>()
          << " with p < 0.05; zero crossing at CW " << fit.zero_crossing << " (r " << fit.r << ")\n";
  return 0;
}

int cmd_report(const Ctx& ctx) {
  const auto in = ctx.required("in");
  std::ifstream f(in);
  if (!f) throw Error("cannot open " + in);
  OJson report;
  try {
    report = OJson::parse(f);
  } catch (const OJson::parse_error&) {
    throw Error(in + ": malformed JSON");
  }
  if (!report.is_object() || !report.contains("kind")) throw Error(in + ": not a synthq report");
  emit(ctx, report, ctx.str("out"), format_of(ctx));
  return 0;
}

using Handler = int (*)(const Ctx&);

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"synthq: synthetic query generation, complexity weighting and retrieval evaluation"};
  app.name("synthq");
  app.require_subcommand(1);
  app.set_version_flag("--version", "synthq 0.1.0");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"generate", "generate synthetic queries for every document"},
      {"measure", "quality and diversity metrics of a synthetic query file"},
      {"weight", "annotate pairs with content-word counts and preview weights"},
      {"train", "train the hashed-feature retriever with weighted InfoNCE"},
      {"eval", "NDCG@k of a trained checkpoint"},
      {"correlate", "CW/delta correlation, threshold fit and positive-rate buckets"},
      {"report", "re-render a JSON report as JSON or CSV"},
  };
  const std::map<std::string, Handler> handlers = {
      {"generate", cmd_generate}, {"measure", cmd_measure},     {"weight", cmd_weight}, {"train", cmd_train},
      {"eval", cmd_eval},         {"correlate", cmd_correlate}, {"report", cmd_report},
  };

  std::map<std::string, Bindings> bindings;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    auto& b = bindings[name];
    sub->add_option("--config", b.config_path, "JSON config file; flags override it");
    for (const auto& shared : shared_sections(name)) bind_section(*sub, b, section(shared));
    bind_section(*sub, b, section(name));
    subs[name] = sub;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "synthq: " << e.what() << "\nRun 'synthq --help' for usage.\n";
    return 2;
  }

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    try {
      const auto rc = resolve(name, bindings.at(name));
      const Ctx ctx{rc, out, err};
      return handlers.at(name)(ctx);
    } catch (const UsageError& e) {
      err << "synthq " << name << ": " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      err << "synthq " << name << ": error: " << e.what() << "\n";
      return 1;
    }
  }
  err << "synthq: no subcommand\n";
  return 2;
}

}  // namespace synthq
