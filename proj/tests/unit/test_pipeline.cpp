#include <sys/wait.h>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fake_servers.hpp"
#include "fixtures.hpp"
#include "json.hpp"
#include "synthq/corpus.hpp"
#include "synthq/error.hpp"
#include "synthq/pipeline.hpp"

using namespace synthq;
using nlohmann::json;
using synthq::testing::read_text;
using synthq::testing::TempDir;
using synthq::testing::write_text;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(SYNTHQ_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string csv_path() { return synthq::testing::cdp_points_csv().string(); }

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::string text;
  for (const auto& r : rows) text += r.dump() + "\n";
  write_text(path, text);
}

}  // namespace

TEST_CASE("help and unknown commands") {
  const auto help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("generate") != std::string::npos);
  CHECK(help.out.find("correlate") != std::string::npos);
  const auto sub = cli({"correlate", "--help"});
  CHECK(sub.code == 0);
  CHECK(sub.out.find("--points") != std::string::npos);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"correlate", "--no-such-flag", "1"}).code == 2);
  CHECK(cli({"correlate", "--low", "abc", "--points", csv_path()}).code == 2);
  CHECK(cli({"--version"}).code == 0);
}

TEST_CASE("binary exit codes") {
  TempDir dir;
  CHECK(run_binary("--help") == 0);
  CHECK(run_binary("frobnicate") == 2);
  CHECK(run_binary("correlate --points " + csv_path() + " --out " + (dir / "r.json").string()) == 0);
  CHECK(run_binary("correlate --points " + (dir / "missing.csv").string() + " --out " + (dir / "x.json").string()) == 1);
  CHECK(run_binary("train") == 2);
}

TEST_CASE("correlate writes the cdp report") {
  TempDir dir;
  const auto out_path = (dir / "cdp_report.json").string();
  const auto r = cli({"correlate", "--points", csv_path(), "--out", out_path});
  REQUIRE(r.code == 0);
  const auto report = json::parse(read_text(out_path));
  CHECK(report.at("kind") == "cdp_report");
  CHECK(report.at("config_hash").get<std::string>().size() == 64);
  CHECK(report.at("conditions").size() == 14);
  CHECK(report.at("n_significant") == 12);
  CHECK(report.at("threshold").at("zero_crossing").get<double>() == doctest::Approx(7.9131387).epsilon(1e-6));
  CHECK(report.at("buckets")[2].at("positive") == 14);

  // Byte-identical on rerun.
  const auto again = (dir / "again.json").string();
  REQUIRE(cli({"correlate", "--points", csv_path(), "--out", again}).code == 0);
  CHECK(read_text(out_path) == read_text(again));

  // CSV rendering, directly and via `report`.
  const auto csv = (dir / "cdp.csv").string();
  REQUIRE(cli({"correlate", "--points", csv_path(), "--out", csv, "--format", "csv"}).code == 0);
  const auto text = read_text(csv);
  CHECK(text.starts_with("condition,r,p,n\n"));
  CHECK(std::count(text.begin(), text.end(), '\n') == 15);
  const auto rerendered = cli({"report", "--in", out_path});
  CHECK(rerendered.code == 0);
  CHECK(rerendered.out == text);
}

TEST_CASE("config files: defaults, overrides, unknown keys") {
  TempDir dir;
  write_text(dir / "cfg.json", R"({"correlate": {"low": 8.0, "high": 9.0}})");
  const auto out1 = (dir / "a.json").string();
  REQUIRE(cli({"correlate", "--config", (dir / "cfg.json").string(), "--points", csv_path(), "--out", out1}).code == 0);
  // Flags win over the file.
  const auto out2 = (dir / "b.json").string();
  REQUIRE(cli({"correlate", "--config", (dir / "cfg.json").string(), "--low", "7", "--high", "10", "--points",
               csv_path(), "--out", out2}).code == 0);
  const auto plain = (dir / "c.json").string();
  REQUIRE(cli({"correlate", "--points", csv_path(), "--out", plain}).code == 0);
  const auto a = json::parse(read_text(out1)), b = json::parse(read_text(out2)), c = json::parse(read_text(plain));
  CHECK(a.at("buckets")[0].at("bucket") == "cw<8");  // labels follow the bounds
  CHECK(a.at("config_hash") != c.at("config_hash"));
  CHECK(b.at("config_hash") == c.at("config_hash"));
  CHECK(b.at("buckets") == c.at("buckets"));

  write_text(dir / "unknown.json", R"({"correlate": {"lo": 8.0}})");
  CHECK(cli({"correlate", "--config", (dir / "unknown.json").string(), "--points", csv_path()}).code == 2);
  write_text(dir / "section.json", R"({"bogus": {}})");
  CHECK(cli({"correlate", "--config", (dir / "section.json").string(), "--points", csv_path()}).code == 2);
  write_text(dir / "type.json", R"({"train": {"epochs": "five"}})");
  CHECK(cli({"correlate", "--config", (dir / "type.json").string(), "--points", csv_path()}).code == 2);
  write_text(dir / "broken.json", "{");
  CHECK(cli({"correlate", "--config", (dir / "broken.json").string(), "--points", csv_path()}).code == 2);

  const auto defaults = default_config();
  CHECK(defaults.at("generate").at("temperature") == 0.0);
  CHECK(defaults.at("weight").at("kappa_cw") == 100.0);
  CHECK(defaults.at("train").at("beta2") == 0.98);
}

TEST_CASE("report rendering is stable and schema-checked") {
  QDReport qd{0.5, 0.25, 0.125, 0.0625, 6, 3, "stub-hash-256"};
  const auto j = qd_report_json(qd, "abc");
  for (const char* key : {"dist_sim", "len_sim", "ce", "self_bleu", "config_hash", "kind"}) CHECK(j.contains(key));
  CHECK(render_report(j, ReportFormat::json) == render_report(qd_report_json(qd, "abc"), ReportFormat::json));
  CHECK(render_report(j, ReportFormat::csv) ==
        "dist_sim,len_sim,ce,self_bleu,n_queries,n_pairs,backend_model,config_hash\n"
        "0.5,0.25,0.125,0.0625,6,3,stub-hash-256,abc\n");
  CHECK_THROWS_AS(parse_report_format("xml"), UsageError);
  TempDir dir;
  // Missing parent directories are created; a file in the way is an error.
  write_report(j, ReportFormat::json, dir / "new" / "dir" / "r.json");
  CHECK(json::parse(read_text(dir / "new" / "dir" / "r.json")).at("kind") == "qd_report");
  write_text(dir / "blocker", "x");
  CHECK_THROWS(write_report(j, ReportFormat::json, dir / "blocker" / "r.json"));
}

TEST_CASE("generate, measure, weight, train, eval end to end") {
  TempDir dir;
  const auto mini = synthq::testing::make_mini_corpus(5, 40, 3);
  std::vector<json> docs, human;
  for (const auto& d : mini.docs) docs.push_back({{"id", d.id}, {"text", d.text}});
  for (std::size_t i = 0; i < mini.pairs.size(); i += 3) {
    human.push_back({{"doc_id", mini.pairs[i].doc_id}, {"text", mini.pairs[i].query}});
  }
  write_jsonl(dir / "docs.jsonl", docs);
  write_jsonl(dir / "human.jsonl", human);

  // Paraphrase completions repeat one query; diverse ones reuse the mini
  // corpus queries for the document, so auto selection for OOD picks diverse.
  std::map<std::string, std::vector<std::string>> by_text;
  for (const auto& p : mini.pairs) by_text[Corpus(mini.docs).at(p.doc_id).text].push_back(p.query);
  synthq::testing::FakeLlm llm([&](const std::string& prompt) {
    const auto start = prompt.find("Document(s): ") + 13;
    const auto text = prompt.substr(start, prompt.find('\n', start) - start);
    const auto& qs = by_text.at(text);
    if (prompt.find("SAME question") != std::string::npos) return qs[0] + "\n2. " + qs[0] + "\n3. " + qs[0];
    return qs[0] + "\n2. " + qs[1] + "\n3. " + qs[2];
  });

  const auto synthetic = (dir / "synthetic.jsonl").string();
  const auto fused = (dir / "qd_fused.json").string();
  const auto cache = (dir / "cache").string();
  const std::vector<std::string> gen_args = {
      "generate", "--docs", (dir / "docs.jsonl").string(), "--out", synthetic, "--model", "fixture",
      "--endpoint", llm.endpoint(), "--api-key-env", "SYNTHQ_TEST_UNSET_KEY", "--m", "3", "--sample-size", "10",
      "--cache-dir", cache, "--human", (dir / "human.jsonl").string(), "--report", fused};
  const auto gen = cli(gen_args);
  INFO(gen.err);
  REQUIRE(gen.code == 0);
  const auto meta = json::parse(read_text(synthetic + ".meta.json"));
  CHECK(meta.at("selection").at("chosen_mode") == "diverse");
  CHECK(meta.at("config_hash").get<std::string>().size() == 64);
  CHECK(load_synthetic(synthetic).size() == 40);
  const std::size_t requests = llm.request_count();
  CHECK(requests == 10 + 10 + 40 - 10);  // both candidates on the sample, then the uncached rest

  // Rerun is served from the cache.
  CHECK(cli(gen_args).code == 0);
  CHECK(llm.request_count() == requests);

  // Staged measure equals the fused report.
  const auto staged = cli({"measure", "--in", synthetic, "--human", (dir / "human.jsonl").string()});
  REQUIRE(staged.code == 0);
  const auto a = json::parse(staged.out), b = json::parse(read_text(fused));
  for (const char* key : {"dist_sim", "len_sim", "ce", "self_bleu", "n_queries", "n_pairs", "backend_model"}) {
    CHECK(a.at(key) == b.at(key));
  }
  CHECK(a.at("config_hash").get<std::string>().size() == 64);

  const auto pairs = (dir / "pairs.jsonl").string();
  const auto w = cli({"weight", "--synthetic", synthetic, "--docs", (dir / "docs.jsonl").string(), "--out", pairs});
  REQUIRE(w.code == 0);
  const auto loaded = load_pairs(pairs);
  CHECK(loaded.size() == 120);
  for (const auto& p : loaded) {
    CHECK(p.raw_cw == 3);
    CHECK(p.weight == 1.0);
  }
  const auto preview = json::parse(read_text(pairs + ".preview.json"));
  CHECK(preview.at("kind") == "weight_preview");
  CHECK(preview.at("config_hash").get<std::string>().size() == 64);
  CHECK(std::filesystem::exists(pairs + ".meta.json"));

  const auto ckpt = (dir / "model.ckpt").string();
  std::vector<std::string> train_args = {"train", "--pairs", pairs, "--docs", (dir / "docs.jsonl").string(),
                                         "--out", ckpt, "--epochs", "2", "--hash-dim", "256", "--embed-dim",
                                         "16", "--batch-size", "16", "--scheme", "cw", "--log",
                                         (dir / "log.jsonl").string()};
  const auto t = cli(train_args);
  INFO(t.err);
  REQUIRE(t.code == 0);
  const auto train_report = json::parse(t.out);
  CHECK(train_report.at("kind") == "train_report");
  CHECK(train_report.at("evals").size() == 3);
  CHECK(std::filesystem::exists(ckpt + ".meta.json"));
  CHECK_FALSE(read_text(dir / "log.jsonl").empty());

  // Resuming a finished run with the same config is a no-op; a different
  // config is a usage error.
  auto resume_args = train_args;
  resume_args.push_back("--resume");
  CHECK(cli(resume_args).code == 0);
  auto changed = resume_args;
  changed[8] = "3";
  CHECK(cli(changed).code == 2);

  std::vector<json> qrels, queries;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& p = mini.pairs[i * 3 + 1];
    queries.push_back({{"query_id", "q" + std::to_string(i)}, {"text", p.query}});
    qrels.push_back({{"query_id", "q" + std::to_string(i)}, {"doc_id", p.doc_id}, {"rel", 1}});
  }
  write_jsonl(dir / "qrels.jsonl", qrels);
  write_jsonl(dir / "queries.jsonl", queries);
  const auto ev = cli({"eval", "--model", ckpt, "--docs", (dir / "docs.jsonl").string(), "--qrels",
                       (dir / "qrels.jsonl").string(), "--queries", (dir / "queries.jsonl").string()});
  INFO(ev.err);
  REQUIRE(ev.code == 0);
  const auto eval_report = json::parse(ev.out);
  CHECK(eval_report.at("kind") == "eval_report");
  CHECK(eval_report.at("n_queries") == 10);
  CHECK(eval_report.at("mean_ndcg").get<double>() >= 0.0);
  const auto ev_csv = cli({"eval", "--model", ckpt, "--docs", (dir / "docs.jsonl").string(), "--qrels",
                           (dir / "qrels.jsonl").string(), "--queries", (dir / "queries.jsonl").string(),
                           "--format", "csv"});
  CHECK(ev_csv.out.starts_with("query_id,ndcg\n"));
}

TEST_CASE("runtime and usage failures map to exit codes") {
  TempDir dir;
  write_text(dir / "docs.jsonl", "{\"id\":\"d1\",\"text\":\"x\"}\n");
  write_text(dir / "pairs.jsonl", "{\"query\":\"q\",\"doc_id\":\"d1\"}\n");
  // Missing required flag.
  CHECK(cli({"train", "--docs", (dir / "docs.jsonl").string()}).code == 2);
  // cw scheme without annotated CW is a runtime failure.
  CHECK(cli({"train", "--pairs", (dir / "pairs.jsonl").string(), "--docs", (dir / "docs.jsonl").string(), "--out",
             (dir / "m.ckpt").string(), "--scheme", "cw"}).code == 1);
  // Bad enum value is a usage error.
  CHECK(cli({"train", "--pairs", (dir / "pairs.jsonl").string(), "--docs", (dir / "docs.jsonl").string(), "--out",
             (dir / "m.ckpt").string(), "--scheme", "fancy"}).code == 2);
  CHECK(cli({"weight", "--in", (dir / "pairs.jsonl").string(), "--docs", (dir / "docs.jsonl").string()}).code == 2);
  CHECK(cli({"report", "--in", (dir / "docs.jsonl").string()}).code == 1);
}

TEST_CASE("weight warns about interrogative stopwords") {
  TempDir dir;
  write_text(dir / "docs.jsonl", "{\"id\":\"d1\",\"text\":\"x\"}\n");
  write_text(dir / "pairs.jsonl", "{\"query\":\"quel est le prix\",\"doc_id\":\"d1\"}\n");
  const auto r = cli({"weight", "--in", (dir / "pairs.jsonl").string(), "--docs", (dir / "docs.jsonl").string(),
                      "--out", (dir / "out.jsonl").string(), "--lang", "fr"});
  CHECK(r.code == 0);
  CHECK(r.err.find("interrogatives") != std::string::npos);
}
