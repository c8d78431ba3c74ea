#include "synthq/eval_stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "jsonl.hpp"
#include "synthq/error.hpp"

namespace synthq {

namespace {

double discount(std::size_t rank) { return std::log2(static_cast<double>(rank) + 1.0); }

double gain(int rel) { return std::exp2(static_cast<double>(rel)) - 1.0; }

}  // namespace

double ndcg_at_k(std::span<const std::string> ranking, const Judgments& judgments, std::size_t k) {
  if (judgments.empty()) throw Error("ndcg: empty judgments");
  if (k == 0) throw Error("ndcg: k must be positive");

  std::vector<int> ideal;
  ideal.reserve(judgments.size());
  for (const auto& [id, rel] : judgments) {
    if (rel < 0) throw Error("ndcg: negative relevance for " + id);
    ideal.push_back(rel);
  }
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) idcg += gain(ideal[i]) / discount(i + 1);
  if (idcg == 0.0) throw Error("ndcg: no positive judgment");

  std::unordered_set<std::string_view> seen;
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
    if (!seen.insert(ranking[i]).second) throw Error("ndcg: duplicate doc " + ranking[i] + " in ranking");
    auto it = judgments.find(ranking[i]);
    if (it != judgments.end()) dcg += gain(it->second) / discount(i + 1);
  }
  return dcg / idcg;
}

DocIndex build_doc_index(const Corpus& corpus, const ToyEncoder& encoder) {
  DocIndex index;
  index.ids.reserve(corpus.size());
  index.vectors.reserve(corpus.size());
  for (const auto& doc : corpus.documents()) {
    index.ids.push_back(doc.id);
    index.vectors.push_back(encoder.encode(doc.text));
  }
  return index;
}

std::vector<std::string> rank_by_vector(const Vector& query_vector, const DocIndex& index,
                                        std::size_t limit) {
  const std::size_t n = index.ids.size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = index.vectors[i];
    if (d.size() != query_vector.size()) throw Error("rank: dimension mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) s += query_vector[k] * d[k];
    scores[i] = s;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return index.ids[a] < index.ids[b];
  };
  const std::size_t take = (limit == 0 || limit > n) ? n : limit;
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), before);
  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(index.ids[order[i]]);
  return out;
}

std::vector<std::string> rank_corpus(std::string_view query, const ToyEncoder& encoder,
                                     const DocIndex& index, std::size_t limit) {
  return rank_by_vector(encoder.encode(query), index, limit);
}

EvalReport evaluate(const ToyEncoder& encoder, const DocIndex& index,
                    const std::vector<EvalQuery>& queries, const Qrels& qrels, std::size_t k) {
  EvalReport report;
  report.k = k;
  double total = 0.0;
  for (const auto& q : queries) {
    auto it = qrels.find(q.id);
    const bool judged = it != qrels.end() &&
                        std::any_of(it->second.begin(), it->second.end(),
                                    [](const auto& kv) { return kv.second > 0; });
    if (!judged) {
      ++report.n_skipped;
      continue;
    }
    const double score = ndcg_at_k(rank_corpus(q.text, encoder, index, k), it->second, k);
    report.per_query.emplace_back(q.id, score);
    total += score;
  }
  report.n_queries = report.per_query.size();
  if (report.n_queries == 0) throw Error("evaluate: no query has a positive judgment");
  report.mean_ndcg = total / static_cast<double>(report.n_queries);
  return report;
}

Qrels load_qrels(const std::filesystem::path& path) {
  Qrels qrels;
  detail::for_each_jsonl(path, [&](const detail::Json& obj, std::size_t lineno) {
    auto qid = detail::required_string(obj, "query_id", lineno);
    auto did = detail::required_string(obj, "doc_id", lineno);
    auto rel = obj.find("rel");
    if (rel == obj.end() || !rel->is_number_integer() || rel->get<long long>() < 0) {
      throw Error(path.string() + ": line " + std::to_string(lineno) +
                  ": \"rel\" must be a non-negative integer");
    }
    qrels[qid][did] = rel->get<int>();
    return true;
  });
  return qrels;
}

std::vector<EvalQuery> load_eval_queries(const std::filesystem::path& path) {
  std::vector<EvalQuery> out;
  detail::for_each_jsonl(path, [&](const detail::Json& obj, std::size_t lineno) {
    out.push_back({detail::required_string(obj, "query_id", lineno),
                   detail::required_string(obj, "text", lineno)});
    return true;
  });
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete beta: a and b must be positive");
  if (x < 0.0 || x > 1.0) throw Error("incomplete beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_tailed(double t, double df) {
  if (!(df > 0.0)) throw Error("t-test: degrees of freedom must be positive");
  if (std::isnan(t)) throw Error("t-test: t is NaN");
  const double at = std::fabs(t);
  if (std::isinf(at)) return 0.0;
  if (df == 1.0) return 1.0 - 2.0 / std::numbers::pi * std::atan(at);
  if (df == 2.0) return 1.0 - at / std::sqrt(2.0 + at * at);
  return incomplete_beta(df / 2.0, 0.5, df / (df + at * at));
}

CorrelationResult pearson_r_p(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw Error("pearson: need at least 3 points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("pearson: zero variance");
  double r = sxy / std::sqrt(sxx * syy);
  r = std::clamp(r, -1.0, 1.0);

  CorrelationResult out;
  out.r = r;
  out.n = n;
  const double df = static_cast<double>(n - 2);
  if (std::fabs(r) == 1.0) {
    out.p = 0.0;
  } else {
    const double t = r * std::sqrt(df / (1.0 - r * r));
    out.p = std::clamp(student_t_two_tailed(t, df), 0.0, 1.0);
  }
  return out;
}

ThresholdFit fit_cw_threshold(const std::vector<CdpPoint>& points) {
  const std::size_t n = points.size();
  if (n < 3) throw Error("threshold fit: need at least 3 points");
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = points[i].cw;
    y[i] = points[i].delta;
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error("threshold fit: zero variance in cw");
  ThresholdFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  if (std::fabs(fit.slope) < 1e-12) throw Error("threshold fit: no trend");
  fit.intercept = my - fit.slope * mx;
  fit.zero_crossing = -fit.intercept / fit.slope;
  auto corr = pearson_r_p(x, y);
  fit.r = corr.r;
  fit.p = corr.p;
  return fit;
}

std::vector<BucketRate> positive_rate_buckets(const std::vector<CdpPoint>& points, double low,
                                              double high) {
  if (points.empty()) throw Error("positive-rate buckets: no points");
  if (!(low <= high)) throw Error("positive-rate buckets: low boundary above high boundary");
  auto fmt = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  std::vector<BucketRate> buckets{{"cw<" + fmt(low), 0, 0},
                                  {fmt(low) + "<=cw<=" + fmt(high), 0, 0},
                                  {"cw>" + fmt(high), 0, 0}};
  for (const auto& p : points) {
    auto& b = p.cw < low ? buckets[0] : (p.cw > high ? buckets[2] : buckets[1]);
    ++b.total;
    if (p.delta > 0.0) ++b.positive;
  }
  return buckets;
}

std::vector<ConditionCorrelation> correlate_by_condition(const std::vector<CdpPoint>& points) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>, std::less<>> groups;
  for (const auto& p : points) {
    auto [it, inserted] = groups.try_emplace(p.condition);
    if (inserted) order.push_back(p.condition);
    it->second.first.push_back(p.cw);
    it->second.second.push_back(p.delta);
  }
  std::vector<ConditionCorrelation> out;
  out.reserve(order.size());
  for (const auto& name : order) {
    const auto& [x, y] = groups.at(name);
    try {
      out.push_back({name, pearson_r_p(x, y)});
    } catch (const Error& e) {
      throw Error("condition \"" + name + "\": " + e.what());
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) throw Error(where + ": not a number: \"" + s + "\"");
  return v;
}

}  // namespace

std::vector<CdpPoint> load_cdp_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  int cw_col = -1, delta_col = -1, cond_col = -1;
  std::vector<CdpPoint> points;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv_line(line);
    if (cw_col < 0) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "cw") cw_col = static_cast<int>(i);
        if (fields[i] == "delta") delta_col = static_cast<int>(i);
        if (fields[i] == "condition") cond_col = static_cast<int>(i);
      }
      if (cw_col < 0 || delta_col < 0) {
        throw Error(path.string() + ": header must name columns cw and delta");
      }
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto need = static_cast<std::size_t>(std::max({cw_col, delta_col, cond_col})) + 1;
    if (fields.size() < need) throw Error(where + ": expected " + std::to_string(need) + " fields");
    CdpPoint p;
    p.cw = parse_number(fields[static_cast<std::size_t>(cw_col)], where);
    p.delta = parse_number(fields[static_cast<std::size_t>(delta_col)], where);
    if (cond_col >= 0) p.condition = fields[static_cast<std::size_t>(cond_col)];
    points.push_back(std::move(p));
  }
  if (cw_col < 0) throw Error(path.string() + ": empty file");
  return points;
}

}  // namespace synthq
