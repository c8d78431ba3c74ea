#include "synthq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "checkpoint.hpp"
#include "synthq/error.hpp"
#include "synthq/eval_stats.hpp"
#include "synthq/hashing.hpp"

namespace synthq {

// ---------------------------------------------------------------------------
// Loss

namespace {

struct Normalized {
  Vector u;
  double norm;
};

Normalized normalized(const Vector& x) {
  Normalized n{x, 0.0};
  n.norm = normalize_or_e1(n.u);
  return n;
}

// -log softmax at the diagonal for one row of logits, kept strictly positive
// when the positive dominates.
double row_loss(const std::vector<double>& s, std::size_t i) {
  double max_other = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (j != i) max_other = std::max(max_other, s[j] - s[i]);
  }
  if (max_other <= 0.0) {
    double acc = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j != i) acc += std::exp(s[j] - s[i]);
    }
    return std::log1p(acc);
  }
  const double m = max_other + s[i];
  double acc = 0.0;
  for (double v : s) acc += std::exp(v - m);
  return m + std::log(acc) - s[i];
}

}  // namespace

InfoNceResult weighted_info_nce(std::span<const Vector> queries, std::span<const Vector> docs,
                                std::span<const double> weights, double scale) {
  const std::size_t b = queries.size();
  if (docs.size() != b || weights.size() != b) throw Error("info_nce: length mismatch");
  if (b < 2) throw Error("info_nce: need at least 2 pairs per batch");
  const std::size_t dim = queries[0].size();
  for (std::size_t i = 0; i < b; ++i) {
    if (queries[i].size() != dim || docs[i].size() != dim) throw Error("info_nce: dimension mismatch");
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) throw Error("info_nce: weights must be finite and >= 0");
  }

  std::vector<Normalized> q, d;
  q.reserve(b);
  d.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    q.push_back(normalized(queries[i]));
    d.push_back(normalized(docs[i]));
  }

  InfoNceResult out;
  out.per_sample.resize(b);
  out.grad_queries.assign(b, Vector(dim, 0.0));
  out.grad_docs.assign(b, Vector(dim, 0.0));
  std::vector<Vector> du(b, Vector(dim, 0.0)), dv(b, Vector(dim, 0.0));
  const double inv_b = 1.0 / static_cast<double>(b);

  std::vector<double> s(b), p(b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      double c = 0.0;
      for (std::size_t k = 0; k < dim; ++k) c += q[i].u[k] * d[j].u[k];
      s[j] = scale * c;
    }
    out.per_sample[i] = row_loss(s, i);
    out.loss += weights[i] * out.per_sample[i];

    const double m = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (std::size_t j = 0; j < b; ++j) z += (p[j] = std::exp(s[j] - m));
    for (std::size_t j = 0; j < b; ++j) {
      const double g = weights[i] * inv_b * (p[j] / z - (i == j ? 1.0 : 0.0)) * scale;
      for (std::size_t k = 0; k < dim; ++k) {
        du[i][k] += g * d[j].u[k];
        dv[j][k] += g * q[i].u[k];
      }
    }
  }
  out.loss *= inv_b;

  // Back through x -> x / |x|. A zero input was replaced by e_1 and has no
  // gradient.
  auto unnormalize = [dim](const Normalized& n, const Vector& du_, Vector& dx) {
    if (n.norm == 0.0 || !std::isfinite(n.norm)) return;
    double proj = 0.0;
    for (std::size_t k = 0; k < dim; ++k) proj += n.u[k] * du_[k];
    for (std::size_t k = 0; k < dim; ++k) dx[k] = (du_[k] - proj * n.u[k]) / n.norm;
  };
  for (std::size_t i = 0; i < b; ++i) {
    unnormalize(q[i], du[i], out.grad_queries[i]);
    unnormalize(d[i], dv[i], out.grad_docs[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

std::string_view to_string(LrSchedule s) {
  return s == LrSchedule::cosine ? "cosine" : "constant";
}

LrSchedule parse_lr_schedule(std::string_view name) {
  if (name == "constant") return LrSchedule::constant;
  if (name == "cosine") return LrSchedule::cosine;
  throw Error("unknown lr schedule \"" + std::string(name) + "\"");
}

double clip_grad_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (double& g : grads) g *= f;
  }
  return norm;
}

double lr_multiplier(LrSchedule schedule, std::uint64_t step, std::uint64_t total_steps) {
  if (schedule == LrSchedule::constant || total_steps == 0) return 1.0;
  // The first update runs at the full rate.
  const double t = static_cast<double>(std::min(step, total_steps) - (step > 0 ? 1 : 0));
  return 0.5 * (1.0 + std::cos(std::numbers::pi * t / static_cast<double>(total_steps)));
}

void adamw_step(std::span<double> params, std::span<double> grads, AdamState& state,
                const TrainConfig& cfg, std::uint64_t total_steps) {
  if (params.size() != grads.size()) throw Error("adamw: parameter/gradient size mismatch");
  if (state.m.empty()) state.m.assign(params.size(), 0.0);
  if (state.v.empty()) state.v.assign(params.size(), 0.0);
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error("adamw: optimizer state size mismatch");
  }
  const std::uint64_t t = state.step + 1;
  for (double g : grads) {
    if (!std::isfinite(g)) throw Error("non-finite gradient at step " + std::to_string(t));
  }
  if (cfg.grad_clip > 0.0) clip_grad_norm(grads, cfg.grad_clip);

  state.step = t;
  const double lr = cfg.lr * lr_multiplier(cfg.lr_schedule, t, total_steps);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    params[i] -= lr * cfg.weight_decay * params[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw Error("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw Error("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw Error("beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw Error("eps must be positive");
  if (!(weight_decay >= 0.0)) throw Error("weight_decay must be >= 0");
  if (!(grad_clip >= 0.0)) throw Error("grad_clip must be >= 0");
  if (batch_size < 2) throw Error("batch_size must be at least 2");
  if (epochs == 0) throw Error("epochs must be positive");
  if (hash_dim == 0 || embed_dim == 0) throw Error("encoder dimensions must be positive");
  if (!(scale > 0.0)) throw Error("scale must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error("validation_fraction must be in (0, 1)");
  }
  if (eval_k == 0) throw Error("eval_k must be positive");
  if (tokenizer.strategy == TokenizerStrategy::sidecar_segmenter) {
    throw Error("the trainer cannot use the sidecar segmenter; pre-segment the text instead");
  }
  tokenizer.validate();
  weighting.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {
      {"lr", lr},
      {"beta1", beta1},
      {"beta2", beta2},
      {"eps", eps},
      {"weight_decay", weight_decay},
      {"grad_clip", grad_clip},
      {"batch_size", batch_size},
      {"epochs", epochs},
      {"seed", seed},
      {"scheme", std::string(to_string(weighting.scheme))},
      {"kappa_cw", std::isinf(weighting.kappa_cw) ? nlohmann::json("inf") : nlohmann::json(weighting.kappa_cw)},
      {"kappa_ri", weighting.kappa_ri},
      {"lr_schedule", std::string(to_string(lr_schedule))},
      {"hash_dim", hash_dim},
      {"embed_dim", embed_dim},
      {"scale", scale},
      {"language", tokenizer.language},
      {"tokenizer", std::string(to_string(tokenizer.strategy))},
      {"allow_regex_for_cjk", tokenizer.allow_regex_for_cjk},
      {"validation_fraction", validation_fraction},
      {"eval_k", eval_k},
      {"exclusive_doc_batches", exclusive_doc_batches},
  };
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("train config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "lr") c.lr = value.get<double>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "eps") c.eps = value.get<double>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "grad_clip") c.grad_clip = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<unsigned>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "scheme") c.weighting.scheme = parse_weight_scheme(value.get<std::string>());
      else if (key == "kappa_cw") {
        c.weighting.kappa_cw = value.is_string() && value.get<std::string>() == "inf"
                                   ? std::numeric_limits<double>::infinity()
                                   : value.get<double>();
      } else if (key == "kappa_ri") c.weighting.kappa_ri = value.get<double>();
      else if (key == "lr_schedule") c.lr_schedule = parse_lr_schedule(value.get<std::string>());
      else if (key == "hash_dim") c.hash_dim = value.get<std::uint32_t>();
      else if (key == "embed_dim") c.embed_dim = value.get<std::uint32_t>();
      else if (key == "scale") c.scale = value.get<double>();
      else if (key == "language") c.tokenizer.language = value.get<std::string>();
      else if (key == "tokenizer") c.tokenizer.strategy = parse_tokenizer_strategy(value.get<std::string>());
      else if (key == "allow_regex_for_cjk") c.tokenizer.allow_regex_for_cjk = value.get<bool>();
      else if (key == "validation_fraction") c.validation_fraction = value.get<double>();
      else if (key == "eval_k") c.eval_k = value.get<std::size_t>();
      else if (key == "exclusive_doc_batches") c.exclusive_doc_batches = value.get<bool>();
      else throw Error("unknown train config key \"" + key + "\"");
    } catch (const nlohmann::json::exception&) {
      throw Error("train config key \"" + key + "\" has the wrong type");
    }
  }
  return c;
}

std::string TrainConfig::hash() const { return sha256_hex(to_json().dump()); }

// ---------------------------------------------------------------------------
// Trainer

namespace {

using Features = std::vector<SparseFeature>;

struct Sample {
  std::size_t doc;  // index into the corpus
  Features query;
  std::optional<Features> reasoning;
  std::uint32_t cw;
};

std::string data_fingerprint(const std::vector<WeightedPair>& pairs, const Corpus& corpus) {
  std::string buf;
  for (const auto& p : pairs) {
    buf += p.query;
    buf += '\x1f';
    buf += p.doc_id;
    buf += '\x1f';
    buf += std::to_string(p.raw_cw);
    buf += '\x1f';
    buf += p.reasoning_query.value_or("");
    buf += '\x1e';
  }
  for (const auto& d : corpus.documents()) {
    buf += d.id;
    buf += '\x1f';
    buf += d.text;
    buf += '\x1e';
  }
  return sha256_hex(buf);
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void add_scaled_rows(std::vector<double>& grad, const Features& features, const Vector& dh,
                     std::uint32_t embed_dim) {
  for (const auto& f : features) {
    double* row = grad.data() + static_cast<std::size_t>(f.index) * embed_dim;
    for (std::uint32_t k = 0; k < embed_dim; ++k) row[k] += f.value * dh[k];
  }
}

}  // namespace

struct Trainer::State {
  TrainConfig cfg;
  const Corpus* corpus = nullptr;
  std::string fingerprint;

  std::vector<Features> doc_features;
  std::unordered_map<std::string, std::size_t> doc_index;
  std::vector<Sample> train;
  std::vector<Sample> validation;

  ToyEncoder encoder;
  AdamState adam;
  Rng rng;
  unsigned epoch = 0;
  std::uint64_t total_steps = 0;

  std::vector<double> best_projection;
  double best_ndcg = 0.0;
  unsigned best_epoch = 0;
  double initial_ndcg = 0.0;
  std::vector<StepLog> steps;
  std::vector<EvalLog> evals;
  std::vector<double> grad;

  State(TrainConfig c, const std::vector<WeightedPair>& pairs, const Corpus& docs)
      : cfg(std::move(c)),
        corpus(&docs),
        encoder(ToyEncoder::random_init(mix64(cfg.seed), cfg.hash_dim, cfg.embed_dim, cfg.scale,
                                        cfg.tokenizer)),
        rng(cfg.seed) {
    cfg.validate();
    fingerprint = data_fingerprint(pairs, docs);

    doc_features.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const auto& d = docs.documents()[i];
      doc_index.emplace(d.id, i);
      doc_features.push_back(encoder.features(d.text));
    }

    const bool needs_ri = cfg.weighting.scheme == WeightScheme::ri ||
                          cfg.weighting.scheme == WeightScheme::ri_times_cw;
    std::vector<Sample> all;
    all.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& p = pairs[i];
      auto it = doc_index.find(p.doc_id);
      if (it == doc_index.end()) throw Error("pair " + std::to_string(i + 1) + ": unknown doc " + p.doc_id);
      Sample s{it->second, encoder.features(p.query), std::nullopt, p.raw_cw};
      if (p.reasoning_query) s.reasoning = encoder.features(*p.reasoning_query);
      if (needs_ri && !s.reasoning) {
        throw Error("pair " + std::to_string(i + 1) + ": scheme " +
                    std::string(to_string(cfg.weighting.scheme)) + " needs a reasoning_query");
      }
      all.push_back(std::move(s));
    }

    // Seeded split, independent of the training stream.
    Rng split_rng(mix64(cfg.seed ^ 0x76616c6964617465ULL));
    const auto n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(all.size()))));
    if (all.size() < n_val + cfg.batch_size) {
      throw Error("need at least " + std::to_string(cfg.batch_size) + " training pairs after holding out " +
                  std::to_string(n_val) + " for validation (have " + std::to_string(all.size()) + " pairs)");
    }
    const auto val_idx = sample_indices(all.size(), n_val, split_rng);
    std::size_t next = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (next < val_idx.size() && val_idx[next] == i) {
        validation.push_back(std::move(all[i]));
        ++next;
      } else {
        train.push_back(std::move(all[i]));
      }
    }

    const std::size_t per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
    total_steps = per_epoch * cfg.epochs;
    grad.assign(encoder.projection().size(), 0.0);
  }

  double validate_encoder(const ToyEncoder& enc) const {
    DocIndex index;
    index.ids.reserve(corpus->size());
    index.vectors.reserve(corpus->size());
    for (std::size_t i = 0; i < corpus->size(); ++i) {
      index.ids.push_back(corpus->documents()[i].id);
      index.vectors.push_back(enc.encode_features(doc_features[i]));
    }
    double total = 0.0;
    for (const auto& s : validation) {
      const auto ranking = rank_by_vector(enc.encode_features(s.query), index, cfg.eval_k);
      const Judgments judged{{corpus->documents()[s.doc].id, 1}};
      total += ndcg_at_k(ranking, judged, cfg.eval_k);
    }
    return total / static_cast<double>(validation.size());
  }

  void evaluate_initial() {
    initial_ndcg = validate_encoder(encoder);
    best_ndcg = initial_ndcg;
    best_epoch = 0;
    const auto p = encoder.projection();
    best_projection.assign(p.begin(), p.end());
    evals.push_back({0, 0, initial_ndcg});
  }

  std::vector<std::vector<std::size_t>> make_batches() {
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(std::span<std::size_t>(order), rng);

    std::vector<std::vector<std::size_t>> batches;
    if (!cfg.exclusive_doc_batches) {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const auto end = std::min(order.size(), start + cfg.batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
      }
      // A trailing singleton has no negatives; fold it into the previous batch.
      if (batches.size() > 1 && batches.back().size() == 1) {
        batches[batches.size() - 2].push_back(batches.back().front());
        batches.pop_back();
      }
      return batches;
    }
    std::vector<std::size_t> pending = std::move(order);
    while (!pending.empty()) {
      std::vector<std::size_t> batch, rest;
      std::set<std::size_t> docs;
      for (auto idx : pending) {
        if (batch.size() < cfg.batch_size && docs.insert(train[idx].doc).second) {
          batch.push_back(idx);
        } else {
          rest.push_back(idx);
        }
      }
      if (batch.size() >= 2) batches.push_back(std::move(batch));
      pending = std::move(rest);
    }
    return batches;
  }

  void step(const std::vector<std::size_t>& batch) {
    const std::size_t b = batch.size();
    const auto embed_dim = encoder.embed_dim();
    std::vector<Vector> hq(b), hd(b);
    std::vector<std::uint32_t> cws(b);
    for (std::size_t i = 0; i < b; ++i) {
      const auto& s = train[batch[i]];
      hq[i] = encoder.project(s.query);
      hd[i] = encoder.project(doc_features[s.doc]);
      cws[i] = s.cw;
    }

    std::vector<double> ri;
    if (cfg.weighting.scheme == WeightScheme::ri || cfg.weighting.scheme == WeightScheme::ri_times_cw) {
      const std::vector<double> ones(b, 1.0);
      std::vector<Vector> hr(b);
      for (std::size_t i = 0; i < b; ++i) hr[i] = encoder.project(*train[batch[i]].reasoning);
      const auto lq = weighted_info_nce(hq, hd, ones, cfg.scale).per_sample;
      const auto lr = weighted_info_nce(hr, hd, ones, cfg.scale).per_sample;
      ri.resize(b);
      for (std::size_t i = 0; i < b; ++i) ri[i] = reasoning_index(lq[i], lr[i], cfg.weighting.kappa_ri);
    }
    const auto weights = batch_weights(cfg.weighting, cws, ri);
    const auto res = weighted_info_nce(hq, hd, weights, cfg.scale);

    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      const auto& s = train[batch[i]];
      add_scaled_rows(grad, s.query, res.grad_queries[i], embed_dim);
      add_scaled_rows(grad, doc_features[s.doc], res.grad_docs[i], embed_dim);
    }
    adamw_step(encoder.projection(), grad, adam, cfg, total_steps);
    steps.push_back({adam.step, res.loss});
  }

  void run_epoch() {
    if (epoch >= cfg.epochs) throw Error("training already finished");
    for (const auto& batch : make_batches()) step(batch);
    ++epoch;
    const double ndcg = validate_encoder(encoder);
    evals.push_back({epoch, adam.step, ndcg});
    if (ndcg > best_ndcg) {
      best_ndcg = ndcg;
      best_epoch = epoch;
      const auto p = encoder.projection();
      best_projection.assign(p.begin(), p.end());
    }
  }

  ToyEncoder best_encoder() const {
    ToyEncoder best(cfg.hash_dim, cfg.embed_dim, cfg.scale, cfg.tokenizer);
    std::copy(best_projection.begin(), best_projection.end(), best.projection().begin());
    return best;
  }
};

Trainer::Trainer(TrainConfig cfg, std::vector<WeightedPair> pairs, const Corpus& corpus)
    : s_(std::make_unique<State>(std::move(cfg), pairs, corpus)) {
  s_->evaluate_initial();
}

Trainer::Trainer(std::unique_ptr<State> state) : s_(std::move(state)) {}
Trainer::~Trainer() = default;
Trainer::Trainer(Trainer&&) noexcept = default;

void Trainer::run_epoch() { s_->run_epoch(); }

TrainResult Trainer::run() {
  while (s_->epoch < s_->cfg.epochs) s_->run_epoch();
  return result();
}

const TrainConfig& Trainer::config() const { return s_->cfg; }
unsigned Trainer::epochs_done() const { return s_->epoch; }
std::uint64_t Trainer::steps_done() const { return s_->adam.step; }
const ToyEncoder& Trainer::current() const { return s_->encoder; }
double Trainer::validation_ndcg(const ToyEncoder& encoder) const { return s_->validate_encoder(encoder); }

TrainResult Trainer::result() const {
  return {s_->best_encoder(), s_->best_ndcg, s_->best_epoch, s_->initial_ndcg, s_->steps, s_->evals};
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  const auto& s = *s_;
  detail::CheckpointData data;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& l : s.steps) steps.push_back({l.step, l.loss});
  nlohmann::json evals = nlohmann::json::array();
  for (const auto& e : s.evals) evals.push_back({e.epoch, e.step, e.ndcg});
  data.header = {
      {"format", "synthq-checkpoint"},
      {"config", s.cfg.to_json()},
      {"config_hash", s.cfg.hash()},
      {"data_fingerprint", s.fingerprint},
      {"rng_state", rng_state(s.rng)},
      {"epoch", s.epoch},
      {"step", s.adam.step},
      {"best_ndcg", s.best_ndcg},
      {"best_epoch", s.best_epoch},
      {"initial_ndcg", s.initial_ndcg},
      {"steps", steps},
      {"evals", evals},
  };
  const auto p = s.encoder.projection();
  data.projection.assign(p.begin(), p.end());
  data.adam_m = s.adam.m;
  data.adam_v = s.adam.v;
  data.best_projection = s.best_projection;
  detail::write_checkpoint(path, data);
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint, std::vector<WeightedPair> pairs,
                        const Corpus& corpus) {
  auto data = detail::read_checkpoint(checkpoint);
  const auto& h = data.header;
  try {
    auto cfg = TrainConfig::from_json(h.at("config"));
    if (cfg.hash() != h.at("config_hash").get<std::string>()) {
      throw Error("checkpoint " + checkpoint.string() + ": config hash mismatch");
    }
    auto state = std::make_unique<State>(cfg, pairs, corpus);
    if (state->fingerprint != h.at("data_fingerprint").get<std::string>()) {
      throw Error("checkpoint " + checkpoint.string() + " was trained on different pairs or documents");
    }
    const std::size_t n = state->encoder.projection().size();
    if (data.projection.size() != n || data.best_projection.size() != n ||
        (!data.adam_m.empty() && data.adam_m.size() != n) || data.adam_m.size() != data.adam_v.size()) {
      throw Error("checkpoint " + checkpoint.string() + ": array sizes do not match config");
    }
    std::copy(data.projection.begin(), data.projection.end(), state->encoder.projection().begin());
    state->adam.m = std::move(data.adam_m);
    state->adam.v = std::move(data.adam_v);
    state->adam.step = h.at("step").get<std::uint64_t>();
    std::istringstream rs(h.at("rng_state").get<std::string>());
    rs >> state->rng;
    if (!rs) throw Error("checkpoint " + checkpoint.string() + ": bad rng state");
    state->epoch = h.at("epoch").get<unsigned>();
    state->best_ndcg = h.at("best_ndcg").get<double>();
    state->best_epoch = h.at("best_epoch").get<unsigned>();
    state->initial_ndcg = h.at("initial_ndcg").get<double>();
    state->best_projection = std::move(data.best_projection);
    for (const auto& l : h.at("steps")) state->steps.push_back({l.at(0).get<std::uint64_t>(), l.at(1).get<double>()});
    for (const auto& e : h.at("evals")) {
      state->evals.push_back({e.at(0).get<unsigned>(), e.at(1).get<std::uint64_t>(), e.at(2).get<double>()});
    }
    return Trainer(std::move(state));
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint " + checkpoint.string() + ": malformed header (" + e.what() + ")");
  }
}

TrainResult train(const std::vector<WeightedPair>& pairs, const Corpus& corpus, const TrainConfig& cfg) {
  Trainer trainer(cfg, pairs, corpus);
  return trainer.run();
}

ToyEncoder load_encoder(const std::filesystem::path& checkpoint) {
  auto data = detail::read_checkpoint(checkpoint);
  try {
    const auto cfg = TrainConfig::from_json(data.header.at("config"));
    ToyEncoder enc(cfg.hash_dim, cfg.embed_dim, cfg.scale, cfg.tokenizer);
    if (data.best_projection.size() != enc.projection().size()) {
      throw Error("checkpoint " + checkpoint.string() + ": projection size does not match config");
    }
    std::copy(data.best_projection.begin(), data.best_projection.end(), enc.projection().begin());
    return enc;
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint " + checkpoint.string() + ": malformed header (" + e.what() + ")");
  }
}

}  // namespace synthq
