#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "synthq/corpus.hpp"
#include "synthq/encoder.hpp"
#include "synthq/random.hpp"
#include "synthq/weighting.hpp"

namespace synthq {

// ---------------------------------------------------------------------------
// Loss

struct InfoNceResult {
  double loss = 0.0;
  std::vector<double> per_sample;  // unweighted -log softmax at the positive
  std::vector<Vector> grad_queries;
  std::vector<Vector> grad_docs;
};

/// Weighted InfoNCE with in-batch negatives:
///   loss_i = -log softmax_j(scale * cos(q_i, d_j))[i]
///   total  = (1/|B|) * sum_i w_i * loss_i
/// Gradients are exact for arbitrary (non-normalized, non-zero) inputs.
InfoNceResult weighted_info_nce(std::span<const Vector> queries, std::span<const Vector> docs,
                                std::span<const double> weights, double scale);

// ---------------------------------------------------------------------------
// Optimizer

enum class LrSchedule { constant, cosine };

std::string_view to_string(LrSchedule s);
LrSchedule parse_lr_schedule(std::string_view name);

struct TrainConfig {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
  std::size_t batch_size = 32;
  unsigned epochs = 5;
  std::uint64_t seed = 0;
  WeightConfig weighting;
  LrSchedule lr_schedule = LrSchedule::constant;

  std::uint32_t hash_dim = 2048;
  std::uint32_t embed_dim = 128;
  double scale = 20.0;
  TokenizerSpec tokenizer;

  double validation_fraction = 0.1;
  std::size_t eval_k = 10;
  // Keep sibling queries of one document out of the same batch.
  bool exclusive_doc_batches = false;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  /// SHA-256 of the canonical JSON form.
  std::string hash() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// Scales `grads` in place so its L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(std::span<double> grads, double max_norm);

/// Learning-rate multiplier for update number `step` (1-based).
double lr_multiplier(LrSchedule schedule, std::uint64_t step, std::uint64_t total_steps);

/// One AdamW update: non-finite check, global norm clipping, decoupled weight
/// decay, bias-corrected moments. Increments state.step.
void adamw_step(std::span<double> params, std::span<double> grads, AdamState& state,
                const TrainConfig& cfg, std::uint64_t total_steps);

// ---------------------------------------------------------------------------
// Training

struct StepLog {
  std::uint64_t step;
  double loss;
};

struct EvalLog {
  unsigned epoch;  // 0 = before training
  std::uint64_t step;
  double ndcg;
};

struct TrainResult {
  ToyEncoder best;
  double best_ndcg = 0.0;
  unsigned best_epoch = 0;
  double initial_ndcg = 0.0;
  std::vector<StepLog> steps;
  std::vector<EvalLog> evals;
};

/// Seeded, single-threaded training of a ToyEncoder on (query, document)
/// pairs with per-batch weights from cfg.weighting. Validation NDCG@k is
/// computed on a seeded held-out slice of the pairs after every epoch; the
/// best-validation encoder is kept.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<WeightedPair> pairs, const Corpus& corpus);
  ~Trainer();
  Trainer(Trainer&&) noexcept;

  /// Restores a checkpoint written by save_checkpoint(). The pairs and
  /// corpus must be the ones the checkpoint was trained on.
  static Trainer resume(const std::filesystem::path& checkpoint, std::vector<WeightedPair> pairs,
                        const Corpus& corpus);

  void run_epoch();
  /// Runs the remaining epochs.
  TrainResult run();

  const TrainConfig& config() const;
  unsigned epochs_done() const;
  std::uint64_t steps_done() const;
  const ToyEncoder& current() const;
  TrainResult result() const;
  double validation_ndcg(const ToyEncoder& encoder) const;

  void save_checkpoint(const std::filesystem::path& path) const;

 private:
  struct State;
  explicit Trainer(std::unique_ptr<State> state);
  std::unique_ptr<State> s_;
};

TrainResult train(const std::vector<WeightedPair>& pairs, const Corpus& corpus, const TrainConfig& cfg);

/// Best-validation encoder stored in a checkpoint.
ToyEncoder load_encoder(const std::filesystem::path& checkpoint);

}  // namespace synthq
