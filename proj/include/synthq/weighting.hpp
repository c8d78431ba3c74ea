#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace synthq {

enum class WeightScheme { uniform, cw, ri, ri_times_cw };

std::string_view to_string(WeightScheme scheme);
WeightScheme parse_weight_scheme(std::string_view name);

struct WeightConfig {
  double kappa_cw = 100.0;
  double kappa_ri = 5.0;
  WeightScheme scheme = WeightScheme::uniform;

  void validate() const;
};

/// w_i = min(cw_i, kappa) * |B| / sum_j min(cw_j, kappa). kappa may be
/// +infinity (no truncation). Throws on an empty batch or zero total.
std::vector<double> cw_weights(std::span<const std::uint32_t> batch_cws, double kappa);

/// min(loss_q / loss_q_prime, kappa) for the original query's loss and the
/// reasoning-augmented query's loss against the same positive document.
double reasoning_index(double loss_q, double loss_q_prime, double kappa);

/// raw_i * |B| / sum_j raw_j. Raw weights must be >= 0 with positive sum.
std::vector<double> compose_and_normalize(std::span<const double> raw);

/// Per-batch weights for `scheme`. `ri` is required for the reasoning-index
/// schemes and ignored otherwise.
std::vector<double> batch_weights(const WeightConfig& cfg, std::span<const std::uint32_t> cws,
                                  std::span<const double> ri = {});

}  // namespace synthq
