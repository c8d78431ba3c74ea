#include "synthq/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "synthq/error.hpp"

namespace synthq {

std::string_view to_string(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::uniform: return "uniform";
    case WeightScheme::cw: return "cw";
    case WeightScheme::ri: return "ri";
    case WeightScheme::ri_times_cw: return "ri_times_cw";
  }
  return "?";
}

WeightScheme parse_weight_scheme(std::string_view name) {
  if (name == "uniform") return WeightScheme::uniform;
  if (name == "cw") return WeightScheme::cw;
  if (name == "ri") return WeightScheme::ri;
  if (name == "ri_times_cw") return WeightScheme::ri_times_cw;
  throw Error("unknown weight scheme \"" + std::string(name) + "\"");
}

void WeightConfig::validate() const {
  if (!(kappa_cw > 0.0)) throw Error("kappa_cw must be positive");
  if (!(kappa_ri > 0.0)) throw Error("kappa_ri must be positive");
}

std::vector<double> cw_weights(std::span<const std::uint32_t> batch_cws, double kappa) {
  if (batch_cws.empty()) throw Error("cw_weights: empty batch");
  if (!(kappa > 0.0)) throw Error("cw_weights: kappa must be positive");
  std::vector<double> truncated;
  truncated.reserve(batch_cws.size());
  for (auto cw : batch_cws) truncated.push_back(std::min(static_cast<double>(cw), kappa));
  double total = 0.0;
  for (double t : truncated) total += t;
  if (total == 0.0) throw Error("degenerate batch: zero total CW");
  // Multiply before dividing so equal entries normalize to exactly 1.0.
  const auto n = static_cast<double>(truncated.size());
  for (auto& t : truncated) t = t * n / total;
  return truncated;
}

double reasoning_index(double loss_q, double loss_q_prime, double kappa) {
  if (!(loss_q_prime > 0.0)) throw Error("reasoning_index: augmented-query loss must be positive");
  if (!(loss_q >= 0.0)) throw Error("reasoning_index: loss must be non-negative");
  return std::min(loss_q / loss_q_prime, kappa);
}

std::vector<double> compose_and_normalize(std::span<const double> raw) {
  if (raw.empty()) throw Error("compose_and_normalize: empty batch");
  double total = 0.0;
  for (double r : raw) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw Error("compose_and_normalize: raw weights must be finite and >= 0");
    total += r;
  }
  if (total == 0.0) throw Error("degenerate batch: zero total weight");
  const auto n = static_cast<double>(raw.size());
  std::vector<double> out(raw.begin(), raw.end());
  for (auto& w : out) w = w * n / total;
  return out;
}

std::vector<double> batch_weights(const WeightConfig& cfg, std::span<const std::uint32_t> cws,
                                  std::span<const double> ri) {
  switch (cfg.scheme) {
    case WeightScheme::uniform:
      return std::vector<double>(cws.size(), 1.0);
    case WeightScheme::cw:
      return cw_weights(cws, cfg.kappa_cw);
    case WeightScheme::ri:
      if (ri.size() != cws.size()) throw Error("ri scheme: reasoning index missing for batch");
      return compose_and_normalize(ri);
    case WeightScheme::ri_times_cw: {
      if (ri.size() != cws.size()) throw Error("ri_times_cw scheme: reasoning index missing for batch");
      std::vector<double> raw(cws.size());
      for (std::size_t i = 0; i < cws.size(); ++i) {
        raw[i] = ri[i] * std::min(static_cast<double>(cws[i]), cfg.kappa_cw);
      }
      return compose_and_normalize(raw);
    }
  }
  throw Error("unknown weight scheme");
}

}  // namespace synthq
