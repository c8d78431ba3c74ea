#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "synthq/error.hpp"
#include "synthq/random.hpp"
#include "synthq/weighting.hpp"

using namespace synthq;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mean(const std::vector<double>& w) {
  return std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
}

std::vector<std::uint32_t> random_batch(Rng& rng) {
  std::vector<std::uint32_t> cws(1 + uniform_index(rng, 64));
  for (auto& c : cws) c = static_cast<std::uint32_t>(uniform_index(rng, 200));
  if (std::all_of(cws.begin(), cws.end(), [](auto c) { return c == 0; })) cws[0] = 1;
  return cws;
}

}  // namespace

TEST_CASE("cw weight examples") {
  using V = std::vector<double>;
  using C = std::vector<std::uint32_t>;
  CHECK(cw_weights(C{4, 4, 4, 4}, 100) == V{1, 1, 1, 1});
  CHECK(cw_weights(C{2, 6}, 100) == V{0.5, 1.5});
  const auto t = cw_weights(C{150, 50}, 100);
  CHECK(t[0] == doctest::Approx(200.0 / 150.0).epsilon(1e-15));
  CHECK(t[1] == doctest::Approx(100.0 / 150.0).epsilon(1e-15));
  CHECK_THROWS_WITH_AS(cw_weights(C{0, 0}, 100), "degenerate batch: zero total CW", Error);
  CHECK_THROWS_AS(cw_weights(C{}, 100), Error);
  CHECK_THROWS_AS(cw_weights(C{1}, 0), Error);
}

TEST_CASE("reasoning index branches") {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const double x = 1e-3 + uniform01(rng) * 50.0;
    CHECK(reasoning_index(x, x, 5.0) == 1.0);
    CHECK(reasoning_index(10.0 * x, x, 5.0) == 5.0);
    CHECK(reasoning_index(2.5 * x, x, 5.0) == doctest::Approx(2.5).epsilon(1e-15));
  }
  CHECK(reasoning_index(1.0, 1.0, 5.0) == 1.0);
  CHECK_THROWS_AS(reasoning_index(1.0, 0.0, 5.0), Error);
  CHECK_THROWS_AS(reasoning_index(1.0, -1.0, 5.0), Error);
}

TEST_CASE("compose and normalize examples") {
  using V = std::vector<double>;
  CHECK(compose_and_normalize(V{1, 1, 1}) == V{1, 1, 1});
  CHECK(compose_and_normalize(V{1, 3}) == V{0.5, 1.5});
  WeightConfig cfg;
  cfg.scheme = WeightScheme::ri_times_cw;
  const std::vector<std::uint32_t> cws = {10, 5};
  CHECK(batch_weights(cfg, cws, V{1, 2}) == V{1, 1});
  CHECK_THROWS_AS(compose_and_normalize(V{0, 0}), Error);
  CHECK_THROWS_AS(compose_and_normalize(V{1, -1}), Error);
  CHECK_THROWS_AS(compose_and_normalize(V{}), Error);
}

TEST_CASE("batch weights by scheme") {
  const std::vector<std::uint32_t> cws = {2, 6};
  WeightConfig cfg;
  CHECK(batch_weights(cfg, cws) == std::vector<double>{1, 1});
  cfg.scheme = WeightScheme::cw;
  CHECK(batch_weights(cfg, cws) == std::vector<double>{0.5, 1.5});
  cfg.scheme = WeightScheme::ri;
  CHECK_THROWS_AS(batch_weights(cfg, cws), Error);
  CHECK(batch_weights(cfg, cws, std::vector<double>{3, 1}) == std::vector<double>{1.5, 0.5});
}

TEST_CASE("weight config and scheme names") {
  CHECK(parse_weight_scheme("ri_times_cw") == WeightScheme::ri_times_cw);
  CHECK(to_string(WeightScheme::cw) == "cw");
  CHECK_THROWS_AS(parse_weight_scheme("bogus"), Error);
  WeightConfig cfg;
  CHECK(cfg.kappa_cw == 100.0);
  CHECK(cfg.kappa_ri == 5.0);
  cfg.kappa_ri = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("cw weight properties over 1000 random batches") {
  Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto cws = random_batch(rng);
    const double kappa = static_cast<double>(1 + uniform_index(rng, 150));
    const auto w = cw_weights(cws, kappa);
    CAPTURE(trial);

    // Mean one.
    CHECK(std::abs(mean(w) - 1.0) <= 1e-9);
    for (double x : w) CHECK((std::isfinite(x) && x >= 0.0));

    // Scale invariance (no truncation so scaling cannot cross kappa).
    const auto c = static_cast<std::uint32_t>(2 + uniform_index(rng, 9));
    auto scaled = cws;
    for (auto& s : scaled) s *= c;
    const auto base = cw_weights(cws, kInf);
    const auto after = cw_weights(scaled, kInf);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(after[i] == doctest::Approx(base[i]).epsilon(1e-12));

    // Monotonicity within a batch.
    for (std::size_t i = 0; i < cws.size(); ++i) {
      for (std::size_t j = 0; j < cws.size(); ++j) {
        if (cws[i] <= cws[j]) CHECK(w[i] <= w[j]);
      }
    }

    // Truncation idempotence.
    auto truncated = cws;
    for (auto& t : truncated) t = std::min<std::uint32_t>(t, static_cast<std::uint32_t>(kappa));
    CHECK(cw_weights(truncated, kInf) == w);
  }
}

TEST_CASE("compose_and_normalize properties") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> raw(1 + uniform_index(rng, 32));
    for (auto& r : raw) r = uniform01(rng) * 10.0;
    raw[0] += 0.1;
    const auto w = compose_and_normalize(raw);
    CHECK(std::abs(mean(w) - 1.0) <= 1e-9);
    const double c = 0.01 + uniform01(rng) * 100.0;
    auto scaled = raw;
    for (auto& s : scaled) s *= c;
    const auto ws = compose_and_normalize(scaled);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(ws[i] == doctest::Approx(w[i]).epsilon(1e-12));
  }
}
