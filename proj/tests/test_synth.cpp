#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "core/errors.hpp"
#include "core/synth.hpp"
#include "support/oracles.hpp"

using namespace sdda;
using namespace sdda::data;

TEST_CASE("class balance is exact and labels cover every class") {
  SynthConfig cfg;
  cfg.trials_per_domain = 64;
  auto [source, target] = generate_synthetic(cfg);
  for (const TrialSet* set : {&source, &target}) {
    std::vector<int> counts(static_cast<size_t>(cfg.classes), 0);
    for (auto l : set->labels) ++counts[static_cast<size_t>(l)];
    for (int c = 0; c < cfg.classes; ++c) {
      CHECK(counts[static_cast<size_t>(c)] == cfg.trials_per_domain / cfg.classes);
    }
    CHECK(set->n == cfg.trials_per_domain);
    CHECK(set->E == cfg.channels);
    CHECK(set->T == cfg.samples);
  }
  CHECK(source.sessions[0] == 1);
  CHECK(target.sessions[0] == 2);
}

TEST_CASE("generation is deterministic in the config") {
  SynthConfig cfg;
  cfg.trials_per_domain = 16;
  cfg.samples = 128;
  auto [s1, t1] = generate_synthetic(cfg);
  auto [s2, t2] = generate_synthetic(cfg);
  CHECK(s1.values == s2.values);
  CHECK(t1.values == t2.values);
  CHECK(s1.labels == s2.labels);
  cfg.seed += 1;
  auto [s3, t3] = generate_synthetic(cfg);
  CHECK(s1.values != s3.values);
}

TEST_CASE("invalid configs are rejected") {
  SynthConfig cfg;
  cfg.trials_per_domain = 7;  // not divisible by classes
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = SynthConfig{};
  cfg.burst_high_hz = 100.0;  // above Nyquist at fs 128
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = SynthConfig{};
  cfg.rhythm_channels_per_class = 5;  // 2*5 > 8 channels
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
}

TEST_CASE("config text round trips") {
  SynthConfig cfg;
  cfg.shift = 0.75;
  cfg.seed = 99;
  cfg.erd_depth = 0.6;
  const SynthConfig back = SynthConfig::from_config(Config::parse(cfg.to_config().serialize()));
  CHECK(back.shift == cfg.shift);
  CHECK(back.seed == cfg.seed);
  CHECK(back.erd_depth == cfg.erd_depth);
  CHECK(back.channels == cfg.channels);
}

TEST_CASE("a band-power probe separates the classes at zero shift") {
  SynthConfig cfg;
  cfg.shift = 0.0;
  cfg.trials_per_domain = 96;
  auto [source, target] = generate_synthetic(cfg);
  const auto train_x = oracles::band_power_matrix(source, cfg.burst_low_hz, cfg.burst_high_hz);
  const auto test_x = oracles::band_power_matrix(target, cfg.burst_low_hz, cfg.burst_high_hz);
  std::vector<int> train_y(source.labels.begin(), source.labels.end());
  std::vector<int> test_y(target.labels.begin(), target.labels.end());
  const double acc =
      oracles::logistic_probe_accuracy(train_x, train_y, test_x, test_y, cfg.classes);
  CHECK(acc >= 0.95);
}

TEST_CASE("zero shift passes a two-sample permutation test") {
  SynthConfig cfg;
  cfg.shift = 0.0;
  cfg.trials_per_domain = 48;
  auto [source, target] = generate_synthetic(cfg);
  const auto a = oracles::band_power_matrix(source, cfg.burst_low_hz, cfg.burst_high_hz);
  const auto b = oracles::band_power_matrix(target, cfg.burst_low_hz, cfg.burst_high_hz);
  const double p = oracles::mmd_permutation_pvalue(a, b, 200, 1234);
  CHECK(p > 0.05);
}

TEST_CASE("the default shift moves the band-power distribution") {
  SynthConfig cfg;  // shift = 0.5
  cfg.trials_per_domain = 48;
  auto [source, target] = generate_synthetic(cfg);
  const auto a = oracles::band_power_matrix(source, cfg.burst_low_hz, cfg.burst_high_hz);
  const auto b = oracles::band_power_matrix(target, cfg.burst_low_hz, cfg.burst_high_hz);
  const double p = oracles::mmd_permutation_pvalue(a, b, 200, 1234);
  CHECK(p < 0.05);
}
