#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/models.hpp"
#include "core/optimizer.hpp"
#include "core/rng.hpp"

using namespace sdda;
using namespace sdda::models;
using namespace sdda::train;

namespace {
// A bare two-parameter store, independent of any network.
ParamStore toy_store(const std::vector<double>& init) {
  ParamStore store;
  ParamEntry e;
  e.name = "theta";
  e.value = ad::Tensor({static_cast<int>(init.size())}, init);
  e.grad = ad::Tensor::zeros(e.value.shape());
  e.trainable = true;
  store.entries().push_back(std::move(e));
  return store;
}
}  // namespace

TEST_CASE("zero gradient and zero decay is a fixed point") {
  ParamStore store = toy_store({1.5, -2.0, 0.25});
  AdamWOptions opt;
  opt.eta = 0.1;
  opt.weight_decay = 0.0;
  AdamW adam(store, opt);
  const auto before = store.entries()[0].value.vec();
  for (int i = 0; i < 10; ++i) adam.step(store);
  CHECK(store.entries()[0].value.vec() == before);
}

TEST_CASE("first step size is about eta for any nonzero gradient") {
  for (double g : {1e-6, 0.01, 1.0, 250.0}) {
    ParamStore store = toy_store({0.0});
    AdamWOptions opt;
    opt.eta = 0.05;
    opt.weight_decay = 0.0;
    AdamW adam(store, opt);
    store.entries()[0].grad[0] = g;
    adam.step(store);
    // After bias correction the first update is -eta * g/(|g| + eps').
    CHECK(std::abs(store.entries()[0].value[0] + opt.eta) < opt.eta * 1e-2);
  }
}

TEST_CASE("decoupled decay pulls parameters without touching the moments") {
  ParamStore store = toy_store({2.0});
  AdamWOptions opt;
  opt.eta = 0.1;
  opt.weight_decay = 0.5;
  AdamW adam(store, opt);
  // Gradient stays zero: any movement comes from the decay term alone.
  adam.step(store);
  CHECK(store.entries()[0].value[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)));
  adam.step(store);
  CHECK(store.entries()[0].value[0] ==
        doctest::Approx(2.0 * (1.0 - 0.1 * 0.5) * (1.0 - 0.1 * 0.5)));
}

TEST_CASE("quadratic bowl converges within 2000 steps at eta 0.01") {
  ParamStore store = toy_store({3.0, -4.0, 1.5, 0.75});
  AdamWOptions opt;
  opt.eta = 0.01;
  opt.weight_decay = 0.0;
  AdamW adam(store, opt);
  for (int step = 0; step < 2000; ++step) {
    auto& e = store.entries()[0];
    for (int64_t k = 0; k < e.value.numel(); ++k) e.grad[k] = e.value[k];  // f = |x|^2/2
    adam.step(store);
  }
  double norm = 0;
  for (int64_t k = 0; k < store.entries()[0].value.numel(); ++k) {
    norm += store.entries()[0].value[k] * store.entries()[0].value[k];
  }
  CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("snapshot and restore reproduce the trajectory") {
  ParamStore store = toy_store({1.0, 2.0});
  AdamW adam(store, AdamWOptions{});
  Rng rng(3);
  auto noisy_step = [&] {
    auto& e = store.entries()[0];
    for (int64_t k = 0; k < e.value.numel(); ++k) e.grad[k] = e.value[k] + 0.1 * rng.normal();
    adam.step(store);
  };
  for (int i = 0; i < 5; ++i) noisy_step();
  const auto params_snap = store.snapshot();
  const auto opt_snap = adam.snapshot();
  Rng replay_a(77), replay_b(77);
  auto run_from = [&](Rng& r) {
    store.restore(params_snap);
    adam.restore(opt_snap);
    std::vector<double> out;
    for (int i = 0; i < 5; ++i) {
      auto& e = store.entries()[0];
      for (int64_t k = 0; k < e.value.numel(); ++k) e.grad[k] = e.value[k] + 0.1 * r.normal();
      adam.step(store);
    }
    return store.entries()[0].value.vec();
  };
  CHECK(run_from(replay_a) == run_from(replay_b));
}
