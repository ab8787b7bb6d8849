#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/errors.hpp"
#include "core/losses.hpp"
#include "core/rng.hpp"
#include "support/oracles.hpp"

using namespace sdda;
using namespace sdda::ad;
using namespace sdda::losses;

TEST_CASE("softmax loss at uniform logits is ln C") {
  Tape tape;
  auto logits = tape.leaf(Tensor::zeros({3, 4}));
  auto loss = softmax_loss(tape, logits, {0, 1, 3});
  CHECK(tape.value(loss).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("saturated softmax with the right label goes to zero") {
  Tape tape;
  Tensor t({1, 3});
  t[0] = 200.0;  // close to the +inf limit without overflowing exp(l - max)
  auto loss = softmax_loss(tape, tape.leaf(std::move(t)), {0});
  CHECK(tape.value(loss).item() < 1e-12);
  CHECK(tape.value(loss).item() >= 0.0);
}

TEST_CASE("softmax loss matches the high-precision direct evaluation") {
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(rng.below(6));
    const int c = 2 + static_cast<int>(rng.below(5));
    Tensor logits = Tensor::randn({n, c}, rng);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.below(static_cast<uint32_t>(c))));
    Tape tape;
    auto loss = softmax_loss(tape, tape.leaf(logits), labels);
    CHECK(tape.value(loss).item() ==
          doctest::Approx(oracles::softmax_ce_reference(logits, labels)).epsilon(1e-12));
  }
}

TEST_CASE("out-of-range labels are rejected") {
  Tape tape;
  auto logits = tape.leaf(Tensor::zeros({2, 3}));
  CHECK_THROWS_AS(softmax_loss(tape, logits, {0, 3}), Error);
  CHECK_THROWS_AS(softmax_loss(tape, logits, {-1, 0}), Error);
}

namespace {
CenterBank axis_bank(int C, int L, double gamma = 0.5) {
  CenterBank bank;
  bank.gamma = gamma;
  bank.update_counts.assign(static_cast<size_t>(C), 0);
  bank.centers = Tensor::zeros({C, L});
  for (int c = 0; c < C; ++c) bank.centers[static_cast<int64_t>(c) * L + c] = 1.0;
  return bank;
}
}  // namespace

TEST_CASE("cosine center loss endpoints") {
  const int L = 4;
  CenterBank bank = axis_bank(3, L);
  Tape tape;
  // Parallel to the class-0 center.
  {
    Tensor h = Tensor::zeros({2, L});
    h[0] = 7.0;
    h[static_cast<int64_t>(L)] = 0.3;
    Tape t2;
    auto loss = cosine_center_loss(t2, t2.leaf(std::move(h)), {0, 0}, bank);
    CHECK(t2.value(loss).item() == doctest::Approx(0.0).epsilon(1e-12));
  }
  // Orthogonal.
  {
    Tensor h = Tensor::zeros({1, L});
    h[3] = 2.0;
    Tape t2;
    auto loss = cosine_center_loss(t2, t2.leaf(std::move(h)), {0}, bank);
    CHECK(t2.value(loss).item() == doctest::Approx(1.0));
  }
  // Antiparallel: the documented upper end of the range.
  {
    Tensor h = Tensor::zeros({1, L});
    h[0] = -5.0;
    Tape t2;
    auto loss = cosine_center_loss(t2, t2.leaf(std::move(h)), {0}, bank);
    CHECK(t2.value(loss).item() == doctest::Approx(2.0));
  }
}

TEST_CASE("cosine center loss stays in [0,2] and matches the direct form") {
  Rng rng(13);
  for (int rep = 0; rep < 500; ++rep) {
    const int b = 1 + static_cast<int>(rng.below(6));
    const int L = 2 + static_cast<int>(rng.below(6));
    const int C = 2 + static_cast<int>(rng.below(3));
    Tensor emb = Tensor::randn({b, L}, rng);
    for (int64_t i = 0; i < emb.numel(); ++i) emb[i] *= std::exp(2.0 * rng.normal());
    Tensor centers = Tensor::randn({C, L}, rng);
    std::vector<int> labels;
    for (int i = 0; i < b; ++i) labels.push_back(static_cast<int>(rng.below(static_cast<uint32_t>(C))));
    CenterBank bank;
    bank.centers = centers;
    bank.update_counts.assign(static_cast<size_t>(C), 0);
    Tape tape;
    auto loss = cosine_center_loss(tape, tape.leaf(emb), labels, bank);
    const double v = tape.value(loss).item();
    CHECK(v >= 0.0);
    CHECK(v <= 2.0);
    CHECK(v == doctest::Approx(oracles::cosine_center_reference(emb, labels, centers))
                   .epsilon(1e-12));
  }
}

TEST_CASE("cosine center loss is scale invariant") {
  Rng rng(19);
  Tensor emb = Tensor::randn({4, 6}, rng);
  CenterBank bank;
  bank.centers = Tensor::randn({2, 6}, rng);
  bank.update_counts.assign(2, 0);
  const std::vector<int> labels{0, 1, 1, 0};
  auto value = [&](const Tensor& e, const CenterBank& bk) {
    Tape tape;
    return tape.value(cosine_center_loss(tape, tape.leaf(e), labels, bk)).item();
  };
  const double base = value(emb, bank);
  Tensor scaled = emb;
  for (int k = 0; k < 6; ++k) scaled[k] *= 37.0;  // rescale one embedding row
  CHECK(value(scaled, bank) == doctest::Approx(base).epsilon(1e-12));
  CenterBank bank_scaled = bank;
  for (int k = 0; k < 6; ++k) bank_scaled.centers[k] *= 0.01;  // rescale one center
  CHECK(value(emb, bank_scaled) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("center updates move only the classes present") {
  Rng rng(7);
  CenterBank bank = CenterBank::init(3, 4, 0.5, rng);
  const Tensor before = bank.centers;
  Tensor emb = Tensor::randn({2, 4}, rng);
  update_centers(bank, emb, {0, 0});
  bool class0_moved = false;
  for (int k = 0; k < 4; ++k) {
    if (bank.centers[k] != before[k]) class0_moved = true;
    CHECK(bank.centers[static_cast<int64_t>(1) * 4 + k] == before[static_cast<int64_t>(1) * 4 + k]);
    CHECK(bank.centers[static_cast<int64_t>(2) * 4 + k] == before[static_cast<int64_t>(2) * 4 + k]);
  }
  CHECK(class0_moved);
  CHECK(bank.update_counts[0] == 1);
  CHECK(bank.update_counts[1] == 0);
}

TEST_CASE("a member equal to its center produces no movement") {
  Rng rng(8);
  CenterBank bank = CenterBank::init(2, 5, 0.5, rng);
  Tensor emb({1, 5});
  for (int k = 0; k < 5; ++k) emb[k] = 3.0 * bank.centers[k];  // same direction
  const Tensor before = bank.centers;
  update_centers(bank, emb, {0});
  for (int64_t k = 0; k < before.numel(); ++k) {
    CHECK(bank.centers[k] == doctest::Approx(before[k]).epsilon(1e-12));
  }
}

TEST_CASE("m identical members pull the center by gamma*m/(1+m)") {
  Rng rng(9);
  const int L = 6, m = 5;
  const double gamma = 0.4;
  CenterBank bank = CenterBank::init(2, L, gamma, rng);
  Tensor h({1, L});
  for (int k = 0; k < L; ++k) h[k] = rng.normal();
  double norm = 0;
  for (int k = 0; k < L; ++k) norm += h[k] * h[k];
  norm = std::sqrt(norm);
  Tensor batch({m, L});
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < L; ++k) batch[static_cast<int64_t>(i) * L + k] = h[k];
  }
  const Tensor before = bank.centers;
  update_centers(bank, batch, std::vector<int>(m, 1));
  const double factor = gamma * m / (1.0 + m);
  for (int k = 0; k < L; ++k) {
    const double hbar = h[k] / norm;
    const double expected = before[static_cast<int64_t>(1) * L + k] +
                            factor * (hbar - before[static_cast<int64_t>(1) * L + k]);
    CHECK(bank.centers[static_cast<int64_t>(1) * L + k] ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("mmd of identical batches is exactly zero") {
  Rng rng(21);
  Tensor h = Tensor::randn({6, 5}, rng);
  Tape tape;
  auto loss = mmd_loss(tape, tape.leaf(h), tape.leaf(h), {0.5, 1.0, 2.0});
  CHECK(tape.value(loss).item() == 0.0);
}

TEST_CASE("single-sample domains reduce to the closed form") {
  Rng rng(22);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor x = Tensor::randn({1, 4}, rng);
    Tensor y = Tensor::randn({1, 4}, rng);
    const double s2 = 0.3 + rng.uniform();
    double d2 = 0;
    for (int k = 0; k < 4; ++k) {
      const double d = x[k] - y[k];
      d2 += d * d;
    }
    Tape tape;
    auto loss = mmd_loss(tape, tape.leaf(x), tape.leaf(y), {s2});
    CHECK(tape.value(loss).item() ==
          doctest::Approx(2.0 - 2.0 * std::exp(-d2 / (2.0 * s2))).epsilon(1e-12));
  }
}

TEST_CASE("mmd matches the brute-force oracle on 16x8 batches") {
  Rng rng(23);
  for (int rep = 0; rep < 25; ++rep) {
    Tensor hs = Tensor::randn({16, 8}, rng);
    Tensor ht = Tensor::randn({16, 8}, rng);
    const std::vector<double> bw = median_bandwidths(hs, ht, {0.25, 0.5, 1, 2, 4});
    Tape tape;
    auto loss = mmd_loss(tape, tape.leaf(hs), tape.leaf(ht), bw);
    const double expected = oracles::mmd_reference(hs, ht, bw);
    CHECK(tape.value(loss).item() == doctest::Approx(expected).epsilon(1e-10));
    CHECK(tape.value(loss).item() >= -1e-12);
  }
}

TEST_CASE("mmd is symmetric and invariant to row permutations") {
  Rng rng(24);
  Tensor hs = Tensor::randn({8, 5}, rng);
  Tensor ht = Tensor::randn({8, 5}, rng);
  const std::vector<double> bw{1.0, 4.0};
  auto value = [&](const Tensor& a, const Tensor& b) {
    Tape tape;
    return tape.value(mmd_loss(tape, tape.leaf(a), tape.leaf(b), bw)).item();
  };
  CHECK(value(hs, ht) == doctest::Approx(value(ht, hs)).epsilon(1e-14));
  Tensor perm({8, 5});
  const int order[8] = {3, 1, 7, 0, 5, 2, 6, 4};
  for (int i = 0; i < 8; ++i) {
    for (int k = 0; k < 5; ++k) {
      perm[static_cast<int64_t>(i) * 5 + k] = hs[static_cast<int64_t>(order[i]) * 5 + k];
    }
  }
  CHECK(value(perm, ht) == doctest::Approx(value(hs, ht)).epsilon(1e-12));
}

TEST_CASE("mmd shrinks to zero as the bandwidth grows") {
  Rng rng(25);
  Tensor hs = Tensor::randn({6, 4}, rng);
  Tensor ht = Tensor::randn({6, 4}, rng);
  auto value = [&](double s2) {
    Tape tape;
    return tape.value(mmd_loss(tape, tape.leaf(hs), tape.leaf(ht), {s2})).item();
  };
  double prev = value(1.0);
  for (double s2 : {10.0, 100.0, 1e4, 1e6}) {
    const double v = value(s2);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
  CHECK(prev < 1e-5);
  // Continuity probe: a small bandwidth change moves the value slightly.
  CHECK(std::abs(value(1.0) - value(1.001)) < 1e-3);
}

TEST_CASE("empty batches are rejected") {
  Tape tape;
  auto a = tape.leaf(Tensor({0, 4}));
  auto b = tape.leaf(Tensor({0, 4}));
  CHECK_THROWS_AS(mmd_loss(tape, a, b, {1.0}), Error);
}

TEST_CASE("total loss arithmetic and reduction") {
  CHECK(total_loss_value(1.0, 0.5, 0.2, {2.0, 10.0}) == doctest::Approx(4.0));
  Tape tape;
  auto ls = tape.leaf(Tensor::scalar(0.7));
  auto lc = tape.leaf(Tensor::scalar(0.3));
  auto ld = tape.leaf(Tensor::scalar(0.1));
  // lambda = (0,0) returns the softmax node itself, bit for bit.
  CHECK(total_loss(tape, ls, lc, ld, {0.0, 0.0}) == ls);
  auto combined = total_loss(tape, ls, lc, ld, {2.0, 10.0});
  CHECK(tape.value(combined).item() == doctest::Approx(0.7 + 0.6 + 1.0));
}

TEST_CASE("NaN components are rejected by name") {
  Tape tape;
  auto ls = tape.leaf(Tensor::scalar(std::nan("")));
  CHECK_THROWS_WITH_AS(total_loss(tape, ls, std::nullopt, std::nullopt, {0, 0}),
                       doctest::Contains("softmax"), Error);
  auto good = tape.leaf(Tensor::scalar(1.0));
  auto bad = tape.leaf(Tensor::scalar(std::nan("")));
  CHECK_THROWS_WITH_AS(total_loss(tape, good, bad, std::nullopt, {1.0, 0}),
                       doctest::Contains("center"), Error);
  CHECK_THROWS_WITH_AS(total_loss(tape, good, std::nullopt, bad, {0, 1.0}),
                       doctest::Contains("discrepancy"), Error);
}

TEST_CASE("gradient of the total equals the weighted component sum") {
  Rng rng(31);
  const int b = 4, L = 5, C = 2;
  Tensor emb = Tensor::randn({b, L}, rng);
  Tensor emb_t = Tensor::randn({b, L}, rng);
  Tensor logits = Tensor::randn({b, C}, rng);
  CenterBank bank = CenterBank::init(C, L, 0.5, rng);
  const std::vector<int> labels{0, 1, 0, 1};
  const std::vector<double> bw{1.0, 2.0};
  const LossWeights w{1.7, 0.3};

  auto grads = [&](double l1, double l2) {
    Tape tape;
    auto er = tape.leaf(emb, true);
    auto lr = tape.leaf(logits, true);
    auto tr = tape.leaf(emb_t, false);
    auto ls = softmax_loss(tape, lr, labels);
    auto lc = cosine_center_loss(tape, er, labels, bank);
    auto ld = mmd_loss(tape, er, tr, bw);
    auto total = total_loss(tape, ls, lc, ld, {l1, l2});
    tape.backward(total);
    std::vector<double> g = tape.has_grad(er) ? tape.grad(er).vec()
                                              : std::vector<double>(b * L, 0.0);
    const auto& gl = tape.grad(lr).vec();
    g.insert(g.end(), gl.begin(), gl.end());
    return g;
  };
  const auto combined = grads(w.lambda1, w.lambda2);
  const auto only_s = grads(0.0, 0.0);        // softmax part alone
  const auto only_c = grads(w.lambda1, 0.0);  // softmax + weighted center
  const auto only_d = grads(0.0, w.lambda2);  // softmax + weighted discrepancy
  double worst = 0;
  for (size_t i = 0; i < combined.size(); ++i) {
    const double expected = only_c[i] + only_d[i] - only_s[i];
    worst = std::max(worst, std::abs(combined[i] - expected));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("euclidean center loss is unbounded where the cosine form saturates") {
  Rng rng(41);
  CenterBank bank = CenterBank::init(2, 4, 0.5, rng);
  Tensor far({1, 4});
  for (int k = 0; k < 4; ++k) far[k] = -1000.0 * bank.centers[k];
  Tape tape;
  const double cosine = tape.value(cosine_center_loss(tape, tape.leaf(far), {0}, bank)).item();
  const double euclid = euclidean_center_loss_value(far, {0}, bank);
  CHECK(cosine <= 2.0);                 // bounded response to the outlier
  CHECK(euclid > 100.0 * cosine);       // squared distance keeps growing
}
