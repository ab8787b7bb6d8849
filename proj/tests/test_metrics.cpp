#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/errors.hpp"
#include "core/metrics.hpp"
#include "core/rng.hpp"

using namespace sdda;
using namespace sdda::metrics;

TEST_CASE("kappa reproduces the published table anchors") {
  CHECK(std::abs(kappa(0.6775, 4) - 0.570) < 0.0005);
  CHECK(std::abs(kappa(0.80, 2) - 0.600) < 1e-12);
  CHECK(kappa(0.25, 4) == doctest::Approx(0.0));
  CHECK(kappa(1.0, 7) == doctest::Approx(1.0));
}

TEST_CASE("kappa is affine in accuracy") {
  for (int C : {2, 3, 4, 9}) {
    const double k0 = kappa(1.0 / C, C);
    const double k1 = kappa(1.0, C);
    CHECK(k0 == doctest::Approx(0.0));
    CHECK(k1 == doctest::Approx(1.0));
    // Midpoint maps to the midpoint.
    const double mid = 0.5 * (1.0 / C + 1.0);
    CHECK(kappa(mid, C) == doctest::Approx(0.5));
  }
  CHECK_THROWS_AS(kappa(0.5, 1), Error);
  CHECK_THROWS_AS(kappa(1.5, 4), Error);
}

namespace {
// A labeled set plus a model evaluated on it. The trials are tiny; only the
// evaluation bookkeeping is under test here.
struct Fixture {
  models::ModelSpec spec = models::build_eegnet(3, 64, 4);
  models::ParamStore store;
  data::TrialSet set;
  Fixture() {
    Rng rng(4);
    store = models::ParamStore::init(spec, rng);
    set.n = 16;
    set.E = 3;
    set.T = 64;
    set.fs = 64;
    set.C = 4;
    set.values.resize(static_cast<size_t>(set.n) * set.E * set.T);
    for (auto& v : set.values) v = rng.normal();
    for (int i = 0; i < set.n; ++i) set.labels.push_back(static_cast<int16_t>(i % 4));
  }
};
}  // namespace

TEST_CASE("evaluate ties out with its own confusion matrix") {
  Fixture f;
  const EvalReport report = evaluate(f.spec, f.store, f.set);
  CHECK(report.n == f.set.n);
  int64_t trace = 0, total = 0;
  for (int c = 0; c < report.C; ++c) {
    int64_t row_sum = 0;
    for (int p = 0; p < report.C; ++p) {
      row_sum += report.confusion[static_cast<size_t>(c)][static_cast<size_t>(p)];
      total += report.confusion[static_cast<size_t>(c)][static_cast<size_t>(p)];
    }
    CHECK(row_sum == 4);  // balanced fixture: 4 trials per class
    trace += report.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
  }
  CHECK(total == report.n);
  CHECK(report.accuracy == doctest::Approx(static_cast<double>(trace) / report.n));
  CHECK(report.kappa == doctest::Approx(kappa(report.accuracy, report.C)));
}

TEST_CASE("evaluate is invariant to trial order") {
  Fixture f;
  const EvalReport a = evaluate(f.spec, f.store, f.set);
  // Reverse the trials.
  data::TrialSet reversed = f.set;
  for (int i = 0; i < f.set.n; ++i) {
    const double* src = f.set.trial(f.set.n - 1 - i);
    std::copy(src, src + static_cast<int64_t>(f.set.E) * f.set.T, reversed.trial(i));
    reversed.labels[static_cast<size_t>(i)] =
        f.set.labels[static_cast<size_t>(f.set.n - 1 - i)];
  }
  const EvalReport b = evaluate(f.spec, f.store, reversed);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.kappa == b.kappa);
}

TEST_CASE("evaluate rejects mismatched shapes and unlabeled sets") {
  Fixture f;
  data::TrialSet wrong = f.set;
  wrong.E = 4;
  wrong.values.resize(static_cast<size_t>(wrong.n) * wrong.E * wrong.T);
  CHECK_THROWS_AS(evaluate(f.spec, f.store, wrong), Error);
  data::TrialSet unlabeled = f.set;
  unlabeled.labels.clear();
  CHECK_THROWS_AS(evaluate(f.spec, f.store, unlabeled), Error);
}

TEST_CASE("report table aggregates repetitions and emits both layouts") {
  std::vector<ReportRow> rows{
      {"vanilla", "p1", 0.70}, {"vanilla", "p1", 0.80}, {"vanilla", "p2", 0.60},
      {"sdda", "p1", 0.90},    {"sdda", "p2", 0.85},
  };
  const ReportTable table = ReportTable::aggregate(rows, 2);
  REQUIRE(table.methods.size() == 2);
  REQUIRE(table.participants.size() == 2);
  CHECK(table.mean_acc[0][0] == doctest::Approx(0.75));  // vanilla p1, mean of two reps
  CHECK(table.average_acc[0] == doctest::Approx((0.75 + 0.60) / 2));
  CHECK(table.average_kappa[1] == doctest::Approx(kappa((0.90 + 0.85) / 2, 2)));
  const std::string csv = table.to_csv();
  CHECK(csv.find("method,p1,p2,average_acc,average_kappa") != std::string::npos);
  CHECK(csv.find("vanilla,75.00,60.00") != std::string::npos);
  const std::string text = table.to_text();
  CHECK(text.find("average acc (kappa)") != std::string::npos);
  CHECK(text.find("87.50(0.750)") != std::string::npos);
}
