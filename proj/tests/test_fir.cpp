#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/errors.hpp"
#include "core/fir.hpp"
#include "core/rng.hpp"

using namespace sdda;
using namespace sdda::preproc;

namespace {
FirFilter reference_filter() { return design_fir(200, 4.0, 38.0, 250.0, "blackman"); }

double sine_gain(const FirFilter& fir, double freq_hz, int T) {
  std::vector<double> x(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) x[static_cast<size_t>(t)] = std::sin(2.0 * M_PI * freq_hz * t / fir.fs);
  const auto y = filter_channel(x, fir);
  // RMS over the central span, away from the replicated edges.
  double in = 0, out = 0;
  for (int t = fir.order; t < T - fir.order; ++t) {
    in += x[static_cast<size_t>(t)] * x[static_cast<size_t>(t)];
    out += y[static_cast<size_t>(t)] * y[static_cast<size_t>(t)];
  }
  return std::sqrt(out / in);
}
}  // namespace

TEST_CASE("design yields symmetric taps with a dead DC response") {
  const FirFilter fir = reference_filter();
  CHECK(fir.taps.size() == 201);
  for (int k = 0; k <= 200; ++k) {
    CHECK(fir.taps[static_cast<size_t>(k)] ==
          doctest::Approx(fir.taps[static_cast<size_t>(200 - k)]).epsilon(1e-12));
  }
  CHECK(std::abs(fir_response(fir, 0.0)) < 1e-3);
}

TEST_CASE("magnitude response meets the band template") {
  const FirFilter fir = reference_filter();
  for (double f = 6.0; f <= 36.0; f += 1.0) {
    CHECK_MESSAGE(fir_magnitude_db(fir, f) >= -3.0, "passband sag at ", f, " Hz");
  }
  for (double f = 0.25; f <= 1.0; f += 0.25) {
    CHECK_MESSAGE(fir_magnitude_db(fir, f) <= -40.0, "stopband leak at ", f, " Hz");
  }
  for (double f = 60.0; f <= 124.0; f += 8.0) {
    CHECK_MESSAGE(fir_magnitude_db(fir, f) <= -40.0, "stopband leak at ", f, " Hz");
  }
}

TEST_CASE("bad band edges are rejected") {
  CHECK_THROWS_AS(design_fir(200, 38.0, 4.0, 250.0), Error);
  CHECK_THROWS_AS(design_fir(200, 4.0, 130.0, 250.0), Error);  // above Nyquist
  CHECK_THROWS_AS(design_fir(201, 4.0, 38.0, 250.0), Error);   // odd order
  CHECK_THROWS_AS(design_fir(200, 4.0, 38.0, 250.0, "mystery"), Error);
}

TEST_CASE("passband tone passes, drift is crushed") {
  const FirFilter fir = reference_filter();
  const double g20 = sine_gain(fir, 20.0, 2000);
  CHECK(g20 > 0.9);
  CHECK(g20 < 1.1);
  CHECK(sine_gain(fir, 0.5, 2000) < 0.01);
}

TEST_CASE("zero input stays zero and length is preserved") {
  const FirFilter fir = reference_filter();
  std::vector<double> x(512, 0.0);
  const auto y = filter_channel(x, fir);
  CHECK(y.size() == x.size());
  for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("filtering is linear to near machine precision") {
  const FirFilter fir = reference_filter();
  Rng rng(17);
  const int T = 400;
  std::vector<double> x(T), y(T);
  for (int t = 0; t < T; ++t) {
    x[static_cast<size_t>(t)] = rng.normal();
    y[static_cast<size_t>(t)] = rng.normal();
  }
  const double a = 1.7, b = -0.4;
  std::vector<double> mix(T);
  for (int t = 0; t < T; ++t) {
    mix[static_cast<size_t>(t)] = a * x[static_cast<size_t>(t)] + b * y[static_cast<size_t>(t)];
  }
  const auto fx = filter_channel(x, fir);
  const auto fy = filter_channel(y, fir);
  const auto fmix = filter_channel(mix, fir);
  double worst = 0;
  for (int t = 0; t < T; ++t) {
    worst = std::max(worst, std::abs(fmix[static_cast<size_t>(t)] -
                                     (a * fx[static_cast<size_t>(t)] +
                                      b * fy[static_cast<size_t>(t)])));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("trials shorter than the filter order are rejected") {
  const FirFilter fir = reference_filter();
  std::vector<double> x(200, 1.0);
  CHECK_THROWS_AS(filter_channel(x, fir), Error);
}
