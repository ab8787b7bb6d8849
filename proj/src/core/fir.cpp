/*
 * Copyright 2026 the sdda authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "core/fir.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace sdda::preproc {

namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

double window_value(const std::string& window, int n, int order) {
  if (window == "blackman") {
    const double t = 2.0 * M_PI * n / order;
    return 0.42 - 0.5 * std::cos(t) + 0.08 * std::cos(2.0 * t);
  }
  if (window == "hamming") {
    return 0.54 - 0.46 * std::cos(2.0 * M_PI * n / order);
  }
  if (window == "rectangular") return 1.0;
  fail(ErrorCode::InvalidArgument, "design_fir: unknown window '" + window + "'");
}

}  // namespace

FirFilter design_fir(int order, double low_hz, double high_hz, double fs,
                     const std::string& window) {
  require(order > 0 && order % 2 == 0, ErrorCode::InvalidArgument,
          "design_fir: order must be positive and even, got " + std::to_string(order));
  require(fs > 0, ErrorCode::InvalidArgument, "design_fir: sample rate must be positive");
  require(low_hz > 0 && low_hz < high_hz, ErrorCode::InvalidArgument,
          "design_fir: need 0 < low < high, got [" + std::to_string(low_hz) + ", " +
              std::to_string(high_hz) + "]");
  require(high_hz < fs / 2, ErrorCode::InvalidArgument,
          "design_fir: high cutoff " + std::to_string(high_hz) +
              " Hz is not below Nyquist " + std::to_string(fs / 2) + " Hz");

  FirFilter fir;
  fir.order = order;
  fir.low_hz = low_hz;
  fir.high_hz = high_hz;
  fir.fs = fs;
  fir.window = window;
  fir.taps.resize(static_cast<size_t>(order) + 1);

  const double f1 = low_hz / fs;  // normalized cutoff, cycles/sample
  const double f2 = high_hz / fs;
  const int mid = order / 2;
  for (int n = 0; n <= order; ++n) {
    const int m = n - mid;
    const double ideal = 2.0 * f2 * sinc(2.0 * f2 * m) - 2.0 * f1 * sinc(2.0 * f1 * m);
    fir.taps[static_cast<size_t>(n)] = ideal * window_value(window, n, order);
  }
  return fir;
}

std::complex<double> fir_response(const FirFilter& fir, double freq_hz) {
  const double w = 2.0 * M_PI * freq_hz / fir.fs;
  std::complex<double> h(0.0, 0.0);
  for (size_t n = 0; n < fir.taps.size(); ++n) {
    h += fir.taps[n] * std::exp(std::complex<double>(0.0, -w * static_cast<double>(n)));
  }
  return h;
}

double fir_magnitude_db(const FirFilter& fir, double freq_hz) {
  const double mag = std::abs(fir_response(fir, freq_hz));
  return 20.0 * std::log10(std::max(mag, 1e-300));
}

std::vector<double> filter_channel(const std::vector<double>& x, const FirFilter& fir) {
  const int order = fir.order;
  const int T = static_cast<int>(x.size());
  require(T > order, ErrorCode::InvalidArgument,
          "filter_channel: trial length " + std::to_string(T) +
              " must exceed filter order " + std::to_string(order));
  const int half = order / 2;
  std::vector<double> padded(static_cast<size_t>(T + order));
  for (int i = 0; i < half; ++i) padded[static_cast<size_t>(i)] = x.front();
  for (int i = 0; i < T; ++i) padded[static_cast<size_t>(half + i)] = x[static_cast<size_t>(i)];
  for (int i = 0; i < half; ++i) padded[static_cast<size_t>(half + T + i)] = x.back();

  std::vector<double> y(static_cast<size_t>(T), 0.0);
  const double* taps = fir.taps.data();
  for (int i = 0; i < T; ++i) {
    // y[i] = sum_k taps[k] * padded[i + order - k]; the half-order padding
    // offset cancels the linear-phase group delay.
    double acc = 0;
    const double* seg = padded.data() + i;
    for (int k = 0; k <= order; ++k) acc += taps[k] * seg[order - k];
    y[static_cast<size_t>(i)] = acc;
  }
  return y;
}

}  // namespace sdda::preproc
