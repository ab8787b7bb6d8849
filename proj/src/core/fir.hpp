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
#pragma once

#include <complex>
#include <string>
#include <vector>

namespace sdda::preproc {

// Linear-phase windowed-sinc bandpass filter.
struct FirFilter {
  std::vector<double> taps;  // order + 1 coefficients, symmetric
  int order = 0;
  double low_hz = 0;
  double high_hz = 0;
  double fs = 0;
  std::string window;  // "blackman"
};

// Windowed-sinc design: ideal bandpass impulse response times the window.
// Requires an even order and 0 < low < high < fs/2.
FirFilter design_fir(int order, double low_hz, double high_hz, double fs,
                     const std::string& window = "blackman");

// Complex frequency response H(e^{j 2 pi f / fs}) by direct DTFT evaluation.
std::complex<double> fir_response(const FirFilter& fir, double freq_hz);
double fir_magnitude_db(const FirFilter& fir, double freq_hz);

// Single channel filtering with group-delay compensation: the input is
// edge-replicated by order/2 samples on both ends and convolved "valid",
// which preserves length and time registration.
std::vector<double> filter_channel(const std::vector<double>& x, const FirFilter& fir);

}  // namespace sdda::preproc
