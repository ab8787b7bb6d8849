// Test-only reference implementations. Each oracle is written as the most
// direct possible transcription of the quantity it checks and stays
// independent of the library code paths it is used against.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "core/trialset.hpp"

namespace oracles {

// Mean softmax cross entropy evaluated at long-double precision, straight
// from the definition -log(exp(l_y) / sum_j exp(l_j)).
inline double softmax_ce_reference(const sdda::ad::Tensor& logits,
                                   const std::vector<int>& labels) {
  const int n = logits.dim(0), c = logits.dim(1);
  long double total = 0;
  for (int i = 0; i < n; ++i) {
    long double denom = 0;
    for (int j = 0; j < c; ++j) {
      denom += expl(static_cast<long double>(logits[static_cast<int64_t>(i) * c + j]));
    }
    const long double num =
        expl(static_cast<long double>(logits[static_cast<int64_t>(i) * c + labels[static_cast<size_t>(i)]]));
    total += -logl(num / denom);
  }
  return static_cast<double>(total / n);
}

// 1 - mean_i cos(h_i, c_{y_i}) computed directly from the cosine definition.
inline double cosine_center_reference(const sdda::ad::Tensor& emb,
                                      const std::vector<int>& labels,
                                      const sdda::ad::Tensor& centers) {
  const int b = emb.dim(0), L = emb.dim(1);
  double mean_cos = 0;
  for (int i = 0; i < b; ++i) {
    const double* h = emb.data() + static_cast<int64_t>(i) * L;
    const double* c = centers.data() + static_cast<int64_t>(labels[static_cast<size_t>(i)]) * L;
    double hh = 0, cc = 0, hc = 0;
    for (int k = 0; k < L; ++k) {
      hh += h[k] * h[k];
      cc += c[k] * c[k];
      hc += h[k] * c[k];
    }
    mean_cos += hc / (std::max(std::sqrt(hh), 1e-12) * std::max(std::sqrt(cc), 1e-12));
  }
  return 1.0 - mean_cos / b;
}

// Brute-force double-loop V-statistic MMD with the averaged Gaussian kernel.
inline double mmd_reference(const sdda::ad::Tensor& hs, const sdda::ad::Tensor& ht,
                            const std::vector<double>& bandwidths) {
  const int b = hs.dim(0), L = hs.dim(1);
  auto kernel = [&](const double* a, const double* c) {
    double d2 = 0;
    for (int k = 0; k < L; ++k) {
      const double d = a[k] - c[k];
      d2 += d * d;
    }
    double v = 0;
    for (double s2 : bandwidths) v += std::exp(-d2 / (2.0 * s2));
    return v / static_cast<double>(bandwidths.size());
  };
  double ss = 0, tt = 0, st = 0;
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) {
      ss += kernel(hs.data() + static_cast<int64_t>(i) * L, hs.data() + static_cast<int64_t>(j) * L);
      tt += kernel(ht.data() + static_cast<int64_t>(i) * L, ht.data() + static_cast<int64_t>(j) * L);
      st += kernel(hs.data() + static_cast<int64_t>(i) * L, ht.data() + static_cast<int64_t>(j) * L);
    }
  }
  const double b2 = static_cast<double>(b) * b;
  return ss / b2 + tt / b2 - 2.0 * st / b2;
}

// Band power per channel by direct projection onto the DFT bins that fall
// inside [low_hz, high_hz]; features are log powers.
inline std::vector<double> band_power_features(const double* trial, int E, int T, double fs,
                                               double low_hz, double high_hz) {
  std::vector<double> feats(static_cast<size_t>(E), 0.0);
  for (int e = 0; e < E; ++e) {
    const double* x = trial + static_cast<int64_t>(e) * T;
    double power = 0;
    for (int bin = 1; bin < T / 2; ++bin) {
      const double f = fs * bin / T;
      if (f < low_hz || f > high_hz) continue;
      double re = 0, im = 0;
      for (int t = 0; t < T; ++t) {
        const double a = 2.0 * M_PI * bin * t / T;
        re += x[t] * std::cos(a);
        im -= x[t] * std::sin(a);
      }
      power += re * re + im * im;
    }
    feats[static_cast<size_t>(e)] = std::log(power / T + 1e-12);
  }
  return feats;
}

inline std::vector<std::vector<double>> band_power_matrix(const sdda::data::TrialSet& set,
                                                          double low_hz, double high_hz) {
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<size_t>(set.n));
  for (int i = 0; i < set.n; ++i) {
    rows.push_back(band_power_features(set.trial(i), set.E, set.T, set.fs, low_hz, high_hz));
  }
  return rows;
}

// Multinomial logistic probe: full-batch gradient descent on z-scored
// features. Returns accuracy on the test rows.
inline double logistic_probe_accuracy(const std::vector<std::vector<double>>& train_x,
                                      const std::vector<int>& train_y,
                                      const std::vector<std::vector<double>>& test_x,
                                      const std::vector<int>& test_y, int classes,
                                      int iterations = 400, double lr = 0.5) {
  const int d = static_cast<int>(train_x[0].size());
  const int n = static_cast<int>(train_x.size());
  std::vector<double> mean(static_cast<size_t>(d), 0.0), sd(static_cast<size_t>(d), 0.0);
  for (const auto& row : train_x) {
    for (int k = 0; k < d; ++k) mean[static_cast<size_t>(k)] += row[static_cast<size_t>(k)];
  }
  for (auto& m : mean) m /= n;
  for (const auto& row : train_x) {
    for (int k = 0; k < d; ++k) {
      const double c = row[static_cast<size_t>(k)] - mean[static_cast<size_t>(k)];
      sd[static_cast<size_t>(k)] += c * c;
    }
  }
  for (auto& s : sd) s = std::max(std::sqrt(s / n), 1e-9);
  auto zrow = [&](const std::vector<double>& row) {
    std::vector<double> z(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) {
      z[static_cast<size_t>(k)] =
          (row[static_cast<size_t>(k)] - mean[static_cast<size_t>(k)]) / sd[static_cast<size_t>(k)];
    }
    return z;
  };

  std::vector<double> w(static_cast<size_t>(classes) * (d + 1), 0.0);  // + bias column
  std::vector<double> logits(static_cast<size_t>(classes));
  std::vector<double> grad(w.size());
  for (int it = 0; it < iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const auto z = zrow(train_x[static_cast<size_t>(i)]);
      double m = -1e300;
      for (int c = 0; c < classes; ++c) {
        double s = w[static_cast<size_t>(c) * (d + 1) + d];
        for (int k = 0; k < d; ++k) s += w[static_cast<size_t>(c) * (d + 1) + k] * z[static_cast<size_t>(k)];
        logits[static_cast<size_t>(c)] = s;
        m = std::max(m, s);
      }
      double denom = 0;
      for (int c = 0; c < classes; ++c) denom += std::exp(logits[static_cast<size_t>(c)] - m);
      for (int c = 0; c < classes; ++c) {
        const double p = std::exp(logits[static_cast<size_t>(c)] - m) / denom;
        const double err = p - (c == train_y[static_cast<size_t>(i)] ? 1.0 : 0.0);
        for (int k = 0; k < d; ++k) {
          grad[static_cast<size_t>(c) * (d + 1) + k] += err * z[static_cast<size_t>(k)];
        }
        grad[static_cast<size_t>(c) * (d + 1) + d] += err;
      }
    }
    for (size_t k = 0; k < w.size(); ++k) w[k] -= lr * grad[k] / n;
  }

  int correct = 0;
  for (size_t i = 0; i < test_x.size(); ++i) {
    const auto z = zrow(test_x[i]);
    int best = 0;
    double best_s = -1e300;
    for (int c = 0; c < classes; ++c) {
      double s = w[static_cast<size_t>(c) * (d + 1) + d];
      for (int k = 0; k < d; ++k) s += w[static_cast<size_t>(c) * (d + 1) + k] * z[static_cast<size_t>(k)];
      if (s > best_s) {
        best_s = s;
        best = c;
      }
    }
    if (best == test_y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_x.size());
}

// Two-sample permutation test on the MMD of feature vectors; returns the
// p-value of the observed statistic under label permutations.
inline double mmd_permutation_pvalue(const std::vector<std::vector<double>>& a,
                                     const std::vector<std::vector<double>>& b,
                                     int permutations, uint64_t seed) {
  const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
  const int d = static_cast<int>(a[0].size());
  std::vector<std::vector<double>> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());

  // Median-heuristic bandwidth over the pooled features.
  std::vector<double> d2s;
  for (size_t i = 0; i < pool.size(); ++i) {
    for (size_t j = i + 1; j < pool.size(); ++j) {
      double d2 = 0;
      for (int k = 0; k < d; ++k) {
        const double delta = pool[i][static_cast<size_t>(k)] - pool[j][static_cast<size_t>(k)];
        d2 += delta * delta;
      }
      d2s.push_back(d2);
    }
  }
  std::nth_element(d2s.begin(), d2s.begin() + static_cast<std::ptrdiff_t>(d2s.size() / 2), d2s.end());
  const double s2 = std::max(d2s[d2s.size() / 2], 1e-12);

  auto statistic = [&](const std::vector<int>& idx) {
    auto kernel = [&](int i, int j) {
      double d2 = 0;
      for (int k = 0; k < d; ++k) {
        const double delta = pool[static_cast<size_t>(idx[static_cast<size_t>(i)])][static_cast<size_t>(k)] -
                             pool[static_cast<size_t>(idx[static_cast<size_t>(j)])][static_cast<size_t>(k)];
        d2 += delta * delta;
      }
      return std::exp(-d2 / (2.0 * s2));
    };
    double ss = 0, tt = 0, st = 0;
    for (int i = 0; i < na; ++i) {
      for (int j = 0; j < na; ++j) ss += kernel(i, j);
    }
    for (int i = 0; i < nb; ++i) {
      for (int j = 0; j < nb; ++j) tt += kernel(na + i, na + j);
    }
    for (int i = 0; i < na; ++i) {
      for (int j = 0; j < nb; ++j) st += kernel(i, na + j);
    }
    return ss / (static_cast<double>(na) * na) + tt / (static_cast<double>(nb) * nb) -
           2.0 * st / (static_cast<double>(na) * nb);
  };

  std::vector<int> idx(pool.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  const double observed = statistic(idx);
  sdda::Rng rng(seed);
  int at_least = 0;
  for (int p = 0; p < permutations; ++p) {
    rng.shuffle(idx);
    if (statistic(idx) >= observed) ++at_least;
  }
  return (at_least + 1.0) / (permutations + 1.0);
}

}  // namespace oracles
