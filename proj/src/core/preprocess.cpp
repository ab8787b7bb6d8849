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
#include "core/preprocess.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "core/errors.hpp"

namespace sdda::preproc {

namespace {
constexpr double kEmaVarianceFloor = 1e-4;
constexpr double kEigenFloorRatio = 1e-10;
}  // namespace

data::TrialSet filter_trials(const data::TrialSet& trials, const FirFilter& fir) {
  require(trials.T > fir.order, ErrorCode::InvalidArgument,
          "filter_trials: trial length " + std::to_string(trials.T) +
              " must exceed filter order " + std::to_string(fir.order));
  data::TrialSet out = trials;
  std::vector<double> channel(static_cast<size_t>(trials.T));
  for (int i = 0; i < trials.n; ++i) {
    for (int e = 0; e < trials.E; ++e) {
      const double* src = trials.trial(i) + static_cast<int64_t>(e) * trials.T;
      channel.assign(src, src + trials.T);
      const std::vector<double> filtered = filter_channel(channel, fir);
      double* dst = out.trial(i) + static_cast<int64_t>(e) * trials.T;
      std::copy(filtered.begin(), filtered.end(), dst);
    }
  }
  return out;
}

data::TrialSet ema_standardize(const data::TrialSet& trials, double decay) {
  require(decay > 0 && decay < 1, ErrorCode::InvalidArgument,
          "ema_standardize: decay must be in (0,1), got " + std::to_string(decay));
  data::TrialSet out = trials;
  for (int i = 0; i < trials.n; ++i) {
    for (int e = 0; e < trials.E; ++e) {
      const double* x = trials.trial(i) + static_cast<int64_t>(e) * trials.T;
      double* y = out.trial(i) + static_cast<int64_t>(e) * trials.T;
      double m = x[0];
      // The second moment of the first sample seeds the variance tracker so
      // the output scale is sane from the start instead of warming from 0.
      double v = x[0] * x[0];
      y[0] = 0.0;
      for (int k = 1; k < trials.T; ++k) {
        m = decay * m + (1.0 - decay) * x[k];
        const double d = x[k] - m;
        v = decay * v + (1.0 - decay) * d * d;
        y[k] = d / std::sqrt(std::max(v, kEmaVarianceFloor));
      }
    }
  }
  return out;
}

data::TrialSet channel_normalize(const data::TrialSet& trials, int64_t* zero_channel_tally) {
  data::TrialSet out = trials;
  for (int i = 0; i < trials.n; ++i) {
    for (int e = 0; e < trials.E; ++e) {
      double* y = out.trial(i) + static_cast<int64_t>(e) * trials.T;
      double peak = 0;
      for (int k = 0; k < trials.T; ++k) peak = std::max(peak, std::abs(y[k]));
      if (peak == 0.0) {
        if (zero_channel_tally) ++*zero_channel_tally;
        continue;  // zero channel passes through unchanged
      }
      for (int k = 0; k < trials.T; ++k) y[k] /= peak;
    }
  }
  return out;
}

AlignmentState fit_alignment(const data::TrialSet& trials) {
  require(trials.n >= 1, ErrorCode::InvalidArgument,
          "fit_alignment: need at least one trial");
  const int E = trials.E;
  require(E >= 1, ErrorCode::InvalidArgument, "fit_alignment: no channels");

  Eigen::MatrixXd mean_cov = Eigen::MatrixXd::Zero(E, E);
  for (int i = 0; i < trials.n; ++i) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        x(trials.trial(i), E, trials.T);
    mean_cov.noalias() += x * x.transpose();
  }
  mean_cov /= static_cast<double>(trials.n);
  // Enforce exact symmetry before the self-adjoint solve.
  mean_cov = 0.5 * (mean_cov + mean_cov.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(mean_cov);
  require(solver.info() == Eigen::Success, ErrorCode::Internal,
          "fit_alignment: eigendecomposition failed");
  Eigen::VectorXd evals = solver.eigenvalues();
  const Eigen::MatrixXd& Q = solver.eigenvectors();

  AlignmentState state;
  state.E = E;
  state.trial_count = trials.n;
  const double lambda_max = evals.maxCoeff();
  if (lambda_max <= 0.0) {
    // Degenerate all-zero domain: every eigenvalue is floored and the
    // whitener degrades to the identity.
    state.floored_eigenvalues = E;
    state.mean_cov.assign(static_cast<size_t>(E) * E, 0.0);
    state.whitener.assign(static_cast<size_t>(E) * E, 0.0);
    for (int i = 0; i < E; ++i) {
      state.mean_cov[static_cast<size_t>(i) * E + i] = 0.0;
      state.whitener[static_cast<size_t>(i) * E + i] = 1.0;
    }
    return state;
  }
  const double floor_value = kEigenFloorRatio * lambda_max;
  Eigen::VectorXd inv_sqrt(E);
  for (int i = 0; i < E; ++i) {
    double ev = evals[i];
    if (ev < floor_value) {
      ev = floor_value;
      ++state.floored_eigenvalues;
    }
    inv_sqrt[i] = 1.0 / std::sqrt(ev);
  }
  Eigen::MatrixXd whitener = Q * inv_sqrt.asDiagonal() * Q.transpose();

  state.mean_cov.resize(static_cast<size_t>(E) * E);
  state.whitener.resize(static_cast<size_t>(E) * E);
  for (int r = 0; r < E; ++r) {
    for (int c = 0; c < E; ++c) {
      state.mean_cov[static_cast<size_t>(r) * E + c] = mean_cov(r, c);
      state.whitener[static_cast<size_t>(r) * E + c] = whitener(r, c);
    }
  }
  return state;
}

data::TrialSet apply_alignment(const data::TrialSet& trials, const AlignmentState& state) {
  require(trials.E == state.E, ErrorCode::ShapeMismatch,
          "apply_alignment: set has " + std::to_string(trials.E) +
              " channels but the state was fitted on " + std::to_string(state.E));
  data::TrialSet out = trials;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      w(state.whitener.data(), state.E, state.E);
  for (int i = 0; i < trials.n; ++i) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        x(trials.trial(i), trials.E, trials.T);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        y(out.trial(i), trials.E, trials.T);
    y.noalias() = w * x;
  }
  return out;
}

}  // namespace sdda::preproc
