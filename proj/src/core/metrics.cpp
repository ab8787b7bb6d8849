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
#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "core/errors.hpp"

namespace sdda::metrics {

double kappa(double accuracy, int num_classes) {
  require(num_classes >= 2, ErrorCode::InvalidArgument,
          "kappa: need at least two classes");
  require(accuracy >= 0.0 && accuracy <= 1.0, ErrorCode::InvalidArgument,
          "kappa: accuracy must be in [0,1]");
  const double p0 = 1.0 / num_classes;
  return (accuracy - p0) / (1.0 - p0);
}

EvalReport evaluate(const models::ModelSpec& spec, models::ParamStore& store,
                    const data::TrialSet& set, int batch_size) {
  require(set.labeled(), ErrorCode::InvalidArgument, "evaluate: set is unlabeled");
  require(set.E == spec.E && set.T == spec.T, ErrorCode::ShapeMismatch,
          "evaluate: set is " + std::to_string(set.E) + "x" + std::to_string(set.T) +
              " but the model expects " + std::to_string(spec.E) + "x" +
              std::to_string(spec.T));
  require(set.C == spec.C, ErrorCode::ShapeMismatch,
          "evaluate: set has " + std::to_string(set.C) + " classes, model has " +
              std::to_string(spec.C));
  require(batch_size >= 1, ErrorCode::InvalidArgument, "evaluate: batch size must be >= 1");

  EvalReport report;
  report.n = set.n;
  report.C = spec.C;
  report.confusion.assign(static_cast<size_t>(spec.C),
                          std::vector<int64_t>(static_cast<size_t>(spec.C), 0));
  report.predictions.resize(static_cast<size_t>(set.n));

  int64_t correct = 0;
  for (int start = 0; start < set.n; start += batch_size) {
    const int b = std::min(batch_size, set.n - start);
    ad::Tensor batch({b, 1, set.E, set.T});
    std::copy(set.trial(start), set.trial(start) + static_cast<int64_t>(b) * set.E * set.T,
              batch.data());
    const ad::Tensor logits = models::predict_logits(spec, store, batch);
    for (int i = 0; i < b; ++i) {
      const double* row = logits.data() + static_cast<int64_t>(i) * spec.C;
      int best = 0;
      for (int c = 1; c < spec.C; ++c) {
        if (row[c] > row[best]) best = c;  // ties keep the lowest index
      }
      const int truth = set.labels[static_cast<size_t>(start + i)];
      report.predictions[static_cast<size_t>(start + i)] = best;
      ++report.confusion[static_cast<size_t>(truth)][static_cast<size_t>(best)];
      if (best == truth) ++correct;
    }
  }
  report.accuracy = set.n > 0 ? static_cast<double>(correct) / set.n : 0.0;
  report.kappa = kappa(report.accuracy, spec.C);
  return report;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "metric,value\n";
  out << "n," << n << "\n";
  out << "classes," << C << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", accuracy);
  out << "accuracy," << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", kappa);
  out << "kappa," << buf << "\n";
  return out.str();
}

std::string EvalReport::confusion_csv() const {
  std::ostringstream out;
  for (const auto& row : confusion) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out << ",";
      out << row[c];
    }
    out << "\n";
  }
  return out.str();
}

ReportTable ReportTable::aggregate(const std::vector<ReportRow>& rows, int num_classes) {
  ReportTable table;
  table.C = num_classes;
  for (const auto& r : rows) {
    if (std::find(table.methods.begin(), table.methods.end(), r.method) == table.methods.end()) {
      table.methods.push_back(r.method);
    }
    if (std::find(table.participants.begin(), table.participants.end(), r.participant) ==
        table.participants.end()) {
      table.participants.push_back(r.participant);
    }
  }
  std::sort(table.participants.begin(), table.participants.end());

  table.mean_acc.assign(table.methods.size(),
                        std::vector<double>(table.participants.size(),
                                            std::numeric_limits<double>::quiet_NaN()));
  for (size_t m = 0; m < table.methods.size(); ++m) {
    for (size_t p = 0; p < table.participants.size(); ++p) {
      double sum = 0;
      int count = 0;
      for (const auto& r : rows) {
        if (r.method == table.methods[m] && r.participant == table.participants[p]) {
          sum += r.accuracy;
          ++count;
        }
      }
      if (count > 0) table.mean_acc[m][p] = sum / count;
    }
    double sum = 0;
    int count = 0;
    for (size_t p = 0; p < table.participants.size(); ++p) {
      if (!std::isnan(table.mean_acc[m][p])) {
        sum += table.mean_acc[m][p];
        ++count;
      }
    }
    const double avg = count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
    table.average_acc.push_back(avg);
    table.average_kappa.push_back(std::isnan(avg) ? avg : kappa(avg, num_classes));
  }
  return table;
}

namespace {
std::string pct(double fraction, int decimals = 2) {
  if (std::isnan(fraction)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, fraction * 100.0);
  return std::string(buf);
}
}  // namespace

std::string ReportTable::to_csv() const {
  std::ostringstream out;
  out << "method";
  for (const auto& p : participants) out << "," << p;
  out << ",average_acc,average_kappa\n";
  for (size_t m = 0; m < methods.size(); ++m) {
    out << methods[m];
    for (size_t p = 0; p < participants.size(); ++p) out << "," << pct(mean_acc[m][p]);
    out << "," << pct(average_acc[m]);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", average_kappa[m]);
    out << "," << (std::isnan(average_kappa[m]) ? "-" : buf) << "\n";
  }
  return out.str();
}

std::string ReportTable::to_text() const {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"method"};
  header.insert(header.end(), participants.begin(), participants.end());
  header.push_back("average acc (kappa)");
  cells.push_back(header);
  for (size_t m = 0; m < methods.size(); ++m) {
    std::vector<std::string> row{methods[m]};
    for (size_t p = 0; p < participants.size(); ++p) row.push_back(pct(mean_acc[m][p]));
    if (std::isnan(average_acc[m])) {
      row.push_back("-");
    } else {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.2f(%.3f)", average_acc[m] * 100.0, average_kappa[m]);
      row.push_back(std::string(buf));
    }
    cells.push_back(std::move(row));
  }
  std::vector<size_t> width(cells[0].size(), 0);
  for (const auto& row : cells) {
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : cells) {
    for (size_t c = 0; c < row.size(); ++c) {
      out << row[c];
      if (c + 1 < row.size()) {
        out << std::string(width[c] - row[c].size() + 2, ' ');
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace sdda::metrics
