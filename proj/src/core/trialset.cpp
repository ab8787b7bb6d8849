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
#include "core/trialset.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "core/errors.hpp"

namespace sdda::data {

namespace {

constexpr char kMagic[4] = {'T', 'R', 'L', '1'};
constexpr uint16_t kVersion = 1;
constexpr uint16_t kFlagLabels = 1u << 0;
constexpr uint16_t kFlagProvenance = 1u << 1;

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const unsigned char* p;
  size_t remaining;
  std::string path;

  void need(size_t bytes, const char* what) const {
    require(remaining >= bytes, ErrorCode::Truncated,
            "truncated payload in " + path + ": expected " + what);
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint16_t>(p[0] | (p[1] << 8));
    p += 2;
    remaining -= 2;
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    p += 4;
    remaining -= 4;
    return v;
  }
  float f32(const char* what) {
    uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  int16_t i16(const char* what) { return static_cast<int16_t>(u16(what)); }
};

}  // namespace

void TrialSet::validate() const {
  require(n >= 0 && E >= 0 && T >= 0, ErrorCode::InvalidArgument,
          "trial set dimensions must be nonnegative");
  require(values.size() == static_cast<size_t>(n) * E * T, ErrorCode::ShapeMismatch,
          "trial set value buffer has " + std::to_string(values.size()) +
              " entries, expected " + std::to_string(static_cast<int64_t>(n) * E * T));
  if (!labels.empty()) {
    require(static_cast<int>(labels.size()) == n, ErrorCode::ShapeMismatch,
            "label count " + std::to_string(labels.size()) + " != trial count " +
                std::to_string(n));
    for (int i = 0; i < n; ++i) {
      require(labels[static_cast<size_t>(i)] >= 0 && labels[static_cast<size_t>(i)] < C,
              ErrorCode::LabelRange,
              "label " + std::to_string(labels[static_cast<size_t>(i)]) + " at trial " +
                  std::to_string(i) + " outside [0," + std::to_string(C) + ")");
    }
  }
  if (!sessions.empty()) {
    require(static_cast<int>(sessions.size()) == n, ErrorCode::ShapeMismatch,
            "session tag count != trial count");
  }
}

void write_container(const TrialSet& set, const std::string& path) {
  set.validate();
  std::string out;
  out.reserve(24 + set.values.size() * 4);
  out.append(kMagic, 4);
  put_u16(out, kVersion);
  uint16_t flags = 0;
  if (set.labeled()) flags |= kFlagLabels;
  const bool provenance = set.has_participant || set.has_sessions();
  if (provenance) flags |= kFlagProvenance;
  put_u16(out, flags);
  put_u32(out, static_cast<uint32_t>(set.n));
  put_u32(out, static_cast<uint32_t>(set.E));
  put_u32(out, static_cast<uint32_t>(set.T));
  put_f32(out, static_cast<float>(set.fs));
  put_u16(out, static_cast<uint16_t>(set.C));
  put_u16(out, 0);  // reserved
  if (set.labeled()) {
    for (int16_t l : set.labels) put_u16(out, static_cast<uint16_t>(l));
  }
  if (provenance) {
    put_u16(out, set.has_participant ? set.participant : 0);
    for (int i = 0; i < set.n; ++i) {
      put_u16(out, set.has_sessions() ? set.sessions[static_cast<size_t>(i)] : 0);
    }
  }
  for (double v : set.values) put_f32(out, static_cast<float>(v));

  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::Io, "cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  require(f.good(), ErrorCode::Io, "short write: " + path);
}

TrialSet read_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::Io, "cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), path};
  r.need(4, "magic");
  require(std::memcmp(r.p, kMagic, 4) == 0, ErrorCode::BadMagic,
          "bad magic in " + path + ": not a trial container");
  r.p += 4;
  r.remaining -= 4;

  const uint16_t version = r.u16("version");
  require(version == kVersion, ErrorCode::InvalidArgument,
          "unsupported container version " + std::to_string(version) + " in " + path);
  const uint16_t flags = r.u16("flags");
  TrialSet set;
  set.n = static_cast<int>(r.u32("trial count"));
  set.E = static_cast<int>(r.u32("channel count"));
  set.T = static_cast<int>(r.u32("sample count"));
  set.fs = static_cast<double>(r.f32("sample rate"));
  set.C = static_cast<int>(r.u16("class count"));
  r.u16("reserved");

  if (flags & kFlagLabels) {
    set.labels.resize(static_cast<size_t>(set.n));
    for (int i = 0; i < set.n; ++i) {
      const int16_t l = r.i16("labels");
      require(l >= 0 && l < set.C, ErrorCode::LabelRange,
              "label " + std::to_string(l) + " at trial " + std::to_string(i) +
                  " outside [0," + std::to_string(set.C) + ") in " + path);
      set.labels[static_cast<size_t>(i)] = l;
    }
  }
  if (flags & kFlagProvenance) {
    set.participant = r.u16("participant id");
    set.has_participant = true;
    set.sessions.resize(static_cast<size_t>(set.n));
    for (int i = 0; i < set.n; ++i) set.sessions[static_cast<size_t>(i)] = r.u16("session tags");
  }
  const size_t count = static_cast<size_t>(set.n) * set.E * set.T;
  set.values.resize(count);
  for (size_t i = 0; i < count; ++i) set.values[i] = static_cast<double>(r.f32("payload"));
  require(r.remaining == 0, ErrorCode::InvalidArgument,
          "trailing bytes after payload in " + path);
  set.validate();
  return set;
}

TrialSet import_csv(const std::string& dir, double fs) {
  namespace fs_ns = std::filesystem;
  require(fs_ns::is_directory(dir), ErrorCode::Io, "not a directory: " + dir);

  std::vector<std::string> files;
  for (const auto& entry : fs_ns::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "labels.csv") continue;
    if (entry.path().extension() == ".csv") files.push_back(name);
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCode::Io, "no trial CSV files in " + dir);

  TrialSet set;
  set.fs = fs;
  std::vector<std::vector<double>> trials;
  for (const std::string& name : files) {
    const std::string path = dir + "/" + name;
    std::ifstream f(path);
    require(f.good(), ErrorCode::Io, "cannot open: " + path);
    std::vector<double> flat;
    std::string line;
    int cols = -1;
    int rows = 0;
    while (std::getline(f, line)) {
      if (line.find_first_not_of(" \t\r\n,") == std::string::npos) continue;
      std::stringstream ss(line);
      std::string cell;
      int c = 0;
      while (std::getline(ss, cell, ',')) {
        try {
          flat.push_back(std::stod(cell));
        } catch (const std::exception&) {
          fail(ErrorCode::InvalidArgument,
               "cannot parse '" + cell + "' as number in " + name);
        }
        ++c;
      }
      if (cols < 0) {
        cols = c;
      } else {
        require(c == cols, ErrorCode::InvalidArgument,
                "ragged rows in " + name + ": row " + std::to_string(rows) + " has " +
                    std::to_string(c) + " values, expected " + std::to_string(cols));
      }
      ++rows;
    }
    require(rows > 0 && cols > 0, ErrorCode::InvalidArgument, "empty CSV file " + name);
    if (set.E == 0) {
      set.E = rows;
      set.T = cols;
    } else {
      require(rows == set.E && cols == set.T, ErrorCode::ShapeMismatch,
              "file " + name + " is " + std::to_string(rows) + "x" + std::to_string(cols) +
                  " but the set is " + std::to_string(set.E) + "x" + std::to_string(set.T));
    }
    trials.push_back(std::move(flat));
  }
  set.n = static_cast<int>(trials.size());
  set.values.reserve(static_cast<size_t>(set.n) * set.E * set.T);
  for (const auto& t : trials) set.values.insert(set.values.end(), t.begin(), t.end());

  const std::string labels_path = dir + "/labels.csv";
  if (fs_ns::exists(labels_path)) {
    std::ifstream lf(labels_path);
    require(lf.good(), ErrorCode::Io, "cannot open: " + labels_path);
    std::map<std::string, int> by_name;
    std::string line;
    while (std::getline(lf, line)) {
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      const size_t comma = line.find(',');
      require(comma != std::string::npos, ErrorCode::InvalidArgument,
              "labels.csv: expected 'filename,label' per line");
      std::string name = line.substr(0, comma);
      while (!name.empty() && (name.back() == ' ' || name.back() == '\r')) name.pop_back();
      int label = 0;
      try {
        label = std::stoi(line.substr(comma + 1));
      } catch (const std::exception&) {
        fail(ErrorCode::InvalidArgument, "labels.csv: bad label for " + name);
      }
      by_name[name] = label;
    }
    set.labels.resize(static_cast<size_t>(set.n));
    int max_label = 0;
    for (int i = 0; i < set.n; ++i) {
      auto it = by_name.find(files[static_cast<size_t>(i)]);
      require(it != by_name.end(), ErrorCode::InvalidArgument,
              "labels.csv has no entry for " + files[static_cast<size_t>(i)]);
      require(it->second >= 0, ErrorCode::LabelRange,
              "negative label for " + files[static_cast<size_t>(i)]);
      set.labels[static_cast<size_t>(i)] = static_cast<int16_t>(it->second);
      max_label = std::max(max_label, it->second);
    }
    set.C = max_label + 1;
  }
  set.validate();
  return set;
}

TrialSet subset(const TrialSet& set, const std::vector<int>& indices) {
  TrialSet out;
  out.E = set.E;
  out.T = set.T;
  out.fs = set.fs;
  out.C = set.C;
  out.participant = set.participant;
  out.has_participant = set.has_participant;
  out.n = static_cast<int>(indices.size());
  out.values.reserve(static_cast<size_t>(out.n) * set.E * set.T);
  for (int idx : indices) {
    require(idx >= 0 && idx < set.n, ErrorCode::InvalidArgument,
            "subset index " + std::to_string(idx) + " out of range");
    const double* t = set.trial(idx);
    out.values.insert(out.values.end(), t, t + static_cast<int64_t>(set.E) * set.T);
    if (set.labeled()) out.labels.push_back(set.labels[static_cast<size_t>(idx)]);
    if (set.has_sessions()) out.sessions.push_back(set.sessions[static_cast<size_t>(idx)]);
  }
  return out;
}

std::pair<TrialSet, TrialSet> split_sessions(const TrialSet& set, const std::string& policy) {
  require(set.has_sessions(), ErrorCode::InvalidArgument,
          "split_sessions: set carries no session tags");
  std::vector<uint16_t> source_tags, target_tags;
  if (policy == "iia") {
    source_tags = {1};
    target_tags = {2};
  } else if (policy == "iib") {
    source_tags = {1, 2, 3};
    target_tags = {4, 5};
  } else {
    fail(ErrorCode::InvalidArgument, "split_sessions: unknown policy '" + policy + "'");
  }
  std::vector<int> src_idx, tgt_idx;
  for (int i = 0; i < set.n; ++i) {
    const uint16_t tag = set.sessions[static_cast<size_t>(i)];
    if (std::find(source_tags.begin(), source_tags.end(), tag) != source_tags.end()) {
      src_idx.push_back(i);
    } else if (std::find(target_tags.begin(), target_tags.end(), tag) != target_tags.end()) {
      tgt_idx.push_back(i);
    } else {
      fail(ErrorCode::UnknownSession, "split_sessions: session tag " + std::to_string(tag) +
                                          " at trial " + std::to_string(i) +
                                          " not covered by policy '" + policy + "'");
    }
  }
  return {subset(set, src_idx), subset(set, tgt_idx)};
}

}  // namespace sdda::data
