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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sdda {

// Structured text used for config files, run manifests and checkpoint
// headers: `[section]` lines followed by `key = value` pairs, `#` comments.
// Section and key order is preserved so serialization is deterministic.
class Config {
 public:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };

  static Config parse(const std::string& text);
  static Config parse_file(const std::string& path);

  std::string serialize() const;
  void save(const std::string& path) const;

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  std::string require_get(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  int64_t get_int(const std::string& section, const std::string& key,
                  int64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;

  void set(const std::string& section, const std::string& key, std::string value);
  void set_double(const std::string& section, const std::string& key, double value);
  void set_int(const std::string& section, const std::string& key, int64_t value);
  void set_bool(const std::string& section, const std::string& key, bool value);

  // Values from `other` win; sections/keys are created as needed.
  void merge_from(const Config& other);

  const std::vector<Section>& sections() const { return sections_; }
  const Section* find_section(const std::string& name) const;

  // Full-precision round-trippable formatting for doubles (%.17g).
  static std::string format_double(double v);

 private:
  Section& section(const std::string& name);
  std::vector<Section> sections_;
};

bool parse_bool(const std::string& text, const std::string& context);

}  // namespace sdda
