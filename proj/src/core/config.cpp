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
#include "core/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace sdda {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

bool parse_bool(const std::string& text, const std::string& context) {
  std::string t;
  t.reserve(text.size());
  for (char c : text) t.push_back(static_cast<char>(std::tolower(c)));
  if (t == "true" || t == "1" || t == "on" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "off" || t == "no") return false;
  fail(ErrorCode::BadConfig, context + ": cannot parse '" + text + "' as bool");
}

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::string current;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', ErrorCode::BadConfig,
              "config line " + std::to_string(lineno) + ": unterminated section header");
      current = trim(line.substr(1, line.size() - 2));
      require(!current.empty(), ErrorCode::BadConfig,
              "config line " + std::to_string(lineno) + ": empty section name");
      cfg.section(current);
      continue;
    }
    size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::BadConfig,
            "config line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorCode::BadConfig,
            "config line " + std::to_string(lineno) + ": empty key");
    cfg.set(current, key, value);
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& sec : sections_) {
    if (!sec.name.empty()) {
      out += "[" + sec.name + "]\n";
    }
    for (const auto& [k, v] : sec.entries) {
      out += k + " = " + v + "\n";
    }
    out += "\n";
  }
  return out;
}

void Config::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write config file: " + path);
  out << serialize();
  require(out.good(), ErrorCode::Io, "failed writing config file: " + path);
}

Config::Section& Config::section(const std::string& name) {
  for (auto& s : sections_) {
    if (s.name == name) return s;
  }
  sections_.push_back(Section{name, {}});
  return sections_.back();
}

const Config::Section* Config::find_section(const std::string& name) const {
  for (const auto& s : sections_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

bool Config::has_section(const std::string& s) const { return find_section(s) != nullptr; }

bool Config::has(const std::string& s, const std::string& key) const {
  const Section* sec = find_section(s);
  if (!sec) return false;
  return std::any_of(sec->entries.begin(), sec->entries.end(),
                     [&](const auto& kv) { return kv.first == key; });
}

std::string Config::get(const std::string& s, const std::string& key,
                        const std::string& fallback) const {
  const Section* sec = find_section(s);
  if (!sec) return fallback;
  for (const auto& [k, v] : sec->entries) {
    if (k == key) return v;
  }
  return fallback;
}

std::string Config::require_get(const std::string& s, const std::string& key) const {
  require(has(s, key), ErrorCode::BadConfig,
          "missing config key [" + s + "] " + key);
  return get(s, key, "");
}

double Config::get_double(const std::string& s, const std::string& key,
                          double fallback) const {
  if (!has(s, key)) return fallback;
  const std::string v = get(s, key, "");
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    require(pos == v.size(), ErrorCode::BadConfig, "trailing characters");
    return d;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorCode::BadConfig, "config [" + s + "] " + key + ": cannot parse '" + v + "' as number");
  }
}

int64_t Config::get_int(const std::string& s, const std::string& key,
                        int64_t fallback) const {
  if (!has(s, key)) return fallback;
  const std::string v = get(s, key, "");
  try {
    size_t pos = 0;
    long long i = std::stoll(v, &pos);
    require(pos == v.size(), ErrorCode::BadConfig, "trailing characters");
    return i;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorCode::BadConfig, "config [" + s + "] " + key + ": cannot parse '" + v + "' as integer");
  }
}

bool Config::get_bool(const std::string& s, const std::string& key, bool fallback) const {
  if (!has(s, key)) return fallback;
  return parse_bool(get(s, key, ""), "config [" + s + "] " + key);
}

void Config::set(const std::string& s, const std::string& key, std::string value) {
  Section& sec = section(s);
  for (auto& [k, v] : sec.entries) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  sec.entries.emplace_back(key, std::move(value));
}

std::string Config::format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

void Config::set_double(const std::string& s, const std::string& key, double value) {
  set(s, key, format_double(value));
}

void Config::set_int(const std::string& s, const std::string& key, int64_t value) {
  set(s, key, std::to_string(value));
}

void Config::set_bool(const std::string& s, const std::string& key, bool value) {
  set(s, key, value ? "true" : "false");
}

void Config::merge_from(const Config& other) {
  for (const auto& sec : other.sections_) {
    for (const auto& [k, v] : sec.entries) {
      set(sec.name, k, v);
    }
  }
}

}  // namespace sdda
