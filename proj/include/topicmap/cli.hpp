/*
 * Copyright 2026 The topicmap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line driver: prepare, train, aggregate, eval, bundle, serve,
// schedule. Exit codes: 0 success, 1 domain error (one JSON line on
// stderr), 2 usage error.

#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "topicmap/hierarchy.hpp"

namespace topicmap {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat key=value settings. Every key must be one of the built-in defaults;
// '#' starts a comment line.
class Settings {
 public:
  static Settings defaults();
  // Throws UsageError on syntax errors, unknown keys or a config_version
  // other than 1.
  void merge(std::istream& in, std::string_view origin);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

HierarchyConfig hierarchy_config(const Settings& settings);
std::vector<double> tau_grid(const Settings& settings);

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace topicmap
