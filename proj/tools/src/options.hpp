/*
 * Copyright 2026 The lenctl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace lenctl::cli {

// Settings resolve in three layers: a key=value config file is the weakest,
// LENCTL_* environment variables override the file, and command line flags
// override everything. Register options through this wrapper instead of the
// CLI::App directly, then call finalize() at the top of the command callback
// to pull in the two weaker layers for anything the flags left unset.
//
// Keys are the long option names without the leading dashes ("model-dim");
// the environment spelling is LENCTL_ plus the key in upper snake case
// (LENCTL_MODEL_DIM).
class Settings {
 public:
  explicit Settings(CLI::App* cmd);

  CLI::Option* add_string(const std::string& flag, std::string& var,
                          const std::string& help);
  // In the environment or a config file, list values are comma separated.
  CLI::Option* add_strings(const std::string& flag, std::vector<std::string>& var,
                           const std::string& help);
  CLI::Option* add_int(const std::string& flag, int64_t& var,
                       const std::string& help);
  CLI::Option* add_seed(const std::string& flag, uint64_t& var,
                        const std::string& help);
  CLI::Option* add_double(const std::string& flag, double& var,
                          const std::string& help);
  CLI::Option* add_switch(const std::string& flag, bool& var,
                          const std::string& help);

  void finalize();

 private:
  struct Entry {
    CLI::Option* opt;
    std::string key;
    std::function<void(const std::string& value, const std::string& source)> set;
  };

  CLI::Option* track(const std::string& flag, CLI::Option* opt,
                     std::function<void(const std::string&, const std::string&)> set);

  CLI::App* cmd_;
  std::string config_path_;
  std::vector<Entry> entries_;
};

// Strict scalar parsers shared with the command implementations; the source
// string names where the value came from for error messages.
int64_t parse_int(const std::string& value, const std::string& source);
uint64_t parse_uint(const std::string& value, const std::string& source);
double parse_real(const std::string& value, const std::string& source);
bool parse_bool(const std::string& value, const std::string& source);

}  // namespace lenctl::cli
