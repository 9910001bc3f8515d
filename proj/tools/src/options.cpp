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

#include "options.hpp"

#include <cstdlib>
#include <map>

#include "lenctl/common.hpp"
#include "lenctl/fileio.hpp"

namespace lenctl::cli {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string env_name(const std::string& key) {
  std::string out = "LENCTL_";
  for (char c : key) {
    out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

std::map<std::string, std::string> read_config(const std::string& path) {
  std::map<std::string, std::string> out;
  int64_t line_no = 0;
  for (const std::string& raw : read_lines(path)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    }
    if (out.count(key)) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    }
    out[key] = value;
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& value) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= value.size()) {
    size_t comma = value.find(',', start);
    if (comma == std::string::npos) comma = value.size();
    std::string part = trim(value.substr(start, comma - start));
    if (!part.empty()) out.push_back(part);
    start = comma + 1;
  }
  return out;
}

}  // namespace

int64_t parse_int(const std::string& value, const std::string& source) {
  try {
    size_t used = 0;
    int64_t v = std::stoll(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(source + ": '" + value + "' is not an integer");
}

uint64_t parse_uint(const std::string& value, const std::string& source) {
  try {
    size_t used = 0;
    uint64_t v = std::stoull(value, &used);
    if (used == value.size() && value.find('-') == std::string::npos) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(source + ": '" + value + "' is not a non-negative integer");
}

double parse_real(const std::string& value, const std::string& source) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(source + ": '" + value + "' is not a number");
}

bool parse_bool(const std::string& value, const std::string& source) {
  std::string v = to_lower(value);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(source + ": '" + value + "' is not a boolean");
}

Settings::Settings(CLI::App* cmd) : cmd_(cmd) {
  cmd_->add_option("--config", config_path_,
                   "Key=value settings file (weakest layer; LENCTL_* environment "
                   "variables override it, flags override both)");
}

CLI::Option* Settings::track(
    const std::string& flag, CLI::Option* opt,
    std::function<void(const std::string&, const std::string&)> set) {
  if (flag.rfind("--", 0) != 0) {
    throw ConfigError("option '" + flag + "' must use its long form here");
  }
  entries_.push_back({opt, flag.substr(2), std::move(set)});
  return opt;
}

CLI::Option* Settings::add_string(const std::string& flag, std::string& var,
                                  const std::string& help) {
  return track(flag, cmd_->add_option(flag, var, help),
               [&var](const std::string& v, const std::string&) { var = v; });
}

CLI::Option* Settings::add_strings(const std::string& flag,
                                   std::vector<std::string>& var,
                                   const std::string& help) {
  return track(flag, cmd_->add_option(flag, var, help),
               [&var](const std::string& v, const std::string&) {
                 var = split_commas(v);
               });
}

CLI::Option* Settings::add_int(const std::string& flag, int64_t& var,
                               const std::string& help) {
  return track(flag, cmd_->add_option(flag, var, help),
               [&var](const std::string& v, const std::string& src) {
                 var = parse_int(v, src);
               });
}

CLI::Option* Settings::add_seed(const std::string& flag, uint64_t& var,
                                const std::string& help) {
  return track(flag, cmd_->add_option(flag, var, help),
               [&var](const std::string& v, const std::string& src) {
                 var = parse_uint(v, src);
               });
}

CLI::Option* Settings::add_double(const std::string& flag, double& var,
                                  const std::string& help) {
  return track(flag, cmd_->add_option(flag, var, help),
               [&var](const std::string& v, const std::string& src) {
                 var = parse_real(v, src);
               });
}

CLI::Option* Settings::add_switch(const std::string& flag, bool& var,
                                  const std::string& help) {
  return track(flag, cmd_->add_flag(flag, var, help),
               [&var](const std::string& v, const std::string& src) {
                 var = parse_bool(v, src);
               });
}

void Settings::finalize() {
  std::map<std::string, std::string> config;
  if (!config_path_.empty()) {
    config = read_config(config_path_);
    for (const auto& [key, value] : config) {
      (void)value;
      bool known = false;
      for (const Entry& e : entries_) {
        if (e.key == key) {
          known = true;
          break;
        }
      }
      if (!known) {
        throw ConfigError(config_path_ + ": unknown key '" + key + "' for command '" +
                          cmd_->get_name() + "'");
      }
    }
  }
  for (const Entry& e : entries_) {
    if (e.opt->count() > 0) continue;  // flag given, strongest layer wins
    std::string env = env_name(e.key);
    if (const char* v = std::getenv(env.c_str())) {
      e.set(v, "environment variable " + env);
      continue;
    }
    auto it = config.find(e.key);
    if (it != config.end()) {
      e.set(it->second, config_path_ + " key '" + e.key + "'");
    }
  }
}

}  // namespace lenctl::cli
