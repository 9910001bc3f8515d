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

#include "common.hpp"

#include "lenctl/common.hpp"
#include "lenctl/fileio.hpp"
#include "options.hpp"

namespace lenctl::cli {

void require_value(const std::string& value, const std::string& flag) {
  if (value.empty()) {
    throw ConfigError(flag + " is required (flag, LENCTL_* variable or config key)");
  }
}

int64_t corpus_feature_dim(const std::vector<Utterance>& corpus) {
  if (corpus.empty()) throw ConfigError("corpus is empty");
  int64_t dim = corpus.front().features.shape()[1];
  for (const Utterance& u : corpus) {
    if (u.features.shape()[1] != dim) {
      throw ConfigError("utterance '" + u.id + "' has feature dimension " +
                        std::to_string(u.features.shape()[1]) + ", the corpus opened with " +
                        std::to_string(dim));
    }
  }
  return dim;
}

const std::string& utterance_text(const Utterance& u, const std::string& field) {
  if (field == "verbatim") return u.verbatim;
  if (field == "compressed") {
    if (!u.has_compressed()) {
      throw ConfigError("utterance '" + u.id + "' has no compressed transcript");
    }
    return u.compressed;
  }
  throw ConfigError("unknown text field '" + field + "', expected verbatim or compressed");
}

std::vector<TrainExample> to_examples(const std::vector<Utterance>& corpus,
                                      const MergeTable& table,
                                      const std::string& field) {
  if (corpus.empty()) throw ConfigError("corpus is empty");
  bool tagged = corpus.front().has_tags();
  std::vector<TrainExample> out;
  out.reserve(corpus.size());
  for (const Utterance& u : corpus) {
    if (u.has_tags() != tagged) {
      throw ConfigError("utterance '" + u.id + "' mixes tagged and untagged records");
    }
    TrainExample ex;
    ex.features = u.features;
    ex.content_ids = table.encode(utterance_text(u, field));
    if (tagged) {
      ex.src_tag_id = table.tag_id(u.tags.source);
      ex.tgt_tag_id = table.tag_id(u.tags.target);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void save_budgets(const std::string& path, const std::vector<std::string>& ids,
                  const std::vector<int64_t>& budgets) {
  std::string out = "id\tbudget\n";
  for (size_t i = 0; i < ids.size(); ++i) {
    out += escape_tsv_field(ids[i]);
    out += '\t';
    out += std::to_string(budgets[i]);
    out += '\n';
  }
  atomic_write_file(path, out);
}

std::map<std::string, int64_t> load_budgets(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines.front() != "id\tbudget") {
    throw IoError("bad budgets file (" + path + "): missing id/budget header");
  }
  std::map<std::string, int64_t> out;
  for (size_t i = 1; i < lines.size(); ++i) {
    size_t tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw IoError("bad budgets file (" + path + ") line " + std::to_string(i + 1));
    }
    std::string id = unescape_tsv_field(lines[i].substr(0, tab));
    int64_t budget =
        parse_int(lines[i].substr(tab + 1), path + " line " + std::to_string(i + 1));
    if (!out.emplace(id, budget).second) {
      throw IoError("bad budgets file (" + path + "): duplicate id '" + id + "'");
    }
  }
  return out;
}

void adopt_model_dtype(const ModelParams& params) {
  if (params.tensors.empty()) throw ConfigError("model has no tensors");
  set_default_dtype(params.tensors.begin()->second.dtype());
}

double mean_length(const std::vector<int64_t>& lengths) {
  if (lengths.empty()) return 0.0;
  int64_t total = 0;
  for (int64_t v : lengths) total += v;
  return static_cast<double>(total) / static_cast<double>(lengths.size());
}

}  // namespace lenctl::cli
