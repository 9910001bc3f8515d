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
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lenctl/bpe.hpp"
#include "lenctl/data.hpp"
#include "lenctl/model.hpp"
#include "lenctl/training.hpp"

namespace lenctl::cli {

void register_synth(CLI::App& app);
void register_learn_bpe(CLI::App& app);
void register_train(CLI::App& app);
void register_adapt(CLI::App& app);
void register_decode(CLI::App& app);
void register_eval(CLI::App& app);

// Fails with the flag name when a setting stayed empty through all three
// layers.
void require_value(const std::string& value, const std::string& flag);

// Every utterance must agree on the frame dimensionality; returns it.
int64_t corpus_feature_dim(const std::vector<Utterance>& corpus);

// Picks the reference text per --target / --ref-field ("verbatim" or
// "compressed"); a missing compressed side is an error naming the utterance.
const std::string& utterance_text(const Utterance& u, const std::string& field);

// Teacher-forcing examples for a corpus: encodes the chosen text field and
// resolves tag ids when the corpus is tagged. Mixed tagged/untagged corpora
// are rejected.
std::vector<TrainExample> to_examples(const std::vector<Utterance>& corpus,
                                      const MergeTable& table,
                                      const std::string& field);

// Budgets sidecar: "id<TAB>budget" rows under a header line.
void save_budgets(const std::string& path, const std::vector<std::string>& ids,
                  const std::vector<int64_t>& budgets);
std::map<std::string, int64_t> load_budgets(const std::string& path);

// The global tensor mode must match the stored parameters before any graph
// runs, otherwise f32 checkpoints would be evaluated with f64 rounding.
void adopt_model_dtype(const ModelParams& params);

double mean_length(const std::vector<int64_t>& lengths);

}  // namespace lenctl::cli
