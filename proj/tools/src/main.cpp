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

#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lenctl: length-budgeted transcription toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lenctl 0.1.0");

  lenctl::cli::register_synth(app);
  lenctl::cli::register_learn_bpe(app);
  lenctl::cli::register_train(app);
  lenctl::cli::register_adapt(app);
  lenctl::cli::register_decode(app);
  lenctl::cli::register_eval(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lenctl: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
