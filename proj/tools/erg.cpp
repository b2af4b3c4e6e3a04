// Copyright 2026 The ERG Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Command-line front end for the pipeline in erg/pipeline.hpp.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "erg/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Event relation graph pipeline"};
  app.set_version_flag("--version", "erg 1.0");
  std::string command;
  std::string config;
  std::vector<std::string> overrides;
  std::string choices;
  for (const auto& c : erg::cli::commands())
    choices += (choices.empty() ? "" : ", ") + c;
  app.add_option("command", command, "One of: " + choices)->required();
  app.add_option("-c,--config", config, "INI config file")->required();
  app.add_option("-s,--set", overrides, "Override, section.key=value")
      ->take_all();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return erg::cli::run(command, config, overrides, std::cout, std::cerr);
}
