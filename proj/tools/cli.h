// Copyright 2026 The EGRM Authors. All Rights Reserved.
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

// The `egrm` command-line tool, as a library so tests can drive it
// in-process.

#ifndef EGRM_TOOLS_CLI_H_
#define EGRM_TOOLS_CLI_H_

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace egrm::cli {

// Written as JSON next to a command's outputs. `args` holds every option
// of the command with its resolved value, so replaying the manifest runs
// the same command again.
struct RunManifest {
  std::string command;
  std::string tool_version;
  std::string seed;
  std::vector<std::pair<std::string, std::string>> args;  // "--name" -> value
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::pair<std::string, std::string>> outputs;

  std::vector<std::string> to_argv() const;
};

void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

// argv excludes the program name. Returns the process exit code.
int run(const std::vector<std::string>& argv, std::ostream& out,
        std::ostream& err);

}  // namespace egrm::cli

#endif  // EGRM_TOOLS_CLI_H_
