// Copyright 2026 The BoxSAM-CPP Authors
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

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace boxsam::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRuntime = 4;

/// Parses `args` (args[0] is the program name) and runs one subcommand:
/// synth, boxes, pseudo, partition, rps, train, predict, eval, boxsam or
/// report. Regular output goes to `out`, diagnostics to `err`. Returns the
/// process exit code.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Names of every subcommand, in help order.
std::vector<std::string> subcommands();

}  // namespace boxsam::cli
