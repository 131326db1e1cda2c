// Copyright 2026 The Pctx Authors.
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

namespace pctx {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;    // invalid flags or config values
inline constexpr int kExitMissing = 2;   // an upstream stage has not run
inline constexpr int kExitFailure = 3;   // I/O, parse or pipeline failure

// Runs one `pctx` subcommand. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace pctx
