/*
 * Copyright 2026 The FINER Authors.
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
#pragma once

#include <iosfwd>
#include <string_view>

namespace finer::tools {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitRuntime = 4 };

// Parses argv, runs one command, and maps failures to exit codes. Errors are
// reported on `err` as one machine-readable line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Applies FINER_LOG (trace, debug, info, warn, error, off) to the default logger.
void configure_logging();

}  // namespace finer::tools
