// Copyright 2026 The DistillForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <string_view>

namespace distillforge::cli {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

/// Reads DISTILLFORGE_LOG (error|info|debug, default info).
LogLevel log_level_from_env();

class Logger {
 public:
  Logger(std::ostream& sink, LogLevel level) : sink_(&sink), level_(level) {}

  void error(std::string_view msg) const { write(LogLevel::kError, "error", msg); }
  void info(std::string_view msg) const { write(LogLevel::kInfo, "info", msg); }
  void debug(std::string_view msg) const { write(LogLevel::kDebug, "debug", msg); }

 private:
  void write(LogLevel lvl, std::string_view tag, std::string_view msg) const;

  std::ostream* sink_;
  LogLevel level_;
};

}  // namespace distillforge::cli
