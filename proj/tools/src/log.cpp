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

#include "log.hpp"

#include <cstdlib>
#include <ostream>
#include <string>

namespace distillforge::cli {

LogLevel log_level_from_env() {
  const char* v = std::getenv("DISTILLFORGE_LOG");
  if (v == nullptr) return LogLevel::kInfo;
  const std::string s(v);
  if (s == "error") return LogLevel::kError;
  if (s == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void Logger::write(LogLevel lvl, std::string_view tag, std::string_view msg) const {
  if (static_cast<int>(lvl) > static_cast<int>(level_)) return;
  *sink_ << "[" << tag << "] " << msg << '\n';
}

}  // namespace distillforge::cli
