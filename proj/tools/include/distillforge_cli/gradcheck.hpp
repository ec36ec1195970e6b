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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace distillforge::cli {

struct GradcheckResult {
  std::string component;
  std::size_t instances = 0;
  double max_rel_error = 0.0;
};

struct GradcheckOptions {
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  /// Test hook: flip the sign of one component's analytic gradient.
  std::optional<std::string> inject_fault;
};

/// Central-difference checks of the cosine, sim and resim gradients and of the
/// full text and vision network paths. Resim instances with any hinge
/// argument within 1e-4 of zero are redrawn.
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts);

}  // namespace distillforge::cli
