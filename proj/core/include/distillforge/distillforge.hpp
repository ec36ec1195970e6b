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

#include "distillforge/datakit.hpp"
#include "distillforge/errors.hpp"
#include "distillforge/evalkit.hpp"
#include "distillforge/losses.hpp"
#include "distillforge/matrix.hpp"
#include "distillforge/model.hpp"
#include "distillforge/numcore.hpp"
#include "distillforge/optimizer.hpp"
#include "distillforge/pipeline.hpp"
#include "distillforge/rng.hpp"
#include "distillforge/synthetic.hpp"
#include "distillforge/teachers.hpp"
