// Copyright 2026 The lexidebias Authors
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

#include "lexidebias/bias_eval.hpp"
#include "lexidebias/debias_model.hpp"
#include "lexidebias/embedding_store.hpp"
#include "lexidebias/error.hpp"
#include "lexidebias/geometry.hpp"
#include "lexidebias/gloss_corpus.hpp"
#include "lexidebias/semantic_eval.hpp"
#include "lexidebias/sif_encoder.hpp"
#include "lexidebias/stats.hpp"
#include "lexidebias/training.hpp"
