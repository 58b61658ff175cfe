// Copyright 2026 The HNF Authors.
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

#ifndef HNF_HNF_HPP_
#define HNF_HNF_HPP_

#include "hnf/error.hpp"
#include "hnf/rng.hpp"
#include "hnf/matrixgen.hpp"
#include "hnf/layers.hpp"
#include "hnf/solvers.hpp"
#include "hnf/data.hpp"
#include "hnf/trainer.hpp"
#include "hnf/verify.hpp"
#include "hnf/serialization.hpp"

#endif  // HNF_HNF_HPP_
