/*
* Copyright 2026 The DSM Authors.
*
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
* ============================================================================
*/
// Umbrella header.

#ifndef DSM_DSM_HPP_
#define DSM_DSM_HPP_

#include "dsm/commands.hpp"
#include "dsm/dgp.hpp"
#include "dsm/estimators.hpp"
#include "dsm/glm_scores.hpp"
#include "dsm/io.hpp"
#include "dsm/matcher.hpp"
#include "dsm/parallel.hpp"
#include "dsm/rng.hpp"
#include "dsm/simulation.hpp"
#include "dsm/types.hpp"
#include "dsm/uncertainty.hpp"

#endif  // DSM_DSM_HPP_
