// Copyright 2026 The lipscert Authors.
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

#include <cstddef>
#include <functional>

namespace lipscert {

/// Worker cap: LIPSCERT_THREADS if set to a positive integer, else the
/// hardware concurrency (at least 1).
std::size_t thread_budget();

/// Runs fn(0) .. fn(n-1) on up to thread_budget() threads. Tasks must write
/// only to their own slots; callers reduce in index order afterwards, so the
/// result does not depend on the thread count. The first exception thrown by
/// any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lipscert
