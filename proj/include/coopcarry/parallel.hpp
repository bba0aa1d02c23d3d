// Copyright 2026 The coopcarry Authors
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

#ifndef COOPCARRY_PARALLEL_HPP_
#define COOPCARRY_PARALLEL_HPP_

#include <functional>

namespace coopcarry {

// Hardware concurrency, capped by COOPCARRY_THREADS when it holds a positive
// integer. Never less than one.
int worker_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one per
// worker, so results written by index are independent of the worker count.
// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(int n, const std::function<void(int)>& fn,
                  int max_workers = 0);

}  // namespace coopcarry

#endif  // COOPCARRY_PARALLEL_HPP_
