// Copyright 2026 The Varuna-Sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VARUNA_UTIL_CHECK_H_
#define VARUNA_UTIL_CHECK_H_

#include <cstdio>
#include <cstdlib>

#include "absl/status/status.h"

// Invariant checks that stay on in release builds.
#define VARUNA_CHECK(cond)                                                  \
  do {                                                                      \
    if (!(cond)) {                                                          \
      std::fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, \
                   #cond);                                                  \
      std::abort();                                                         \
    }                                                                       \
  } while (0)

#define VARUNA_CHECK_OK(expr)                                              \
  do {                                                                     \
    const absl::Status _varuna_s = (expr);                                 \
    if (!_varuna_s.ok()) {                                                 \
      std::fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__,              \
                   _varuna_s.ToString().c_str());                          \
      std::abort();                                                        \
    }                                                                      \
  } while (0)

#endif  // VARUNA_UTIL_CHECK_H_
